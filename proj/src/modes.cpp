#include "crossadapt/modes.hpp"

#include <chrono>

#include "crossadapt/error.hpp"
#include "crossadapt/rng.hpp"

namespace crossadapt::modes {

const char* to_string(TrainerMode mode) {
  switch (mode) {
    case TrainerMode::Scratch: return "scratch";
    case TrainerMode::ScratchOnline: return "scratch_online";
    case TrainerMode::FullRetrain: return "full_retrain";
    case TrainerMode::VanillaKD: return "vanilla_kd";
    case TrainerMode::CrossAdaptFull: return "crossadapt_full";
    case TrainerMode::CrossAdaptSample: return "crossadapt_sample";
  }
  return "scratch";
}

TrainerMode parse_mode(const std::string& name) {
  for (auto m : {TrainerMode::Scratch, TrainerMode::ScratchOnline, TrainerMode::FullRetrain, TrainerMode::VanillaKD,
                 TrainerMode::CrossAdaptFull, TrainerMode::CrossAdaptSample})
    if (name == to_string(m)) return m;
  if (name == "crossadapt") return TrainerMode::CrossAdaptSample;
  fail(ErrorKind::Validation, "unknown mode '" + name + "'");
}

data::Dataset training_rows(const data::Dataset& d, bool pcvr) {
  if (!pcvr) return d;
  require(d.has_click(), ErrorKind::Data, "pCVR mode needs a click column");
  return d.filter([&](std::size_t i) { return d.click[i] != 0; });
}

data::Dataset unclicked_rows(const data::Dataset& d) {
  if (!d.has_click()) return d.empty_like();
  return d.filter([&](std::size_t i) { return d.click[i] == 0; });
}

TeacherResult train_teacher(const data::DatasetSplits& splits, const data::FieldSchema& schema,
                            const PipelineSettings& settings, std::uint64_t seed) {
  data::Dataset rows = splits.hist(data::HistReader::Teacher);
  rows.append(splits.train());
  rows = training_rows(rows, settings.pcvr);
  require(!rows.empty(), ErrorKind::Data, "teacher training needs hist or train rows");
  TeacherResult res;
  res.teacher = model::PredictionModel::random(schema, settings.teacher_spec, derive_seed(seed, 0x746368));
  auto cfg = settings.distill;
  cfg.seed = derive_seed(seed, 0x74636f);
  res.log = offline::train_stage(res.teacher, rows, {}, nullptr, cfg, false);
  return res;
}

nlohmann::json ModeResult::summary() const {
  nlohmann::json j = {{"mode", to_string(mode)},
                      {"offline_steps", offline_steps()},
                      {"online_steps", online_steps()},
                      {"offline_ms", offline_log.train_ms},
                      {"online_ms", online_log.train_ms},
                      {"teacher_updates", online_log.teacher_updates},
                      {"r_enh", online_log.r_enh},
                      {"test", test.to_json()}};
  if (shift) j["shift"] = shift->to_json();
  return j;
}

ModeResult run_mode(TrainerMode mode, const data::DatasetSplits& splits, const model::PredictionModel& teacher,
                    const PipelineSettings& settings, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  ModeResult res;
  res.mode = mode;
  const auto schema = teacher.schema();
  const data::Dataset train = training_rows(splits.train(), settings.pcvr);
  const data::Dataset stream = training_rows(splits.online(), settings.pcvr);

  auto distill = settings.distill;
  distill.seed = derive_seed(seed, 0x6f6666);
  auto online = settings.online;
  online.seed = derive_seed(seed, 0x6f6e6c);
  auto sampling = settings.sampling;
  sampling.seed = derive_seed(seed, 0x73616d);
  const auto fresh_student = [&] {
    return model::PredictionModel::random(schema, settings.student_spec, derive_seed(distill.seed, 0x696e6974));
  };

  switch (mode) {
    case TrainerMode::Scratch:
    case TrainerMode::FullRetrain: {
      data::Dataset offline_rows = train;
      if (mode == TrainerMode::FullRetrain) {
        require(splits.has_hist(), ErrorKind::Data, "full retrain needs the historical split");
        offline_rows = training_rows(splits.hist(data::HistReader::FullRetrain), settings.pcvr);
        offline_rows.append(train);
      }
      res.student = fresh_student();
      res.offline_log = offline::train_stage(res.student, offline_rows, {}, nullptr, distill, false);
      res.online_log = online::run_online(nullptr, res.student, stream, train, 0.0, online);
      break;
    }
    case TrainerMode::ScratchOnline: {
      res.student = fresh_student();
      res.online_log = online::run_online(nullptr, res.student, stream, train, 0.0, online);
      break;
    }
    case TrainerMode::VanillaKD: {
      res.student = fresh_student();
      res.offline_log = offline::train_stage(res.student, train, {}, &teacher, distill, false);
      auto frozen = teacher.clone_frozen();
      online.co_evolve = false;
      res.online_log = online::run_online(&frozen, res.student, stream, train, 0.0, online);
      break;
    }
    case TrainerMode::CrossAdaptFull:
    case TrainerMode::CrossAdaptSample: {
      offline::TransferResult transfer;
      if (mode == TrainerMode::CrossAdaptSample) {
        auto sampled = sampler::temporal_diversity_sample(train, sampling);
        if (settings.pcvr && sampling.r_unclick > 0.0)
          sampled = sampler::unclicked_augment(sampled, unclicked_rows(splits.train()), teacher, sampling);
        transfer = offline::run_offline_transfer(teacher, settings.student_spec, sampled, distill,
                                                 settings.project_embeddings);
        res.sampled = std::move(sampled);
      } else {
        transfer = offline::run_offline_transfer(teacher, settings.student_spec, train, {}, distill,
                                                 settings.project_embeddings);
      }
      res.student = std::move(transfer.student);
      res.stage1_student = res.student;
      res.offline_log = std::move(transfer.log);
      res.shift = shift::compute_shift(train, schema, settings.shift);
      auto co_teacher = teacher.clone_frozen();
      res.online_log = online::run_online(&co_teacher, res.student, stream, train, res.shift->r_enh, online);
      res.teacher = std::move(co_teacher);
      break;
    }
  }

  res.test = metrics::evaluate(res.student, training_rows(splits.test(), settings.pcvr));
  res.test.steps = res.offline_steps() + res.online_steps();
  res.test.train_ms = res.offline_log.train_ms + res.online_log.train_ms;
  res.test.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace crossadapt::modes
