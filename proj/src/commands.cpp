#include "crossadapt/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "crossadapt/error.hpp"
#include "crossadapt/metrics.hpp"
#include "crossadapt/model.hpp"
#include "crossadapt/modes.hpp"
#include "crossadapt/projection.hpp"
#include "crossadapt/rng.hpp"
#include "crossadapt/sampler.hpp"
#include "crossadapt/shift.hpp"

namespace crossadapt::commands {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {

std::uint64_t string_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

fs::path prepare_out(const config::RunConfig& cfg) {
  fs::create_directories(cfg.out);
  std::ofstream(cfg.out / "config.json") << cfg.to_json().dump(2) << '\n';
  return cfg.out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

data::RawTable read_raw(const config::RunConfig& cfg) {
  if (cfg.data.synthetic) return data::generate_stream(*cfg.data.synthetic);
  return data::load_csv(cfg.data.csv_path, cfg.data.csv_schema).table;
}

// Rows visible to the vocabulary builder: everything before the online split.
std::size_t visible_rows(const data::RawTable& raw, const std::array<std::size_t, 4>& ratio) {
  data::Dataset stub;
  stub.label = raw.label;
  stub.timestamp = raw.timestamp;
  return data::split_temporal(stub, ratio).boundaries()[2];
}

const data::Dataset& split_by_name(const data::DatasetSplits& s, const std::string& name) {
  if (name == "hist") return s.hist(data::HistReader::Teacher);
  if (name == "train") return s.train();
  if (name == "online") return s.online();
  if (name == "test") return s.test();
  fail(ErrorKind::Validation, "unknown split '" + name + "' (expected hist, train, online or test)");
}

json checkpoint_extra(const config::RunConfig& cfg, const data::Vocabulary& vocab, std::uint64_t seed) {
  return {{"vocab", vocab.to_json()}, {"seed", seed}, {"config", cfg.to_json()}};
}

struct LoadedModel {
  model::PredictionModel model;
  json extra;
  data::Vocabulary vocab;
};

LoadedModel load_model(const fs::path& path) {
  LoadedModel m;
  m.model = model::load_checkpoint(path.string(), &m.extra);
  require(m.extra.contains("vocab"), ErrorKind::Data, "checkpoint '" + path.string() + "' carries no vocabulary");
  m.vocab = data::Vocabulary::from_json(m.extra.at("vocab"));
  return m;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

LoadedData load_data(const config::RunConfig& cfg, const data::Vocabulary* vocab) {
  const auto raw = read_raw(cfg);
  require(raw.size() > 0, ErrorKind::Data, "data source has no rows");
  LoadedData out;
  if (vocab) {
    out.pre.vocab = *vocab;
    out.pre.samples = data::encode(raw, *vocab);
    out.pre.schema = data::make_schema(raw, *vocab);
  } else {
    out.pre = data::preprocess(raw, cfg.vocab_threshold, visible_rows(raw, cfg.split));
  }
  out.splits = data::split_temporal(out.pre.samples, cfg.split);
  return out;
}

json gen_data(const config::RunConfig& cfg) {
  require(cfg.data.synthetic.has_value(), ErrorKind::Validation, "gen-data needs a synthetic data source");
  const auto out = prepare_out(cfg);
  const auto& spec = *cfg.data.synthetic;
  const auto raw = data::generate_stream(spec);
  const auto csv = out / "data.csv";
  const auto schema = data::write_csv(raw, csv);
  auto schema_json = schema.to_json();
  schema_json["vocab_threshold"] = cfg.vocab_threshold;
  write_json(out / "schema.json", schema_json);

  data::Dataset stub;
  stub.label = raw.label;
  stub.timestamp = raw.timestamp;
  const auto splits = data::split_temporal(stub, cfg.split);
  json drift = json::array();
  for (const auto& d : spec.drift) drift.push_back(d.start_fraction);
  const json manifest = {{"rows", raw.size()},
                         {"spec", spec.to_json()},
                         {"spec_hash", hex(string_hash(spec.to_json().dump()))},
                         {"file", "data.csv"},
                         {"file_hash", hex(file_hash(csv))},
                         {"split_ratio", cfg.split},
                         {"split_boundaries", splits.boundaries()},
                         {"drift_fractions", drift}};
  write_json(out / "manifest.json", manifest);
  return manifest;
}

json train_teacher(const config::RunConfig& cfg) {
  const auto out = prepare_out(cfg);
  const auto loaded = load_data(cfg);
  const std::uint64_t seed = cfg.seeds.front();
  auto res = modes::train_teacher(loaded.splits, loaded.pre.schema, cfg.pipeline, seed);
  res.log.write_csv(out / "teacher_log.csv");
  model::save_checkpoint((out / "teacher.ckpt.json").string(), res.teacher, checkpoint_extra(cfg, loaded.pre.vocab, seed));
  auto report = metrics::evaluate(res.teacher, modes::training_rows(loaded.splits.test(), cfg.pipeline.pcvr));
  report.steps = res.log.step_count();
  report.train_ms = res.log.train_ms;
  json j = {{"checkpoint", (out / "teacher.ckpt.json").string()},
            {"checksum", hex(res.teacher.checksum())},
            {"report", report.to_json()}};
  write_json(out / "teacher_report.json", j);
  return j;
}

json transfer(const config::RunConfig& cfg, const fs::path& teacher_ckpt) {
  const auto out = prepare_out(cfg);
  const auto teacher = load_model(teacher_ckpt);
  const auto loaded = load_data(cfg, &teacher.vocab);
  require(loaded.pre.schema == teacher.model.schema(), ErrorKind::Schema, "data schema differs from the teacher's");
  const std::uint64_t seed = cfg.seeds.front();
  const auto& p = cfg.pipeline;
  auto distill = p.distill;
  distill.seed = derive_seed(seed, 0x6f6666);
  const data::Dataset train = modes::training_rows(loaded.splits.train(), p.pcvr);

  const bool full = cfg.modes.front() == modes::TrainerMode::CrossAdaptFull;
  offline::TransferResult res;
  json extra_summary = json::object();
  if (full) {
    res = offline::run_offline_transfer(teacher.model, p.student_spec, train, {}, distill, p.project_embeddings);
  } else {
    auto sampling = p.sampling;
    sampling.seed = derive_seed(seed, 0x73616d);
    auto sampled = sampler::temporal_diversity_sample(train, sampling);
    if (p.pcvr && sampling.r_unclick > 0.0)
      sampled = sampler::unclicked_augment(sampled, modes::unclicked_rows(loaded.splits.train()), teacher.model, sampling);
    sampled.write_audit(out / "sampling_audit.csv");
    extra_summary["sampled_rows"] = sampled.data.size();
    extra_summary["pseudo_rows"] = sampled.pseudo_count();
    extra_summary["warnings"] = sampled.warnings;
    res = offline::run_offline_transfer(teacher.model, p.student_spec, sampled, distill, p.project_embeddings);
  }
  res.log.write_csv(out / "stage1_log.csv");
  auto extra = checkpoint_extra(cfg, teacher.vocab, seed);
  if (p.project_embeddings) extra["projection"] = res.plan.to_json();
  model::save_checkpoint((out / "student.ckpt.json").string(), res.student, extra);
  json j = {{"checkpoint", (out / "student.ckpt.json").string()},
            {"steps", res.log.step_count()},
            {"phase1_steps", res.log.phase1_steps},
            {"train_ms", res.log.train_ms},
            {"projection", p.project_embeddings ? projection::to_string(res.plan.kind) : "none"},
            {"teacher_checksum", hex(teacher.model.checksum())}};
  j.update(extra_summary);
  write_json(out / "transfer_report.json", j);
  return j;
}

json online(const config::RunConfig& cfg, const fs::path& teacher_ckpt, const fs::path& student_ckpt) {
  const auto out = prepare_out(cfg);
  auto teacher = load_model(teacher_ckpt);
  auto student = load_model(student_ckpt);
  require(teacher.model.schema() == student.model.schema(), ErrorKind::Schema, "teacher and student schemas differ");
  const auto loaded = load_data(cfg, &teacher.vocab);
  const std::uint64_t seed = cfg.seeds.front();
  const auto& p = cfg.pipeline;
  const data::Dataset train = modes::training_rows(loaded.splits.train(), p.pcvr);
  const data::Dataset stream = modes::training_rows(loaded.splits.online(), p.pcvr);

  const auto report = shift::compute_shift(train, loaded.pre.schema, p.shift);
  write_json(out / "shift_report.json", report.to_json());
  auto ocfg = p.online;
  ocfg.seed = derive_seed(seed, 0x6f6e6c);
  const auto res = online::run_online(&teacher.model, student.model, stream, train, report.r_enh, ocfg);
  res.write_csv(out / "online_log.csv");
  model::save_checkpoint((out / "teacher_final.ckpt.json").string(), teacher.model, teacher.extra);
  model::save_checkpoint((out / "student_final.ckpt.json").string(), student.model, student.extra);

  const auto test = modes::training_rows(loaded.splits.test(), p.pcvr);
  auto s_rep = metrics::evaluate(student.model, test);
  auto t_rep = metrics::evaluate(teacher.model, test);
  s_rep.steps = res.steps.size();
  s_rep.train_ms = res.train_ms;
  json j = {{"steps", res.steps.size()},
            {"teacher_updates", res.teacher_updates},
            {"r_enh", res.r_enh},
            {"delta_shift", report.delta_shift},
            {"student", s_rep.to_json()},
            {"teacher", t_rep.to_json()}};
  if (s_rep.logloss && t_rep.logloss)
    j["switching_cost"] = metrics::switching_cost(s_rep, t_rep, res.steps.size(), res.train_ms).to_json();
  write_json(out / "online_report.json", j);
  return j;
}

json eval(const config::RunConfig& cfg, const fs::path& ckpt, const std::string& split) {
  const auto m = load_model(ckpt);
  const auto loaded = load_data(cfg, &m.vocab);
  const auto& rows = split_by_name(loaded.splits, split);
  auto report = metrics::evaluate(m.model, modes::training_rows(rows, cfg.pipeline.pcvr));
  json j = {{"checkpoint", ckpt.string()}, {"split", split}, {"report", report.to_json()}};
  fs::create_directories(cfg.out);
  write_json(cfg.out / ("eval_" + split + ".json"), j);
  return j;
}

json project(const fs::path& teacher_ckpt, std::size_t d_s, std::uint64_t seed, std::size_t baseline_trials,
             const fs::path& out) {
  fs::create_directories(out);
  const auto teacher = load_model(teacher_ckpt);
  const auto& e = teacher.model.embedding().weights;
  const auto plan = projection::build_plan(e, d_s, seed);
  write_json(out / "plan.json", plan.to_json());
  json j = {{"kind", projection::to_string(plan.kind)}, {"d_t", plan.d_t}, {"d_s", plan.d_s}, {"vocab", e.rows()}};
  if (plan.kind == projection::PlanKind::Reduce) {
    const auto err = projection::gram_error(e, plan);
    j["gram_error_measured"] = err.measured;
    j["gram_error_predicted"] = err.predicted;
    j["relative_difference"] = std::abs(err.measured - err.predicted) / std::max(std::abs(err.predicted), 1e-300);
    j["retained_variance"] = plan.retained_variance;
    if (baseline_trials > 0) {
      const auto base = projection::random_projection_baseline(e, d_s, baseline_trials, derive_seed(seed, 1));
      j["random_baseline_mean"] = mean(base);
      j["random_baseline_min"] = *std::min_element(base.begin(), base.end());
    }
  } else {
    const auto projected = projection::apply_plan(e, plan);
    j["max_gram_deviation"] = linalg::max_abs_diff(linalg::matmul_nt(e, e), linalg::matmul_nt(projected, projected));
  }
  write_json(out / "project_report.json", j);
  return j;
}

json shift(const config::RunConfig& cfg) {
  const auto out = prepare_out(cfg);
  const auto loaded = load_data(cfg);
  const auto report =
      shift::compute_shift(modes::training_rows(loaded.splits.train(), cfg.pipeline.pcvr), loaded.pre.schema,
                           cfg.pipeline.shift);
  const auto j = report.to_json();
  write_json(out / "shift_report.json", j);
  return j;
}

json experiment(const config::RunConfig& cfg) {
  const auto out = prepare_out(cfg);
  const auto loaded = load_data(cfg);
  std::ofstream cells(out / "experiment.csv");
  require(cells.good(), ErrorKind::Io, "cannot write experiment.csv");
  cells.precision(8);
  cells << "method,seed,auc,logloss,offline_steps,online_steps,train_s,total_s\n";

  struct Acc {
    std::vector<double> auc, logloss, train_s, total_s, steps;
  };
  std::map<std::string, Acc> acc;
  std::vector<std::string> order;
  json runs = json::array();
  for (auto seed : cfg.seeds) {
    const auto teacher = modes::train_teacher(loaded.splits, loaded.pre.schema, cfg.pipeline, seed);
    for (auto mode : cfg.modes) {
      const auto res = modes::run_mode(mode, loaded.splits, teacher.teacher, cfg.pipeline, seed);
      const std::string name = modes::to_string(mode);
      if (!acc.count(name)) order.push_back(name);
      auto& a = acc[name];
      const double auc = res.test.auc.value_or(std::nan(""));
      const double ll = res.test.logloss.value_or(std::nan(""));
      a.auc.push_back(auc);
      a.logloss.push_back(ll);
      a.train_s.push_back(res.test.train_ms / 1000.0);
      a.total_s.push_back(res.test.total_ms / 1000.0);
      a.steps.push_back(static_cast<double>(res.offline_steps() + res.online_steps()));
      cells << name << ',' << seed << ',' << auc << ',' << ll << ',' << res.offline_steps() << ','
            << res.online_steps() << ',' << res.test.train_ms / 1000.0 << ',' << res.test.total_ms / 1000.0 << '\n';
      auto summary = res.summary();
      summary["seed"] = seed;
      runs.push_back(summary);
    }
  }

  std::ofstream table(out / "table.csv");
  require(table.good(), ErrorKind::Io, "cannot write table.csv");
  table.precision(6);
  table << "method,auc_mean,auc_std,logloss_mean,logloss_std,time_s_mean,time_s_std,train_s_mean,steps_mean\n";
  json rows = json::array();
  for (const auto& name : order) {
    const auto& a = acc[name];
    table << name << ',' << mean(a.auc) << ',' << stddev(a.auc) << ',' << mean(a.logloss) << ',' << stddev(a.logloss)
          << ',' << mean(a.total_s) << ',' << stddev(a.total_s) << ',' << mean(a.train_s) << ',' << mean(a.steps)
          << '\n';
    rows.push_back({{"method", name},
                    {"auc_mean", mean(a.auc)},
                    {"auc_std", stddev(a.auc)},
                    {"logloss_mean", mean(a.logloss)},
                    {"logloss_std", stddev(a.logloss)},
                    {"time_s_mean", mean(a.total_s)}});
  }
  write_json(out / "runs.json", runs);
  return {{"table", rows}, {"cells", (out / "experiment.csv").string()}};
}

}  // namespace crossadapt::commands
