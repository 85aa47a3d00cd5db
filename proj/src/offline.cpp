#include "crossadapt/offline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "crossadapt/error.hpp"
#include "crossadapt/rng.hpp"

namespace crossadapt::offline {

void DistillConfig::validate() const {
  require(lambda >= 0.0, ErrorKind::Parameter, "lambda must be >= 0");
  require(temperature > 0.0, ErrorKind::Parameter, "temperature must be > 0");
  require(phase1_fraction >= 0.0 && phase1_fraction <= 1.0, ErrorKind::Parameter, "phase1_fraction must be in [0, 1]");
  require(batch_size >= 1, ErrorKind::Parameter, "batch_size must be >= 1");
  require(epochs >= 1, ErrorKind::Parameter, "epochs must be >= 1");
  require(shuffle_blocks >= 1, ErrorKind::Parameter, "shuffle_blocks must be >= 1");
  require(lr_embedding > 0.0 && lr_net > 0.0, ErrorKind::Parameter, "learning rates must be > 0");
}

nlohmann::json DistillConfig::to_json() const {
  return {{"lambda", lambda},         {"temperature", temperature}, {"phase1_fraction", phase1_fraction},
          {"epochs", epochs},         {"batch_size", batch_size},   {"lr_embedding", lr_embedding},
          {"lr_net", lr_net},         {"shuffle_blocks", shuffle_blocks}, {"seed", seed}};
}

void StageLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out.precision(10);
  out << "step,phase,bce,kd,total,elapsed_ms\n";
  for (const auto& s : steps)
    out << s.step << ',' << s.phase << ',' << s.bce << ',' << s.kd << ',' << s.total << ',' << s.elapsed_ms << '\n';
}

std::size_t steps_for(std::size_t rows, const DistillConfig& cfg) noexcept {
  return cfg.epochs * ((rows + cfg.batch_size - 1) / cfg.batch_size);
}

std::vector<std::size_t> epoch_order(std::span<const std::size_t> block_offsets, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> order;
  if (block_offsets.empty()) return order;
  order.resize(block_offsets.back());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t b = 0; b + 1 < block_offsets.size(); ++b) {
    const std::size_t lo = block_offsets[b], hi = block_offsets[b + 1];
    for (std::size_t i = hi; i > lo + 1; --i) std::swap(order[i - 1], order[lo + rng.uniform_index(i - lo)]);
  }
  return order;
}

StageLog train_stage(model::PredictionModel& student, const data::Dataset& data,
                     std::span<const std::size_t> block_offsets, const model::PredictionModel* teacher,
                     const DistillConfig& cfg, bool progressive) {
  cfg.validate();
  require(!data.empty(), ErrorKind::Data, "training data is empty");
  data.validate(student.schema());
  if (teacher)
    require(teacher->schema() == student.schema(), ErrorKind::Schema, "teacher and student schemas differ");

  std::vector<std::size_t> offsets(block_offsets.begin(), block_offsets.end());
  if (offsets.empty()) {
    offsets.push_back(0);
    for (std::size_t s : sampler::equal_parts(data.size(), std::min(cfg.shuffle_blocks, data.size())))
      offsets.push_back(offsets.back() + s);
  }
  require(offsets.front() == 0 && offsets.back() == data.size(), ErrorKind::Shape,
          "block offsets do not cover the training data");

  const std::uint64_t teacher_sum = teacher ? teacher->checksum() : 0;
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  StageLog log;
  const std::size_t total = steps_for(data.size(), cfg);
  log.phase1_steps = progressive ? static_cast<std::size_t>(std::floor(cfg.phase1_fraction * static_cast<double>(total)))
                                 : 0;
  auto adam = model::AdamState::for_model(student, cfg.lr_embedding, cfg.lr_net);
  const bool was_frozen = student.frozen();

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(offsets, derive_seed(cfg.seed, epoch));
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const auto batch = data.select(std::span(order).subspan(begin, end - begin));
      const bool phase1 = step < log.phase1_steps;
      student.set_frozen(phase1 || was_frozen);

      auto fwd = student.forward(batch);
      const auto teacher_logits = teacher ? teacher->predict_logits(batch) : std::vector<double>{};
      auto obj = model::distill_objective(fwd.logits, batch, teacher_logits, cfg.lambda, cfg.temperature);
      require(std::isfinite(obj.total), ErrorKind::Numeric, "non-finite loss at step " + std::to_string(step));
      const auto grads = student.backward(fwd.cache, obj.dlogit);
      model::adam_step(student, grads, adam);

      log.steps.push_back({step, phase1 ? 1 : 2, obj.bce, obj.kd, obj.total, elapsed()});
      ++step;
    }
  }
  student.set_frozen(was_frozen);
  log.train_ms = elapsed();
  if (teacher)
    require(teacher->checksum() == teacher_sum, ErrorKind::Contract, "teacher parameters changed during stage 1");
  return log;
}

TransferResult run_offline_transfer(const model::PredictionModel& teacher, const model::ArchSpec& student_spec,
                                    const data::Dataset& data, std::span<const std::size_t> block_offsets,
                                    const DistillConfig& cfg, bool project_embeddings) {
  cfg.validate();
  TransferResult res;
  res.student = model::PredictionModel::random(teacher.schema(), student_spec, derive_seed(cfg.seed, 0x696e6974));
  if (project_embeddings) {
    res.plan = projection::build_plan(teacher.embedding().weights, student_spec.dim, derive_seed(cfg.seed, 0x70726f6a));
    res.student.set_embedding_weights(projection::apply_plan(teacher.embedding().weights, res.plan));
  }
  res.log = train_stage(res.student, data, block_offsets, &teacher, cfg, project_embeddings);
  return res;
}

TransferResult run_offline_transfer(const model::PredictionModel& teacher, const model::ArchSpec& student_spec,
                                    const sampler::SampledDataset& sampled, const DistillConfig& cfg,
                                    bool project_embeddings) {
  return run_offline_transfer(teacher, student_spec, sampled.data, sampled.block_offsets, cfg, project_embeddings);
}

}  // namespace crossadapt::offline
