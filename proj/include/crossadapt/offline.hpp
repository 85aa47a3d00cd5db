#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossadapt/data.hpp"
#include "crossadapt/model.hpp"
#include "crossadapt/projection.hpp"
#include "crossadapt/sampler.hpp"

namespace crossadapt::offline {

struct DistillConfig {
  double lambda = 0.7;
  double temperature = 4.0;
  double phase1_fraction = 0.3;
  std::size_t epochs = 1;
  std::size_t batch_size = 4096;
  double lr_embedding = 0.1;
  double lr_net = 0.001;
  /// Rows are shuffled within this many contiguous blocks when the data
  /// carries no block structure of its own.
  std::size_t shuffle_blocks = 10;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

struct StepLog {
  std::size_t step = 0;
  int phase = 2;
  double bce = 0.0;
  double kd = 0.0;
  double total = 0.0;
  double elapsed_ms = 0.0;
};

struct StageLog {
  std::vector<StepLog> steps;
  std::size_t phase1_steps = 0;
  double train_ms = 0.0;

  std::size_t step_count() const noexcept { return steps.size(); }
  void write_csv(const std::filesystem::path& path) const;
};

/// Number of optimizer steps for `rows` rows.
std::size_t steps_for(std::size_t rows, const DistillConfig& cfg) noexcept;

/// Batch row order for one epoch: blocks kept in order, rows shuffled
/// within each block.
std::vector<std::size_t> epoch_order(std::span<const std::size_t> block_offsets, std::uint64_t seed);

/// Trains `student` on `data` for cfg.epochs passes. With a teacher the
/// objective is BCE + lambda KD, otherwise plain BCE. The first
/// floor(phase1_fraction total) steps run with the embedding table frozen
/// when `progressive` is set.
StageLog train_stage(model::PredictionModel& student, const data::Dataset& data,
                     std::span<const std::size_t> block_offsets, const model::PredictionModel* teacher,
                     const DistillConfig& cfg, bool progressive);

struct TransferResult {
  model::PredictionModel student;
  projection::ProjectionPlan plan;
  StageLog log;
};

/// Stage 1: projected embedding initialisation, then progressive
/// distillation on the given rows. The teacher is never modified.
TransferResult run_offline_transfer(const model::PredictionModel& teacher, const model::ArchSpec& student_spec,
                                    const data::Dataset& data, std::span<const std::size_t> block_offsets,
                                    const DistillConfig& cfg, bool project_embeddings = true);

TransferResult run_offline_transfer(const model::PredictionModel& teacher, const model::ArchSpec& student_spec,
                                    const sampler::SampledDataset& sampled, const DistillConfig& cfg,
                                    bool project_embeddings = true);

}  // namespace crossadapt::offline
