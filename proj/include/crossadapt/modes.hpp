#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "crossadapt/data.hpp"
#include "crossadapt/metrics.hpp"
#include "crossadapt/model.hpp"
#include "crossadapt/offline.hpp"
#include "crossadapt/online.hpp"
#include "crossadapt/sampler.hpp"
#include "crossadapt/shift.hpp"

namespace crossadapt::modes {

enum class TrainerMode { Scratch, ScratchOnline, FullRetrain, VanillaKD, CrossAdaptFull, CrossAdaptSample };

const char* to_string(TrainerMode mode);
TrainerMode parse_mode(const std::string& name);

struct PipelineSettings {
  model::ArchSpec teacher_spec{model::Arch::MLP, 8, {64, 32, 4}};
  model::ArchSpec student_spec{model::Arch::FM_MLP, 16, {256, 128, 16}};
  offline::DistillConfig distill;
  online::OnlineConfig online;
  sampler::SamplingConfig sampling;
  shift::ShiftSettings shift;
  /// Stage-1 embedding hand-off; off gives a random student table.
  bool project_embeddings = true;
  /// pCVR: models train on clicked rows; unclicked rows feed augmentation.
  bool pcvr = false;
};

/// Rows a CVR model trains on (clicked only) or all rows otherwise.
data::Dataset training_rows(const data::Dataset& d, bool pcvr);
/// Unclicked rows (empty outside pCVR mode).
data::Dataset unclicked_rows(const data::Dataset& d);

struct TeacherResult {
  model::PredictionModel teacher;
  offline::StageLog log;
};

/// Teacher trained with plain BCE on hist ∪ train.
TeacherResult train_teacher(const data::DatasetSplits& splits, const data::FieldSchema& schema,
                            const PipelineSettings& settings, std::uint64_t seed);

struct ModeResult {
  TrainerMode mode = TrainerMode::Scratch;
  model::PredictionModel student;
  /// Student as it left the offline transfer (CrossAdapt modes only).
  std::optional<model::PredictionModel> stage1_student;
  /// Teacher state after the online stage (CrossAdapt modes only).
  std::optional<model::PredictionModel> teacher;
  offline::StageLog offline_log;
  online::OnlineResult online_log;
  std::optional<shift::ShiftReport> shift;
  std::optional<sampler::SampledDataset> sampled;
  metrics::RunReport test;

  std::size_t offline_steps() const noexcept { return offline_log.step_count(); }
  std::size_t online_steps() const noexcept { return online_log.steps.size(); }
  nlohmann::json summary() const;
};

/// Runs one trainer mode end to end and evaluates the student on the test
/// split. `teacher` is the cold snapshot; it is copied, never modified.
ModeResult run_mode(TrainerMode mode, const data::DatasetSplits& splits, const model::PredictionModel& teacher,
                    const PipelineSettings& settings, std::uint64_t seed);

}  // namespace crossadapt::modes
