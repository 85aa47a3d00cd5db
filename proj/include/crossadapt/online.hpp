#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossadapt/data.hpp"
#include "crossadapt/model.hpp"
#include "crossadapt/rng.hpp"

namespace crossadapt::online {

struct OnlineConfig {
  double lr_embedding = 0.1;
  double lr_net = 0.001;
  /// Teacher learning rates are the student's scaled by this factor.
  double teacher_lr_ratio = 1.0;
  /// Divide the accumulated teacher gradient by tau before the tick.
  bool average_teacher_grad = false;
  std::size_t tau = 10;
  double lambda = 0.7;
  double temperature = 4.0;
  /// Overrides the ratio from the shift report when set.
  std::optional<double> r_enh;
  std::size_t batch_size = 4096;
  std::uint64_t seed = 0;
  /// When false the teacher stays frozen for the whole stream.
  bool co_evolve = true;
  std::size_t rolling_window = 2000;

  void validate() const;
  nlohmann::json to_json() const;
};

struct CoEvolutionState {
  std::size_t t = 0;
  model::GradientSet teacher_grad;
  std::size_t accumulated = 0;
  std::size_t teacher_updates = 0;
  model::AdamState student_adam;
  model::AdamState teacher_adam;

  static CoEvolutionState create(const model::PredictionModel* teacher, const model::PredictionModel& student,
                                 const OnlineConfig& cfg);
};

/// Appends floor(r_enh |batch|) rows drawn uniformly from `history`.
/// Streaming rows stay first.
data::Dataset augment_batch(const data::Dataset& batch, const data::Dataset& history, double r_enh, Rng& rng);
data::Dataset augment_batch(const data::Dataset& batch, const data::Dataset& history, double r_enh,
                            std::uint64_t seed);

struct CoStepLog {
  std::size_t t = 0;
  double bce_student = 0.0;
  double kd = 0.0;
  double bce_teacher = 0.0;
  bool teacher_tick = false;
  std::size_t hist_rows = 0;
  double rolling_auc = 0.0;  // NaN while undefined
  double rolling_logloss = 0.0;
};

struct CoStepResult {
  CoStepLog log;
  /// Student probabilities for every row of the batch, before the update.
  std::vector<double> student_probs;
};

/// One co-evolution step on an already augmented batch. Both forwards run
/// before any update; the student takes an Adam step on BCE + lambda KD, the
/// teacher accumulates its BCE gradient over non-pseudo rows and applies it
/// once every tau steps. `teacher` may be null (no KD, no teacher update).
CoStepResult co_step(model::PredictionModel* teacher, model::PredictionModel& student, const data::Dataset& batch,
                     const OnlineConfig& cfg, CoEvolutionState& state, std::size_t hist_rows = 0);

/// Prequential AUC / LogLoss over the most recent `window` predictions.
class RollingMetrics {
 public:
  explicit RollingMetrics(std::size_t window) : window_(window) {}
  void add(double pred, double label);
  double logloss() const;
  /// NaN when the window holds a single class.
  double auc() const;

 private:
  std::size_t window_;
  std::deque<std::pair<double, double>> items_;
  double loss_sum_ = 0.0;
};

struct OnlineResult {
  std::vector<CoStepLog> steps;
  std::size_t teacher_updates = 0;
  double r_enh = 0.0;
  double train_ms = 0.0;

  void write_csv(const std::filesystem::path& path) const;
};

using OrderHook = std::function<void(std::size_t t, const data::Dataset& stream_batch)>;

/// Consumes `stream` once, in timestamp order, in batches of cfg.batch_size.
OnlineResult run_online(model::PredictionModel* teacher, model::PredictionModel& student, const data::Dataset& stream,
                        const data::Dataset& history, double r_enh, const OnlineConfig& cfg,
                        const OrderHook& hook = {});

/// Steps from `drift_step` until the rolling LogLoss, having risen above
/// `tolerance` times its value just before the drift, falls back under it.
/// Zero if it never rises; the remaining step count if it never recovers.
std::size_t recovery_steps(const std::vector<CoStepLog>& steps, std::size_t drift_step, double tolerance = 1.1);

}  // namespace crossadapt::online
