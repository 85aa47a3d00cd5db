#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossadapt/data.hpp"

namespace crossadapt::model {
class PredictionModel;
}

namespace crossadapt::metrics {

/// Rank-based AUC; a positive/negative tie counts one half. Labels > 0.5
/// are positive.
double auc(std::span<const double> preds, std::span<const double> labels);

/// Mean clamped binary cross-entropy (same computation as the training loss).
double logloss(std::span<const double> preds, std::span<const double> labels);

struct PcvrBias {
  double value = 0.0;
  std::size_t items = 0;
  /// Items whose actual rate is zero; they cannot enter the relative error.
  std::size_t excluded_items = 0;
};

/// Mean of |p̂_i - p_i| / p_i over items with p_i > 0, from per-item rates.
PcvrBias pcvr_bias(std::span<const double> predicted_rates, std::span<const double> actual_rates);

/// Groups rows by `item` key, averages predictions and labels per item, then
/// applies the per-item form.
PcvrBias pcvr_bias_grouped(std::span<const double> preds, std::span<const double> labels,
                           std::span<const std::uint32_t> item);

enum class SpearmanMethod { RankDifference, PearsonOnRanks };

/// Average ranks (1-based) with ties sharing the mean position.
std::vector<double> average_ranks(std::span<const double> xs);

double spearman(std::span<const double> xs, std::span<const double> ys,
                SpearmanMethod method = SpearmanMethod::RankDifference);

/// DCG@K of `predicted` (relevances in predicted order) over IDCG@K of the
/// ideal relevances; zero when IDCG is zero.
double ndcg_at_k(std::span<const double> predicted, std::span<const double> ideal, std::size_t k);

/// NDCG@K of ranking by `scores` with graded relevance `reference` (e.g.
/// teacher predictions).
double ndcg_against(std::span<const double> scores, std::span<const double> reference, std::size_t k);

struct RunReport {
  std::optional<double> auc;
  std::optional<double> logloss;
  std::optional<double> pcvr_bias;
  std::optional<double> spearman;
  std::map<std::size_t, double> ndcg_at;
  std::size_t rows = 0;
  std::size_t steps = 0;
  double train_ms = 0.0;
  double total_ms = 0.0;
  std::uint64_t split_fingerprint = 0;

  nlohmann::json to_json() const;
};

/// AUC and LogLoss of `model` on `split` (pseudo rows excluded). AUC is left
/// empty when the split has a single class.
RunReport evaluate(const model::PredictionModel& model, const data::Dataset& split);

struct SwitchingCostReport {
  std::size_t c_comp_steps = 0;
  double c_comp_ms = 0.0;
  double c_perf = 0.0;

  nlohmann::json to_json() const;
};

SwitchingCostReport switching_cost(const RunReport& student, const RunReport& teacher, std::size_t steps,
                                   double elapsed_ms);

}  // namespace crossadapt::metrics
