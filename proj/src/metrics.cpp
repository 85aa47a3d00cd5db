#include "crossadapt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "crossadapt/error.hpp"
#include "crossadapt/model.hpp"

namespace crossadapt::metrics {

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double auc(std::span<const double> preds, std::span<const double> labels) {
  require(preds.size() == labels.size(), ErrorKind::Shape, "predictions and labels differ in length");
  const auto ranks = average_ranks(preds);
  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 0.5) {
      n_pos += 1.0;
      rank_sum += ranks[i];
    }
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  require(n_pos > 0.0 && n_neg > 0.0, ErrorKind::MetricUndefined, "AUC needs both positive and negative labels");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double logloss(std::span<const double> preds, std::span<const double> labels) {
  require(!preds.empty(), ErrorKind::MetricUndefined, "logloss of an empty set");
  return model::bce_loss(preds, labels);
}

PcvrBias pcvr_bias(std::span<const double> predicted_rates, std::span<const double> actual_rates) {
  require(predicted_rates.size() == actual_rates.size(), ErrorKind::Shape, "rate vectors differ in length");
  PcvrBias out;
  double sum = 0.0;
  for (std::size_t i = 0; i < actual_rates.size(); ++i) {
    if (actual_rates[i] <= 0.0) {
      ++out.excluded_items;
      continue;
    }
    sum += std::abs((predicted_rates[i] - actual_rates[i]) / actual_rates[i]);
    ++out.items;
  }
  require(out.items > 0, ErrorKind::MetricUndefined, "no item has a positive actual conversion rate");
  out.value = sum / static_cast<double>(out.items);
  return out;
}

PcvrBias pcvr_bias_grouped(std::span<const double> preds, std::span<const double> labels,
                           std::span<const std::uint32_t> item) {
  require(preds.size() == labels.size() && preds.size() == item.size(), ErrorKind::Shape,
          "predictions, labels and item keys differ in length");
  std::unordered_map<std::uint32_t, std::size_t> slot;
  std::vector<double> p_sum, y_sum, count;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto [it, fresh] = slot.try_emplace(item[i], p_sum.size());
    if (fresh) {
      p_sum.push_back(0.0);
      y_sum.push_back(0.0);
      count.push_back(0.0);
    }
    p_sum[it->second] += preds[i];
    y_sum[it->second] += labels[i];
    count[it->second] += 1.0;
  }
  for (std::size_t g = 0; g < count.size(); ++g) {
    p_sum[g] /= count[g];
    y_sum[g] /= count[g];
  }
  return pcvr_bias(p_sum, y_sum);
}

double spearman(std::span<const double> xs, std::span<const double> ys, SpearmanMethod method) {
  require(xs.size() == ys.size(), ErrorKind::Shape, "spearman inputs differ in length");
  require(xs.size() >= 2, ErrorKind::MetricUndefined, "spearman needs at least two points");
  const auto rx = average_ranks(xs), ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  if (method == SpearmanMethod::RankDifference) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
  }
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  require(sxx > 0.0 && syy > 0.0, ErrorKind::MetricUndefined, "spearman of a constant sequence");
  return sxy / std::sqrt(sxx * syy);
}

namespace {

double dcg(std::span<const double> rel, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(k, rel.size()); ++i)
    s += (std::exp2(rel[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  return s;
}

}  // namespace

double ndcg_at_k(std::span<const double> predicted, std::span<const double> ideal, std::size_t k) {
  require(k >= 1, ErrorKind::Parameter, "NDCG cutoff K must be >= 1");
  std::vector<double> best(ideal.begin(), ideal.end());
  std::sort(best.begin(), best.end(), std::greater<>());
  const double idcg = dcg(best, k);
  if (idcg <= 0.0) return 0.0;
  return dcg(predicted, k) / idcg;
}

double ndcg_against(std::span<const double> scores, std::span<const double> reference, std::size_t k) {
  require(scores.size() == reference.size(), ErrorKind::Shape, "scores and reference differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<double> rel(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) rel[i] = reference[order[i]];
  return ndcg_at_k(rel, reference, k);
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json j;
  const auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("auc", auc);
  put("logloss", logloss);
  put("pcvr_bias", pcvr_bias);
  put("spearman", spearman);
  if (!ndcg_at.empty()) {
    nlohmann::json n = nlohmann::json::object();
    for (const auto& [k, v] : ndcg_at) n[std::to_string(k)] = v;
    j["ndcg_at"] = n;
  }
  j["rows"] = rows;
  j["steps"] = steps;
  j["train_ms"] = train_ms;
  j["total_ms"] = total_ms;
  j["split_fingerprint"] = split_fingerprint;
  return j;
}

RunReport evaluate(const model::PredictionModel& model, const data::Dataset& split) {
  const data::Dataset observed = split.has_pseudo() ? split.filter([&](std::size_t i) { return !split.pseudo(i); })
                                                    : split;
  RunReport rep;
  rep.rows = observed.size();
  rep.split_fingerprint = split.fingerprint();
  if (observed.empty()) return rep;
  const auto preds = model.predict(observed);
  rep.logloss = logloss(preds, observed.label);
  const auto positives = std::count_if(observed.label.begin(), observed.label.end(), [](double y) { return y > 0.5; });
  if (positives > 0 && static_cast<std::size_t>(positives) < observed.size()) rep.auc = auc(preds, observed.label);
  return rep;
}

nlohmann::json SwitchingCostReport::to_json() const {
  return {{"c_comp_steps", c_comp_steps}, {"c_comp_ms", c_comp_ms}, {"c_perf", c_perf}};
}

SwitchingCostReport switching_cost(const RunReport& student, const RunReport& teacher, std::size_t steps,
                                   double elapsed_ms) {
  require(student.split_fingerprint == teacher.split_fingerprint, ErrorKind::Contract,
          "student and teacher were evaluated on different splits");
  require(student.logloss.has_value() && teacher.logloss.has_value(), ErrorKind::MetricUndefined,
          "switching cost needs logloss for both models");
  return {steps, elapsed_ms, *student.logloss - *teacher.logloss};
}

}  // namespace crossadapt::metrics
