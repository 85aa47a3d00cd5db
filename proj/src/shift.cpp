#include "crossadapt/shift.hpp"

#include <algorithm>
#include <cmath>

#include "crossadapt/error.hpp"

namespace crossadapt::shift {

const char* to_string(Metric m) {
  switch (m) {
    case Metric::JS: return "js";
    case Metric::KL: return "kl";
    case Metric::Wasserstein1D: return "wasserstein";
  }
  return "js";
}

Metric parse_metric(const std::string& name) {
  if (name == "js" || name == "JS") return Metric::JS;
  if (name == "kl" || name == "KL") return Metric::KL;
  if (name == "wasserstein" || name == "Wasserstein1D" || name == "w1") return Metric::Wasserstein1D;
  fail(ErrorKind::Validation, "unknown divergence metric '" + name + "' (expected js, kl or wasserstein)");
}

std::vector<std::pair<std::size_t, std::size_t>> partition_windows(std::size_t rows, std::size_t n) {
  require(n >= 1, ErrorKind::Parameter, "number of windows must be >= 1");
  require(n <= rows, ErrorKind::Parameter,
          "cannot split " + std::to_string(rows) + " rows into " + std::to_string(n) + " windows");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t base = rows / n, rem = rows % n;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = base + (i >= n - rem ? 1 : 0);
    out.emplace_back(begin, begin + len);
    begin += len;
  }
  return out;
}

WindowDistribution numerical_histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  require(bins >= 1, ErrorKind::Parameter, "histogram needs at least one bin");
  require(!values.empty(), ErrorKind::Data, "cannot estimate a distribution from an empty window");
  if (!(hi > lo)) hi = lo + 1.0;
  WindowDistribution w;
  w.kind = data::FieldKind::Numerical;
  w.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) w.edges[i] = lo + width * static_cast<double>(i);
  w.edges[bins] = hi;
  w.probs.assign(bins, 0.0);
  for (double x : values) {
    const double pos = (x - lo) / width;
    std::size_t idx = pos <= 0.0 ? 0 : static_cast<std::size_t>(pos);
    w.probs[std::min(idx, bins - 1)] += 1.0;
  }
  for (double& p : w.probs) p /= static_cast<double>(values.size());
  return w;
}

WindowDistribution categorical_distribution(std::span<const std::uint32_t> tokens,
                                            std::span<const std::uint32_t> support) {
  require(!tokens.empty(), ErrorKind::Data, "cannot estimate a distribution from an empty window");
  WindowDistribution w;
  w.kind = data::FieldKind::Categorical;
  w.categories.assign(support.begin(), support.end());
  w.probs.assign(support.size(), 0.0);
  std::uint32_t max_tok = 0;
  for (auto t : support) max_tok = std::max(max_tok, t);
  std::vector<std::size_t> slot(static_cast<std::size_t>(max_tok) + 1, support.size());
  for (std::size_t i = 0; i < support.size(); ++i) slot[support[i]] = i;
  double counted = 0.0;
  for (auto t : tokens) {
    if (t > max_tok || slot[t] == support.size()) continue;
    w.probs[slot[t]] += 1.0;
    counted += 1.0;
  }
  if (counted > 0.0)
    for (double& p : w.probs) p /= counted;
  return w;
}

namespace {

// Column of schema field `feature` in the dataset.
std::size_t column_of(const data::FieldSchema& schema, std::size_t feature) {
  std::size_t col = 0;
  for (std::size_t f = 0; f < feature; ++f)
    if (schema.fields[f].kind == schema.fields[feature].kind) ++col;
  return col;
}

}  // namespace

std::pair<WindowDistribution, WindowDistribution> estimate_pair(const data::Dataset& a, const data::Dataset& b,
                                                                const data::FieldSchema& schema,
                                                                std::size_t feature, std::size_t bins) {
  require(feature < schema.num_fields(), ErrorKind::Parameter, "feature index out of range");
  require(!a.empty() && !b.empty(), ErrorKind::Data, "cannot estimate a distribution from an empty window");
  const auto kind = schema.fields[feature].kind;
  const std::size_t col = column_of(schema, feature);
  std::pair<WindowDistribution, WindowDistribution> out;
  if (kind == data::FieldKind::Numerical) {
    const auto& xa = a.numerical.at(col);
    const auto& xb = b.numerical.at(col);
    const auto [amin, amax] = std::minmax_element(xa.begin(), xa.end());
    const auto [bmin, bmax] = std::minmax_element(xb.begin(), xb.end());
    const double lo = std::min(*amin, *bmin), hi = std::max(*amax, *bmax);
    out = {numerical_histogram(xa, lo, hi, bins), numerical_histogram(xb, lo, hi, bins)};
  } else {
    const auto& ta = a.categorical.at(col);
    const auto& tb = b.categorical.at(col);
    std::vector<std::uint32_t> support(ta.begin(), ta.end());
    support.insert(support.end(), tb.begin(), tb.end());
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    out = {categorical_distribution(ta, support), categorical_distribution(tb, support)};
  }
  out.first.feature = out.second.feature = feature;
  return out;
}

namespace {

double kl(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

}  // namespace

double divergence(std::span<const double> p, std::span<const double> q, Metric metric, double bin_width) {
  require(p.size() == q.size(), ErrorKind::Shape, "distributions must share one support");
  require(!p.empty(), ErrorKind::Shape, "empty distribution");
  switch (metric) {
    case Metric::JS: {
      std::vector<double> m(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
      return std::max(0.0, 0.5 * kl(p, m) + 0.5 * kl(q, m));
    }
    case Metric::KL: {
      const auto smooth = [&](std::span<const double> x) {
        std::vector<double> out(x.begin(), x.end());
        double total = 0.0;
        for (double& v : out) total += (v += kKlSmoothing);
        for (double& v : out) v /= total;
        return out;
      };
      const auto ps = smooth(p), qs = smooth(q);
      return kl(ps, qs);
    }
    case Metric::Wasserstein1D: {
      double cp = 0.0, cq = 0.0, s = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        cp += p[i];
        cq += q[i];
        s += std::abs(cp - cq);
      }
      return s * bin_width;
    }
  }
  return 0.0;
}

double divergence(const WindowDistribution& p, const WindowDistribution& q, Metric metric) {
  require(p.kind == q.kind, ErrorKind::Shape, "distributions have different feature kinds");
  if (metric == Metric::Wasserstein1D) {
    require(p.kind == data::FieldKind::Numerical, ErrorKind::Parameter,
            "Wasserstein distance is unsupported for categorical features");
    require(p.edges == q.edges, ErrorKind::Shape, "histograms do not share bin edges");
    return divergence(p.probs, q.probs, metric, p.edges[1] - p.edges[0]);
  }
  if (p.kind == data::FieldKind::Categorical)
    require(p.categories == q.categories, ErrorKind::Shape, "category supports differ");
  else
    require(p.edges == q.edges, ErrorKind::Shape, "histograms do not share bin edges");
  return divergence(p.probs, q.probs, metric);
}

void ShiftSettings::validate() const {
  require(windows >= 2, ErrorKind::Parameter, "shift detection needs at least 2 windows");
  require(bins >= 1, ErrorKind::Parameter, "bins must be >= 1");
  require(theta_low > 0.0 && theta_low < theta_high, ErrorKind::Parameter, "thresholds need 0 < theta_low < theta_high");
  require(k >= 0.0, ErrorKind::Parameter, "max enhancement ratio k must be >= 0");
}

nlohmann::json ShiftSettings::to_json() const {
  return {{"n", windows}, {"b", bins}, {"metric", to_string(metric)},
          {"theta_low", theta_low}, {"theta_high", theta_high}, {"k", k}};
}

double enhancement_ratio(double delta, double theta_low, double theta_high, double k) {
  require(theta_low < theta_high, ErrorKind::Parameter, "theta_low must be < theta_high");
  require(k >= 0.0, ErrorKind::Parameter, "k must be >= 0");
  if (delta <= theta_low) return k;
  if (delta <= theta_high) return k * (1.0 - delta / theta_high);
  return 0.0;
}

ShiftReport compute_shift(const data::Dataset& d, const data::FieldSchema& schema, const ShiftSettings& settings) {
  settings.validate();
  require(schema.num_fields() >= 1, ErrorKind::Schema, "schema has no features");
  if (settings.metric == Metric::Wasserstein1D)
    require(schema.num_categorical() == 0, ErrorKind::Parameter,
            "Wasserstein distance is unsupported for categorical features");
  const auto bounds = partition_windows(d.size(), settings.windows);
  ShiftReport rep;
  rep.settings = settings;
  rep.n_features = schema.num_fields();
  std::vector<data::Dataset> windows;
  for (auto [lo, hi] : bounds) windows.push_back(d.slice(lo, hi));
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < windows.size(); ++i) {
    std::vector<double> row;
    double sum = 0.0;
    for (std::size_t j = 0; j < rep.n_features; ++j) {
      const auto [p, q] = estimate_pair(windows[i], windows[i + 1], schema, j, settings.bins);
      row.push_back(divergence(p, q, settings.metric));
      sum += row.back();
    }
    rep.table.push_back(std::move(row));
    rep.pair_means.push_back(sum / static_cast<double>(rep.n_features));
    total += rep.pair_means.back();
  }
  rep.delta_shift = total / static_cast<double>(rep.pair_means.size());
  rep.r_enh = enhancement_ratio(rep.delta_shift, settings.theta_low, settings.theta_high, settings.k);
  return rep;
}

nlohmann::json ShiftReport::to_json() const {
  nlohmann::json j = settings.to_json();
  j["n_features"] = n_features;
  j["pair_means"] = pair_means;
  j["table"] = table;
  j["delta_shift"] = delta_shift;
  j["r_enh"] = r_enh;
  return j;
}

}  // namespace crossadapt::shift
