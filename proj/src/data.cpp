#include "crossadapt/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "crossadapt/error.hpp"
#include "crossadapt/rng.hpp"

namespace crossadapt::data {

std::size_t FieldSchema::num_categorical() const noexcept {
  return static_cast<std::size_t>(std::count_if(fields.begin(), fields.end(), [](const Field& f) {
    return f.kind == FieldKind::Categorical;
  }));
}

std::size_t FieldSchema::num_numerical() const noexcept { return fields.size() - num_categorical(); }

std::size_t FieldSchema::total_rows() const noexcept {
  std::size_t rows = 0;
  for (const auto& f : fields) rows += f.kind == FieldKind::Categorical ? f.vocab_size : 1;
  return rows;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::empty_like() const {
  Dataset out;
  out.categorical.resize(categorical.size());
  out.numerical.resize(numerical.size());
  return out;
}

Dataset Dataset::select(std::span<const std::size_t> rows) const {
  Dataset out = empty_like();
  const auto pick = [&](const auto& src, auto& dst) {
    if (src.empty()) return;
    dst.reserve(rows.size());
    for (std::size_t r : rows) dst.push_back(src[r]);
  };
  for (std::size_t c = 0; c < categorical.size(); ++c) pick(categorical[c], out.categorical[c]);
  for (std::size_t n = 0; n < numerical.size(); ++n) pick(numerical[n], out.numerical[n]);
  pick(label, out.label);
  pick(soft_label, out.soft_label);
  pick(is_pseudo, out.is_pseudo);
  pick(click, out.click);
  pick(timestamp, out.timestamp);
  return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  require(begin <= end && end <= size(), ErrorKind::Shape, "dataset slice out of range");
  std::vector<std::size_t> rows(end - begin);
  std::iota(rows.begin(), rows.end(), begin);
  return select(rows);
}

void Dataset::append(const Dataset& other) {
  if (other.empty()) return;
  if (empty() && categorical.empty() && numerical.empty()) {
    *this = other;
    return;
  }
  require(categorical.size() == other.categorical.size() &&
              numerical.size() == other.numerical.size(),
          ErrorKind::Schema, "appending datasets with different field layouts");
  const std::size_t n0 = size();
  const std::size_t n1 = other.size();
  const auto cat = [&](auto& dst, const auto& src, auto fill) {
    if (dst.empty() && src.empty()) return;
    if (dst.empty()) dst.assign(n0, fill);
    if (src.empty())
      dst.insert(dst.end(), n1, fill);
    else
      dst.insert(dst.end(), src.begin(), src.end());
  };
  for (std::size_t c = 0; c < categorical.size(); ++c)
    categorical[c].insert(categorical[c].end(), other.categorical[c].begin(), other.categorical[c].end());
  for (std::size_t n = 0; n < numerical.size(); ++n)
    numerical[n].insert(numerical[n].end(), other.numerical[n].begin(), other.numerical[n].end());
  cat(soft_label, other.soft_label, 0.0);
  cat(is_pseudo, other.is_pseudo, std::uint8_t{0});
  cat(click, other.click, std::uint8_t{1});
  cat(timestamp, other.timestamp, std::int64_t{0});
  label.insert(label.end(), other.label.begin(), other.label.end());
}

void Dataset::append_row(const Dataset& other, std::size_t row) {
  const std::size_t one[] = {row};
  append(other.select(one));
}

void Dataset::validate(const FieldSchema& schema) const {
  require(categorical.size() == schema.num_categorical() &&
              numerical.size() == schema.num_numerical(),
          ErrorKind::Schema, "dataset field counts do not match schema");
  const std::size_t n = size();
  const auto check_len = [&](std::size_t len, const char* what, bool optional) {
    require(len == n || (optional && len == 0), ErrorKind::Shape,
            std::string("column '") + what + "' has length " + std::to_string(len) +
                ", expected " + std::to_string(n));
  };
  check_len(timestamp.size(), "timestamp", true);
  check_len(soft_label.size(), "soft_label", true);
  check_len(is_pseudo.size(), "is_pseudo", true);
  check_len(click.size(), "click", true);
  std::size_t c = 0;
  for (const auto& f : schema.fields) {
    if (f.kind != FieldKind::Categorical) continue;
    check_len(categorical[c].size(), f.name.c_str(), false);
    for (auto tok : categorical[c])
      require(tok < f.vocab_size, ErrorKind::Input,
              "token index " + std::to_string(tok) + " out of vocabulary for field '" + f.name + "'");
    ++c;
  }
  for (const auto& col : numerical) check_len(col.size(), "numerical", false);
  for (double s : soft_label)
    require(s >= 0.0 && s <= 1.0, ErrorKind::Input, "soft label outside [0,1]");
}

bool Dataset::is_time_sorted() const noexcept {
  return std::is_sorted(timestamp.begin(), timestamp.end());
}

std::uint64_t Dataset::fingerprint() const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(size());
  for (std::size_t i = 0; i < size(); ++i) {
    mix(static_cast<std::uint64_t>(label[i] * 1e6));
    if (!timestamp.empty()) mix(static_cast<std::uint64_t>(timestamp[i]));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Vocabulary and preprocessing

std::uint32_t Vocabulary::lookup(std::size_t field, const std::string& token) const {
  const auto& m = maps.at(field);
  auto it = m.find(token);
  return it == m.end() ? kUnk : it->second;
}

nlohmann::json Vocabulary::to_json() const {
  nlohmann::json j;
  j["threshold"] = threshold;
  j["fields"] = nlohmann::json::array();
  for (std::size_t f = 0; f < maps.size(); ++f) {
    std::vector<std::string> tokens(maps[f].size());
    for (const auto& [tok, idx] : maps[f]) tokens[idx - 1] = tok;
    j["fields"].push_back({{"name", field_names[f]}, {"tokens", tokens}});
  }
  return j;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  Vocabulary v;
  v.threshold = j.at("threshold").get<std::size_t>();
  for (const auto& f : j.at("fields")) {
    v.field_names.push_back(f.at("name").get<std::string>());
    auto& m = v.maps.emplace_back();
    std::uint32_t idx = 1;
    for (const auto& tok : f.at("tokens")) m.emplace(tok.get<std::string>(), idx++);
  }
  return v;
}

Vocabulary build_vocabulary(const RawTable& raw, std::size_t threshold, std::size_t visible_rows) {
  require(threshold >= 1, ErrorKind::Parameter, "vocabulary threshold must be >= 1");
  visible_rows = std::min(visible_rows, raw.size());
  Vocabulary vocab;
  vocab.threshold = threshold;
  vocab.field_names = raw.categorical_names;
  for (const auto& column : raw.categorical) {
    std::unordered_map<std::string, std::size_t> counts;
    for (std::size_t i = 0; i < visible_rows; ++i) ++counts[column[i]];
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [tok, cnt] : counts)
      if (cnt >= threshold && tok != Vocabulary::kUnkToken) kept.emplace_back(tok, cnt);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    auto& m = vocab.maps.emplace_back();
    std::uint32_t idx = 1;
    for (const auto& [tok, cnt] : kept) m.emplace(tok, idx++);
  }
  return vocab;
}

double transform_numerical(double x) noexcept { return x > 2.0 ? std::log2(x) : x; }

Dataset encode(const RawTable& raw, const Vocabulary& vocab) {
  require(vocab.maps.size() == raw.categorical.size(), ErrorKind::Schema,
          "vocabulary does not cover the raw categorical fields");
  Dataset out;
  out.categorical.resize(raw.categorical.size());
  for (std::size_t f = 0; f < raw.categorical.size(); ++f) {
    auto& col = out.categorical[f];
    col.reserve(raw.size());
    for (const auto& tok : raw.categorical[f]) col.push_back(vocab.lookup(f, tok));
  }
  out.numerical.resize(raw.numerical.size());
  for (std::size_t n = 0; n < raw.numerical.size(); ++n) {
    auto& col = out.numerical[n];
    col.reserve(raw.size());
    for (double x : raw.numerical[n]) col.push_back(transform_numerical(x));
  }
  out.label = raw.label;
  out.click = raw.click;
  out.timestamp = raw.timestamp;
  if (out.timestamp.empty()) {
    out.timestamp.resize(raw.size());
    std::iota(out.timestamp.begin(), out.timestamp.end(), std::int64_t{0});
  }
  return out;
}

FieldSchema make_schema(const RawTable& raw, const Vocabulary& vocab) {
  FieldSchema schema;
  for (const auto& name : raw.numerical_names) schema.fields.push_back({name, FieldKind::Numerical, 1});
  for (std::size_t f = 0; f < raw.categorical_names.size(); ++f)
    schema.fields.push_back({raw.categorical_names[f], FieldKind::Categorical, vocab.vocab_size(f)});
  return schema;
}

Preprocessed preprocess(const RawTable& raw, std::size_t vocab_threshold, std::size_t visible_rows) {
  Preprocessed out;
  out.vocab = build_vocabulary(raw, vocab_threshold, visible_rows == 0 ? raw.size() : visible_rows);
  out.samples = encode(raw, out.vocab);
  out.schema = make_schema(raw, out.vocab);
  return out;
}

// ---------------------------------------------------------------------------
// Splits

DatasetSplits::DatasetSplits(Dataset hist, Dataset train, Dataset online, Dataset test,
                             std::array<std::size_t, 4> ratio, std::array<std::size_t, 5> boundaries)
    : hist_(std::move(hist)),
      train_(std::move(train)),
      online_(std::move(online)),
      test_(std::move(test)),
      ratio_(ratio),
      boundaries_(boundaries) {}

const Dataset& DatasetSplits::hist(HistReader reader) const {
  require(reader != HistReader::Student, ErrorKind::State,
          "the historical split is not readable by student training");
  return hist_;
}

DatasetSplits split_temporal(const Dataset& samples, std::array<std::size_t, 4> ratio) {
  require(ratio[2] >= 1 && ratio[3] >= 1, ErrorKind::Parameter,
          "online and test ratio parts must be >= 1");
  const std::size_t total = std::accumulate(ratio.begin(), ratio.end(), std::size_t{0});
  const std::size_t n = samples.size();
  require(n >= total, ErrorKind::Data,
          "only " + std::to_string(n) + " samples for " + std::to_string(total) + " ratio parts");
  require(samples.is_time_sorted(), ErrorKind::Data, "samples must be timestamp-sorted before splitting");

  std::array<std::size_t, 5> b{};
  std::size_t cum = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    cum += ratio[k];
    // round(n * cum / total), half up, in integer arithmetic
    b[k + 1] = (2 * n * cum + total) / (2 * total);
  }
  b[4] = n;
  if (!samples.timestamp.empty()) {
    for (std::size_t k = 1; k < 4; ++k) {
      while (b[k] > 0 && b[k] < n && samples.timestamp[b[k]] == samples.timestamp[b[k] - 1]) ++b[k];
      b[k] = std::max(b[k], b[k - 1]);
    }
  }
  require(b[3] > b[2] && b[4] > b[3], ErrorKind::Data, "online or test split came out empty");
  return DatasetSplits(samples.slice(b[0], b[1]), samples.slice(b[1], b[2]),
                       samples.slice(b[2], b[3]), samples.slice(b[3], b[4]), ratio, b);
}

// ---------------------------------------------------------------------------
// Synthetic streams

nlohmann::json SyntheticSpec::to_json() const {
  nlohmann::json drift_json = nlohmann::json::array();
  for (const auto& d : drift)
    drift_json.push_back({{"start_fraction", d.start_fraction},
                          {"perturbation", d.perturbation},
                          {"reshuffle", d.reshuffle}});
  return {{"n_samples", n_samples},
          {"vocab_sizes", vocab_sizes},
          {"n_numerical", n_numerical},
          {"zipf_exponent", zipf_exponent},
          {"weight_scale", weight_scale},
          {"weight_density", weight_density},
          {"interaction_rank", interaction_rank},
          {"interaction_scale", interaction_scale},
          {"numerical_weight_scale", numerical_weight_scale},
          {"drift", drift_json},
          {"base_rate", base_rate},
          {"pcvr", pcvr},
          {"click_rate", click_rate},
          {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  static const std::vector<std::string> known = {
      "n_samples", "vocab_sizes", "n_numerical", "zipf_exponent", "weight_scale",
      "weight_density", "interaction_rank", "interaction_scale", "numerical_weight_scale",
      "drift", "base_rate", "pcvr", "click_rate", "seed"};
  for (const auto& [key, value] : j.items())
    require(std::find(known.begin(), known.end(), key) != known.end(), ErrorKind::Validation,
            "unknown synthetic spec key '" + key + "'");
  const auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
  };
  get("n_samples", s.n_samples);
  get("vocab_sizes", s.vocab_sizes);
  get("n_numerical", s.n_numerical);
  get("zipf_exponent", s.zipf_exponent);
  get("weight_scale", s.weight_scale);
  get("weight_density", s.weight_density);
  get("interaction_rank", s.interaction_rank);
  get("interaction_scale", s.interaction_scale);
  get("numerical_weight_scale", s.numerical_weight_scale);
  get("base_rate", s.base_rate);
  get("pcvr", s.pcvr);
  get("click_rate", s.click_rate);
  get("seed", s.seed);
  if (j.contains("drift")) {
    s.drift.clear();
    for (const auto& d : j.at("drift")) {
      DriftEvent e;
      e.start_fraction = d.at("start_fraction").get<double>();
      if (d.contains("perturbation")) e.perturbation = d.at("perturbation").get<double>();
      if (d.contains("reshuffle")) e.reshuffle = d.at("reshuffle").get<bool>();
      s.drift.push_back(e);
    }
  }
  s.validate();
  return s;
}

void SyntheticSpec::validate() const {
  require(n_samples >= 1, ErrorKind::Validation, "n_samples must be >= 1");
  for (auto v : vocab_sizes) require(v >= 2, ErrorKind::Validation, "vocab sizes must be >= 2");
  require(!vocab_sizes.empty() || n_numerical > 0, ErrorKind::Validation, "spec has no fields");
  require(base_rate > 0.0 && base_rate < 1.0, ErrorKind::Validation, "base_rate must be in (0,1)");
  require(click_rate > 0.0 && click_rate < 1.0, ErrorKind::Validation, "click_rate must be in (0,1)");
  require(weight_density >= 0.0 && weight_density <= 1.0, ErrorKind::Validation,
          "weight_density must be in [0,1]");
  double prev = -1.0;
  for (const auto& d : drift) {
    require(d.start_fraction >= 0.0 && d.start_fraction < 1.0 && d.start_fraction > prev,
            ErrorKind::Validation, "drift start fractions must be strictly increasing in [0,1)");
    prev = d.start_fraction;
  }
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct GroundTruth {
  // Per field, per token.
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> click_weights;
  std::vector<std::vector<std::vector<double>>> factors;  // [field][token][rank]
  std::vector<double> numerical_weights;
  std::vector<double> numerical_click_weights;
  std::vector<double> numerical_mean;
  // Zipf rank -> token id per field.
  std::vector<std::vector<std::size_t>> rank_to_token;
  double pair_scale = 0.0;
  double bias = 0.0;
  double click_bias = 0.0;
};

struct Row {
  std::vector<std::size_t> tokens;
  std::vector<double> latent;  // standardized numerical draws
};

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

class Generator {
 public:
  explicit Generator(const SyntheticSpec& spec) : spec_(spec) {
    Rng rng(derive_seed(spec.seed, 1));
    const std::size_t nf = spec.vocab_sizes.size();
    const std::size_t rank = spec.interaction_rank;
    const double pairs = nf > 1 ? static_cast<double>(nf * (nf - 1) / 2) : 1.0;
    truth_.pair_scale = 1.0 / std::sqrt(pairs);
    const double factor_sd =
        rank > 0 ? std::sqrt(spec.interaction_scale / std::sqrt(static_cast<double>(rank))) : 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      const std::size_t v = spec.vocab_sizes[f];
      auto& w = truth_.weights.emplace_back(v, 0.0);
      auto& cw = truth_.click_weights.emplace_back(v, 0.0);
      auto& fac = truth_.factors.emplace_back(v, std::vector<double>(rank));
      for (std::size_t t = 0; t < v; ++t) {
        if (rng.uniform() < spec.weight_density) w[t] = spec.weight_scale * rng.normal();
        if (rng.uniform() < spec.weight_density) cw[t] = spec.weight_scale * rng.normal();
        for (auto& x : fac[t]) x = factor_sd * rng.normal();
      }
      auto& perm = truth_.rank_to_token.emplace_back(v);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      shuffle(perm, rng);
      auto& cdf = cdf_.emplace_back(v);
      double acc = 0.0;
      for (std::size_t r = 0; r < v; ++r) {
        acc += 1.0 / std::pow(static_cast<double>(r + 1), spec.zipf_exponent);
        cdf[r] = acc;
      }
      for (auto& c : cdf) c /= acc;
    }
    for (std::size_t n = 0; n < spec.n_numerical; ++n) {
      truth_.numerical_weights.push_back(spec.numerical_weight_scale * rng.normal());
      truth_.numerical_click_weights.push_back(spec.numerical_weight_scale * rng.normal());
      truth_.numerical_mean.push_back(rng.uniform(0.5, 2.0));
    }
    calibrate();
  }

  RawTable run() {
    RawTable out;
    const std::size_t nf = spec_.vocab_sizes.size();
    for (std::size_t f = 0; f < nf; ++f) out.categorical_names.push_back("C" + std::to_string(f + 1));
    for (std::size_t n = 0; n < spec_.n_numerical; ++n)
      out.numerical_names.push_back("I" + std::to_string(n + 1));
    out.categorical.assign(nf, {});
    out.numerical.assign(spec_.n_numerical, {});
    for (auto& c : out.categorical) c.reserve(spec_.n_samples);
    for (auto& c : out.numerical) c.reserve(spec_.n_samples);
    out.label.reserve(spec_.n_samples);
    out.timestamp.reserve(spec_.n_samples);

    Rng feature_rng(derive_seed(spec_.seed, 2));
    Rng label_rng(derive_seed(spec_.seed, 3));
    std::size_t next_drift = 0;
    for (std::size_t i = 0; i < spec_.n_samples; ++i) {
      while (next_drift < spec_.drift.size() &&
             static_cast<double>(i) >= spec_.drift[next_drift].start_fraction *
                                           static_cast<double>(spec_.n_samples)) {
        apply_drift(spec_.drift[next_drift], next_drift);
        ++next_drift;
      }
      const Row row = draw_row(feature_rng);
      for (std::size_t f = 0; f < nf; ++f) out.categorical[f].push_back(std::to_string(row.tokens[f]));
      for (std::size_t n = 0; n < spec_.n_numerical; ++n) {
        const double z = row.latent[n] + truth_.numerical_mean[n];
        out.numerical[n].push_back(4.0 * std::exp(0.8 * z));
      }
      if (spec_.pcvr) {
        const bool clicked = label_rng.uniform() < sigmoid(click_logit(row));
        const double conv_u = label_rng.uniform();
        out.click.push_back(clicked ? 1 : 0);
        out.label.push_back(clicked && conv_u < sigmoid(logit(row)) ? 1.0 : 0.0);
      } else {
        out.label.push_back(label_rng.uniform() < sigmoid(logit(row)) ? 1.0 : 0.0);
      }
      out.timestamp.push_back(static_cast<std::int64_t>(i));
    }
    return out;
  }

 private:
  Row draw_row(Rng& rng) const {
    Row row;
    const std::size_t nf = spec_.vocab_sizes.size();
    row.tokens.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
      const double u = rng.uniform();
      const auto& cdf = cdf_[f];
      auto r = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      r = std::min(r, cdf.size() - 1);
      row.tokens[f] = truth_.rank_to_token[f][r];
    }
    row.latent.resize(spec_.n_numerical);
    for (auto& z : row.latent) z = rng.normal();
    return row;
  }

  double logit(const Row& row) const {
    double z = truth_.bias;
    const std::size_t nf = row.tokens.size();
    for (std::size_t f = 0; f < nf; ++f) z += truth_.weights[f][row.tokens[f]];
    for (std::size_t f = 0; f < nf; ++f) {
      const auto& a = truth_.factors[f][row.tokens[f]];
      for (std::size_t g = f + 1; g < nf; ++g) {
        const auto& b = truth_.factors[g][row.tokens[g]];
        double dot = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
        z += truth_.pair_scale * dot;
      }
    }
    for (std::size_t n = 0; n < row.latent.size(); ++n) z += truth_.numerical_weights[n] * row.latent[n];
    return z;
  }

  double click_logit(const Row& row) const {
    double z = truth_.click_bias;
    for (std::size_t f = 0; f < row.tokens.size(); ++f) z += truth_.click_weights[f][row.tokens[f]];
    for (std::size_t n = 0; n < row.latent.size(); ++n)
      z += truth_.numerical_click_weights[n] * row.latent[n];
    return z;
  }

  static double solve_bias(const std::vector<double>& logits, double target) {
    double lo = -30.0, hi = 30.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      double mean = 0.0;
      for (double z : logits) mean += sigmoid(z + mid);
      mean /= static_cast<double>(logits.size());
      (mean < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  void calibrate() {
    Rng rng(derive_seed(spec_.seed, 4));
    constexpr std::size_t kPilot = 20000;
    std::vector<double> logits, click_logits;
    logits.reserve(kPilot);
    truth_.bias = 0.0;
    truth_.click_bias = 0.0;
    for (std::size_t i = 0; i < kPilot; ++i) {
      const Row row = draw_row(rng);
      logits.push_back(logit(row));
      click_logits.push_back(click_logit(row));
    }
    truth_.bias = solve_bias(logits, spec_.base_rate);
    truth_.click_bias = solve_bias(click_logits, spec_.click_rate);
  }

  void apply_drift(const DriftEvent& event, std::size_t index) {
    Rng rng(derive_seed(spec_.seed, 10 + index));
    const double sd = event.perturbation * spec_.weight_scale;
    for (auto& w : truth_.weights)
      for (auto& x : w) x += sd * rng.normal();
    for (auto& w : truth_.click_weights)
      for (auto& x : w) x += sd * rng.normal();
    const std::size_t rank = spec_.interaction_rank;
    const double factor_sd =
        rank > 0 ? event.perturbation *
                       std::sqrt(spec_.interaction_scale / std::sqrt(static_cast<double>(rank)))
                 : 0.0;
    for (auto& field : truth_.factors)
      for (auto& tok : field)
        for (auto& x : tok) x += factor_sd * rng.normal();
    for (auto& w : truth_.numerical_weights) w += event.perturbation * spec_.numerical_weight_scale * rng.normal();
    if (event.reshuffle) {
      for (auto& perm : truth_.rank_to_token) shuffle(perm, rng);
      for (auto& mu : truth_.numerical_mean) mu += event.perturbation;
    }
  }

  const SyntheticSpec& spec_;
  GroundTruth truth_;
  std::vector<std::vector<double>> cdf_;
};

}  // namespace

RawTable generate_stream(const SyntheticSpec& spec) {
  spec.validate();
  Generator gen(spec);
  return gen.run();
}

// ---------------------------------------------------------------------------
// CSV

namespace {

const char* kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::Categorical: return "cat";
    case ColumnKind::Numerical: return "num";
    case ColumnKind::Label: return "label";
    case ColumnKind::Click: return "click";
    case ColumnKind::Timestamp: return "timestamp";
    case ColumnKind::Ignore: return "ignore";
  }
  return "ignore";
}

ColumnKind parse_kind(const std::string& s) {
  if (s == "cat") return ColumnKind::Categorical;
  if (s == "num") return ColumnKind::Numerical;
  if (s == "label") return ColumnKind::Label;
  if (s == "click") return ColumnKind::Click;
  if (s == "timestamp") return ColumnKind::Timestamp;
  if (s == "ignore") return ColumnKind::Ignore;
  fail(ErrorKind::Validation, "unknown column kind '" + s + "'");
}

std::vector<std::string_view> split_line(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

template <typename T>
bool parse_number(std::string_view cell, T& out) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

}  // namespace

nlohmann::json CsvSchema::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns) cols.push_back({{"name", c.name}, {"kind", kind_name(c.kind)}});
  return {{"fields", cols},
          {"delimiter", std::string(1, delimiter)},
          {"vocab_threshold", vocab_threshold},
          {"strict", strict}};
}

CsvSchema CsvSchema::from_json(const nlohmann::json& j) {
  CsvSchema s;
  for (const auto& [key, value] : j.items())
    require(key == "fields" || key == "delimiter" || key == "vocab_threshold" || key == "strict",
            ErrorKind::Validation, "unknown schema_config key '" + key + "'");
  for (const auto& c : j.at("fields"))
    s.columns.push_back({c.at("name").get<std::string>(), parse_kind(c.at("kind").get<std::string>())});
  if (j.contains("delimiter")) {
    const auto d = j.at("delimiter").get<std::string>();
    require(d.size() == 1 || d == "\\t" || d == "tab", ErrorKind::Validation,
            "delimiter must be a single character");
    s.delimiter = (d == "\\t" || d == "tab") ? '\t' : d[0];
  }
  if (j.contains("vocab_threshold")) s.vocab_threshold = j.at("vocab_threshold").get<std::size_t>();
  if (j.contains("strict")) s.strict = j.at("strict").get<bool>();
  return s;
}

CsvLoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Data, "'" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line, schema.delimiter);

  struct Binding {
    ColumnKind kind;
    std::size_t slot;  // index within kind
    std::size_t position;
    std::string name;
  };
  std::vector<Binding> bindings;
  CsvLoadResult result;
  RawTable& t = result.table;
  bool has_label = false, has_click = false, has_ts = false;
  for (const auto& col : schema.columns) {
    auto it = std::find(header.begin(), header.end(), col.name);
    require(it != header.end(), ErrorKind::Schema, "missing column '" + col.name + "' in header");
    const auto pos = static_cast<std::size_t>(it - header.begin());
    std::size_t slot = 0;
    switch (col.kind) {
      case ColumnKind::Categorical:
        slot = t.categorical_names.size();
        t.categorical_names.push_back(col.name);
        break;
      case ColumnKind::Numerical:
        slot = t.numerical_names.size();
        t.numerical_names.push_back(col.name);
        break;
      case ColumnKind::Label: has_label = true; break;
      case ColumnKind::Click: has_click = true; break;
      case ColumnKind::Timestamp: has_ts = true; break;
      case ColumnKind::Ignore: continue;
    }
    bindings.push_back({col.kind, slot, pos, col.name});
  }
  require(has_label, ErrorKind::Schema, "schema_config declares no label column");
  t.categorical.resize(t.categorical_names.size());
  t.numerical.resize(t.numerical_names.size());

  std::vector<std::string> cats(t.categorical.size());
  std::vector<double> nums(t.numerical.size());
  std::size_t row_number = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line, schema.delimiter);
    std::string error;
    double label = 0.0;
    std::uint8_t click = 1;
    std::int64_t ts = 0;
    if (cells.size() != header.size()) {
      error = "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size());
    }
    for (const auto& b : bindings) {
      if (!error.empty()) break;
      const std::string_view cell = cells[b.position];
      const auto bad = [&](const char* what) {
        error = std::string("unparsable ") + what + " '" + std::string(cell) + "' in column '" + b.name + "'";
      };
      switch (b.kind) {
        case ColumnKind::Categorical: cats[b.slot] = std::string(cell); break;
        case ColumnKind::Numerical:
          if (cell.empty())
            nums[b.slot] = 0.0;
          else if (!parse_number(cell, nums[b.slot]) || !std::isfinite(nums[b.slot]))
            bad("number");
          break;
        case ColumnKind::Label:
          if (!parse_number(cell, label) || (label != 0.0 && label != 1.0)) bad("label");
          break;
        case ColumnKind::Click: {
          double c = 0.0;
          if (!parse_number(cell, c) || (c != 0.0 && c != 1.0))
            bad("click");
          else
            click = static_cast<std::uint8_t>(c);
          break;
        }
        case ColumnKind::Timestamp:
          if (!parse_number(cell, ts)) bad("timestamp");
          break;
        case ColumnKind::Ignore: break;
      }
    }
    if (!error.empty()) {
      if (schema.strict)
        fail(ErrorKind::Data, path.string() + " row " + std::to_string(row_number) + ": " + error);
      ++result.skipped_rows;
      continue;
    }
    for (std::size_t c = 0; c < cats.size(); ++c) t.categorical[c].push_back(cats[c]);
    for (std::size_t n = 0; n < nums.size(); ++n) t.numerical[n].push_back(nums[n]);
    t.label.push_back(label);
    if (has_click) t.click.push_back(click);
    t.timestamp.push_back(has_ts ? ts : static_cast<std::int64_t>(t.label.size() - 1));
  }
  return result;
}

CsvSchema write_csv(const RawTable& raw, const std::filesystem::path& path, char delimiter) {
  CsvSchema schema;
  schema.delimiter = delimiter;
  schema.columns.push_back({"timestamp", ColumnKind::Timestamp});
  schema.columns.push_back({"label", ColumnKind::Label});
  if (raw.has_click()) schema.columns.push_back({"click", ColumnKind::Click});
  for (const auto& n : raw.numerical_names) schema.columns.push_back({n, ColumnKind::Numerical});
  for (const auto& c : raw.categorical_names) schema.columns.push_back({c, ColumnKind::Categorical});

  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write '" + path.string() + "'");
  std::string line;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    if (c) line += delimiter;
    line += schema.columns[c].name;
  }
  out << line << '\n';
  for (std::size_t i = 0; i < raw.size(); ++i) {
    line.clear();
    line += std::to_string(raw.timestamp.empty() ? static_cast<std::int64_t>(i) : raw.timestamp[i]);
    line += delimiter;
    line += raw.label[i] != 0.0 ? '1' : '0';
    if (raw.has_click()) {
      line += delimiter;
      line += raw.click[i] ? '1' : '0';
    }
    for (const auto& col : raw.numerical) {
      line += delimiter;
      line += format_double(col[i]);
    }
    for (const auto& col : raw.categorical) {
      line += delimiter;
      line += col[i];
    }
    out << line << '\n';
  }
  require(out.good(), ErrorKind::Io, "failed writing '" + path.string() + "'");
  return schema;
}

}  // namespace crossadapt::data
