#include "crossadapt/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "crossadapt/error.hpp"

namespace crossadapt::sampler {

void SamplingConfig::validate() const {
  require(r > 0.0 && r <= 1.0, ErrorKind::Parameter, "sampling ratio r must be in (0, 1]");
  require(r_pos > 0.0 && r_pos < 1.0, ErrorKind::Parameter, "r_pos must be in (0, 1)");
  require(blocks >= 1, ErrorKind::Parameter, "number of temporal blocks must be >= 1");
  require(r_unclick >= 0.0, ErrorKind::Parameter, "r_unclick must be >= 0");
}

std::size_t round_quota(double x) noexcept { return x <= 0.0 ? 0 : static_cast<std::size_t>(std::floor(x + 0.5)); }

std::vector<std::size_t> equal_parts(std::size_t total, std::size_t parts) {
  require(parts >= 1, ErrorKind::Parameter, "need at least one part");
  std::vector<std::size_t> sizes(parts, total / parts);
  const std::size_t rem = total % parts;
  for (std::size_t i = 0; i < rem; ++i) ++sizes[parts - 1 - i];
  return sizes;
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

// Partial Fisher-Yates over [0, pool): the first n entries are the draw.
std::vector<std::size_t> draw_without_replacement(std::size_t pool, std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(pool);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.uniform_index(pool - i)]);
  idx.resize(n);
  return idx;
}

std::vector<std::size_t> pick(const std::vector<std::size_t>& pool, std::size_t n, Rng& rng) {
  auto local = sample_indices(pool.size(), n, rng);
  for (auto& i : local) i = pool[i];
  return local;
}

}  // namespace

std::vector<std::size_t> sample_indices(std::size_t pool_size, std::size_t n, Rng& rng) {
  if (n == 0) return {};
  require(pool_size > 0, ErrorKind::Data, "cannot draw " + std::to_string(n) + " samples from an empty pool");
  if (n <= pool_size) return draw_without_replacement(pool_size, n, rng);
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t copy = 0; copy < n / pool_size; ++copy)
    for (std::size_t i = 0; i < pool_size; ++i) out.push_back(i);
  const auto rest = draw_without_replacement(pool_size, n % pool_size, rng);
  out.insert(out.end(), rest.begin(), rest.end());
  shuffle(out, rng);
  return out;
}

data::Dataset sample_n(const data::Dataset& pool, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const auto idx = sample_indices(pool.size(), n, rng);
  return pool.select(idx);
}

namespace {

void split_classes(const data::Dataset& d, std::size_t begin, std::size_t end, std::vector<std::size_t>& pos,
                   std::vector<std::size_t>& neg, const std::vector<std::size_t>* order = nullptr) {
  for (std::size_t i = begin; i < end; ++i) {
    const std::size_t row = order ? (*order)[i] : i;
    (d.label[row] > 0.5 ? pos : neg).push_back(row);
  }
}

}  // namespace

ClassDraw class_balanced_sample(const data::Dataset& d, const SamplingConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> pos, neg;
  split_classes(d, 0, d.size(), pos, neg);
  require(!pos.empty(), ErrorKind::Data, "class-balanced sampling needs at least one positive sample");
  require(!neg.empty(), ErrorKind::Data, "class-balanced sampling needs at least one negative sample");
  const double n = static_cast<double>(d.size());
  Rng rng(cfg.seed);
  ClassDraw draw;
  draw.positives = pick(pos, round_quota(cfg.r * cfg.r_pos * n), rng);
  draw.negatives = pick(neg, round_quota(cfg.r * (1.0 - cfg.r_pos) * n), rng);
  return draw;
}

std::size_t SampledDataset::pseudo_count() const noexcept {
  std::size_t n = 0;
  for (const auto& a : audit) n += a.n_pseudo;
  return n;
}

void SampledDataset::write_audit(const std::filesystem::path& path) const {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << "block_id,n_pos,n_neg,n_pseudo\n";
  for (const auto& a : audit) out << a.block << ',' << a.n_pos << ',' << a.n_neg << ',' << a.n_pseudo << '\n';
}

SampledDataset temporal_diversity_sample(const data::Dataset& d, const SamplingConfig& cfg) {
  cfg.validate();
  require(!d.empty(), ErrorKind::Data, "cannot sample from an empty dataset");
  require(cfg.blocks <= d.size(), ErrorKind::Parameter, "more temporal blocks than samples");

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!d.is_time_sorted())
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return d.timestamp[a] < d.timestamp[b]; });

  const std::size_t k = cfg.blocks;
  const auto sizes = equal_parts(d.size(), k);
  std::vector<std::vector<std::size_t>> pos(k), neg(k);
  std::size_t begin = 0;
  for (std::size_t b = 0; b < k; ++b) {
    split_classes(d, begin, begin + sizes[b], pos[b], neg[b], &order);
    begin += sizes[b];
  }

  const auto nearest = [&](const std::vector<std::vector<std::size_t>>& pools, std::size_t b) -> std::size_t {
    for (std::size_t dist = 1; dist < k; ++dist) {
      if (b >= dist && !pools[b - dist].empty()) return b - dist;
      if (b + dist < k && !pools[b + dist].empty()) return b + dist;
    }
    fail(ErrorKind::Data, "no temporal block contains the required class");
  };

  const double per_block = cfg.r * static_cast<double>(d.size()) / static_cast<double>(k);
  const std::size_t q_pos = round_quota(per_block * cfg.r_pos);
  const std::size_t q_neg = round_quota(per_block * (1.0 - cfg.r_pos));

  Rng rng(cfg.seed);
  SampledDataset out;
  out.block_offsets.push_back(0);
  std::vector<std::size_t> rows;
  for (std::size_t b = 0; b < k; ++b) {
    const auto draw_class = [&](const std::vector<std::vector<std::size_t>>& pools, std::size_t quota,
                                const char* name) {
      if (quota == 0) return std::vector<std::size_t>{};
      std::size_t src = b;
      if (pools[b].empty()) {
        src = nearest(pools, b);
        out.warnings.push_back("block " + std::to_string(b) + " has no " + name + " samples; drew from block " +
                               std::to_string(src));
      }
      return pick(pools[src], quota, rng);
    };
    auto block = draw_class(pos, q_pos, "positive");
    const std::size_t n_pos = block.size();
    const auto negs = draw_class(neg, q_neg, "negative");
    block.insert(block.end(), negs.begin(), negs.end());
    shuffle(block, rng);
    rows.insert(rows.end(), block.begin(), block.end());
    out.audit.push_back({b, n_pos, negs.size(), 0});
    out.block_offsets.push_back(rows.size());
  }
  out.data = d.select(rows);
  out.source_rows = std::move(rows);
  return out;
}

SampledDataset unclicked_augment(const SampledDataset& sampled, const data::Dataset& unclicked,
                                 const model::PredictionModel& teacher, const SamplingConfig& cfg) {
  cfg.validate();
  const std::size_t m = round_quota(cfg.r_unclick * static_cast<double>(sampled.data.size()));
  if (m == 0) return sampled;
  require(!unclicked.empty(), ErrorKind::Data, "unclicked augmentation requested but the unclicked pool is empty");

  Rng rng(derive_seed(cfg.seed, 0x75636b));
  const auto idx = sample_indices(unclicked.size(), m, rng);
  data::Dataset pseudo = unclicked.select(idx);
  pseudo.soft_label = teacher.predict(pseudo);
  pseudo.is_pseudo.assign(pseudo.size(), 1);
  std::fill(pseudo.label.begin(), pseudo.label.end(), 0.0);

  const std::size_t k = std::max<std::size_t>(sampled.blocks(), 1);
  const auto shares = equal_parts(m, k);
  SampledDataset out;
  out.source_rows = sampled.source_rows;
  out.warnings = sampled.warnings;
  out.audit = sampled.audit;
  if (out.audit.empty()) out.audit.push_back({0, 0, 0, 0});
  out.data = sampled.data.empty_like();
  out.block_offsets.push_back(0);
  std::size_t taken = 0;
  for (std::size_t b = 0; b < k; ++b) {
    const std::size_t lo = sampled.block_offsets.size() > b ? sampled.block_offsets[b] : 0;
    const std::size_t hi = sampled.block_offsets.size() > b + 1 ? sampled.block_offsets[b + 1] : sampled.data.size();
    out.data.append(sampled.data.slice(lo, hi));
    out.data.append(pseudo.slice(taken, taken + shares[b]));
    taken += shares[b];
    out.audit[b].n_pseudo += shares[b];
    out.block_offsets.push_back(out.data.size());
  }
  return out;
}

}  // namespace crossadapt::sampler
