#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossadapt/data.hpp"
#include "crossadapt/model.hpp"
#include "crossadapt/rng.hpp"

namespace crossadapt::sampler {

struct SamplingConfig {
  double r = 0.1;
  double r_pos = 0.5;
  std::size_t blocks = 10;
  double r_unclick = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Round half up; quotas are non-negative so this is floor(x + 0.5).
std::size_t round_quota(double x) noexcept;

/// Indices into a pool of `pool_size`. Without replacement when n fits;
/// otherwise floor(n / pool) full copies of the pool plus a without-
/// replacement draw for the remainder, shuffled together.
std::vector<std::size_t> sample_indices(std::size_t pool_size, std::size_t n, Rng& rng);

/// Dataset form of the draw above.
data::Dataset sample_n(const data::Dataset& pool, std::size_t n, std::uint64_t seed);

struct ClassDraw {
  std::vector<std::size_t> positives;  // row indices into the source dataset
  std::vector<std::size_t> negatives;
};

/// Draws round(r r_pos |D|) positives and round(r (1 - r_pos) |D|) negatives.
ClassDraw class_balanced_sample(const data::Dataset& d, const SamplingConfig& cfg);

struct BlockAudit {
  std::size_t block = 0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::size_t n_pseudo = 0;
};

struct SampledDataset {
  data::Dataset data;
  /// Block k occupies rows [block_offsets[k], block_offsets[k + 1]).
  std::vector<std::size_t> block_offsets;
  std::vector<BlockAudit> audit;
  /// Source row of each observed row (repeats allowed); pseudo rows are not listed.
  std::vector<std::size_t> source_rows;
  std::vector<std::string> warnings;

  std::size_t blocks() const noexcept { return audit.size(); }
  std::size_t pseudo_count() const noexcept;
  void write_audit(const std::filesystem::path& path) const;
};

/// Splits `d` (sorted by timestamp first if needed) into K contiguous
/// blocks and draws per-block class quotas. A block lacking one class
/// borrows from the nearest block that has it and records a warning.
SampledDataset temporal_diversity_sample(const data::Dataset& d, const SamplingConfig& cfg);

/// Appends round(r_unclick |sampled|) rows drawn from `unclicked`, spread
/// across the blocks, labelled with the teacher's probability as a soft
/// target.
SampledDataset unclicked_augment(const SampledDataset& sampled, const data::Dataset& unclicked,
                                 const model::PredictionModel& teacher, const SamplingConfig& cfg);

/// Sizes of n near-equal contiguous parts; the last parts take the remainder.
std::vector<std::size_t> equal_parts(std::size_t total, std::size_t parts);

}  // namespace crossadapt::sampler
