#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace crossadapt::data {

enum class FieldKind { Categorical, Numerical };

/// One model input field. Categorical fields own `vocab_size` embedding rows
/// (row 0 is <UNK>); numerical fields own a single row scaled by the value.
struct Field {
  std::string name;
  FieldKind kind = FieldKind::Categorical;
  std::size_t vocab_size = 1;

  friend bool operator==(const Field&, const Field&) = default;
};

struct FieldSchema {
  std::vector<Field> fields;

  std::size_t num_fields() const noexcept { return fields.size(); }
  std::size_t num_categorical() const noexcept;
  std::size_t num_numerical() const noexcept;
  /// Total embedding rows across all fields.
  std::size_t total_rows() const noexcept;

  friend bool operator==(const FieldSchema&, const FieldSchema&) = default;
};

/// Columnar store of preprocessed samples; also used as a training batch.
///
/// `categorical[c]` holds token indices of the c-th categorical field in
/// schema order, `numerical[n]` the n-th numerical field. Optional columns
/// are either empty or have one entry per row.
struct Dataset {
  std::vector<std::vector<std::uint32_t>> categorical;
  std::vector<std::vector<double>> numerical;
  std::vector<double> label;
  std::vector<double> soft_label;        // teacher pseudo-labels, optional
  std::vector<std::uint8_t> is_pseudo;   // 1 = row trained on soft_label only, optional
  std::vector<std::uint8_t> click;       // pCVR mode, optional
  std::vector<std::int64_t> timestamp;

  std::size_t size() const noexcept { return label.size(); }
  bool empty() const noexcept { return label.empty(); }
  bool has_click() const noexcept { return !click.empty(); }
  bool has_pseudo() const noexcept { return !is_pseudo.empty(); }
  bool pseudo(std::size_t i) const noexcept { return !is_pseudo.empty() && is_pseudo[i] != 0; }

  /// Empty dataset with the same column layout.
  Dataset empty_like() const;
  Dataset select(std::span<const std::size_t> rows) const;
  Dataset slice(std::size_t begin, std::size_t end) const;
  void append(const Dataset& other);
  void append_row(const Dataset& other, std::size_t row);
  /// Rows where `keep(i)` is true.
  template <typename Pred>
  Dataset filter(Pred keep) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < size(); ++i)
      if (keep(i)) rows.push_back(i);
    return select(rows);
  }

  /// Throws on column-length or vocabulary violations.
  void validate(const FieldSchema& schema) const;
  bool is_time_sorted() const noexcept;
  /// Stable order-sensitive hash of labels and timestamps.
  std::uint64_t fingerprint() const noexcept;
};

// ---------------------------------------------------------------------------
// Raw (pre-vocabulary) samples.

struct RawTable {
  std::vector<std::string> categorical_names;
  std::vector<std::string> numerical_names;
  std::vector<std::vector<std::string>> categorical;
  std::vector<std::vector<double>> numerical;
  std::vector<double> label;
  std::vector<std::uint8_t> click;
  std::vector<std::int64_t> timestamp;

  std::size_t size() const noexcept { return label.size(); }
  bool has_click() const noexcept { return !click.empty(); }
};

struct Vocabulary {
  static constexpr std::uint32_t kUnk = 0;
  static constexpr const char* kUnkToken = "<UNK>";

  std::size_t threshold = 1;
  std::vector<std::string> field_names;
  /// Per field: token -> index, indices start at 1.
  std::vector<std::unordered_map<std::string, std::uint32_t>> maps;

  std::size_t vocab_size(std::size_t field) const { return maps.at(field).size() + 1; }
  std::uint32_t lookup(std::size_t field, const std::string& token) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
};

/// Tokens with count >= threshold among the first `visible_rows` rows get an
/// index (descending frequency, ties by token); everything else is <UNK>.
Vocabulary build_vocabulary(const RawTable& raw, std::size_t threshold,
                            std::size_t visible_rows);

/// x -> log2(x) when x > 2, else unchanged.
double transform_numerical(double x) noexcept;

/// Encodes raw rows with `vocab` and applies the numerical transform.
Dataset encode(const RawTable& raw, const Vocabulary& vocab);

FieldSchema make_schema(const RawTable& raw, const Vocabulary& vocab);

struct Preprocessed {
  Dataset samples;
  Vocabulary vocab;
  FieldSchema schema;
};

/// Builds the vocabulary from the first `visible_rows` rows (all rows when
/// zero) and encodes the whole table.
Preprocessed preprocess(const RawTable& raw, std::size_t vocab_threshold,
                        std::size_t visible_rows = 0);

// ---------------------------------------------------------------------------
// Temporal splits.

enum class HistReader { Teacher, FullRetrain, Student };

/// hist < train < online < test, contiguous in time. Student readers are
/// refused access to the historical split.
class DatasetSplits {
 public:
  DatasetSplits() = default;
  DatasetSplits(Dataset hist, Dataset train, Dataset online, Dataset test,
                std::array<std::size_t, 4> ratio, std::array<std::size_t, 5> boundaries);

  const Dataset& hist(HistReader reader) const;
  const Dataset& train() const noexcept { return train_; }
  const Dataset& online() const noexcept { return online_; }
  const Dataset& test() const noexcept { return test_; }
  bool has_hist() const noexcept { return !hist_.empty(); }
  const std::array<std::size_t, 4>& ratio() const noexcept { return ratio_; }
  /// Row offsets into the source sequence: hist starts at [0], test ends at [4].
  const std::array<std::size_t, 5>& boundaries() const noexcept { return boundaries_; }

 private:
  Dataset hist_, train_, online_, test_;
  std::array<std::size_t, 4> ratio_{};
  std::array<std::size_t, 5> boundaries_{};
};

/// Boundaries b_i = round(N * cumulative_ratio_i / total). Boundaries are
/// pushed forward past timestamp ties so splits never share a timestamp.
DatasetSplits split_temporal(const Dataset& samples, std::array<std::size_t, 4> ratio);

// ---------------------------------------------------------------------------
// Synthetic streams.

struct DriftEvent {
  double start_fraction = 0.5;
  /// Ground-truth weights move by perturbation * N(0, weight_scale).
  double perturbation = 1.0;
  /// Re-rank category frequencies and shift numerical means.
  bool reshuffle = false;

  friend bool operator==(const DriftEvent&, const DriftEvent&) = default;
};

struct SyntheticSpec {
  std::size_t n_samples = 200000;
  std::vector<std::size_t> vocab_sizes{2000, 1000, 500, 200, 100, 50, 20, 10};
  std::size_t n_numerical = 2;
  double zipf_exponent = 1.1;
  /// Std-dev of per-token logistic weights.
  double weight_scale = 0.6;
  /// Fraction of tokens with a non-zero logistic weight.
  double weight_density = 0.5;
  /// Rank and scale of the pairwise field-interaction ground truth.
  std::size_t interaction_rank = 4;
  double interaction_scale = 0.3;
  double numerical_weight_scale = 0.5;
  std::vector<DriftEvent> drift;
  double base_rate = 0.2;
  /// pCVR mode: a click layer gates conversion observation.
  bool pcvr = false;
  double click_rate = 0.2;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
  void validate() const;
};

/// Draws the stream sequentially. Labels are Bernoulli(sigmoid(logit)) of a
/// sparse logistic + low-rank interaction model; in pCVR mode `click` is drawn
/// first and `label` (conversion) is only positive on clicked rows.
RawTable generate_stream(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// CSV.

enum class ColumnKind { Categorical, Numerical, Label, Click, Timestamp, Ignore };

struct CsvColumn {
  std::string name;
  ColumnKind kind = ColumnKind::Ignore;
};

struct CsvSchema {
  std::vector<CsvColumn> columns;
  char delimiter = ',';
  std::size_t vocab_threshold = 10;
  /// Bad rows raise when strict, are skipped (and counted) otherwise.
  bool strict = true;

  nlohmann::json to_json() const;
  static CsvSchema from_json(const nlohmann::json& j);
};

struct CsvLoadResult {
  RawTable table;
  std::size_t skipped_rows = 0;
};

/// Header names must include every schema column. Without a timestamp column
/// row order is taken as temporal. Empty numerical cells read as 0.
CsvLoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Writes timestamp, label, [click], numerical..., categorical... with
/// round-trip exact numbers. Returns the matching schema.
CsvSchema write_csv(const RawTable& raw, const std::filesystem::path& path, char delimiter = ',');

}  // namespace crossadapt::data
