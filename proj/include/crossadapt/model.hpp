#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossadapt/data.hpp"
#include "crossadapt/linalg.hpp"

namespace crossadapt::model {

using linalg::Matrix;

enum class Arch { MLP, FM_MLP };

const char* to_string(Arch arch);
Arch parse_arch(const std::string& name);

/// Architecture descriptor: embedding dim and hidden layer widths. The
/// output layer (width 1) is implicit.
struct ArchSpec {
  Arch arch = Arch::MLP;
  std::size_t dim = 8;
  std::vector<std::size_t> hidden{64, 32, 4};

  nlohmann::json to_json() const;
  static ArchSpec from_json(const nlohmann::json& j);
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

struct EmbeddingTable {
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  Matrix weights;  // vocab_size x dim
  bool frozen = false;
};

/// Dense layers stored in one flat buffer: per layer W (in x out, row-major)
/// followed by b (out). FM_MLP appends one scalar weight on the second-order
/// factorization-machine term.
struct InteractionNet {
  Arch arch = Arch::MLP;
  std::vector<std::size_t> layer_dims;  // input, hidden..., 1
  std::vector<double> params;

  std::size_t num_layers() const noexcept { return layer_dims.size() - 1; }
  std::size_t weight_offset(std::size_t layer) const noexcept;
  std::size_t bias_offset(std::size_t layer) const noexcept;
  std::size_t fm_offset() const noexcept;
  static std::size_t param_count(Arch arch, std::span<const std::size_t> layer_dims) noexcept;
};

/// Per-field slot in the embedding table and source column in a Dataset.
struct FieldSlot {
  data::FieldKind kind;
  std::size_t row_offset;
  std::size_t column;
};

/// Forward activations retained for backward.
struct ForwardCache {
  std::uint64_t model_version = 0;
  std::size_t batch = 0;
  std::vector<std::vector<double>> activations;  // [0] = embedding input, then post-ReLU hidden
  std::vector<double> fm_sum;                    // batch x dim, FM only
  std::vector<double> fm_value;                  // batch, FM only
  // Embedding rows and scales used to build the input, batch x fields.
  std::vector<std::size_t> rows;
  std::vector<double> scales;
};

struct ForwardResult {
  std::vector<double> probs;
  std::vector<double> logits;
  ForwardCache cache;
};

struct GradientSet {
  Matrix embedding;  // empty when the embedding table is frozen
  std::vector<double> net;

  bool has_embedding() const noexcept { return !embedding.empty(); }
  void set_zero();
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double s);
};

/// Embedding table + interaction network + output head.
///
/// Every trainable parameter lives in exactly one of the two blocks: the
/// embedding table or the flat net buffer.
class PredictionModel {
 public:
  PredictionModel() = default;
  PredictionModel(data::FieldSchema schema, ArchSpec spec);

  /// Random initialization: embeddings U(-1/sqrt(d), 1/sqrt(d)), dense
  /// layers Glorot-uniform, biases and FM weight zero.
  static PredictionModel random(const data::FieldSchema& schema, const ArchSpec& spec, std::uint64_t seed);

  const data::FieldSchema& schema() const noexcept { return schema_; }
  const ArchSpec& spec() const noexcept { return spec_; }
  const EmbeddingTable& embedding() const noexcept { return embedding_; }
  const InteractionNet& net() const noexcept { return net_; }
  const std::vector<FieldSlot>& slots() const noexcept { return slots_; }

  /// Mutable access bumps the version so stale forward caches are detected.
  EmbeddingTable& mutable_embedding() noexcept { ++version_; return embedding_; }
  InteractionNet& mutable_net() noexcept { ++version_; return net_; }
  void set_embedding_weights(Matrix weights);
  void set_frozen(bool frozen) noexcept { embedding_.frozen = frozen; }
  bool frozen() const noexcept { return embedding_.frozen; }
  std::uint64_t version() const noexcept { return version_; }

  ForwardResult forward(const data::Dataset& batch) const;
  /// Logits only, without keeping a cache.
  std::vector<double> predict_logits(const data::Dataset& batch) const;
  std::vector<double> predict(const data::Dataset& batch) const;

  /// Gradients of a loss whose derivative w.r.t. each logit is `dlogit`.
  GradientSet backward(const ForwardCache& cache, std::span<const double> dlogit) const;
  GradientSet zero_gradients() const;

  /// Deep copy, typically used as a read-only teacher snapshot.
  PredictionModel clone_frozen() const { return *this; }

  /// FNV-1a over all parameter bytes.
  std::uint64_t checksum() const noexcept;
  std::uint64_t embedding_checksum() const noexcept;
  std::size_t parameter_count() const noexcept;

 private:
  void build_slots();
  void check_batch(const data::Dataset& batch) const;
  void forward_impl(const data::Dataset& batch, ForwardCache& cache, std::vector<double>& logits) const;

  data::FieldSchema schema_;
  ArchSpec spec_;
  EmbeddingTable embedding_;
  InteractionNet net_;
  std::vector<FieldSlot> slots_;
  std::uint64_t version_ = 0;
};

// ---------------------------------------------------------------------------
// Losses

inline constexpr double kProbClamp = 1e-7;

double sigmoid(double z) noexcept;
double clamp_prob(double p) noexcept;

/// Mean binary cross-entropy, natural log, probabilities clamped to
/// [1e-7, 1 - 1e-7]. Labels may be soft.
double bce_loss(std::span<const double> probs, std::span<const double> labels);

/// Cross-entropy of student against (constant) teacher probabilities. For
/// temperature != 1 both are re-derived as sigmoid(logit / T).
double kd_loss(std::span<const double> student_probs, std::span<const double> teacher_probs,
               double temperature);
double kd_loss_logits(std::span<const double> student_logits, std::span<const double> teacher_logits,
                      double temperature);

/// Per-batch value and logit-gradient of BCE(p_S, y) + lambda * KD(p_S, p_T).
///
/// Rows flagged pseudo contribute only BCE against their soft label (and no
/// KD term); bce, kd and total are all normalised by the full batch size so
/// total == bce + lambda * kd.
struct Objective {
  double bce = 0.0;
  double kd = 0.0;
  double total = 0.0;
  std::vector<double> dlogit;
};

Objective distill_objective(std::span<const double> student_logits, const data::Dataset& batch,
                            std::span<const double> teacher_logits, double lambda, double temperature);

/// BCE on hard-labelled rows only; pseudo rows get zero gradient.
Objective task_objective(std::span<const double> logits, const data::Dataset& batch);

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::uint64_t step = 0;
  /// Updates applied to the embedding block; it skips steps while frozen, so
  /// its bias correction runs on its own clock.
  std::uint64_t embedding_step = 0;
  double lr_embedding = 0.1;
  double lr_net = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Matrix m_embedding, v_embedding;
  std::vector<double> m_net, v_net;

  static AdamState for_model(const PredictionModel& model, double lr_embedding, double lr_net);
};

/// One Adam update with per-block learning rates. A frozen embedding table
/// is left untouched, as are its moments.
void adam_step(PredictionModel& model, const GradientSet& grads, AdamState& state);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr const char* kCheckpointVersion = "crossadapt-ckpt-v1";

nlohmann::json schema_to_json(const data::FieldSchema& schema);
data::FieldSchema schema_from_json(const nlohmann::json& j);

/// Self-describing JSON container; `extra` sections (projection plan,
/// vocabulary, ...) are stored alongside the parameters.
nlohmann::json to_checkpoint(const PredictionModel& model, const nlohmann::json& extra = nlohmann::json::object());
PredictionModel from_checkpoint(const nlohmann::json& j);

void save_checkpoint(const std::string& path, const PredictionModel& model,
                     const nlohmann::json& extra = nlohmann::json::object());
/// Returns the model; `extra` receives the non-parameter sections if given.
PredictionModel load_checkpoint(const std::string& path, nlohmann::json* extra = nullptr);

}  // namespace crossadapt::model
