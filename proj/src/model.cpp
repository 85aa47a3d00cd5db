#include "crossadapt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "crossadapt/error.hpp"
#include "crossadapt/rng.hpp"

namespace crossadapt::model {

const char* to_string(Arch arch) { return arch == Arch::MLP ? "mlp" : "fm_mlp"; }

Arch parse_arch(const std::string& name) {
  if (name == "mlp" || name == "MLP") return Arch::MLP;
  if (name == "fm_mlp" || name == "FM_MLP") return Arch::FM_MLP;
  fail(ErrorKind::Validation, "unknown architecture '" + name + "'");
}

nlohmann::json ArchSpec::to_json() const {
  return {{"arch", to_string(arch)}, {"dim", dim}, {"hidden", hidden}};
}

ArchSpec ArchSpec::from_json(const nlohmann::json& j) {
  ArchSpec s;
  for (const auto& [key, value] : j.items())
    require(key == "arch" || key == "dim" || key == "hidden", ErrorKind::Validation,
            "unknown model spec key '" + key + "'");
  if (j.contains("arch")) s.arch = parse_arch(j.at("arch").get<std::string>());
  if (j.contains("dim")) s.dim = j.at("dim").get<std::size_t>();
  if (j.contains("hidden")) s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  require(s.dim >= 1, ErrorKind::Validation, "model dim must be >= 1");
  for (auto h : s.hidden) require(h >= 1, ErrorKind::Validation, "hidden widths must be >= 1");
  return s;
}

// ---------------------------------------------------------------------------
// InteractionNet layout

std::size_t InteractionNet::weight_offset(std::size_t layer) const noexcept {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  return off;
}

std::size_t InteractionNet::bias_offset(std::size_t layer) const noexcept {
  return weight_offset(layer) + layer_dims[layer] * layer_dims[layer + 1];
}

std::size_t InteractionNet::fm_offset() const noexcept { return weight_offset(num_layers()); }

std::size_t InteractionNet::param_count(Arch arch, std::span<const std::size_t> dims) noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l] * dims[l + 1] + dims[l + 1];
  return n + (arch == Arch::FM_MLP ? 1 : 0);
}

// ---------------------------------------------------------------------------
// GradientSet

void GradientSet::set_zero() {
  std::fill(embedding.data().begin(), embedding.data().end(), 0.0);
  std::fill(net.begin(), net.end(), 0.0);
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  require(embedding.rows() == other.embedding.rows() && embedding.cols() == other.embedding.cols() &&
              net.size() == other.net.size(),
          ErrorKind::Shape, "gradient layouts differ");
  for (std::size_t i = 0; i < embedding.size(); ++i) embedding.data()[i] += other.embedding.data()[i];
  for (std::size_t i = 0; i < net.size(); ++i) net[i] += other.net[i];
  return *this;
}

GradientSet& GradientSet::operator*=(double s) {
  for (double& x : embedding.data()) x *= s;
  for (double& x : net) x *= s;
  return *this;
}

// ---------------------------------------------------------------------------
// PredictionModel

PredictionModel::PredictionModel(data::FieldSchema schema, ArchSpec spec)
    : schema_(std::move(schema)), spec_(std::move(spec)) {
  require(schema_.num_fields() >= 1, ErrorKind::Schema, "model needs at least one field");
  require(spec_.dim >= 1, ErrorKind::Parameter, "embedding dim must be >= 1");
  embedding_.vocab_size = schema_.total_rows();
  embedding_.dim = spec_.dim;
  embedding_.weights = Matrix(embedding_.vocab_size, spec_.dim);
  net_.arch = spec_.arch;
  net_.layer_dims.push_back(schema_.num_fields() * spec_.dim);
  for (auto h : spec_.hidden) net_.layer_dims.push_back(h);
  net_.layer_dims.push_back(1);
  net_.params.assign(InteractionNet::param_count(net_.arch, net_.layer_dims), 0.0);
  build_slots();
}

void PredictionModel::build_slots() {
  slots_.clear();
  std::size_t offset = 0, cat = 0, num = 0;
  for (const auto& f : schema_.fields) {
    if (f.kind == data::FieldKind::Categorical) {
      slots_.push_back({f.kind, offset, cat++});
      offset += f.vocab_size;
    } else {
      slots_.push_back({f.kind, offset, num++});
      offset += 1;
    }
  }
}

PredictionModel PredictionModel::random(const data::FieldSchema& schema, const ArchSpec& spec,
                                        std::uint64_t seed) {
  PredictionModel m(schema, spec);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.dim));
  for (double& w : m.embedding_.weights.data()) w = rng.uniform(-bound, bound);
  auto& net = m.net_;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double fan_in = static_cast<double>(net.layer_dims[l]);
    const double fan_out = static_cast<double>(net.layer_dims[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    const std::size_t off = net.weight_offset(l);
    const std::size_t count = net.layer_dims[l] * net.layer_dims[l + 1];
    for (std::size_t i = 0; i < count; ++i) net.params[off + i] = rng.uniform(-limit, limit);
  }
  return m;
}

void PredictionModel::set_embedding_weights(Matrix weights) {
  require(weights.rows() == embedding_.vocab_size && weights.cols() == embedding_.dim, ErrorKind::Shape,
          "embedding weights must be " + std::to_string(embedding_.vocab_size) + "x" +
              std::to_string(embedding_.dim));
  ++version_;
  embedding_.weights = std::move(weights);
}

void PredictionModel::check_batch(const data::Dataset& batch) const {
  require(batch.categorical.size() == schema_.num_categorical() &&
              batch.numerical.size() == schema_.num_numerical(),
          ErrorKind::Schema, "batch does not conform to the model field schema");
  for (std::size_t f = 0; f < slots_.size(); ++f) {
    const auto& slot = slots_[f];
    if (slot.kind == data::FieldKind::Categorical) {
      const auto& col = batch.categorical[slot.column];
      require(col.size() == batch.size(), ErrorKind::Shape, "categorical column length mismatch");
      const auto vocab = schema_.fields[f].vocab_size;
      for (auto tok : col)
        require(tok < vocab, ErrorKind::Input,
                "token " + std::to_string(tok) + " out of vocabulary for field '" + schema_.fields[f].name + "'");
    } else {
      require(batch.numerical[slot.column].size() == batch.size(), ErrorKind::Shape,
              "numerical column length mismatch");
    }
  }
}

void PredictionModel::forward_impl(const data::Dataset& batch, ForwardCache& cache,
                                   std::vector<double>& logits) const {
  check_batch(batch);
  const std::size_t B = batch.size();
  const std::size_t F = slots_.size();
  const std::size_t d = spec_.dim;
  cache.model_version = version_;
  cache.batch = B;
  cache.rows.resize(B * F);
  cache.scales.resize(B * F);
  for (std::size_t f = 0; f < F; ++f) {
    const auto& slot = slots_[f];
    for (std::size_t i = 0; i < B; ++i) {
      if (slot.kind == data::FieldKind::Categorical) {
        cache.rows[i * F + f] = slot.row_offset + batch.categorical[slot.column][i];
        cache.scales[i * F + f] = 1.0;
      } else {
        cache.rows[i * F + f] = slot.row_offset;
        cache.scales[i * F + f] = batch.numerical[slot.column][i];
      }
    }
  }

  const auto& dims = net_.layer_dims;
  const std::size_t L = net_.num_layers();
  cache.activations.resize(L);
  auto& x0 = cache.activations[0];
  x0.assign(B * dims[0], 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t f = 0; f < F; ++f) {
      const auto src = embedding_.weights.row(cache.rows[i * F + f]);
      const double s = cache.scales[i * F + f];
      double* dst = x0.data() + i * dims[0] + f * d;
      for (std::size_t k = 0; k < d; ++k) dst[k] = s * src[k];
    }
  }

  std::vector<double> out;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = dims[l], width = dims[l + 1];
    out.assign(B * width, 0.0);
    const double* bias = net_.params.data() + net_.bias_offset(l);
    for (std::size_t i = 0; i < B; ++i) std::copy(bias, bias + width, out.data() + i * width);
    linalg::gemm_acc(cache.activations[l],
                     std::span<const double>(net_.params.data() + net_.weight_offset(l), in * width), out, B,
                     in, width);
    if (l + 1 < L) {
      for (double& v : out) v = v < 0.0 ? 0.0 : v;
      cache.activations[l + 1] = out;
    }
  }
  logits = std::move(out);

  if (net_.arch == Arch::FM_MLP) {
    const double fm_w = net_.params[net_.fm_offset()];
    cache.fm_sum.assign(B * d, 0.0);
    cache.fm_value.assign(B, 0.0);
    for (std::size_t i = 0; i < B; ++i) {
      const double* x = x0.data() + i * dims[0];
      double* s = cache.fm_sum.data() + i * d;
      double sq = 0.0;
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t k = 0; k < d; ++k) {
          s[k] += x[f * d + k];
          sq += x[f * d + k] * x[f * d + k];
        }
      double ss = 0.0;
      for (std::size_t k = 0; k < d; ++k) ss += s[k] * s[k];
      cache.fm_value[i] = 0.5 * (ss - sq);
      logits[i] += fm_w * cache.fm_value[i];
    }
  }
}

ForwardResult PredictionModel::forward(const data::Dataset& batch) const {
  ForwardResult r;
  forward_impl(batch, r.cache, r.logits);
  r.probs.resize(r.logits.size());
  for (std::size_t i = 0; i < r.logits.size(); ++i) r.probs[i] = sigmoid(r.logits[i]);
  return r;
}

std::vector<double> PredictionModel::predict_logits(const data::Dataset& batch) const {
  std::vector<double> logits;
  constexpr std::size_t kChunk = 4096;
  logits.reserve(batch.size());
  for (std::size_t begin = 0; begin < batch.size(); begin += kChunk) {
    const std::size_t end = std::min(batch.size(), begin + kChunk);
    ForwardCache cache;
    std::vector<double> part;
    if (begin == 0 && end == batch.size()) {
      forward_impl(batch, cache, part);
    } else {
      forward_impl(batch.slice(begin, end), cache, part);
    }
    logits.insert(logits.end(), part.begin(), part.end());
  }
  return logits;
}

std::vector<double> PredictionModel::predict(const data::Dataset& batch) const {
  auto p = predict_logits(batch);
  for (double& v : p) v = sigmoid(v);
  return p;
}

GradientSet PredictionModel::zero_gradients() const {
  GradientSet g;
  if (!embedding_.frozen) g.embedding = Matrix(embedding_.vocab_size, embedding_.dim);
  g.net.assign(net_.params.size(), 0.0);
  return g;
}

GradientSet PredictionModel::backward(const ForwardCache& cache, std::span<const double> dlogit) const {
  require(cache.model_version == version_ && !cache.activations.empty(), ErrorKind::State,
          "forward cache is stale or empty");
  const std::size_t B = cache.batch;
  require(dlogit.size() == B, ErrorKind::Shape, "dlogit length does not match the cached batch");
  const std::size_t F = slots_.size();
  const std::size_t d = spec_.dim;
  const auto& dims = net_.layer_dims;
  const std::size_t L = net_.num_layers();

  GradientSet g = zero_gradients();
  std::vector<double> delta(dlogit.begin(), dlogit.end());
  std::vector<double> dx0;
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = dims[l], width = dims[l + 1];
    const auto& a = cache.activations[l];
    linalg::gemm_tn_acc(a, delta, std::span<double>(g.net.data() + net_.weight_offset(l), in * width), B, in,
                        width);
    double* gb = g.net.data() + net_.bias_offset(l);
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < width; ++j) gb[j] += delta[i * width + j];
    if (l == 0 && embedding_.frozen) break;
    std::vector<double> da(B * in, 0.0);
    linalg::gemm_nt_acc(delta, std::span<const double>(net_.params.data() + net_.weight_offset(l), in * width),
                        da, B, width, in);
    if (l > 0) {
      for (std::size_t i = 0; i < da.size(); ++i)
        if (a[i] <= 0.0) da[i] = 0.0;
      delta = std::move(da);
    } else {
      dx0 = std::move(da);
    }
  }

  if (net_.arch == Arch::FM_MLP) {
    const double fm_w = net_.params[net_.fm_offset()];
    double gfm = 0.0;
    for (std::size_t i = 0; i < B; ++i) gfm += dlogit[i] * cache.fm_value[i];
    g.net[net_.fm_offset()] = gfm;
    if (!embedding_.frozen) {
      const auto& x0 = cache.activations[0];
      for (std::size_t i = 0; i < B; ++i) {
        const double c = dlogit[i] * fm_w;
        if (c == 0.0) continue;
        const double* s = cache.fm_sum.data() + i * d;
        const double* x = x0.data() + i * dims[0];
        double* dx = dx0.data() + i * dims[0];
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t k = 0; k < d; ++k) dx[f * d + k] += c * (s[k] - x[f * d + k]);
      }
    }
  }

  if (!embedding_.frozen) {
    for (std::size_t i = 0; i < B; ++i) {
      for (std::size_t f = 0; f < F; ++f) {
        auto grow = g.embedding.row(cache.rows[i * F + f]);
        const double s = cache.scales[i * F + f];
        const double* dx = dx0.data() + i * dims[0] + f * d;
        for (std::size_t k = 0; k < d; ++k) grow[k] += s * dx[k];
      }
    }
  }
  return g;
}

std::uint64_t PredictionModel::embedding_checksum() const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : embedding_.weights.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::uint64_t PredictionModel::checksum() const noexcept {
  std::uint64_t h = embedding_checksum();
  for (double v : net_.params) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::size_t PredictionModel::parameter_count() const noexcept {
  return embedding_.weights.size() + net_.params.size();
}

// ---------------------------------------------------------------------------
// Losses

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clamp_prob(double p) noexcept { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

namespace {

double cross_entropy(double target, double p) noexcept {
  const double pc = clamp_prob(p);
  return -(target * std::log(pc) + (1.0 - target) * std::log(1.0 - pc));
}

bool clamped(double p) noexcept { return p < kProbClamp || p > 1.0 - kProbClamp; }

double prob_to_logit(double p) noexcept {
  const double pc = clamp_prob(p);
  return std::log(pc) - std::log1p(-pc);
}

}  // namespace

double bce_loss(std::span<const double> probs, std::span<const double> labels) {
  require(probs.size() == labels.size(), ErrorKind::Shape, "bce_loss length mismatch");
  require(!probs.empty(), ErrorKind::Shape, "bce_loss on empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) s += cross_entropy(labels[i], probs[i]);
  return s / static_cast<double>(probs.size());
}

double kd_loss(std::span<const double> student_probs, std::span<const double> teacher_probs,
               double temperature) {
  require(temperature > 0.0, ErrorKind::Parameter, "temperature must be positive");
  require(student_probs.size() == teacher_probs.size(), ErrorKind::Shape, "kd_loss length mismatch");
  require(!student_probs.empty(), ErrorKind::Shape, "kd_loss on empty input");
  if (temperature == 1.0) {
    double s = 0.0;
    for (std::size_t i = 0; i < student_probs.size(); ++i) s += cross_entropy(teacher_probs[i], student_probs[i]);
    return s / static_cast<double>(student_probs.size());
  }
  std::vector<double> zs(student_probs.size()), zt(teacher_probs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    zs[i] = prob_to_logit(student_probs[i]);
    zt[i] = prob_to_logit(teacher_probs[i]);
  }
  return kd_loss_logits(zs, zt, temperature);
}

double kd_loss_logits(std::span<const double> student_logits, std::span<const double> teacher_logits,
                      double temperature) {
  require(temperature > 0.0, ErrorKind::Parameter, "temperature must be positive");
  require(student_logits.size() == teacher_logits.size(), ErrorKind::Shape, "kd_loss length mismatch");
  require(!student_logits.empty(), ErrorKind::Shape, "kd_loss on empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < student_logits.size(); ++i)
    s += cross_entropy(sigmoid(teacher_logits[i] / temperature), sigmoid(student_logits[i] / temperature));
  return s / static_cast<double>(student_logits.size());
}

Objective distill_objective(std::span<const double> student_logits, const data::Dataset& batch,
                            std::span<const double> teacher_logits, double lambda, double temperature) {
  const std::size_t B = student_logits.size();
  require(B == batch.size() && B > 0, ErrorKind::Shape, "objective: logits do not match batch");
  require(teacher_logits.empty() || teacher_logits.size() == B, ErrorKind::Shape,
          "objective: teacher logits do not match batch");
  require(temperature > 0.0, ErrorKind::Parameter, "temperature must be positive");
  require(lambda >= 0.0, ErrorKind::Parameter, "lambda must be non-negative");
  const bool use_kd = !teacher_logits.empty();
  const double inv_b = 1.0 / static_cast<double>(B);
  Objective obj;
  obj.dlogit.assign(B, 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    const double p = sigmoid(student_logits[i]);
    const double target = batch.pseudo(i) ? batch.soft_label[i] : batch.label[i];
    obj.bce += cross_entropy(target, p);
    double g = clamped(p) ? 0.0 : (p - target);
    if (use_kd && !batch.pseudo(i)) {
      const double qs = sigmoid(student_logits[i] / temperature);
      const double qt = sigmoid(teacher_logits[i] / temperature);
      obj.kd += cross_entropy(qt, qs);
      if (!clamped(qs)) g += lambda * (qs - qt) / temperature;
    }
    obj.dlogit[i] = g * inv_b;
  }
  obj.bce *= inv_b;
  obj.kd *= inv_b;
  obj.total = obj.bce + lambda * obj.kd;
  return obj;
}

Objective task_objective(std::span<const double> logits, const data::Dataset& batch) {
  const std::size_t B = logits.size();
  require(B == batch.size() && B > 0, ErrorKind::Shape, "objective: logits do not match batch");
  const double inv_b = 1.0 / static_cast<double>(B);
  Objective obj;
  obj.dlogit.assign(B, 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    if (batch.pseudo(i)) continue;
    const double p = sigmoid(logits[i]);
    obj.bce += cross_entropy(batch.label[i], p);
    obj.dlogit[i] = clamped(p) ? 0.0 : (p - batch.label[i]) * inv_b;
  }
  obj.bce *= inv_b;
  obj.total = obj.bce;
  return obj;
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::for_model(const PredictionModel& model, double lr_embedding, double lr_net) {
  AdamState s;
  s.lr_embedding = lr_embedding;
  s.lr_net = lr_net;
  const auto& e = model.embedding();
  s.m_embedding = Matrix(e.vocab_size, e.dim);
  s.v_embedding = Matrix(e.vocab_size, e.dim);
  s.m_net.assign(model.net().params.size(), 0.0);
  s.v_net.assign(model.net().params.size(), 0.0);
  return s;
}

namespace {

void adam_block(std::span<double> params, std::span<const double> grads, std::span<double> m,
                std::span<double> v, double lr, const AdamState& s, double bc1, double bc2) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace

void adam_step(PredictionModel& model, const GradientSet& grads, AdamState& state) {
  const auto& net = model.net();
  require(grads.net.size() == net.params.size() && state.m_net.size() == net.params.size(), ErrorKind::Shape,
          "adam_step: net gradient layout mismatch");
  const auto& emb = model.embedding();
  if (model.frozen()) {
    require(!grads.has_embedding(), ErrorKind::Shape, "adam_step: gradient for a frozen embedding table");
  } else {
    require(grads.embedding.rows() == emb.vocab_size && grads.embedding.cols() == emb.dim &&
                state.m_embedding.rows() == emb.vocab_size && state.m_embedding.cols() == emb.dim,
            ErrorKind::Shape, "adam_step: embedding gradient layout mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  adam_block(model.mutable_net().params, grads.net, state.m_net, state.v_net, state.lr_net, state, bc1, bc2);
  if (!model.frozen()) {
    ++state.embedding_step;
    const double te = static_cast<double>(state.embedding_step);
    adam_block(model.mutable_embedding().weights.data(), grads.embedding.data(), state.m_embedding.data(),
               state.v_embedding.data(), state.lr_embedding, state, 1.0 - std::pow(state.beta1, te),
               1.0 - std::pow(state.beta2, te));
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json schema_to_json(const data::FieldSchema& schema) {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : schema.fields)
    fields.push_back({{"name", f.name},
                      {"kind", f.kind == data::FieldKind::Categorical ? "cat" : "num"},
                      {"vocab_size", f.vocab_size}});
  return fields;
}

data::FieldSchema schema_from_json(const nlohmann::json& j) {
  data::FieldSchema schema;
  for (const auto& f : j) {
    const auto kind = f.at("kind").get<std::string>();
    require(kind == "cat" || kind == "num", ErrorKind::Schema, "unknown field kind '" + kind + "'");
    schema.fields.push_back({f.at("name").get<std::string>(),
                             kind == "cat" ? data::FieldKind::Categorical : data::FieldKind::Numerical,
                             f.at("vocab_size").get<std::size_t>()});
  }
  return schema;
}

nlohmann::json to_checkpoint(const PredictionModel& model, const nlohmann::json& extra) {
  nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
  j["version"] = kCheckpointVersion;
  j["schema"] = schema_to_json(model.schema());
  j["arch"] = model.spec().to_json();
  const auto& e = model.embedding();
  j["embedding"] = {{"vocab_size", e.vocab_size},
                    {"dim", e.dim},
                    {"frozen", e.frozen},
                    {"weights", e.weights.values()}};
  j["net"] = {{"layer_dims", model.net().layer_dims}, {"params", model.net().params}};
  return j;
}

PredictionModel from_checkpoint(const nlohmann::json& j) {
  require(j.contains("version") && j.at("version") == kCheckpointVersion, ErrorKind::Validation,
          std::string("checkpoint version tag must be '") + kCheckpointVersion + "'");
  PredictionModel m(schema_from_json(j.at("schema")), ArchSpec::from_json(j.at("arch")));
  const auto& e = j.at("embedding");
  auto weights = e.at("weights").get<std::vector<double>>();
  m.set_embedding_weights(Matrix(e.at("vocab_size").get<std::size_t>(), e.at("dim").get<std::size_t>(),
                                 std::move(weights)));
  m.set_frozen(e.at("frozen").get<bool>());
  const auto& n = j.at("net");
  require(n.at("layer_dims").get<std::vector<std::size_t>>() == m.net().layer_dims, ErrorKind::Schema,
          "checkpoint layer dims disagree with the architecture");
  auto params = n.at("params").get<std::vector<double>>();
  require(params.size() == m.net().params.size(), ErrorKind::Schema, "checkpoint net parameter count mismatch");
  m.mutable_net().params = std::move(params);
  return m;
}

void save_checkpoint(const std::string& path, const PredictionModel& model, const nlohmann::json& extra) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write checkpoint '" + path + "'");
  out << to_checkpoint(model, extra).dump();
  require(out.good(), ErrorKind::Io, "failed writing checkpoint '" + path + "'");
}

PredictionModel load_checkpoint(const std::string& path, nlohmann::json* extra) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, "checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  auto model = from_checkpoint(j);
  if (extra) {
    *extra = j;
    for (const char* key : {"version", "schema", "arch", "embedding", "net"}) extra->erase(key);
  }
  return model;
}

}  // namespace crossadapt::model
