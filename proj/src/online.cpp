#include "crossadapt/online.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "crossadapt/error.hpp"
#include "crossadapt/metrics.hpp"
#include "crossadapt/sampler.hpp"

namespace crossadapt::online {

void OnlineConfig::validate() const {
  require(tau >= 1, ErrorKind::Parameter, "tau must be >= 1");
  require(batch_size >= 1, ErrorKind::Parameter, "batch_size must be >= 1");
  require(lambda >= 0.0, ErrorKind::Parameter, "lambda must be >= 0");
  require(temperature > 0.0, ErrorKind::Parameter, "temperature must be > 0");
  require(!r_enh || *r_enh >= 0.0, ErrorKind::Parameter, "r_enh must be >= 0");
  require(lr_embedding > 0.0 && lr_net > 0.0 && teacher_lr_ratio > 0.0, ErrorKind::Parameter,
          "learning rates must be > 0");
  require(rolling_window >= 1, ErrorKind::Parameter, "rolling_window must be >= 1");
}

nlohmann::json OnlineConfig::to_json() const {
  nlohmann::json j = {{"lr_embedding", lr_embedding},
                      {"lr_net", lr_net},
                      {"teacher_lr_ratio", teacher_lr_ratio},
                      {"average_teacher_grad", average_teacher_grad},
                      {"tau", tau},
                      {"lambda", lambda},
                      {"temperature", temperature},
                      {"batch_size", batch_size},
                      {"seed", seed},
                      {"co_evolve", co_evolve},
                      {"rolling_window", rolling_window}};
  j["r_enh"] = r_enh ? nlohmann::json(*r_enh) : nlohmann::json(nullptr);
  return j;
}

CoEvolutionState CoEvolutionState::create(const model::PredictionModel* teacher, const model::PredictionModel& student,
                                          const OnlineConfig& cfg) {
  cfg.validate();
  CoEvolutionState s;
  s.student_adam = model::AdamState::for_model(student, cfg.lr_embedding, cfg.lr_net);
  if (teacher) {
    s.teacher_adam = model::AdamState::for_model(*teacher, cfg.lr_embedding * cfg.teacher_lr_ratio,
                                                 cfg.lr_net * cfg.teacher_lr_ratio);
    s.teacher_grad = teacher->zero_gradients();
  }
  return s;
}

data::Dataset augment_batch(const data::Dataset& batch, const data::Dataset& history, double r_enh, Rng& rng) {
  require(r_enh >= 0.0, ErrorKind::Parameter, "r_enh must be >= 0");
  const auto n = static_cast<std::size_t>(std::floor(r_enh * static_cast<double>(batch.size()) + 1e-9));
  if (n == 0) return batch;
  require(!history.empty(), ErrorKind::Data, "batch augmentation requested but the history pool is empty");
  data::Dataset out = batch;
  out.append(history.select(sampler::sample_indices(history.size(), n, rng)));
  return out;
}

data::Dataset augment_batch(const data::Dataset& batch, const data::Dataset& history, double r_enh,
                            std::uint64_t seed) {
  Rng rng(seed);
  return augment_batch(batch, history, r_enh, rng);
}

CoStepResult co_step(model::PredictionModel* teacher, model::PredictionModel& student, const data::Dataset& batch,
                     const OnlineConfig& cfg, CoEvolutionState& state, std::size_t hist_rows) {
  require(!batch.empty(), ErrorKind::Data, "empty online batch");
  require(state.student_adam.m_net.size() == student.net().params.size(), ErrorKind::State,
          "optimizer state does not match the student");
  const bool update_teacher = teacher && cfg.co_evolve;
  if (update_teacher)
    require(state.teacher_grad.net.size() == teacher->net().params.size() &&
                state.teacher_adam.m_net.size() == teacher->net().params.size(),
            ErrorKind::State, "co-evolution state does not match the teacher");

  ++state.t;
  CoStepResult res;
  res.log.t = state.t;
  res.log.hist_rows = hist_rows;

  auto s_fwd = student.forward(batch);
  std::vector<double> t_logits;
  model::ForwardResult t_fwd;
  if (update_teacher) {
    t_fwd = teacher->forward(batch);
    t_logits = t_fwd.logits;
  } else if (teacher) {
    t_logits = teacher->predict_logits(batch);
  }

  const auto obj = model::distill_objective(s_fwd.logits, batch, t_logits, cfg.lambda, cfg.temperature);
  require(std::isfinite(obj.total), ErrorKind::Numeric, "non-finite student loss at step " + std::to_string(state.t));
  res.log.bce_student = obj.bce;
  res.log.kd = obj.kd;
  res.student_probs = std::move(s_fwd.probs);
  model::adam_step(student, student.backward(s_fwd.cache, obj.dlogit), state.student_adam);

  if (update_teacher) {
    const auto t_obj = model::task_objective(t_logits, batch);
    res.log.bce_teacher = t_obj.bce;
    state.teacher_grad += teacher->backward(t_fwd.cache, t_obj.dlogit);
    ++state.accumulated;
    if (state.t % cfg.tau == 0) {
      if (cfg.average_teacher_grad) state.teacher_grad *= 1.0 / static_cast<double>(cfg.tau);
      model::adam_step(*teacher, state.teacher_grad, state.teacher_adam);
      state.teacher_grad.set_zero();
      state.accumulated = 0;
      ++state.teacher_updates;
      res.log.teacher_tick = true;
    }
  } else if (teacher) {
    res.log.bce_teacher = model::task_objective(t_logits, batch).bce;
  }
  return res;
}

void RollingMetrics::add(double pred, double label) {
  const double p = model::clamp_prob(pred);
  const double loss = -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
  items_.emplace_back(pred, label);
  loss_sum_ += loss;
  if (items_.size() > window_) {
    const auto [op, oy] = items_.front();
    const double q = model::clamp_prob(op);
    loss_sum_ -= -(oy * std::log(q) + (1.0 - oy) * std::log(1.0 - q));
    items_.pop_front();
  }
}

double RollingMetrics::logloss() const {
  if (items_.empty()) return std::numeric_limits<double>::quiet_NaN();
  return loss_sum_ / static_cast<double>(items_.size());
}

double RollingMetrics::auc() const {
  std::vector<double> p, y;
  p.reserve(items_.size());
  y.reserve(items_.size());
  bool pos = false, neg = false;
  for (const auto& [pi, yi] : items_) {
    p.push_back(pi);
    y.push_back(yi);
    (yi > 0.5 ? pos : neg) = true;
  }
  if (!pos || !neg) return std::numeric_limits<double>::quiet_NaN();
  return metrics::auc(p, y);
}

void OnlineResult::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out.precision(10);
  out << "t,bce_S,kd,bce_T,rolling_auc,rolling_logloss,teacher_tick,n_hist_rows\n";
  for (const auto& s : steps)
    out << s.t << ',' << s.bce_student << ',' << s.kd << ',' << s.bce_teacher << ',' << s.rolling_auc << ','
        << s.rolling_logloss << ',' << (s.teacher_tick ? 1 : 0) << ',' << s.hist_rows << '\n';
}

OnlineResult run_online(model::PredictionModel* teacher, model::PredictionModel& student, const data::Dataset& stream,
                        const data::Dataset& history, double r_enh, const OnlineConfig& cfg,
                        const OrderHook& hook) {
  cfg.validate();
  require(stream.is_time_sorted(), ErrorKind::Protocol, "online stream is not sorted by timestamp");
  if (teacher) require(teacher->schema() == student.schema(), ErrorKind::Schema, "teacher and student schemas differ");
  OnlineResult res;
  res.r_enh = cfg.r_enh.value_or(r_enh);
  require(res.r_enh >= 0.0, ErrorKind::Parameter, "r_enh must be >= 0");

  auto state = CoEvolutionState::create(teacher, student, cfg);
  Rng rng(derive_seed(cfg.seed, 0x6f6e6c));
  RollingMetrics rolling(cfg.rolling_window);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t begin = 0; begin < stream.size(); begin += cfg.batch_size) {
    const auto chunk = stream.slice(begin, std::min(stream.size(), begin + cfg.batch_size));
    if (hook) hook(state.t + 1, chunk);
    const auto batch = augment_batch(chunk, history, res.r_enh, rng);
    auto step = co_step(teacher, student, batch, cfg, state, batch.size() - chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) rolling.add(step.student_probs[i], chunk.label[i]);
    step.log.rolling_auc = rolling.auc();
    step.log.rolling_logloss = rolling.logloss();
    res.steps.push_back(step.log);
  }
  res.train_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  res.teacher_updates = state.teacher_updates;
  return res;
}

std::size_t recovery_steps(const std::vector<CoStepLog>& steps, std::size_t drift_step, double tolerance) {
  require(drift_step >= 1 && drift_step < steps.size(), ErrorKind::Parameter, "drift step outside the run");
  const double level = tolerance * steps[drift_step - 1].rolling_logloss;
  bool risen = false;
  for (std::size_t s = drift_step; s < steps.size(); ++s) {
    if (steps[s].rolling_logloss > level)
      risen = true;
    else if (risen)
      return s - drift_step;
  }
  return risen ? steps.size() - drift_step : 0;
}

}  // namespace crossadapt::online
