#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "crossadapt/error.hpp"
#include "crossadapt/model.hpp"
#include "gradcheck.hpp"
#include "toy.hpp"

using namespace crossadapt;
using model::Arch;
using model::PredictionModel;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

PredictionModel small_model(Arch arch, std::uint64_t seed = 1) {
  return PredictionModel::random(toy::schema({5, 3}, 1), {arch, 3, {4, 2}}, seed);
}

}  // namespace

TEST(Forward, ZeroNetGivesHalf) {
  auto m = small_model(Arch::FM_MLP);
  for (double& p : m.mutable_net().params) p = 0.0;
  for (double p : m.predict(toy::rows(m.schema(), 20, 3))) EXPECT_EQ(p, 0.5);
}

TEST(Forward, SingleLinearLayerByHand) {
  PredictionModel m(toy::schema({2}), {Arch::MLP, 1, {}});
  m.set_embedding_weights(linalg::Matrix{{0.5}, {-1.0}});
  auto& net = m.mutable_net();
  net.params[net.weight_offset(0)] = 2.0;
  net.params[net.bias_offset(0)] = 0.1;
  data::Dataset b;
  b.categorical = {{0, 1}};
  b.label = {1, 0};
  b.timestamp = {0, 1};
  const auto p = m.predict(b);
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.1)), 1e-15);
  EXPECT_NEAR(p[1], 1.0 / (1.0 + std::exp(1.9)), 1e-15);
}

TEST(Forward, DuplicateRowsAgree) {
  const auto m = small_model(Arch::FM_MLP);
  auto rows = toy::rows(m.schema(), 5, 4);
  rows.append(rows);
  const auto p = m.predict(rows);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(p[i], p[i + 5]);
}

TEST(Forward, RejectsBadInput) {
  const auto m = small_model(Arch::MLP);
  auto rows = toy::rows(m.schema(), 3, 4);
  rows.categorical[0][1] = 5;
  EXPECT_EQ(kind_of([&] { m.predict(rows); }), ErrorKind::Input);
  auto wrong = toy::rows(toy::schema({5}), 3, 4);
  EXPECT_EQ(kind_of([&] { m.predict(wrong); }), ErrorKind::Schema);
}

TEST(Loss, BceExamples) {
  const std::vector<double> half{0.5}, one{1.0}, p08{0.8};
  EXPECT_NEAR(model::bce_loss(half, one), std::log(2.0), 1e-12);
  EXPECT_NEAR(model::bce_loss(p08, one), 0.2231, 1e-4);
  const std::vector<double> exact{0.0, 1.0, 1.0, 0.0};
  EXPECT_LE(model::bce_loss(exact, exact), 1e-6);
  const std::vector<double> two{0.5, 0.5};
  EXPECT_EQ(kind_of([&] { model::bce_loss(two, one); }), ErrorKind::Shape);
}

TEST(Loss, KdExamples) {
  const std::vector<double> half{0.5};
  EXPECT_NEAR(model::kd_loss(half, half, 1.0), std::log(2.0), 1e-12);
  const std::vector<double> ps{0.6}, pt{0.8};
  EXPECT_NEAR(model::kd_loss(ps, pt, 1.0), 0.5919, 1e-4);
  EXPECT_EQ(kind_of([&] { model::kd_loss(ps, pt, 0.0); }), ErrorKind::Parameter);
}

TEST(Loss, KdTemperatureSoftensBothSides) {
  const std::vector<double> ps{0.6}, pt{0.8};
  const double zs = std::log(0.6 / 0.4), zt = std::log(0.8 / 0.2);
  const double qs = model::sigmoid(zs / 4.0), qt = model::sigmoid(zt / 4.0);
  EXPECT_NEAR(model::kd_loss(ps, pt, 4.0), -(qt * std::log(qs) + (1 - qt) * std::log(1 - qs)), 1e-12);
}

TEST(Backward, FiniteDifferencesBothArchitectures) {
  for (Arch arch : {Arch::MLP, Arch::FM_MLP}) {
    for (bool frozen : {false, true}) {
      for (std::uint64_t s = 0; s < 12; ++s) {
        const auto c = gradcheck::make_case(arch, frozen, 100 + s * 7);
        const auto rep = gradcheck::check(c);
        EXPECT_EQ(rep.failures, 0u) << model::to_string(arch) << " frozen=" << frozen << " seed=" << s
                                    << " worst=" << rep.worst_rel;
        EXPECT_GT(rep.checked, 0u);
      }
    }
  }
}

TEST(Backward, FrozenEmbeddingHasNoBlock) {
  auto c = gradcheck::make_case(Arch::MLP, true, 3);
  EXPECT_FALSE(gradcheck::analytic(c).has_embedding());
  c.student.set_frozen(false);
  EXPECT_TRUE(gradcheck::analytic(c).has_embedding());
}

TEST(Backward, LossDecomposesLinearly) {
  const auto c = gradcheck::make_case(Arch::FM_MLP, false, 9);
  const auto fwd = c.student.forward(c.batch);
  const auto joint = model::distill_objective(fwd.logits, c.batch, c.teacher_logits, c.lambda, c.temperature);
  const auto bce = model::distill_objective(fwd.logits, c.batch, {}, 0.0, c.temperature);
  const auto lam0 = model::distill_objective(fwd.logits, c.batch, c.teacher_logits, 0.0, c.temperature);
  auto g_joint = c.student.backward(fwd.cache, joint.dlogit);
  auto g_bce = c.student.backward(fwd.cache, bce.dlogit);
  const auto g_lam0 = c.student.backward(fwd.cache, lam0.dlogit);
  for (std::size_t i = 0; i < g_bce.net.size(); ++i) EXPECT_EQ(g_lam0.net[i], g_bce.net[i]);

  std::vector<double> kd_only(joint.dlogit.size());
  for (std::size_t i = 0; i < kd_only.size(); ++i) kd_only[i] = (joint.dlogit[i] - bce.dlogit[i]) / c.lambda;
  auto g_kd = c.student.backward(fwd.cache, kd_only);
  g_kd *= c.lambda;
  g_bce += g_kd;
  for (std::size_t i = 0; i < g_joint.net.size(); ++i) EXPECT_NEAR(g_joint.net[i], g_bce.net[i], 1e-12);
  EXPECT_LE(linalg::max_abs_diff(g_joint.embedding, g_bce.embedding), 1e-12);
  EXPECT_NEAR(joint.total, joint.bce + c.lambda * joint.kd, 1e-15);
}

TEST(Backward, StaleCacheIsStateError) {
  auto m = small_model(Arch::MLP);
  const auto rows = toy::rows(m.schema(), 4, 2);
  const auto fwd = m.forward(rows);
  m.mutable_net().params[0] += 1.0;
  const std::vector<double> d(4, 0.1);
  EXPECT_EQ(kind_of([&] { m.backward(fwd.cache, d); }), ErrorKind::State);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto m = small_model(Arch::FM_MLP);
  const auto before = m.checksum();
  auto st = model::AdamState::for_model(m, 0.1, 0.001);
  model::adam_step(m, m.zero_gradients(), st);
  EXPECT_EQ(m.checksum(), before);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto m = small_model(Arch::MLP);
  auto st = model::AdamState::for_model(m, 0.1, 0.1);
  auto g = m.zero_gradients();
  for (double& v : g.net) v = 1.0;
  const auto before = m.net().params;
  model::adam_step(m, g, st);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(m.net().params[i] - before[i], -0.1, 1e-8);
}

TEST(Adam, FrozenBlockUntouched) {
  auto m = small_model(Arch::MLP);
  m.set_frozen(true);
  auto st = model::AdamState::for_model(m, 0.1, 0.001);
  const auto emb = m.embedding_checksum();
  const auto rows = toy::rows(m.schema(), 32, 8);
  for (int step = 0; step < 20; ++step) {
    const auto fwd = m.forward(rows);
    const auto obj = model::task_objective(fwd.logits, rows);
    model::adam_step(m, m.backward(fwd.cache, obj.dlogit), st);
  }
  EXPECT_EQ(m.embedding_checksum(), emb);
  EXPECT_EQ(st.embedding_step, 0u);
}

TEST(Adam, TrainingIsDeterministic) {
  auto run = [] {
    auto m = small_model(Arch::FM_MLP, 4);
    auto st = model::AdamState::for_model(m, 0.1, 0.01);
    const auto rows = toy::rows(m.schema(), 64, 5);
    for (int step = 0; step < 10; ++step) {
      const auto fwd = m.forward(rows);
      const auto obj = model::task_objective(fwd.logits, rows);
      model::adam_step(m, m.backward(fwd.cache, obj.dlogit), st);
    }
    return m.checksum();
  };
  EXPECT_EQ(run(), run());
}

TEST(Clone, IsolatedAndEquivalent) {
  auto m = small_model(Arch::FM_MLP);
  const auto copy = m.clone_frozen();
  const auto rows = toy::rows(m.schema(), 10, 6);
  EXPECT_EQ(copy.predict(rows), m.predict(rows));
  EXPECT_EQ(copy.clone_frozen().checksum(), copy.checksum());
  const auto before = copy.checksum();
  m.mutable_net().params[0] += 1.0;
  EXPECT_EQ(copy.checksum(), before);
  EXPECT_NE(m.checksum(), before);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto m = small_model(Arch::FM_MLP, 12);
  toy::randomize_net(m, 13);
  const auto path = std::filesystem::temp_directory_path() / "crossadapt_model_ckpt.json";
  model::save_checkpoint(path.string(), m, {{"note", "x"}});
  nlohmann::json extra;
  const auto back = model::load_checkpoint(path.string(), &extra);
  EXPECT_EQ(back.checksum(), m.checksum());
  EXPECT_EQ(back.spec(), m.spec());
  EXPECT_EQ(back.schema(), m.schema());
  EXPECT_EQ(extra.at("note"), "x");
  const auto j = model::to_checkpoint(m);
  EXPECT_EQ(j.at("version"), model::kCheckpointVersion);
  std::filesystem::remove(path);
}
