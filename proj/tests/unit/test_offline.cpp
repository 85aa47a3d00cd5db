#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "crossadapt/error.hpp"
#include "crossadapt/modes.hpp"
#include "crossadapt/offline.hpp"
#include "toy.hpp"

using namespace crossadapt;
using model::Arch;
using model::PredictionModel;
using offline::DistillConfig;

namespace {

DistillConfig small_cfg(std::size_t batch = 64) {
  DistillConfig c;
  c.batch_size = batch;
  c.seed = 5;
  return c;
}

PredictionModel trained_teacher(const data::FieldSchema& schema, const data::Dataset& rows) {
  auto t = PredictionModel::random(schema, {Arch::MLP, 4, {8}}, 21);
  offline::train_stage(t, rows, {}, nullptr, small_cfg(), false);
  return t;
}

struct Pipeline {
  data::Preprocessed pre;
  data::DatasetSplits splits;
  PredictionModel teacher;
  modes::PipelineSettings settings;
};

Pipeline small_pipeline(std::array<std::size_t, 4> ratio = {4, 4, 1, 1}) {
  data::SyntheticSpec spec;
  spec.n_samples = 8000;
  spec.vocab_sizes = {50, 20, 10};
  spec.n_numerical = 1;
  spec.seed = 3;
  Pipeline p;
  p.pre = data::preprocess(data::generate_stream(spec), 2);
  p.splits = data::split_temporal(p.pre.samples, ratio);
  p.settings.teacher_spec = {Arch::MLP, 4, {8}};
  p.settings.student_spec = {Arch::FM_MLP, 6, {8}};
  p.settings.distill.batch_size = 128;
  p.settings.online.batch_size = 64;
  p.settings.online.rolling_window = 200;
  p.teacher = PredictionModel::random(p.pre.schema, p.settings.teacher_spec, 1);
  return p;
}

}  // namespace

TEST(EpochOrder, ShufflesWithinBlocksOnly) {
  const std::vector<std::size_t> offsets{0, 10, 25, 40};
  const auto order = offline::epoch_order(offsets, 3);
  ASSERT_EQ(order.size(), 40u);
  for (std::size_t b = 0; b + 1 < offsets.size(); ++b) {
    std::vector<std::size_t> part(order.begin() + offsets[b], order.begin() + offsets[b + 1]);
    std::sort(part.begin(), part.end());
    for (std::size_t i = 0; i < part.size(); ++i) EXPECT_EQ(part[i], offsets[b] + i);
  }
  EXPECT_NE(order, offline::epoch_order(offsets, 4));
}

TEST(TrainStage, StepAccounting) {
  const auto schema = toy::schema({6, 4}, 1);
  const auto rows = toy::rows(schema, 1000, 2);
  auto student = PredictionModel::random(schema, {Arch::FM_MLP, 3, {5}}, 3);
  const auto teacher = trained_teacher(schema, rows);
  auto cfg = small_cfg(64);
  cfg.epochs = 2;
  const auto log = offline::train_stage(student, rows, {}, &teacher, cfg, true);
  EXPECT_EQ(log.step_count(), offline::steps_for(1000, cfg));
  EXPECT_EQ(log.step_count(), 32u);
  EXPECT_EQ(log.phase1_steps, 9u);
  for (const auto& s : log.steps) {
    EXPECT_NEAR(s.total, s.bce + cfg.lambda * s.kd, 1e-10);
    EXPECT_EQ(s.phase, s.step < 9 ? 1 : 2);
  }
  EXPECT_FALSE(student.frozen());
}

TEST(TrainStage, FullFreezeKeepsEmbeddings) {
  const auto schema = toy::schema({6, 4}, 1);
  const auto rows = toy::rows(schema, 500, 2);
  const auto teacher = trained_teacher(schema, rows);
  auto cfg = small_cfg();
  cfg.phase1_fraction = 1.0;
  const auto res = offline::run_offline_transfer(teacher, {Arch::FM_MLP, 8, {5}}, rows, {}, cfg, true);
  const auto projected = projection::apply_plan(teacher.embedding().weights, res.plan);
  EXPECT_EQ(res.student.embedding().weights, projected);
  EXPECT_EQ(res.log.phase1_steps, res.log.step_count());
}

TEST(TrainStage, PhaseOneFreezeIsBitExact) {
  const auto schema = toy::schema({6, 4}, 1);
  const auto rows = toy::rows(schema, 640, 2);
  const auto teacher = trained_teacher(schema, rows);
  auto student = PredictionModel::random(schema, {Arch::MLP, 3, {5}}, 3);
  auto cfg = small_cfg(64);
  cfg.phase1_fraction = 0.5;
  const auto before = student.embedding_checksum();
  const auto first_half = rows.slice(0, 320);
  auto probe = student;
  offline::DistillConfig half = cfg;
  half.phase1_fraction = 1.0;
  offline::train_stage(probe, first_half, {}, &teacher, half, true);
  EXPECT_EQ(probe.embedding_checksum(), before);
  offline::train_stage(student, rows, {}, &teacher, cfg, true);
  EXPECT_NE(student.embedding_checksum(), before);
}

TEST(TrainStage, LambdaZeroMatchesScratch) {
  const auto schema = toy::schema({6, 4}, 1);
  const auto rows = toy::rows(schema, 700, 4);
  const auto teacher = trained_teacher(schema, rows);
  auto cfg = small_cfg();
  cfg.lambda = 0.0;
  const auto transfer = offline::run_offline_transfer(teacher, {Arch::FM_MLP, 3, {5}}, rows, {}, cfg, false);
  auto scratch = PredictionModel::random(schema, {Arch::FM_MLP, 3, {5}}, derive_seed(cfg.seed, 0x696e6974));
  const auto log = offline::train_stage(scratch, rows, {}, nullptr, cfg, false);
  ASSERT_EQ(log.step_count(), transfer.log.step_count());
  for (std::size_t i = 0; i < log.step_count(); ++i) {
    EXPECT_EQ(log.steps[i].bce, transfer.log.steps[i].bce);
    EXPECT_EQ(log.steps[i].total, transfer.log.steps[i].total);
  }
  EXPECT_EQ(scratch.checksum(), transfer.student.checksum());
}

TEST(TrainStage, KdFallsDuringPhaseOneOnSeparableData) {
  const auto schema = toy::schema({8, 4});
  const auto rows = toy::rows(schema, 256, 6, 0.0);
  const auto teacher = trained_teacher(schema, rows);
  auto student = PredictionModel::random(schema, {Arch::FM_MLP, 4, {6}}, 8);
  auto cfg = small_cfg(256);
  cfg.epochs = 40;
  cfg.phase1_fraction = 1.0;
  const auto log = offline::train_stage(student, rows, {}, &teacher, cfg, true);
  for (std::size_t i = 1; i < log.step_count(); ++i) EXPECT_LE(log.steps[i].kd, log.steps[i - 1].kd + 1e-12);
  EXPECT_LT(log.steps.back().kd, log.steps.front().kd);
}

TEST(TrainStage, TeacherUntouchedAndSchemaChecked) {
  const auto schema = toy::schema({6, 4}, 1);
  const auto rows = toy::rows(schema, 300, 2);
  const auto teacher = trained_teacher(schema, rows);
  const auto sum = teacher.checksum();
  auto student = PredictionModel::random(schema, {Arch::MLP, 3, {5}}, 3);
  offline::train_stage(student, rows, {}, &teacher, small_cfg(), true);
  EXPECT_EQ(teacher.checksum(), sum);

  const auto other = PredictionModel::random(toy::schema({6, 5}, 1), {Arch::MLP, 3, {5}}, 3);
  try {
    offline::train_stage(student, rows, {}, &other, small_cfg(), true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Schema);
  }
}

TEST(TrainStage, NonFiniteLossIsNumericError) {
  const auto schema = toy::schema({6}, 1);
  auto rows = toy::rows(schema, 50, 2);
  rows.numerical[0][7] = std::nan("");
  auto student = PredictionModel::random(schema, {Arch::MLP, 3, {5}}, 3);
  try {
    offline::train_stage(student, rows, {}, nullptr, small_cfg(), false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numeric);
  }
}

TEST(TrainStage, StageLogCsv) {
  const auto schema = toy::schema({6}, 1);
  const auto rows = toy::rows(schema, 100, 2);
  auto student = PredictionModel::random(schema, {Arch::MLP, 3, {5}}, 3);
  const auto log = offline::train_stage(student, rows, {}, nullptr, small_cfg(), false);
  const auto path = std::filesystem::temp_directory_path() / "crossadapt_stage.csv";
  log.write_csv(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "step,phase,bce,kd,total,elapsed_ms");
  std::filesystem::remove(path);
}

TEST(Modes, ScratchOnlineUsesFewerSteps) {
  auto p = small_pipeline({4, 10, 1, 1});
  p.settings.online.batch_size = 128;
  const auto scratch = modes::run_mode(modes::TrainerMode::Scratch, p.splits, p.teacher, p.settings, 1);
  const auto online = modes::run_mode(modes::TrainerMode::ScratchOnline, p.splits, p.teacher, p.settings, 1);
  EXPECT_EQ(online.offline_steps(), 0u);
  EXPECT_GT(scratch.offline_steps(), 0u);
  EXPECT_LT(5 * online.test.steps, scratch.test.steps);
  EXPECT_TRUE(scratch.test.auc.has_value());
}

TEST(Modes, VanillaKdWithoutKdIsScratch) {
  auto p = small_pipeline();
  p.settings.distill.lambda = 0.0;
  p.settings.online.lambda = 0.0;
  const auto scratch = modes::run_mode(modes::TrainerMode::Scratch, p.splits, p.teacher, p.settings, 2);
  const auto vkd = modes::run_mode(modes::TrainerMode::VanillaKD, p.splits, p.teacher, p.settings, 2);
  EXPECT_EQ(scratch.student.checksum(), vkd.student.checksum());
  EXPECT_EQ(*scratch.test.auc, *vkd.test.auc);
}

TEST(Modes, FullRetrainNeedsHistory) {
  auto p = small_pipeline({0, 1, 1, 1});
  try {
    modes::run_mode(modes::TrainerMode::FullRetrain, p.splits, p.teacher, p.settings, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
  }
}

TEST(Modes, CrossAdaptSampleUsesAFractionOfTheSteps) {
  auto p = small_pipeline();
  const auto full = modes::run_mode(modes::TrainerMode::CrossAdaptFull, p.splits, p.teacher, p.settings, 1);
  const auto sample = modes::run_mode(modes::TrainerMode::CrossAdaptSample, p.splits, p.teacher, p.settings, 1);
  ASSERT_TRUE(sample.shift.has_value());
  ASSERT_TRUE(sample.teacher.has_value());
  const double ratio = static_cast<double>(sample.offline_steps()) / static_cast<double>(full.offline_steps());
  EXPECT_NEAR(ratio, 0.1, 0.05);
  EXPECT_EQ(modes::parse_mode("crossadapt"), modes::TrainerMode::CrossAdaptSample);
}
