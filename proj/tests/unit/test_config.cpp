#include <gtest/gtest.h>

#include "crossadapt/config.hpp"
#include "crossadapt/error.hpp"

using namespace crossadapt;
using nlohmann::json;

namespace {

std::string validation_message(const json& user, const std::vector<std::string>& overrides = {}) {
  try {
    config::parse_config(user, std::nullopt, overrides);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
    return e.what();
  }
  ADD_FAILURE() << "config accepted";
  return {};
}

}  // namespace

TEST(Config, ProfileDefaults) {
  const auto desk = config::parse_config(json::object(), std::nullopt);
  EXPECT_EQ(desk.profile, config::Profile::Desk);
  EXPECT_EQ(desk.pipeline.distill.batch_size, 256u);
  EXPECT_EQ(desk.pipeline.online.batch_size, 256u);
  const auto paper = config::parse_config(json::object(), config::Profile::Paper);
  EXPECT_EQ(paper.pipeline.distill.batch_size, 4096u);
  EXPECT_EQ(paper.pipeline.online.batch_size, 4096u);
  const auto chosen = config::parse_config(json{{"profile", "paper"}}, std::nullopt);
  EXPECT_EQ(chosen.profile, config::Profile::Paper);
  EXPECT_TRUE(desk.data.synthetic.has_value());
}

TEST(Config, UnknownKeyIsNamed) {
  const auto msg = validation_message(json{{"online", {{"tua", 3}}}});
  EXPECT_NE(msg.find("online.tua"), std::string::npos) << msg;
}

TEST(Config, TypeMismatchIsNamed) {
  const auto msg = validation_message(json{{"distill", {{"lambda", "big"}}}});
  EXPECT_NE(msg.find("distill.lambda"), std::string::npos) << msg;
}

TEST(Config, OverridesApplyLast) {
  const auto c = config::parse_config(json{{"online", {{"tau", 3}}}}, std::nullopt,
                                      {"online.tau=7", "modes=[\"scratch\",\"vanilla_kd\"]", "shift.metric=kl"});
  EXPECT_EQ(c.pipeline.online.tau, 7u);
  EXPECT_EQ(c.modes.size(), 2u);
  EXPECT_EQ(c.pipeline.shift.metric, shift::Metric::KL);
  const auto msg = validation_message(json::object(), {"online.nope=1"});
  EXPECT_NE(msg.find("online.nope"), std::string::npos) << msg;
  validation_message(json::object(), {"no_equals_sign"});
}

TEST(Config, DataSourceIsExclusive) {
  validation_message(json{{"data", {{"synthetic", json::object()}, {"csv", json::object()}}}});
  const auto c = config::parse_config(json{{"data", {{"synthetic", {{"pcvr", true}, {"n_samples", 5000}}}}}},
                                      std::nullopt);
  EXPECT_TRUE(c.pipeline.pcvr);
  EXPECT_EQ(c.data.synthetic->n_samples, 5000u);
}

TEST(Config, RoundTripThroughJson) {
  const auto c = config::parse_config(json::object(), config::Profile::Paper, {"seeds=[1,2,3]"});
  const auto again = config::parse_config(c.to_json(), std::nullopt);
  EXPECT_EQ(again.seeds, c.seeds);
  EXPECT_EQ(again.profile, config::Profile::Paper);
  EXPECT_EQ(again.pipeline.distill.batch_size, c.pipeline.distill.batch_size);
}

TEST(Config, SectionValidationRuns) {
  const auto msg = validation_message(json{{"online", {{"tau", 0}}}});
  EXPECT_NE(msg.find("online"), std::string::npos) << msg;
}
