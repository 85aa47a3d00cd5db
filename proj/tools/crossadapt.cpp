#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crossadapt/commands.hpp"
#include "crossadapt/config.hpp"
#include "crossadapt/error.hpp"

namespace {

using namespace crossadapt;

// 0 ok, 1 validation, 2 data, 3 numeric.
int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation:
    case ErrorKind::Parameter:
      return 1;
    case ErrorKind::Numeric:
      return 3;
    default:
      return 2;
  }
}

struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> profile;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON run configuration");
    cmd->add_option("--seed", seed, "Single seed (replaces the config's seed list)");
    cmd->add_option("--out", out, "Output directory");
    cmd->add_option("--profile", profile, "Default profile")->check(CLI::IsMember({"paper", "desk"}));
    cmd->add_option("--override", overrides, "KEY=VALUE with a dotted key, repeatable");
  }

  config::RunConfig load() const {
    std::optional<config::Profile> p;
    if (profile) p = config::parse_profile(*profile);
    auto all = overrides;
    if (seed) all.push_back("seeds=[" + std::to_string(*seed) + "]");
    if (out) all.push_back("out=" + nlohmann::json(*out).dump());
    std::optional<std::filesystem::path> path;
    if (config) path = *config;
    return config::load_config(path, p, all);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-architecture model transfer for streaming CTR/CVR prediction"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string teacher_ckpt, student_ckpt, ckpt, split = "test";
  std::size_t dim = 8, trials = 100;
  std::uint64_t project_seed = 0;
  std::string project_out = "runs/project";

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic stream as CSV plus a split manifest");
  auto* teach = app.add_subcommand("train-teacher", "Train the teacher on hist and train");
  auto* xfer = app.add_subcommand("transfer", "Stage 1: projection and progressive distillation");
  xfer->add_option("--teacher", teacher_ckpt, "Teacher checkpoint")->required();
  auto* onl = app.add_subcommand("online", "Stage 2: co-evolution over the online stream");
  onl->add_option("--teacher", teacher_ckpt, "Teacher checkpoint")->required();
  onl->add_option("--student", student_ckpt, "Student checkpoint")->required();
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  ev->add_option("--checkpoint", ckpt, "Model checkpoint")->required();
  ev->add_option("--split", split, "hist, train, online or test")->capture_default_str();
  auto* proj = app.add_subcommand("project", "Build a projection plan and report the Gram error");
  proj->add_option("--teacher", teacher_ckpt, "Teacher checkpoint")->required();
  proj->add_option("--dim", dim, "Student embedding dimension")->required();
  proj->add_option("--trials", trials, "Random projections for the baseline")->capture_default_str();
  proj->add_option("--seed", project_seed, "Projection seed");
  proj->add_option("--out", project_out, "Output directory")->capture_default_str();
  auto* sh = app.add_subcommand("shift", "Distribution shift report over the train split");
  auto* exp = app.add_subcommand("experiment", "Run every configured mode for every seed");
  for (auto* cmd : {gen, teach, xfer, onl, ev, sh, exp}) flags.attach(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    nlohmann::json result;
    if (*proj) {
      result = commands::project(teacher_ckpt, dim, project_seed, trials, project_out);
    } else {
      const auto cfg = flags.load();
      if (*gen) result = commands::gen_data(cfg);
      else if (*teach) result = commands::train_teacher(cfg);
      else if (*xfer) result = commands::transfer(cfg, teacher_ckpt);
      else if (*onl) result = commands::online(cfg, teacher_ckpt, student_ckpt);
      else if (*ev) result = commands::eval(cfg, ckpt, split);
      else if (*sh) result = commands::shift(cfg);
      else if (*exp) result = commands::experiment(cfg);
    }
    std::cout << result.dump(2) << std::endl;
    return 0;
  } catch (const Error& e) {
    std::cerr << "crossadapt: " << e.what() << std::endl;
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "crossadapt: malformed JSON input: " << e.what() << std::endl;
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "crossadapt: " << e.what() << std::endl;
    return 2;
  }
}
