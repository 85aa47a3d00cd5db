#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "crossadapt/config.hpp"
#include "crossadapt/data.hpp"

namespace crossadapt::commands {

struct LoadedData {
  data::Preprocessed pre;
  data::DatasetSplits splits;
};

/// Reads the configured source and splits it. With `vocab` the rows are
/// encoded with that vocabulary, otherwise one is built from hist ∪ train.
LoadedData load_data(const config::RunConfig& cfg, const data::Vocabulary* vocab = nullptr);

/// Each command writes its artifacts under cfg.out (plus a config snapshot)
/// and returns a JSON summary.
nlohmann::json gen_data(const config::RunConfig& cfg);
nlohmann::json train_teacher(const config::RunConfig& cfg);
nlohmann::json transfer(const config::RunConfig& cfg, const std::filesystem::path& teacher_ckpt);
nlohmann::json online(const config::RunConfig& cfg, const std::filesystem::path& teacher_ckpt,
                      const std::filesystem::path& student_ckpt);
nlohmann::json eval(const config::RunConfig& cfg, const std::filesystem::path& ckpt, const std::string& split);
nlohmann::json project(const std::filesystem::path& teacher_ckpt, std::size_t d_s, std::uint64_t seed,
                       std::size_t baseline_trials, const std::filesystem::path& out);
nlohmann::json shift(const config::RunConfig& cfg);
nlohmann::json experiment(const config::RunConfig& cfg);

/// FNV-1a of a file's bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace crossadapt::commands
