#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossadapt/data.hpp"
#include "crossadapt/modes.hpp"

namespace crossadapt::config {

enum class Profile { Paper, Desk };

const char* to_string(Profile p);
Profile parse_profile(const std::string& name);

struct DataSource {
  /// Synthetic when set, CSV otherwise.
  std::optional<data::SyntheticSpec> synthetic;
  std::filesystem::path csv_path;
  data::CsvSchema csv_schema;
};

struct RunConfig {
  Profile profile = Profile::Desk;
  std::vector<modes::TrainerMode> modes{modes::TrainerMode::CrossAdaptSample};
  std::vector<std::uint64_t> seeds{1};
  DataSource data;
  std::array<std::size_t, 4> split{4, 4, 1, 1};
  std::size_t vocab_threshold = 10;
  modes::PipelineSettings pipeline;
  std::filesystem::path out = "runs/default";

  nlohmann::json to_json() const;
};

/// Full default document for a profile. Every accepted key appears here.
nlohmann::json default_config_json(Profile profile);

/// Sets the value at a dotted path ("online.tau=5"). The value is read as
/// JSON when it parses, as a plain string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Layers `user` and then `overrides` over the profile defaults. Unknown
/// keys and type mismatches raise Validation errors naming the key. Without
/// an explicit profile the document's "profile" key decides (desk if absent).
RunConfig parse_config(const nlohmann::json& user, std::optional<Profile> profile,
                       const std::vector<std::string>& overrides = {});

RunConfig load_config(const std::optional<std::filesystem::path>& path, std::optional<Profile> profile,
                      const std::vector<std::string>& overrides = {});

nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace crossadapt::config
