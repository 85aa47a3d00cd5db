#include "crossadapt/config.hpp"

#include <algorithm>
#include <fstream>

#include "crossadapt/error.hpp"

namespace crossadapt::config {

using nlohmann::json;

const char* to_string(Profile p) { return p == Profile::Paper ? "paper" : "desk"; }

Profile parse_profile(const std::string& name) {
  if (name == "paper") return Profile::Paper;
  if (name == "desk") return Profile::Desk;
  fail(ErrorKind::Validation, "unknown profile '" + name + "' (expected paper or desk)");
}

namespace {

data::SyntheticSpec default_synthetic() {
  data::SyntheticSpec spec;
  spec.drift.push_back({0.85, 0.3, true});
  return spec;
}

json distill_json(const offline::DistillConfig& c) {
  auto j = c.to_json();
  j.erase("seed");
  return j;
}

json online_json(const online::OnlineConfig& c) {
  auto j = c.to_json();
  j.erase("seed");
  return j;
}

json sampling_json(const sampler::SamplingConfig& c) {
  return {{"r", c.r}, {"r_pos", c.r_pos}, {"blocks", c.blocks}, {"r_unclick", c.r_unclick}};
}

std::string kind_name(const json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  return "object";
}

bool compatible(const json& def, const json& val) {
  if (def.is_null()) return val.is_null() || val.is_number();
  if (def.is_number()) return val.is_number();
  return kind_name(def) == kind_name(val);
}

void merge(json& base, const json& user, const std::string& path) {
  require(user.is_object(), ErrorKind::Validation,
          "'" + (path.empty() ? std::string("config") : path) + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (here == "data") {
      require(value.is_object() && value.size() == 1 && (value.contains("synthetic") || value.contains("csv")),
              ErrorKind::Validation, "'data' must hold exactly one of 'synthetic' or 'csv'");
      if (value.contains("csv")) {
        base["data"] = value;
        continue;
      }
      if (!base["data"].contains("synthetic")) base["data"] = {{"synthetic", json::object()}};
      merge(base["data"]["synthetic"], value.at("synthetic"), "data.synthetic");
      continue;
    }
    require(base.contains(key), ErrorKind::Validation, "unknown config key '" + here + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      merge(slot, value, here);
      continue;
    }
    require(compatible(slot, value), ErrorKind::Validation,
            "config key '" + here + "' expects a " + kind_name(slot) + ", got " + kind_name(value));
    slot = value;
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Validation, "config key '" + section + "." + key + "' is missing or has the wrong type");
  }
}

RunConfig from_document(const json& doc, Profile profile) {
  RunConfig c;
  c.profile = profile;
  c.modes.clear();
  for (const auto& m : doc.at("modes")) {
    require(m.is_string(), ErrorKind::Validation, "config key 'modes' must list mode names");
    c.modes.push_back(modes::parse_mode(m.get<std::string>()));
  }
  require(!c.modes.empty(), ErrorKind::Validation, "config key 'modes' must not be empty");
  try {
    c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    c.split = doc.at("split").get<std::array<std::size_t, 4>>();
  } catch (const json::exception&) {
    fail(ErrorKind::Validation, "config keys 'seeds' and 'split' must be lists of non-negative integers (split: 4)");
  }
  require(!c.seeds.empty(), ErrorKind::Validation, "config key 'seeds' must not be empty");
  require(c.split[2] >= 1 && c.split[3] >= 1, ErrorKind::Validation, "config key 'split' needs online and test parts >= 1");
  c.vocab_threshold = get<std::size_t>(doc, "vocab_threshold", "");
  require(c.vocab_threshold >= 1, ErrorKind::Validation, "config key 'vocab_threshold' must be >= 1");
  c.out = get<std::string>(doc, "out", "");

  const auto& data = doc.at("data");
  if (data.contains("synthetic")) {
    c.data.synthetic = data::SyntheticSpec::from_json(data.at("synthetic"));
    c.data.synthetic->validate();
  } else {
    const auto& csv = data.at("csv");
    for (const auto& [key, value] : csv.items())
      require(key == "path" || key == "schema", ErrorKind::Validation, "unknown config key 'data.csv." + key + "'");
    c.data.csv_path = get<std::string>(csv, "path", "data.csv");
    c.data.csv_schema = data::CsvSchema::from_json(csv.at("schema"));
  }

  auto& p = c.pipeline;
  try {
    p.teacher_spec = model::ArchSpec::from_json(doc.at("teacher"));
    p.student_spec = model::ArchSpec::from_json(doc.at("student"));
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("model spec: ") + e.what());
  }
  p.project_embeddings = get<bool>(doc, "project_embeddings", "");

  const auto& d = doc.at("distill");
  p.distill.lambda = get<double>(d, "lambda", "distill");
  p.distill.temperature = get<double>(d, "temperature", "distill");
  p.distill.phase1_fraction = get<double>(d, "phase1_fraction", "distill");
  p.distill.epochs = get<std::size_t>(d, "epochs", "distill");
  p.distill.batch_size = get<std::size_t>(d, "batch_size", "distill");
  p.distill.lr_embedding = get<double>(d, "lr_embedding", "distill");
  p.distill.lr_net = get<double>(d, "lr_net", "distill");
  p.distill.shuffle_blocks = get<std::size_t>(d, "shuffle_blocks", "distill");

  const auto& o = doc.at("online");
  p.online.lr_embedding = get<double>(o, "lr_embedding", "online");
  p.online.lr_net = get<double>(o, "lr_net", "online");
  p.online.teacher_lr_ratio = get<double>(o, "teacher_lr_ratio", "online");
  p.online.average_teacher_grad = get<bool>(o, "average_teacher_grad", "online");
  p.online.tau = get<std::size_t>(o, "tau", "online");
  p.online.lambda = get<double>(o, "lambda", "online");
  p.online.temperature = get<double>(o, "temperature", "online");
  if (!o.at("r_enh").is_null()) p.online.r_enh = get<double>(o, "r_enh", "online");
  p.online.batch_size = get<std::size_t>(o, "batch_size", "online");
  p.online.co_evolve = get<bool>(o, "co_evolve", "online");
  p.online.rolling_window = get<std::size_t>(o, "rolling_window", "online");

  const auto& s = doc.at("sampling");
  p.sampling.r = get<double>(s, "r", "sampling");
  p.sampling.r_pos = get<double>(s, "r_pos", "sampling");
  p.sampling.blocks = get<std::size_t>(s, "blocks", "sampling");
  p.sampling.r_unclick = get<double>(s, "r_unclick", "sampling");

  const auto& sh = doc.at("shift");
  p.shift.windows = get<std::size_t>(sh, "n", "shift");
  p.shift.bins = get<std::size_t>(sh, "b", "shift");
  p.shift.metric = shift::parse_metric(get<std::string>(sh, "metric", "shift"));
  p.shift.theta_low = get<double>(sh, "theta_low", "shift");
  p.shift.theta_high = get<double>(sh, "theta_high", "shift");
  p.shift.k = get<double>(sh, "k", "shift");

  const auto checked = [](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      fail(ErrorKind::Validation, std::string("config section '") + section + "': " + e.what());
    }
  };
  checked("distill", [&] { p.distill.validate(); });
  checked("online", [&] { p.online.validate(); });
  checked("sampling", [&] { p.sampling.validate(); });
  checked("shift", [&] { p.shift.validate(); });
  p.pcvr = c.data.synthetic ? c.data.synthetic->pcvr
                            : std::any_of(c.data.csv_schema.columns.begin(), c.data.csv_schema.columns.end(),
                                          [](const data::CsvColumn& col) { return col.kind == data::ColumnKind::Click; });
  return c;
}

}  // namespace

json default_config_json(Profile profile) {
  modes::PipelineSettings p;
  if (profile == Profile::Desk) {
    p.distill.batch_size = 256;
    p.online.batch_size = 256;
  }
  return {{"profile", to_string(profile)},
          {"modes", {modes::to_string(modes::TrainerMode::CrossAdaptSample)}},
          {"seeds", {1}},
          {"data", {{"synthetic", default_synthetic().to_json()}}},
          {"split", {4, 4, 1, 1}},
          {"vocab_threshold", 10},
          {"teacher", p.teacher_spec.to_json()},
          {"student", p.student_spec.to_json()},
          {"project_embeddings", p.project_embeddings},
          {"distill", distill_json(p.distill)},
          {"online", online_json(p.online)},
          {"sampling", sampling_json(p.sampling)},
          {"shift", p.shift.to_json()},
          {"out", "runs/default"}};
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, ErrorKind::Validation,
          "override '" + assignment + "' must look like KEY=VALUE");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  // Build a nested patch and reuse the merge rules.
  json patch = value;
  std::size_t end = path.size();
  while (true) {
    const auto dot = path.rfind('.', end - 1);
    const std::string key = path.substr(dot == std::string::npos ? 0 : dot + 1, end - (dot == std::string::npos ? 0 : dot + 1));
    require(!key.empty(), ErrorKind::Validation, "override key '" + path + "' has an empty component");
    patch = json{{key, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  merge(doc, patch, "");
}

RunConfig parse_config(const json& user, std::optional<Profile> profile, const std::vector<std::string>& overrides) {
  if (!profile) {
    profile = Profile::Desk;
    if (user.is_object() && user.contains("profile")) {
      require(user.at("profile").is_string(), ErrorKind::Validation, "config key 'profile' expects a string");
      profile = parse_profile(user.at("profile").get<std::string>());
    }
  }
  json doc = default_config_json(*profile);
  doc["profile"] = to_string(*profile);
  json body = user.is_null() ? json::object() : user;
  if (body.is_object()) body.erase("profile");
  merge(doc, body, "");
  for (const auto& o : overrides) {
    require(o.rfind("profile=", 0) != 0, ErrorKind::Validation, "select the profile with --profile, not an override");
    apply_override(doc, o);
  }
  return from_document(doc, *profile);
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, std::optional<Profile> profile,
                      const std::vector<std::string>& overrides) {
  return parse_config(path ? read_json(*path) : json::object(), profile, overrides);
}

json RunConfig::to_json() const {
  json modes_json = json::array();
  for (auto m : modes) modes_json.push_back(modes::to_string(m));
  json data_json;
  if (data.synthetic)
    data_json = {{"synthetic", data.synthetic->to_json()}};
  else
    data_json = {{"csv", {{"path", data.csv_path.string()}, {"schema", data.csv_schema.to_json()}}}};
  const auto& p = pipeline;
  return {{"profile", to_string(profile)},
          {"modes", modes_json},
          {"seeds", seeds},
          {"data", data_json},
          {"split", split},
          {"vocab_threshold", vocab_threshold},
          {"teacher", p.teacher_spec.to_json()},
          {"student", p.student_spec.to_json()},
          {"project_embeddings", p.project_embeddings},
          {"distill", distill_json(p.distill)},
          {"online", online_json(p.online)},
          {"sampling", sampling_json(p.sampling)},
          {"shift", p.shift.to_json()},
          {"out", out.string()}};
}

}  // namespace crossadapt::config
