#include "securefix/config.h"

#include <fstream>
#include <set>

#include "securefix/errors.h"

extern char** environ;

namespace securefix {

Environment current_environment() {
  Environment env;
  for (char** e = environ; e && *e; ++e) {
    std::string entry(*e);
    auto eq = entry.find('=');
    if (eq != std::string::npos) env[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return env;
}

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError("unknown configuration key \"" + (where.empty() ? key : where + "." + key) + "\"");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, const std::string& where, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("configuration key \"" + where + "." + key + "\" has the wrong type");
  }
}

void read_path(const json& j, const char* key, const std::string& where, std::filesystem::path& target) {
  std::string s;
  if (!j.contains(key)) return;
  read(j, key, where, s);
  target = s;
}

void apply_file(CliConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
  check_keys(j, "", {"engine", "loop", "rules", "output", "prompts_dir", "workers"});

  if (j.contains("engine")) {
    const json& e = j["engine"];
    check_keys(e, "engine",
               {"kind", "endpoint", "model_name", "validator_model_name", "temperature", "timeout", "max_retries",
                "transcript_path", "record_path", "context_budget", "max_in_flight"});
    if (e.contains("kind")) {
      std::string kind;
      read(e, "kind", "engine", kind);
      c.engine.kind = parse_engine_kind(kind);
    }
    read(e, "endpoint", "engine", c.engine.endpoint);
    read(e, "model_name", "engine", c.engine.model_name);
    read(e, "validator_model_name", "engine", c.engine.validator_model_name);
    read(e, "temperature", "engine", c.engine.temperature);
    read(e, "timeout", "engine", c.engine.timeout_seconds);
    read(e, "max_retries", "engine", c.engine.max_retries);
    read_path(e, "transcript_path", "engine", c.engine.transcript_path);
    read_path(e, "record_path", "engine", c.engine.record_path);
    read(e, "context_budget", "engine", c.engine.context_budget);
    read(e, "max_in_flight", "engine", c.engine.max_in_flight);
  }
  if (j.contains("loop")) {
    check_keys(j["loop"], "loop", {"max_iterations"});
    read(j["loop"], "max_iterations", "loop", c.loop.max_iterations);
  }
  if (j.contains("rules")) {
    check_keys(j["rules"], "rules", {"enabled", "disabled"});
    read(j["rules"], "enabled", "rules", c.rules.enabled);
    read(j["rules"], "disabled", "rules", c.rules.disabled);
  }
  if (j.contains("output")) {
    check_keys(j["output"], "output", {"encrypt", "key_env"});
    read(j["output"], "encrypt", "output", c.output.encrypt);
    read(j["output"], "key_env", "output", c.output.key_env);
  }
  read_path(j, "prompts_dir", "", c.prompts_dir);
  read(j, "workers", "", c.workers);
}

int parse_positive(const std::string& name, const std::string& value) {
  try {
    std::size_t used = 0;
    int n = std::stoi(value, &used);
    if (used == value.size()) return n;
  } catch (const std::exception&) {
  }
  throw ConfigError("environment variable " + name + " must be an integer");
}

}  // namespace

CliConfig load_config(const std::optional<std::filesystem::path>& file, const Environment& env,
                      const CliOverrides& o) {
  CliConfig c;

  std::optional<std::filesystem::path> path = file;
  if (!path) {
    if (auto it = env.find("SFA_CONFIG"); it != env.end() && !it->second.empty()) path = it->second;
  }
  if (path) apply_file(c, *path);

  if (auto it = env.find("SFA_ENGINE"); it != env.end()) c.engine.kind = parse_engine_kind(it->second);
  if (auto it = env.find("SFA_ENGINE_ENDPOINT"); it != env.end()) c.engine.endpoint = it->second;
  if (auto it = env.find("SFA_MODEL"); it != env.end()) c.engine.model_name = it->second;
  if (auto it = env.find("SFA_MAX_ITERATIONS"); it != env.end()) {
    c.loop.max_iterations = parse_positive(it->first, it->second);
  }

  if (o.engine) c.engine.kind = parse_engine_kind(*o.engine);
  if (o.endpoint) c.engine.endpoint = *o.endpoint;
  if (o.model_name) c.engine.model_name = *o.model_name;
  if (o.transcript_path) c.engine.transcript_path = *o.transcript_path;
  if (o.record_path) c.engine.record_path = *o.record_path;
  if (o.max_iterations) c.loop.max_iterations = *o.max_iterations;
  if (o.encrypt) c.output.encrypt = *o.encrypt;
  if (o.enabled) c.rules.enabled = *o.enabled;
  if (o.disabled) c.rules.disabled = *o.disabled;
  if (o.prompts_dir) c.prompts_dir = *o.prompts_dir;
  if (o.workers) c.workers = *o.workers;

  if (c.loop.max_iterations < 1) throw ConfigError("loop.max_iterations must be >= 1");
  if (c.engine.max_retries < 0) throw ConfigError("engine.max_retries must be >= 0");
  if (c.engine.temperature < 0) throw ConfigError("engine.temperature must be >= 0");
  if (c.engine.timeout_seconds <= 0) throw ConfigError("engine.timeout must be > 0");
  if (c.engine.max_in_flight < 1) throw ConfigError("engine.max_in_flight must be >= 1");
  if (!c.rules.enabled.empty() && !c.rules.disabled.empty()) {
    throw ConfigError("rules.enabled and rules.disabled are mutually exclusive");
  }
  select_rules(c);  // validates rule ids
  if (c.output.encrypt) resolve_key(c, env);
  return c;
}

nlohmann::json config_to_json(const CliConfig& c) {
  json j;
  j["engine"] = {
      {"kind", to_string(c.engine.kind)},
      {"endpoint", c.engine.endpoint},
      {"model_name", c.engine.model_name},
      {"validator_model_name", c.engine.validator_model_name},
      {"temperature", c.engine.temperature},
      {"timeout", c.engine.timeout_seconds},
      {"max_retries", c.engine.max_retries},
      {"transcript_path", c.engine.transcript_path.string()},
      {"record_path", c.engine.record_path.string()},
      {"context_budget", c.engine.context_budget},
      {"max_in_flight", c.engine.max_in_flight},
  };
  j["loop"] = {{"max_iterations", c.loop.max_iterations}};
  j["rules"] = {{"enabled", c.rules.enabled}, {"disabled", c.rules.disabled}};
  j["output"] = {{"encrypt", c.output.encrypt}, {"key_env", c.output.key_env}};
  j["prompts_dir"] = c.prompts_dir.string();
  j["workers"] = c.workers;
  return j;
}

std::string config_digest(const CliConfig& config) {
  // nlohmann::json keeps object keys sorted, which makes the dump canonical.
  return sha256_hex(config_to_json(config).dump());
}

RuleCatalog select_rules(const CliConfig& config) {
  const RuleCatalog& all = RuleCatalog::standard();
  if (!config.rules.enabled.empty()) return all.only(config.rules.enabled);
  if (!config.rules.disabled.empty()) return all.without(config.rules.disabled);
  return all;
}

std::optional<AesKey> resolve_key(const CliConfig& config, const Environment& env) {
  if (!config.output.encrypt) return std::nullopt;
  auto it = env.find(config.output.key_env);
  if (it == env.end() || it->second.empty()) {
    throw ConfigError("encryption requested but environment variable " + config.output.key_env + " is not set");
  }
  try {
    return parse_hex_key(it->second);
  } catch (const ConfigError& e) {
    throw ConfigError("environment variable " + config.output.key_env + ": " + e.what());
  }
}

}  // namespace securefix
