#pragma once

// Layered operator configuration: command line > environment > JSON file >
// defaults. Unknown keys are rejected.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "securefix/analyzer.h"
#include "securefix/crypto.h"
#include "securefix/engine.h"

namespace securefix {

using Environment = std::map<std::string, std::string>;

/// Snapshot of the process environment.
Environment current_environment();

struct LoopConfig {
  int max_iterations = 5;
};

struct RulesConfig {
  std::vector<std::string> enabled;
  std::vector<std::string> disabled;
};

struct OutputConfig {
  bool encrypt = false;
  std::string key_env = "SFA_AES_KEY";
};

struct CliConfig {
  EngineConfig engine;
  LoopConfig loop;
  RulesConfig rules;
  OutputConfig output;
  std::filesystem::path prompts_dir = SECUREFIX_DEFAULT_PROMPTS_DIR;
  unsigned workers = 0;  // 0 = hardware concurrency
};

struct CliOverrides {
  std::optional<std::string> engine;
  std::optional<std::string> endpoint;
  std::optional<std::string> model_name;
  std::optional<std::filesystem::path> transcript_path;
  std::optional<std::filesystem::path> record_path;
  std::optional<int> max_iterations;
  std::optional<bool> encrypt;
  std::optional<std::vector<std::string>> enabled;
  std::optional<std::vector<std::string>> disabled;
  std::optional<std::filesystem::path> prompts_dir;
  std::optional<unsigned> workers;
};

/// `file` falls back to $SFA_CONFIG. Throws ConfigError on unknown keys, type
/// mismatches, invalid values, or missing key material when encrypting.
CliConfig load_config(const std::optional<std::filesystem::path>& file, const Environment& env,
                      const CliOverrides& overrides);

/// Canonical JSON form (no key material).
nlohmann::json config_to_json(const CliConfig& config);
std::string config_digest(const CliConfig& config);

/// Catalog restricted per rules.enabled / rules.disabled.
RuleCatalog select_rules(const CliConfig& config);

/// The encryption key when output.encrypt is set. Throws ConfigError naming
/// the variable when it is unset or malformed.
std::optional<AesKey> resolve_key(const CliConfig& config, const Environment& env);

}  // namespace securefix
