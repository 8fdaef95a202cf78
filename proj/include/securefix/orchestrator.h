#pragma once

// The detect / cross-validate / patch / re-scan loop and its output package.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "securefix/analyzer.h"
#include "securefix/crypto.h"
#include "securefix/engine.h"

namespace securefix {

enum class FailureReason { EngineError, Malformed, NoSafeFix, StaleSplice };
std::string_view to_string(FailureReason reason);

struct RepairRecord {
  int iteration = 0;
  Finding finding;
  std::optional<Verdict> verdict;  // absent when no verdict was obtained
  std::optional<PatchProposal> proposal;
  bool applied = false;
  std::optional<FailureReason> failure_reason;

  bool operator==(const RepairRecord&) const = default;
};

nlohmann::ordered_json record_to_json(const RepairRecord& record);
RepairRecord record_from_json(const nlohmann::json& j);

enum class SessionStatus { Converged, IterationLimit, NoProgress };
std::string_view to_string(SessionStatus status);
SessionStatus parse_session_status(std::string_view text);

struct OutputPackage {
  SourceFile original_code;
  SourceFile final_code;
  std::vector<Report> reports;  // last entry is the final confirmation scan
  std::vector<RepairRecord> records;
  SessionStatus status = SessionStatus::Converged;
  int iterations = 0;  // repair iterations performed
  std::string config_digest;
  std::string engine_id;
  int engine_calls = 0;
  int engine_unreachable = 0;  // calls that failed with engine_unreachable

  const Report& final_report() const { return reports.back(); }
};

struct SessionOptions {
  int max_iterations = 5;
  int attempt_cap = 2;
  std::size_t context_budget = 8000;
  std::string config_digest;
};

/// Throws PreconditionError if max_iterations < 1. Engine failures never
/// abort; they are recorded per finding.
OutputPackage run_session(const SourceFile& file, Engine& engine, const RuleCatalog& catalog,
                          const SessionOptions& options);

/// True iff the fingerprint multisets are identical.
bool detect_no_progress(const Report& previous, const Report& current);

/// Writes the package layout under out_dir and returns the written paths.
/// With a key, every artifact except session.json is AES-128-GCM encrypted
/// and gets a `.enc` suffix. Throws IoError naming the path on failure.
std::vector<std::filesystem::path> write_package(const OutputPackage& pkg, const std::filesystem::path& out_dir,
                                                 const std::optional<AesKey>& key);

/// Relative path -> plaintext bytes for every artifact of a written package.
/// Throws AuthenticationError on tampered ciphertext, ConfigError if a key is
/// needed but absent.
std::map<std::string, std::string> read_package(const std::filesystem::path& dir, const std::optional<AesKey>& key);

/// SHA-256 over the package contents with report timestamps blanked.
std::string package_digest(const std::map<std::string, std::string>& contents);

}  // namespace securefix
