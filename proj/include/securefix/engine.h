#pragma once

// Repair engines: one contract, two tasks (cross-validate a finding, propose
// a patch), three implementations (template, chat-completion LLM, replay).

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"
#include "securefix/analyzer.h"
#include "securefix/source_model.h"

namespace securefix {

enum class Task { CrossValidate, ProposePatch };
std::string_view to_string(Task task);

struct EngineRequest {
  Task task = Task::CrossValidate;
  Finding finding;
  CodeSegment segment;
  std::string excerpt;  // serialized finding JSON
  std::string context;  // bounded window of the file around the segment
  std::string file_name;
  int iteration = 0;
  std::string rule_description;
};

enum class Classification { TruePositive, FalsePositive };
std::string_view to_string(Classification c);

struct Verdict {
  Classification classification = Classification::TruePositive;
  std::string explanation;

  bool operator==(const Verdict&) const = default;
};

struct PatchProposal {
  std::string patched_segment;
  std::string explanation;
  bool no_safe_fix = false;
  std::string engine_id;
  /// Modules the patched code needs; the orchestrator adds `import X`.
  std::vector<std::string> ensure_imports;

  bool operator==(const PatchProposal&) const = default;
};

enum class MalformedCategory { NoJson, SchemaViolation, NoopPatch };
std::string_view to_string(MalformedCategory c);

class MalformedOutput : public std::runtime_error {
 public:
  MalformedOutput(MalformedCategory category, const std::string& detail)
      : std::runtime_error(detail), category_(category) {}
  MalformedCategory category() const { return category_; }

 private:
  MalformedCategory category_;
};

enum class EngineErrorKind { EngineUnreachable, TranscriptMiss, RetriesExhausted };
std::string_view to_string(EngineErrorKind kind);

/// Any engine failure. Callers mark the finding unresolved and carry on.
class EngineError : public std::runtime_error {
 public:
  EngineError(EngineErrorKind kind, const std::string& detail,
              std::optional<MalformedCategory> malformed = std::nullopt)
      : std::runtime_error(detail), kind_(kind), malformed_(malformed) {}
  EngineErrorKind kind() const { return kind_; }
  /// Set when retries ran out because of malformed replies.
  std::optional<MalformedCategory> malformed() const { return malformed_; }

 private:
  EngineErrorKind kind_;
  std::optional<MalformedCategory> malformed_;
};

class Engine {
 public:
  virtual ~Engine() = default;
  virtual std::string id() const = 0;
  virtual Verdict cross_validate(const EngineRequest& request) = 0;
  virtual PatchProposal propose_patch(const EngineRequest& request) = 0;
};

enum class EngineKind { Template, Llm, Replay };
std::string_view to_string(EngineKind kind);
EngineKind parse_engine_kind(std::string_view text);  // throws ConfigError

struct EngineConfig {
  EngineKind kind = EngineKind::Template;
  std::string endpoint;
  std::string model_name = "local-model";
  std::string validator_model_name;  // empty: same as model_name
  double temperature = 0.0;
  double timeout_seconds = 60.0;
  int max_retries = 2;
  std::filesystem::path transcript_path;  // replay input
  std::filesystem::path record_path;      // llm recording output (optional)
  std::size_t context_budget = 8000;
  int max_in_flight = 4;
};

// ---------------------------------------------------------------------------
// Engine output parsing

using EngineOutput = std::variant<Verdict, PatchProposal>;

/// Extracts the first balanced JSON object and validates it against the
/// task schema. Throws MalformedOutput.
EngineOutput parse_engine_output(std::string_view raw, Task task, std::string_view input_segment);

std::string serialize_verdict(const Verdict& verdict);
std::string serialize_proposal(const PatchProposal& proposal);

// ---------------------------------------------------------------------------
// Prompts

struct PromptTemplates {
  std::string cross_validate_system;
  std::string cross_validate_user;
  std::string propose_patch_system;
  std::string propose_patch_user;
  std::string retry;  // {reason} is the violated constraint
};

/// Throws ConfigError naming the missing file.
PromptTemplates load_prompt_templates(const std::filesystem::path& dir);

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

std::vector<ChatMessage> build_prompt(const EngineRequest& request, const PromptTemplates& templates);
std::string retry_message(const PromptTemplates& templates, const MalformedOutput& error);

inline constexpr std::string_view kTruncatedMarker = "[truncated]";

/// Whole lines around `span`, grown alternately upward and downward while the
/// result (markers included) fits in `budget` characters.
std::string build_context(const SourceFile& file, const LineSpan& span, std::size_t budget);

// ---------------------------------------------------------------------------
// Implementations

class TemplateEngine : public Engine {
 public:
  std::string id() const override { return "template"; }
  Verdict cross_validate(const EngineRequest& request) override;
  PatchProposal propose_patch(const EngineRequest& request) override;
};

/// Key under which a reply is recorded and replayed.
std::string request_fingerprint(const EngineRequest& request, int attempt);

class TranscriptRecorder {
 public:
  /// Throws ConfigError if the path cannot be opened for appending.
  explicit TranscriptRecorder(std::filesystem::path path);
  void append(const std::string& fingerprint, Task task, const std::string& response);

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

/// Produces the raw reply for attempt `attempt` (0-based). Throws EngineError
/// (EngineUnreachable or TranscriptMiss).
using ChatTransport =
    std::function<std::string(const EngineRequest&, const std::vector<ChatMessage>&, int attempt)>;

/// Shared prompt / parse / retry driver for the LLM and replay engines.
class ChatEngine : public Engine {
 public:
  ChatEngine(std::string id, ChatTransport transport, PromptTemplates templates, int max_retries,
             std::shared_ptr<TranscriptRecorder> recorder = nullptr);

  std::string id() const override { return id_; }
  Verdict cross_validate(const EngineRequest& request) override;
  PatchProposal propose_patch(const EngineRequest& request) override;

  /// Total transport invocations so far.
  int calls() const;

 private:
  EngineOutput run(const EngineRequest& request);

  std::string id_;
  ChatTransport transport_;
  PromptTemplates templates_;
  int max_retries_;
  std::shared_ptr<TranscriptRecorder> recorder_;
  mutable std::mutex stats_mutex_;
  int calls_ = 0;
};

/// HTTP chat-completion transport against `config.endpoint`.
ChatTransport make_http_transport(const EngineConfig& config);

/// Replay transport over an NDJSON transcript. Throws ConfigError if the
/// file cannot be read or is malformed.
ChatTransport make_replay_transport(const std::filesystem::path& transcript);

std::shared_ptr<Engine> make_engine(const EngineConfig& config, const std::filesystem::path& prompts_dir);

}  // namespace securefix
