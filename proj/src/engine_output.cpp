#include <set>

#include "securefix/engine.h"

namespace securefix {
namespace {

using nlohmann::json;

// Candidate objects: every brace-balanced span starting at a '{', in order.
std::optional<json> first_json_object(std::string_view raw) {
  for (std::size_t start = raw.find('{'); start != std::string_view::npos; start = raw.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < raw.size(); ++i) {
      char c = raw[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        json parsed = json::parse(raw.substr(start, i - start + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
        break;
      }
    }
  }
  return std::nullopt;
}

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

[[noreturn]] void violation(const std::string& detail) {
  throw MalformedOutput(MalformedCategory::SchemaViolation, detail);
}

void require_keys(const json& j, const std::set<std::string>& keys) {
  for (const auto& [key, value] : j.items()) {
    if (!keys.contains(key)) violation("unexpected key \"" + key + "\"");
  }
  for (const auto& key : keys) {
    if (!j.contains(key)) violation("missing required key \"" + key + "\"");
  }
}

std::string explanation_of(const json& j) {
  const auto& e = j.at("explanation");
  if (!e.is_string()) violation("\"explanation\" must be a string");
  auto text = e.get<std::string>();
  auto len = utf8_length(text);
  if (len < 1 || len > 500) violation("\"explanation\" must be 1-500 characters");
  return text;
}

std::string task_of(const json& j) {
  if (!j.contains("task") || !j.at("task").is_string()) violation("missing string key \"task\"");
  return j.at("task").get<std::string>();
}

}  // namespace

std::string_view to_string(Task task) {
  return task == Task::CrossValidate ? "cross_validate" : "propose_patch";
}

std::string_view to_string(Classification c) {
  return c == Classification::TruePositive ? "true_positive" : "false_positive";
}

std::string_view to_string(MalformedCategory c) {
  switch (c) {
    case MalformedCategory::NoJson: return "no-json";
    case MalformedCategory::SchemaViolation: return "schema-violation";
    case MalformedCategory::NoopPatch: return "noop-patch";
  }
  return "no-json";
}

std::string_view to_string(EngineErrorKind kind) {
  switch (kind) {
    case EngineErrorKind::EngineUnreachable: return "engine_unreachable";
    case EngineErrorKind::TranscriptMiss: return "transcript_miss";
    case EngineErrorKind::RetriesExhausted: return "retries_exhausted";
  }
  return "engine_unreachable";
}

EngineOutput parse_engine_output(std::string_view raw, Task task, std::string_view input_segment) {
  auto found = first_json_object(raw);
  if (!found) throw MalformedOutput(MalformedCategory::NoJson, "reply contains no JSON object");
  const json& j = *found;

  if (task_of(j) != to_string(task)) violation("\"task\" must be \"" + std::string(to_string(task)) + "\"");

  if (task == Task::CrossValidate) {
    require_keys(j, {"task", "verdict", "explanation"});
    const auto& v = j.at("verdict");
    if (!v.is_string()) violation("\"verdict\" must be a string");
    Verdict verdict;
    if (v == "true_positive") verdict.classification = Classification::TruePositive;
    else if (v == "false_positive") verdict.classification = Classification::FalsePositive;
    else violation("\"verdict\" must be \"true_positive\" or \"false_positive\"");
    verdict.explanation = explanation_of(j);
    return verdict;
  }

  PatchProposal proposal;
  if (j.contains("no_safe_fix")) {
    require_keys(j, {"task", "no_safe_fix", "explanation"});
    if (j.at("no_safe_fix") != true) violation("\"no_safe_fix\" may only be true");
    proposal.no_safe_fix = true;
  } else {
    require_keys(j, {"task", "patched_segment", "explanation"});
    if (!j.at("patched_segment").is_string()) violation("\"patched_segment\" must be a string");
    proposal.patched_segment = j.at("patched_segment").get<std::string>();
    // A reply that only dropped the final newline is the same code.
    bool same = proposal.patched_segment == input_segment ||
                (input_segment.ends_with('\n') &&
                 proposal.patched_segment == input_segment.substr(0, input_segment.size() - 1));
    if (same) throw MalformedOutput(MalformedCategory::NoopPatch, "patched_segment is identical to the input segment");
  }
  proposal.explanation = explanation_of(j);
  return proposal;
}

std::string serialize_verdict(const Verdict& verdict) {
  nlohmann::ordered_json j;
  j["task"] = "cross_validate";
  j["verdict"] = to_string(verdict.classification);
  j["explanation"] = verdict.explanation;
  return j.dump();
}

std::string serialize_proposal(const PatchProposal& proposal) {
  nlohmann::ordered_json j;
  j["task"] = "propose_patch";
  if (proposal.no_safe_fix) j["no_safe_fix"] = true;
  else j["patched_segment"] = proposal.patched_segment;
  j["explanation"] = proposal.explanation;
  return j.dump();
}

}  // namespace securefix
