#include <algorithm>
#include <fstream>
#include <semaphore>

#include "httplib.h"
#include "securefix/crypto.h"
#include "securefix/engine.h"
#include "securefix/errors.h"

namespace securefix {

std::string_view to_string(EngineKind kind) {
  switch (kind) {
    case EngineKind::Template: return "template";
    case EngineKind::Llm: return "llm";
    case EngineKind::Replay: return "replay";
  }
  return "template";
}

EngineKind parse_engine_kind(std::string_view text) {
  if (text == "template") return EngineKind::Template;
  if (text == "llm") return EngineKind::Llm;
  if (text == "replay") return EngineKind::Replay;
  throw ConfigError("unknown engine kind: " + std::string(text));
}

std::string request_fingerprint(const EngineRequest& request, int attempt) {
  nlohmann::ordered_json j;
  j["task"] = to_string(request.task);
  j["test_id"] = request.finding.test_id;
  j["fingerprint"] = request.finding.fingerprint;
  j["segment"] = request.segment.text;
  j["context"] = request.context;
  j["attempt"] = attempt;
  return sha256_hex(j.dump());
}

TranscriptRecorder::TranscriptRecorder(std::filesystem::path path) : path_(std::move(path)) {
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw ConfigError("cannot write transcript: " + path_.string());
}

void TranscriptRecorder::append(const std::string& fingerprint, Task task, const std::string& response) {
  nlohmann::ordered_json j;
  j["fingerprint"] = fingerprint;
  j["task"] = to_string(task);
  j["response"] = response;
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out << j.dump() << '\n';
}

ChatEngine::ChatEngine(std::string id, ChatTransport transport, PromptTemplates templates, int max_retries,
                       std::shared_ptr<TranscriptRecorder> recorder)
    : id_(std::move(id)),
      transport_(std::move(transport)),
      templates_(std::move(templates)),
      max_retries_(max_retries),
      recorder_(std::move(recorder)) {}

int ChatEngine::calls() const {
  std::lock_guard lock(stats_mutex_);
  return calls_;
}

EngineOutput ChatEngine::run(const EngineRequest& request) {
  auto messages = build_prompt(request, templates_);
  std::optional<MalformedCategory> last_malformed;
  std::string last_detail;
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    std::string raw;
    {
      std::lock_guard lock(stats_mutex_);
      ++calls_;
    }
    try {
      raw = transport_(request, messages, attempt);
    } catch (const EngineError& e) {
      if (e.kind() != EngineErrorKind::EngineUnreachable || attempt == max_retries_) throw;
      continue;
    }
    if (recorder_) recorder_->append(request_fingerprint(request, attempt), request.task, raw);
    try {
      return parse_engine_output(raw, request.task, request.segment.text);
    } catch (const MalformedOutput& m) {
      last_malformed = m.category();
      last_detail = m.what();
      messages.push_back({"assistant", raw});
      messages.push_back({"user", retry_message(templates_, m)});
    }
  }
  throw EngineError(EngineErrorKind::RetriesExhausted,
                    "malformed reply after " + std::to_string(max_retries_ + 1) + " attempts: " + last_detail,
                    last_malformed);
}

Verdict ChatEngine::cross_validate(const EngineRequest& request) {
  return std::get<Verdict>(run(request));
}

namespace {

// Modules a model reply may reference by qualified name without importing.
constexpr std::string_view kAutoImports[] = {"ast", "hashlib", "json", "os", "secrets", "shlex", "subprocess",
                                             "tempfile", "yaml"};

std::vector<std::string> referenced_modules(std::string_view code) {
  std::vector<std::string> out;
  for (const auto& call : parse_source(code).calls) {
    auto head = call.callee_raw.substr(0, call.callee_raw.find('.'));
    if (head.size() == call.callee_raw.size()) continue;
    bool known = std::find(std::begin(kAutoImports), std::end(kAutoImports), head) != std::end(kAutoImports);
    if (known && std::find(out.begin(), out.end(), head) == out.end()) out.push_back(head);
  }
  return out;
}

}  // namespace

PatchProposal ChatEngine::propose_patch(const EngineRequest& request) {
  auto proposal = std::get<PatchProposal>(run(request));
  proposal.engine_id = id_;
  if (!proposal.no_safe_fix) proposal.ensure_imports = referenced_modules(proposal.patched_segment);
  return proposal;
}

ChatTransport make_http_transport(const EngineConfig& config) {
  if (config.endpoint.empty()) throw ConfigError("llm engine requires an endpoint (SFA_ENGINE_ENDPOINT)");
  auto scheme = config.endpoint.find("://");
  auto path_start = config.endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  std::string base = config.endpoint.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "" : config.endpoint.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  if (!path.ends_with("/chat/completions")) path += "/v1/chat/completions";

  auto slots = std::make_shared<std::counting_semaphore<1024>>(std::clamp(config.max_in_flight, 1, 1024));
  return [config, base, path, slots](const EngineRequest& request, const std::vector<ChatMessage>& messages, int) {
    nlohmann::json body;
    bool validator = request.task == Task::CrossValidate && !config.validator_model_name.empty();
    body["model"] = validator ? config.validator_model_name : config.model_name;
    body["temperature"] = config.temperature;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

    httplib::Client client(base);
    auto secs = static_cast<time_t>(config.timeout_seconds);
    auto usecs = static_cast<time_t>((config.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    slots->acquire();
    auto res = client.Post(path, body.dump(), "application/json");
    slots->release();

    if (!res) {
      throw EngineError(EngineErrorKind::EngineUnreachable, "request to " + base + path + " failed: " +
                                                                httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw EngineError(EngineErrorKind::EngineUnreachable, "endpoint returned HTTP " + std::to_string(res->status));
    }
    auto reply = nlohmann::json::parse(res->body, nullptr, false);
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw EngineError(EngineErrorKind::EngineUnreachable, "endpoint reply is not a chat completion");
    }
  };
}

ChatTransport make_replay_transport(const std::filesystem::path& transcript) {
  std::ifstream in(transcript, std::ios::binary);
  if (!in) throw ConfigError("cannot read transcript: " + transcript.string());
  auto entries = std::make_shared<std::unordered_map<std::string, std::string>>();
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("fingerprint") || !j.contains("response") || !j["fingerprint"].is_string() ||
        !j["response"].is_string()) {
      throw ConfigError("transcript " + transcript.string() + " line " + std::to_string(number) + " is malformed");
    }
    entries->emplace(j["fingerprint"].get<std::string>(), j["response"].get<std::string>());
  }
  return [entries](const EngineRequest& request, const std::vector<ChatMessage>&, int attempt) {
    auto key = request_fingerprint(request, attempt);
    auto it = entries->find(key);
    if (it == entries->end()) throw EngineError(EngineErrorKind::TranscriptMiss, "no transcript entry for " + key);
    return it->second;
  };
}

std::shared_ptr<Engine> make_engine(const EngineConfig& config, const std::filesystem::path& prompts_dir) {
  if (config.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  switch (config.kind) {
    case EngineKind::Template:
      return std::make_shared<TemplateEngine>();
    case EngineKind::Llm: {
      std::shared_ptr<TranscriptRecorder> recorder;
      if (!config.record_path.empty()) recorder = std::make_shared<TranscriptRecorder>(config.record_path);
      return std::make_shared<ChatEngine>("llm:" + config.model_name, make_http_transport(config),
                                          load_prompt_templates(prompts_dir), config.max_retries, recorder);
    }
    case EngineKind::Replay:
      if (config.transcript_path.empty()) throw ConfigError("replay engine requires a transcript path");
      // A replay stands in for the recorded model, so it reports the same id.
      return std::make_shared<ChatEngine>("llm:" + config.model_name, make_replay_transport(config.transcript_path),
                                          load_prompt_templates(prompts_dir), config.max_retries);
  }
  throw ConfigError("unknown engine kind");
}

}  // namespace securefix
