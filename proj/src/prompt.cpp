#include <fstream>
#include <map>
#include <sstream>

#include "securefix/engine.h"
#include "securefix/errors.h"

namespace securefix {
namespace {

std::string read_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("prompt template not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Single pass, so substituted text is never re-expanded.
std::string substitute(std::string_view tmpl, const std::map<std::string_view, std::string_view>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = vars.find(tmpl.substr(i + 1, close - i - 1));
        if (it != vars.end()) {
          out += it->second;
          i = close;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
  }
  return out;
}

}  // namespace

PromptTemplates load_prompt_templates(const std::filesystem::path& dir) {
  PromptTemplates t;
  t.cross_validate_system = read_template(dir / "cross_validate.system.txt");
  t.cross_validate_user = read_template(dir / "cross_validate.user.txt");
  t.propose_patch_system = read_template(dir / "propose_patch.system.txt");
  t.propose_patch_user = read_template(dir / "propose_patch.user.txt");
  t.retry = read_template(dir / "retry.txt");
  return t;
}

std::vector<ChatMessage> build_prompt(const EngineRequest& request, const PromptTemplates& templates) {
  std::map<std::string_view, std::string_view> vars = {
      {"rule_id", request.finding.test_id},
      {"rule_description", request.rule_description},
      {"excerpt", request.excerpt},
      {"segment", request.segment.text},
      {"context", request.context},
  };
  bool cv = request.task == Task::CrossValidate;
  return {
      {"system", substitute(cv ? templates.cross_validate_system : templates.propose_patch_system, vars)},
      {"user", substitute(cv ? templates.cross_validate_user : templates.propose_patch_user, vars)},
  };
}

std::string retry_message(const PromptTemplates& templates, const MalformedOutput& error) {
  std::string reason = std::string(to_string(error.category())) + ": " + error.what();
  return substitute(templates.retry, {{"reason", reason}});
}

std::string build_context(const SourceFile& file, const LineSpan& span, std::size_t budget) {
  if (file.text().size() <= budget) return file.text();

  const std::string marker = std::string(kTruncatedMarker) + "\n";
  auto seg = file.byte_span(span);
  std::size_t used = seg.size() + 2 * marker.size();
  int up = span.start - 1;
  int down = span.end + 1;
  bool up_open = up >= 1;
  bool down_open = down <= file.line_count();
  bool take_up = true;
  while (up_open || down_open) {
    bool upward = (take_up && up_open) || !down_open;
    int candidate = upward ? up : down;
    std::size_t len = file.line(candidate).size();
    if (used + len <= budget) {
      used += len;
      if (upward) up_open = --up >= 1;
      else down_open = ++down <= file.line_count();
    } else if (upward) {
      up_open = false;
    } else {
      down_open = false;
    }
    take_up = !take_up;
  }

  std::string out;
  if (up >= 1) out += marker;
  auto body = file.byte_span({up + 1, down - 1});
  out.append(file.text(), body.begin, body.size());
  if (down <= file.line_count()) {
    if (!out.empty() && out.back() != '\n') out += file.newline();
    out += marker;
  }
  return out;
}

}  // namespace securefix
