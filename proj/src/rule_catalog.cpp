#include <algorithm>

#include "securefix/analyzer.h"
#include "securefix/errors.h"

namespace securefix {
namespace {

RuleMatcher call_matcher(std::vector<std::string> names) {
  RuleMatcher m;
  m.kind = MatcherKind::Call;
  for (auto& n : names) m.callees.push_back({std::move(n), std::nullopt, {}});
  return m;
}

std::vector<Rule> build_standard_rules() {
  std::vector<Rule> rules;

  {
    Rule r{"B101", "assert_used", Level::Low, Level::High, {}, "", true, ""};
    r.matcher.kind = MatcherKind::Statement;
    r.matcher.statement_kind = "assert";
    r.message_template =
        "Use of assert detected. The enclosed code will be removed when compiling to optimised byte code.";
    r.description = "assert statements are stripped under optimisation, so security checks written as asserts vanish";
    rules.push_back(std::move(r));
  }
  {
    Rule r{"B102", "exec_used", Level::Medium, Level::High, call_matcher({"exec"}), "Use of exec detected.",
           false, "exec runs arbitrary code; any attacker-influenced input becomes code execution"};
    rules.push_back(std::move(r));
  }
  {
    Rule r{"B105", "hardcoded_password_string", Level::Low, Level::Medium, {}, "", true, ""};
    r.matcher.kind = MatcherKind::Assignment;
    r.matcher.target_pattern = "pass(wd|word)?|secret|token|api_key";
    r.message_template = "Possible hardcoded password: '{literal}'";
    r.description = "a credential-like name is assigned a string literal, embedding a secret in source code";
    rules.push_back(std::move(r));
  }
  {
    Rule r{"B301", "pickle", Level::Medium, Level::High,
           call_matcher({"pickle.loads", "pickle.load", "pickle.Unpickler", "cPickle.loads", "cPickle.load",
                         "cPickle.Unpickler", "dill.loads", "dill.load", "dill.Unpickler", "shelve.open",
                         "shelve.DbfilenameShelf"}),
           "Pickle and modules that wrap it can be unsafe when used to deserialize untrusted data, possible "
           "security issue.",
           false, "unpickling untrusted data can execute arbitrary code"};
    rules.push_back(std::move(r));
  }
  {
    Rule r{"B306", "mktemp_q", Level::Medium, Level::High, call_matcher({"tempfile.mktemp"}),
           "Use of insecure and deprecated function (mktemp).", true,
           "tempfile.mktemp returns a name that another process can claim before it is opened"};
    rules.push_back(std::move(r));
  }
  {
    Rule r{"B311", "random", Level::Low, Level::High,
           call_matcher({"random.random", "random.randrange", "random.randint", "random.choice", "random.choices",
                         "random.uniform", "random.triangular", "random.randbytes", "random.sample",
                         "random.getrandbits"}),
           "Standard pseudo-random generators are not suitable for security/cryptographic purposes.", true,
           "the random module is a predictable PRNG and must not produce security-relevant values"};
    rules.push_back(std::move(r));
  }
  {
    Rule r{"B324", "hashlib", Level::High, Level::High,
           call_matcher({"hashlib.md4", "hashlib.md5", "hashlib.sha", "hashlib.sha1"}),
           "Use of weak {hash} hash for security. Consider usedforsecurity=False", true,
           "MD4/MD5/SHA1 are broken for security purposes"};
    r.matcher.callees.push_back({"hashlib.new", 0, {"md4", "md5", "sha", "sha1"}});
    r.matcher.suppressing_keywords.push_back({"usedforsecurity", {"False"}});
    rules.push_back(std::move(r));
  }
  {
    Rule r{"B501", "request_with_no_cert_validation", Level::High, Level::High, {},
           "Call to {module} with verify=False disabling SSL certificate checks, security issue.", true,
           "disabling certificate verification allows man-in-the-middle interception"};
    r.matcher.kind = MatcherKind::Call;
    r.matcher.callee_prefixes = {"requests.", "httpx."};
    r.matcher.required_keyword = KeywordCondition{"verify", {"False"}};
    rules.push_back(std::move(r));
  }
  {
    Rule r{"B506", "yaml_load", Level::Medium, Level::High, call_matcher({"yaml.load"}),
           "Use of unsafe yaml load. Allows instantiation of arbitrary objects. Consider yaml.safe_load().", true,
           "yaml.load without a safe loader can instantiate arbitrary Python objects"};
    r.matcher.suppressing_keywords.push_back({"Loader", {"SafeLoader", "CSafeLoader"}});
    r.matcher.suppressing_positional = PositionalCondition{1, {"SafeLoader", "CSafeLoader"}};
    rules.push_back(std::move(r));
  }
  {
    Rule r{"B602", "subprocess_popen_with_shell_equals_true", Level::High, Level::High,
           call_matcher({"subprocess.Popen", "subprocess.call", "subprocess.check_call", "subprocess.check_output",
                         "subprocess.run", "subprocess.getoutput", "subprocess.getstatusoutput"}),
           "subprocess call with shell=True identified, security issue.", true,
           "shell=True passes the command through /bin/sh, enabling shell injection"};
    r.matcher.required_keyword = KeywordCondition{"shell", {"True"}};
    rules.push_back(std::move(r));
  }
  {
    Rule r{"B608", "hardcoded_sql_expressions", Level::Medium, Level::Low, {},
           "Possible SQL injection vector through string-based query construction.", false,
           "SQL text assembled by string interpolation can be injected into"};
    r.matcher.kind = MatcherKind::StringLiteral;
    r.matcher.literal_pattern =
        R"(select\s[\s\S]*from\s|delete\s+from\s|insert\s+into\s[\s\S]*(values|select)\s|update\s[\s\S]*set\s)";
    r.matcher.require_interpolation = true;
    rules.push_back(std::move(r));
  }
  {
    Rule r{"B999", "extension_sentinel", Level::Low, Level::Low, {}, "Extension sentinel (never matches).", false,
           "reserved catalog slot for extension tests"};
    r.matcher.kind = MatcherKind::Never;
    rules.push_back(std::move(r));
  }
  return rules;
}

}  // namespace

RuleCatalog::RuleCatalog(std::vector<Rule> rules) : rules_(std::move(rules)) {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    for (std::size_t j = i + 1; j < rules_.size(); ++j) {
      if (rules_[i].test_id == rules_[j].test_id) {
        throw ConfigError("duplicate rule id " + rules_[i].test_id);
      }
    }
  }
}

const RuleCatalog& RuleCatalog::standard() {
  static const RuleCatalog catalog(build_standard_rules());
  return catalog;
}

const Rule* RuleCatalog::find(std::string_view test_id) const {
  for (const auto& rule : rules_) {
    if (rule.test_id == test_id) return &rule;
  }
  return nullptr;
}

RuleCatalog RuleCatalog::only(const std::vector<std::string>& test_ids) const {
  std::vector<Rule> kept;
  for (const auto& id : test_ids) {
    if (!find(id)) throw ConfigError("unknown rule id " + id);
  }
  for (const auto& rule : rules_) {
    if (std::find(test_ids.begin(), test_ids.end(), rule.test_id) != test_ids.end()) kept.push_back(rule);
  }
  return RuleCatalog(std::move(kept));
}

RuleCatalog RuleCatalog::without(const std::vector<std::string>& test_ids) const {
  std::vector<Rule> kept;
  for (const auto& id : test_ids) {
    if (!find(id)) throw ConfigError("unknown rule id " + id);
  }
  for (const auto& rule : rules_) {
    if (std::find(test_ids.begin(), test_ids.end(), rule.test_id) == test_ids.end()) kept.push_back(rule);
  }
  return RuleCatalog(std::move(kept));
}

}  // namespace securefix
