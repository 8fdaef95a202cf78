#include <catch_amalgamated.hpp>

#include "securefix/engine.h"
#include "test_support.h"

using namespace securefix;

namespace {

EngineRequest request_at(const SourceFile& file, const Finding& f, Task task) {
  EngineRequest req;
  req.task = task;
  req.finding = f;
  req.segment = extract_segment(file, f.span());
  req.context = build_context(file, f.span(), 8000);
  return req;
}

struct Applied {
  PatchProposal proposal;
  SourceFile result;
};

Applied apply_first(const std::string& text, const std::string& rule) {
  SourceFile file("t.py", text);
  Report r = scan(file, RuleCatalog::standard(), 0);
  auto it = std::find_if(r.findings.begin(), r.findings.end(), [&](const Finding& f) { return f.test_id == rule; });
  REQUIRE(it != r.findings.end());
  TemplateEngine engine;
  auto req = request_at(file, *it, Task::ProposePatch);
  PatchProposal p = engine.propose_patch(req);
  if (p.no_safe_fix) return {p, file};
  SourceFile spliced = splice_segment(file, req.segment, p.patched_segment);
  return {p, insert_imports(spliced, p.ensure_imports)};
}

std::string patch_of(const std::string& text, const std::string& rule) {
  return apply_first(text, rule).proposal.patched_segment;
}

int count_rule(const SourceFile& f, const std::string& rule) {
  Report r = scan(f, RuleCatalog::standard(), 0);
  return static_cast<int>(std::count_if(r.findings.begin(), r.findings.end(),
                                        [&](const Finding& x) { return x.test_id == rule; }));
}

}  // namespace

TEST_CASE("documented rewrites") {
  CHECK(patch_of("y = yaml.load(f)\n", "B506") == "y = yaml.safe_load(f)\n");
  CHECK(patch_of("y = yaml.load(f, Loader=yaml.Loader)\n", "B506") == "y = yaml.safe_load(f)\n");
  CHECK(patch_of("y = yaml.load(f, yaml.FullLoader)\n", "B506") == "y = yaml.safe_load(f)\n");
  CHECK(patch_of("r = requests.get(u, verify=False)\n", "B501") == "r = requests.get(u, verify=True)\n");
  CHECK(patch_of("import hashlib\nh = hashlib.md5(d)\n", "B324") == "h = hashlib.sha256(d)\n");
  CHECK(patch_of("import hashlib\nh = hashlib.new(\"md5\", d)\n", "B324") == "h = hashlib.sha256(d)\n");
  CHECK(patch_of("import tempfile\np = tempfile.mktemp()\n", "B306") == "p = tempfile.mkstemp()\n");
  CHECK(patch_of("import subprocess\nsubprocess.call(\"ls -l /tmp\", shell=True)\n", "B602") ==
        "subprocess.call([\"ls\", \"-l\", \"/tmp\"], shell=False)\n");
  CHECK(patch_of("    assert ok, \"bad\"\n", "B101") == "    if not (ok): raise AssertionError(\"bad\")\n");
  CHECK(patch_of("db_password = \"pw\"\n", "B105") == "db_password = os.environ.get(\"DB_PASSWORD\")\n");
}

TEST_CASE("import directives") {
  auto a = apply_first("import random\nn = random.randint(1, 6)\n", "B311");
  CHECK(a.proposal.patched_segment == "n = secrets.SystemRandom().randint(1, 6)\n");
  CHECK(a.proposal.ensure_imports == std::vector<std::string>{"secrets"});
  auto c = apply_first("import random\nx = random.choice(xs)\n", "B311");
  CHECK(c.proposal.patched_segment == "x = secrets.choice(xs)\n");
  auto b = apply_first("password = 'x1'\n", "B105");
  CHECK(b.proposal.ensure_imports == std::vector<std::string>{"os"});
  CHECK(b.result.text() == "import os\npassword = os.environ.get(\"PASSWORD\")\n");
}

TEST_CASE("rules without a deterministic rewrite decline") {
  CHECK(apply_first("exec(user_input)\n", "B102").proposal.no_safe_fix);
  CHECK(apply_first("import pickle\no = pickle.loads(b)\n", "B301").proposal.no_safe_fix);
  CHECK(apply_first("q = 'SELECT a FROM t WHERE b = %s' % v\n", "B608").proposal.no_safe_fix);
  for (auto cmd : {"ls | wc", "echo $HOME", "rm *.tmp", "a;b", "echo 'x'", "a  b"}) {
    INFO(cmd);
    std::string text = std::string("import subprocess\nsubprocess.call(\"") + cmd + "\", shell=True)\n";
    CHECK(apply_first(text, "B602").proposal.no_safe_fix);
  }
  CHECK(apply_first("import subprocess\nsubprocess.call(cmd, shell=True)\n", "B602").proposal.no_safe_fix);
  CHECK(apply_first("if x: assert y\n", "B101").proposal.no_safe_fix);
  auto p = apply_first("exec(x)\n", "B102").proposal;
  CHECK(p.engine_id == "template");
  CHECK_FALSE(p.explanation.empty());
}

TEST_CASE("the engine is a pure function of rule and segment") {
  SourceFile file("t.py", "import yaml\ny = yaml.load(f)\n");
  Finding f = scan(file, RuleCatalog::standard(), 0).findings.at(0);
  TemplateEngine a, b;
  auto req = request_at(file, f, Task::ProposePatch);
  auto other = req;
  other.context = "something else entirely\n";
  other.iteration = 3;
  CHECK(a.propose_patch(req) == b.propose_patch(other));
}

TEST_CASE("template fixes clear every fixable positive fixture") {
  auto dir = testing::fixtures_dir() / "analyzer";
  auto labels = nlohmann::json::parse(testing::read_file(dir / "labels.json"));
  int verified = 0;
  for (const auto& [name, expected] : labels.items()) {
    for (const auto& e : expected) {
      std::string rule = e.at("test_id");
      if (!RuleCatalog::standard().find(rule)->has_template_fix) continue;
      INFO(name << " " << rule);
      SourceFile file = SourceFile::load(dir / name);
      auto applied = apply_first(file.text(), rule);
      if (applied.proposal.no_safe_fix) {
        // Only a non-literal shell command is outside the rewrite's reach.
        CHECK(name == "b602_pos_popen_var.py");
        continue;
      }
      CHECK(count_rule(applied.result, rule) == count_rule(file, rule) - 1);
      CHECK(parse_source(applied.result.text()).parse_ok);
      ++verified;
    }
  }
  CHECK(verified >= 25);
}

TEST_CASE("cross-validation heuristics") {
  TemplateEngine engine;
  auto verdict = [&](const std::string& text, const std::string& rule) {
    SourceFile file("t.py", text);
    Report r = scan(file, RuleCatalog::standard(), 0);
    auto it = std::find_if(r.findings.begin(), r.findings.end(), [&](const Finding& f) { return f.test_id == rule; });
    REQUIRE(it != r.findings.end());
    return engine.cross_validate(request_at(file, *it, Task::CrossValidate)).classification;
  };
  CHECK(verdict("password = ''\n", "B105") == Classification::FalsePositive);
  CHECK(verdict("password = 'hunter2'\n", "B105") == Classification::TruePositive);
  CHECK(verdict("exec(code)\n", "B102") == Classification::TruePositive);
  CHECK(verdict("q = 'SELECT a FROM t WHERE b = %s' % v\n", "B608") == Classification::TruePositive);
}
