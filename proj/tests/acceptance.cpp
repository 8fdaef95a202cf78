// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "securefix/cli.h"
#include "securefix/corpus.h"
#include "securefix/errors.h"
#include "test_support.h"

using namespace securefix;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kFixtureLabelAgreement = 100.0;  // percent
constexpr double kBanditAgreement = 95.0;         // percent, per snippet
constexpr double kFixtureScanSeconds = 2.0;
constexpr int kConvergenceFiles = 100;
constexpr std::uint64_t kConvergenceSeed = 42;
constexpr int kConvergenceMaxIterations = 2;
constexpr double kConvergenceSeconds = 30.0;
constexpr double kThreeOfFour = 75.0;
constexpr double kExact = 0.0;  // tolerance on metric identities
constexpr int kAdversarialMaxIterations = 2;
constexpr int kRoundTripReports = 1000;
constexpr int kMinMalformedReplies = 20;
constexpr int kMaxRetries = 2;
constexpr int kSmokeFiles = 10;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Byte-diff check. Every original line that was removed or rewritten must lie
// inside the span of an initial finding, and lines added outside such hunks
// may only be import statements.
bool edits_confined(const std::string& original, const std::string& patched, const Report& initial,
                    std::string* why) {
  auto a = lines_of(original);
  auto b = lines_of(patched);
  std::vector<std::vector<int>> lcs(a.size() + 1, std::vector<int>(b.size() + 1, 0));
  for (std::size_t i = a.size(); i-- > 0;) {
    for (std::size_t j = b.size(); j-- > 0;) {
      lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  std::set<int> flagged;
  for (const auto& f : initial.findings) {
    for (int l = f.span().start; l <= f.span().end; ++l) flagged.insert(l);
  }
  static const std::regex import_line(R"(\s*import [A-Za-z_][A-Za-z0-9_.]*\s*)");
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (i < a.size() && j < b.size() && a[i] == b[j]) {
      ++i;
      ++j;
      continue;
    }
    std::vector<std::size_t> removed;
    std::vector<std::size_t> added;
    while (i < a.size() || j < b.size()) {
      if (i < a.size() && j < b.size() && a[i] == b[j]) break;
      if (j < b.size() && (i == a.size() || lcs[i][j + 1] >= lcs[i + 1][j])) {
        added.push_back(j++);
      } else {
        removed.push_back(i++);
      }
    }
    for (auto r : removed) {
      if (!flagged.contains(static_cast<int>(r + 1))) {
        *why = "line " + std::to_string(r + 1) + " changed outside any finding span";
        return false;
      }
    }
    if (removed.empty()) {
      for (auto ad : added) {
        if (!std::regex_match(b[ad], import_line)) {
          *why = "unexpected inserted line: " + b[ad];
          return false;
        }
      }
    }
  }
  return true;
}

// Oracle engine: recognizes an injected snippet and answers with the
// template's documented fixed form, independent of the template engine.
struct OraclePattern {
  std::regex pattern;
  const VulnTemplate* tmpl;
};

const std::vector<OraclePattern>& oracle_patterns() {
  static const std::vector<OraclePattern> patterns = [] {
    std::vector<OraclePattern> out;
    for (const auto& t : vuln_templates()) {
      if (!t.fixed_form) continue;
      std::string re;
      bool first = true;
      for (std::size_t i = 0; i < t.snippet.size(); ++i) {
        if (t.snippet.compare(i, 3, "{v}") == 0) {
          re += first ? "([A-Za-z0-9_]+)" : "\\1";
          first = false;
          i += 2;
          continue;
        }
        char c = t.snippet[i];
        if (std::string_view("\\^$.|?*+()[]{}").find(c) != std::string_view::npos) re.push_back('\\');
        re.push_back(c);
      }
      out.push_back({std::regex(re), &t});
    }
    return out;
  }();
  return patterns;
}

std::optional<PatchProposal> oracle_fix(const std::string& segment) {
  std::string body = segment;
  std::string eol;
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) {
    eol.insert(eol.begin(), body.back());
    body.pop_back();
  }
  std::size_t indent = body.find_first_not_of(' ');
  if (indent == std::string::npos) return std::nullopt;
  std::string code = body.substr(indent);
  for (const auto& p : oracle_patterns()) {
    std::smatch m;
    if (!std::regex_match(code, m, p.pattern)) continue;
    PatchProposal out;
    out.patched_segment = body.substr(0, indent) + render_template(*p.tmpl->fixed_form, m[1].str()) + eol;
    out.explanation = "documented fixed form";
    out.ensure_imports = p.tmpl->fixed_imports;
    out.engine_id = "oracle";
    return out;
  }
  return std::nullopt;
}

Verdict tp(const EngineRequest&) { return {Classification::TruePositive, "confirmed"}; }

std::string verdict_json() {
  return R"({"task":"cross_validate","verdict":"true_positive","explanation":"confirmed"})";
}

std::string patch_json(const std::string& patched) {
  return nlohmann::json{{"task", "propose_patch"}, {"patched_segment", patched}, {"explanation", "scripted"}}.dump();
}

std::string no_fix_json() {
  return R"({"task":"propose_patch","no_safe_fix":true,"explanation":"declined"})";
}

Environment clean_env() {
  Environment env = current_environment();
  for (auto it = env.begin(); it != env.end();) {
    it = it->first.starts_with("SFA_") ? env.erase(it) : std::next(it);
  }
  return env;
}

std::vector<std::string> corpus_files(const fs::path& dir, int count) {
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "file_%04d.py", i);
    out.push_back((dir / buf).string());
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  auto dir = testing::fixtures_dir() / "analyzer";
  auto labels = nlohmann::json::parse(testing::read_file(dir / "labels.json"));
  auto reference = nlohmann::json::parse(testing::read_file(testing::source_dir() / "tests" / "oracle" /
                                                            "bandit_reference.json"))["files"];
  const auto& catalog = RuleCatalog::standard();

  std::map<std::string, int> positives, negatives;
  for (const auto& [name, expected] : labels.items()) {
    for (const auto& e : expected) ++positives[e.at("test_id").get<std::string>()];
    for (const auto& rule : catalog.rules()) {
      std::string prefix = rule.test_id;
      std::transform(prefix.begin(), prefix.end(), prefix.begin(), ::tolower);
      if (name.starts_with(prefix + "_neg_")) ++negatives[rule.test_id];
    }
    ++negatives["B999"];
  }
  std::string coverage_gap;
  for (const auto& rule : catalog.rules()) {
    bool live = rule.matcher.kind != MatcherKind::Never;
    if ((live && positives[rule.test_id] < 3) || negatives[rule.test_id] < 2) coverage_gap += " " + rule.test_id;
  }

  std::vector<std::pair<std::string, SourceFile>> files;
  for (const auto& [name, expected] : labels.items()) files.emplace_back(name, SourceFile::load(dir / name));

  Stopwatch watch;
  std::vector<Report> reports;
  for (const auto& [name, file] : files) reports.push_back(scan(file, catalog, 0));
  double seconds = watch.seconds();

  using Pairs = std::multiset<std::pair<int, std::string>>;
  auto pairs_of = [](const nlohmann::json& list) {
    Pairs out;
    for (const auto& e : list) out.emplace(e.at("line").get<int>(), e.at("test_id").get<std::string>());
    return out;
  };
  int label_match = 0, bandit_match = 0;
  std::string divergences;
  for (std::size_t k = 0; k < files.size(); ++k) {
    Pairs got;
    for (const auto& f : reports[k].findings) got.emplace(f.line_number, f.test_id);
    const std::string& name = files[k].first;
    if (got == pairs_of(labels[name])) ++label_match;
    if (reference.contains(name) && got == pairs_of(reference[name])) {
      ++bandit_match;
    } else {
      divergences += " " + name;
    }
  }
  int n = static_cast<int>(files.size());
  double label_pct = 100.0 * label_match / n;
  double bandit_pct = 100.0 * bandit_match / n;
  Outcome o;
  o.pass = n >= 60 && coverage_gap.empty() && label_pct >= kFixtureLabelAgreement && bandit_pct >= kBanditAgreement &&
           seconds < kFixtureScanSeconds;
  o.detail = std::to_string(n) + " snippets, labels " + fmt(label_pct) + "%, bandit " + fmt(bandit_pct) + "% (" +
             std::to_string(n - bandit_match) + " documented divergences:" + divergences + "), scan " +
             fmt(seconds, 3) + " s" + (coverage_gap.empty() ? "" : ", coverage gap:" + coverage_gap);
  return o;
}

Outcome criterion2() {
  testing::TempDir dir;
  CorpusOptions options;
  options.count = kConvergenceFiles;
  options.seed = kConvergenceSeed;
  options.rules = template_fixable_rules();
  generate_corpus(load_base_files(testing::base_dir()), dir / "corpus", options);

  std::vector<std::string> args = {"fix", "--engine", "template", "--out", (dir / "out").string()};
  for (const auto& f : corpus_files(dir / "corpus", kConvergenceFiles)) args.push_back(f);
  Stopwatch watch;
  auto r = testing::run_cli(args, clean_env());
  double seconds = watch.seconds();

  int converged = 0, clean = 0, parses = 0, python_ok = 0, python_checked = 0, max_iter = 0;
  std::istringstream lines(r.out);
  for (std::string line; std::getline(lines, line);) {
    auto j = nlohmann::json::parse(line);
    int iterations = j["iterations"].get<int>();
    max_iter = std::max(max_iter, iterations);
    if (j["status"] == "converged" && iterations <= kConvergenceMaxIterations) ++converged;
    fs::path pkg = j["out"].get<std::string>();
    SourceFile patched = SourceFile::load(pkg / "patched.py");
    if (scan(patched, RuleCatalog::standard(), 0).empty()) ++clean;
    if (parse_source(patched.text()).parse_ok) ++parses;
    if (auto py = testing::python_parses(patched.text())) {
      ++python_checked;
      if (*py) ++python_ok;
    }
  }
  Outcome o;
  o.pass = r.code == exit_code::kOk && converged == kConvergenceFiles && clean == kConvergenceFiles &&
           parses == kConvergenceFiles && python_ok == python_checked && seconds < kConvergenceSeconds;
  o.detail = std::to_string(converged) + "/" + std::to_string(kConvergenceFiles) + " converged (max " +
             std::to_string(max_iter) + " iterations), " + std::to_string(clean) + " clean, " +
             std::to_string(parses) + " parse, python ast " + std::to_string(python_ok) + "/" +
             std::to_string(python_checked) + ", fix " + fmt(seconds, 2) + " s";
  return o;
}

Outcome criterion3() {
  testing::TempDir dir;
  CorpusOptions options;
  options.count = 30;
  options.seed = 42;
  options.cascade = true;
  auto manifest = generate_corpus(load_base_files(testing::base_dir()), dir.path(), options);
  TemplateEngine engine;
  EvalOptions single;
  single.mode = EvalMode::SinglePass;
  EvalOptions full;
  full.mode = EvalMode::FullLoop;
  full.session.max_iterations = 3;
  auto r1 = evaluate(dir.path(), manifest, &engine, single);
  auto r3 = evaluate(dir.path(), manifest, &engine, full);
  Outcome o;
  o.pass = r1.fix_accuracy && r3.fix_accuracy && *r1.fix_accuracy < *r3.fix_accuracy && *r3.fix_accuracy == 100.0;
  o.detail = std::to_string(manifest.size()) + " cascade entries, fix accuracy N=1 " + fmt(r1.fix_accuracy.value_or(-1)) +
             "%, N=3 " + fmt(r3.fix_accuracy.value_or(-1)) + "%";
  return o;
}

Outcome criterion4() {
  Outcome o;
  std::string detail;
  auto base = load_base_files(testing::base_dir());
  auto templates = load_prompt_templates(testing::prompts_dir());

  // (a) four entries, a recorded script declines exactly one, replay scores it.
  testing::TempDir dir;
  std::vector<ManifestEntry> manifest;
  const std::vector<std::string> rules = {"B506", "B324", "B501", "B311"};
  const std::string declined = "B311";
  for (std::size_t k = 0; k < rules.size(); ++k) {
    auto inj = inject(base[k % base.size()], *template_for(rules[k]), 100 + k);
    char name[32];
    std::snprintf(name, sizeof name, "file_%04zu.py", k);
    testing::write_file(dir / name, inj.file.text());
    for (auto e : inj.entries) {
      e.file = name;
      manifest.push_back(e);
    }
  }
  auto recorder = std::make_shared<TranscriptRecorder>(dir / "script.ndjson");
  ChatTransport script = [&](const EngineRequest& req, const std::vector<ChatMessage>&, int) {
    if (req.task == Task::CrossValidate) return verdict_json();
    if (req.finding.test_id == declined) return no_fix_json();
    auto fix = oracle_fix(req.segment.text);
    return fix ? patch_json(fix->patched_segment) : no_fix_json();
  };
  ChatEngine recording("llm:script", script, templates, kMaxRetries, recorder);
  EvalOptions full;
  full.workers = 1;
  evaluate(dir.path(), manifest, &recording, full);

  EngineConfig replay_cfg;
  replay_cfg.kind = EngineKind::Replay;
  replay_cfg.transcript_path = dir / "script.ndjson";
  auto replay = make_engine(replay_cfg, testing::prompts_dir());
  auto a = evaluate(dir.path(), manifest, replay.get(), full);
  bool a_ok = manifest.size() == 4 && a.fix_accuracy && std::abs(*a.fix_accuracy - kThreeOfFour) <= kExact;
  detail += "replay 3-of-4 " + fmt(a.fix_accuracy.value_or(-1)) + "%";

  // (b) a no-op engine fixes nothing.
  testing::ScriptedEngine noop("noop", tp, [](const EngineRequest& r) {
    PatchProposal p;
    p.patched_segment = r.segment.text;
    p.explanation = "unchanged";
    return p;
  });
  testing::TempDir any_dir;
  CorpusOptions any;
  any.count = 20;
  any.seed = 4;
  auto any_manifest = generate_corpus(base, any_dir.path(), any);
  auto b = evaluate(any_dir.path(), any_manifest, &noop, full);
  bool b_ok = b.fix_accuracy && std::abs(*b.fix_accuracy - 0.0) <= kExact;
  detail += ", no-op " + fmt(b.fix_accuracy.value_or(-1)) + "%";

  // (c) the oracle engine on a corpus of rules with a documented fixed form.
  testing::ScriptedEngine oracle("oracle", tp, [](const EngineRequest& r) {
    if (auto fix = oracle_fix(r.segment.text)) return *fix;
    PatchProposal p;
    p.no_safe_fix = true;
    p.explanation = "unrecognized";
    return p;
  });
  testing::TempDir fixable_dir;
  CorpusOptions fixable;
  fixable.count = 40;
  fixable.seed = 11;
  for (const auto& t : vuln_templates()) {
    if (t.fixed_form) fixable.rules.push_back(t.rule_id);
  }
  auto fixable_manifest = generate_corpus(base, fixable_dir.path(), fixable);
  auto c = evaluate(fixable_dir.path(), fixable_manifest, &oracle, full);
  bool c_ok = c.fix_accuracy && std::abs(*c.fix_accuracy - 100.0) <= kExact;
  detail += ", oracle " + fmt(c.fix_accuracy.value_or(-1)) + "% on " + std::to_string(fixable_manifest.size()) +
            " entries";

  o.pass = a_ok && b_ok && c_ok;
  o.detail = detail;
  return o;
}

Outcome criterion5() {
  testing::TempDir dir;
  CorpusOptions options;
  options.count = 20;
  options.seed = 5;
  options.fp_plant_rate = 0.3;
  generate_corpus(load_base_files(testing::base_dir()), dir.path(), options);
  auto templates = load_prompt_templates(testing::prompts_dir());

  std::mt19937_64 rng(99);
  std::mutex rng_mutex;
  auto garbage = [&] {
    static const std::vector<std::string> junk = {
        "lorem ipsum", "{\"task\":", "```\n```", "{}", "null", "\x01\x02", "{\"task\":\"propose_patch\",\"x\":1}",
        std::string(5000, '{')};
    std::lock_guard lock(rng_mutex);
    return junk[rng() % junk.size()];
  };
  ChatTransport identity_t = [](const EngineRequest& r, const std::vector<ChatMessage>&, int) {
    return r.task == Task::CrossValidate ? verdict_json() : patch_json(r.segment.text);
  };
  ChatTransport garbage_t = [&](const EngineRequest&, const std::vector<ChatMessage>&, int) { return garbage(); };
  ChatTransport mixed_t = [&](const EngineRequest& r, const std::vector<ChatMessage>& m, int a) {
    bool coin;
    {
      std::lock_guard lock(rng_mutex);
      coin = rng() % 2 == 0;
    }
    return coin ? identity_t(r, m, a) : garbage();
  };

  std::vector<std::pair<std::string, std::shared_ptr<Engine>>> engines = {
      {"identity-reply", std::make_shared<ChatEngine>("llm:identity", identity_t, templates, kMaxRetries)},
      {"garbage-reply", std::make_shared<ChatEngine>("llm:garbage", garbage_t, templates, kMaxRetries)},
      {"mixed-reply", std::make_shared<ChatEngine>("llm:mixed", mixed_t, templates, kMaxRetries)},
      {"identity-splice", std::make_shared<testing::ScriptedEngine>("identity", tp, [](const EngineRequest& r) {
         PatchProposal p;
         p.patched_segment = r.segment.text;
         p.explanation = "unchanged";
         return p;
       })},
  };

  const int n_limit = 5;
  int sessions = 0, ok = 0;
  std::string failure;
  for (const auto& [label, engine] : engines) {
    for (const auto& path : corpus_files(dir.path(), options.count)) {
      ++sessions;
      SourceFile original = SourceFile::load(path);
      SessionOptions so;
      so.max_iterations = n_limit;
      OutputPackage pkg;
      try {
        pkg = run_session(original, *engine, RuleCatalog::standard(), so);
      } catch (const std::exception& e) {
        failure = label + " aborted: " + e.what();
        continue;
      }
      std::string why;
      bool good = pkg.status == SessionStatus::NoProgress && pkg.iterations <= kAdversarialMaxIterations &&
                  pkg.iterations <= n_limit && pkg.reports.size() == static_cast<std::size_t>(pkg.iterations) + 1 &&
                  edits_confined(original.text(), pkg.final_code.text(), pkg.reports.front(), &why) &&
                  pkg.final_code.text() == original.text();
      if (good) {
        ++ok;
      } else if (failure.empty()) {
        failure = label + " " + path + ": status " + std::string(to_string(pkg.status)) + ", " +
                  std::to_string(pkg.iterations) + " iterations " + why;
      }
    }
  }
  Outcome o;
  o.pass = ok == sessions;
  o.detail = std::to_string(ok) + "/" + std::to_string(sessions) +
             " adversarial sessions stopped at no_progress within 2 iterations with source bytes intact" +
             (failure.empty() ? "" : "; first failure: " + failure);
  return o;
}

Outcome criterion6() {
  testing::TempDir dir;
  CorpusOptions options;
  options.count = 12;
  options.seed = 42;
  options.fp_plant_rate = 0.3;
  generate_corpus(load_base_files(testing::base_dir()), dir / "corpus", options);
  auto files = corpus_files(dir / "corpus", options.count);
  auto run = [&](const std::string& out) {
    std::vector<std::string> args = {"fix", "--engine", "template", "--out", (dir / out).string()};
    args.insert(args.end(), files.begin(), files.end());
    return testing::run_cli(args, clean_env()).code;
  };
  int c1 = run("a");
  int c2 = run("b");
  int same = 0;
  for (const auto& f : files) {
    std::string name = fs::path(f).filename().string();
    auto da = package_digest(read_package(dir / "a" / name, std::nullopt));
    auto db = package_digest(read_package(dir / "b" / name, std::nullopt));
    if (da == db) ++same;
  }
  Outcome o;
  o.pass = c1 == c2 && c1 != exit_code::kUsage && same == options.count;
  o.detail = std::to_string(same) + "/" + std::to_string(options.count) + " package digests identical across two runs";
  return o;
}

Report random_report(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces = {
      "x = 1", "    call(a, b)", "\t\"quoted\\\" text\"", "caf\xc3\xa9 \xe2\x82\xac", "", "emoji \xf0\x9f\x94\x92",
      "ctrl \x01\x1f", "</script>", "{\"json\": [1, 2]}", "trailing   "};
  const auto& rules = RuleCatalog::standard().rules();
  auto pick = [&](const auto& v) -> const auto& { return v[rng() % v.size()]; };
  Report r;
  r.filename = pick(std::vector<std::string>{"a.py", "dir/b.py", "caf\xc3\xa9.py", "with space.py"});
  r.iteration = static_cast<int>(rng() % 10);
  r.generated_at = "2026-01-0" + std::to_string(1 + rng() % 9) + "T12:34:56Z";
  for (int e = static_cast<int>(rng() % 3); e > 0; --e) r.errors.push_back({r.filename, pick(pieces)});
  int count = static_cast<int>(rng() % 6);
  for (int k = 0; k < count; ++k) {
    const Rule& rule = pick(rules);
    Finding f;
    f.test_id = rule.test_id;
    f.test_name = rule.test_name;
    f.severity = static_cast<Level>(rng() % 3);
    f.confidence = static_cast<Level>(rng() % 3);
    f.line_number = 1 + static_cast<int>(rng() % 500);
    int extent = 1 + static_cast<int>(rng() % 3);
    for (int l = 0; l < extent; ++l) f.line_range.push_back(f.line_number + l);
    f.col_offset = static_cast<int>(rng() % 40);
    if (f.line_number > 1) f.snippet += pick(pieces) + "\n";
    for (int l = 0; l < extent; ++l) f.snippet += pick(pieces) + "\n";
    if (rng() % 2) f.snippet += pick(pieces) + "\n";
    f.message = pick(pieces) + " " + pick(pieces);
    f.fingerprint = fingerprint(f);
    r.findings.push_back(f);
  }
  std::sort(r.findings.begin(), r.findings.end(), [](const Finding& a, const Finding& b) {
    return std::tie(a.line_number, a.test_id) < std::tie(b.line_number, b.test_id);
  });
  r.metrics = compute_metrics(r.findings);
  return r;
}

Outcome criterion7() {
  std::mt19937_64 rng(7);
  int identical = 0;
  std::string first_error;
  for (int k = 0; k < kRoundTripReports; ++k) {
    Report r = random_report(rng);
    try {
      std::string text = serialize_report(r);
      if (parse_report(text) == r && serialize_report(parse_report(text)) == text) ++identical;
    } catch (const std::exception& e) {
      if (first_error.empty()) first_error = e.what();
    }
  }

  const AesKey key = parse_hex_key("8f3a1c9e2b7d4f6a0e5c3b1d9a7f2e4c");
  const AesKey wrong = parse_hex_key("00000000000000000000000000000001");
  testing::TempDir dir;
  SourceFile file("pkg.py", "import yaml\nimport random\n\ncfg = yaml.load(s)\nn = random.random()\nexec(c)\n");
  TemplateEngine engine;
  auto pkg = run_session(file, engine, RuleCatalog::standard(), {});
  write_package(pkg, dir / "plain", std::nullopt);
  auto enc_paths = write_package(pkg, dir / "enc", key);
  bool enc_identity = read_package(dir / "enc", key) == read_package(dir / "plain", std::nullopt);

  int tamper_cases = 0, rejected = 0;
  for (const auto& p : enc_paths) {
    if (p.extension() != ".enc") continue;
    std::string original = testing::read_file(p);
    for (std::size_t pos : {std::size_t{0}, original.size() / 2, original.size() - 1}) {
      std::string blob = original;
      blob[pos] = static_cast<char>(blob[pos] ^ 0x40);
      testing::write_file(p, blob);
      ++tamper_cases;
      try {
        read_package(dir / "enc", key);
      } catch (const AuthenticationError&) {
        ++rejected;
      }
    }
    testing::write_file(p, original.substr(0, 10));
    ++tamper_cases;
    try {
      read_package(dir / "enc", key);
    } catch (const AuthenticationError&) {
      ++rejected;
    }
    testing::write_file(p, original);
  }
  ++tamper_cases;
  try {
    read_package(dir / "enc", wrong);
  } catch (const AuthenticationError&) {
    ++rejected;
  }

  Outcome o;
  o.pass = identical == kRoundTripReports && enc_identity && tamper_cases > 0 && rejected == tamper_cases;
  o.detail = std::to_string(identical) + "/" + std::to_string(kRoundTripReports) + " report round-trips, encrypted " +
             "package identity " + (enc_identity ? "yes" : "no") + ", " + std::to_string(rejected) + "/" +
             std::to_string(tamper_cases) + " tampered or wrong-key reads rejected" +
             (first_error.empty() ? "" : "; " + first_error);
  return o;
}

Outcome criterion8() {
  using ReplyFn = std::function<std::string(const EngineRequest&)>;
  struct Case {
    std::string label;
    Task task;
    MalformedCategory expected;
    ReplyFn reply;
  };
  auto fixed = [](std::string s) { return [s](const EngineRequest&) { return s; }; };
  const auto CV = Task::CrossValidate;
  const auto PP = Task::ProposePatch;
  const auto NJ = MalformedCategory::NoJson;
  const auto SV = MalformedCategory::SchemaViolation;
  const auto NP = MalformedCategory::NoopPatch;
  std::vector<Case> cases = {
      {"prose only", CV, NJ, fixed("Sure! Here is my analysis: this is definitely a real issue.")},
      {"empty reply", PP, NJ, fixed("")},
      {"empty fence", PP, NJ, fixed("```json\n```")},
      {"truncated json", CV, NJ, fixed("{\"task\":\"cross_validate\",\"verdict\":\"true_positive\",\"expla")},
      {"truncated fenced json", PP, NJ, fixed("```json\n{\"task\":\"propose_patch\",\"patched_segment\":\"x\n```")},
      {"python dict syntax", CV, NJ, fixed("{'task': 'cross_validate', 'verdict': 'true_positive', 'explanation': 'x'}")},
      {"trailing comma", CV, NJ, fixed("{\"task\":\"cross_validate\",\"verdict\":\"false_positive\",\"explanation\":\"x\",}")},
      {"json array", PP, NJ, fixed("[\"propose_patch\", 1, 2]")},
      {"unknown verdict", CV, SV, fixed("{\"task\":\"cross_validate\",\"verdict\":\"likely\",\"explanation\":\"x\"}")},
      {"missing explanation", CV, SV, fixed("{\"task\":\"cross_validate\",\"verdict\":\"true_positive\"}")},
      {"extra key", CV, SV,
       fixed("{\"task\":\"cross_validate\",\"verdict\":\"true_positive\",\"explanation\":\"x\",\"score\":1}")},
      {"wrong task", CV, SV, fixed("{\"task\":\"propose_patch\",\"no_safe_fix\":true,\"explanation\":\"x\"}")},
      {"missing task", PP, SV, fixed("{\"patched_segment\":\"y = 1\\n\",\"explanation\":\"x\"}")},
      {"fenced wrong keys", PP, SV,
       fixed("Here you go:\n```json\n{\"task\":\"propose_patch\",\"patch\":\"y = 1\\n\",\"explanation\":\"x\"}\n```")},
      {"non-string patch", PP, SV, fixed("{\"task\":\"propose_patch\",\"patched_segment\":[1],\"explanation\":\"x\"}")},
      {"no_safe_fix false", PP, SV, fixed("{\"task\":\"propose_patch\",\"no_safe_fix\":false,\"explanation\":\"x\"}")},
      {"patch and no_safe_fix", PP, SV,
       fixed("{\"task\":\"propose_patch\",\"patched_segment\":\"a\\n\",\"no_safe_fix\":true,\"explanation\":\"x\"}")},
      {"empty explanation", PP, SV, fixed("{\"task\":\"propose_patch\",\"no_safe_fix\":true,\"explanation\":\"\"}")},
      {"explanation too long", CV, SV,
       fixed("{\"task\":\"cross_validate\",\"verdict\":\"true_positive\",\"explanation\":\"" + std::string(600, 'z') +
             "\"}")},
      {"no-op patch", PP, NP, [](const EngineRequest& r) { return patch_json(r.segment.text); }},
      {"fenced no-op patch", PP, NP,
       [](const EngineRequest& r) { return "Fixed it:\n```json\n" + patch_json(r.segment.text) + "\n```"; }},
      {"no-op patch without newline", PP, NP,
       [](const EngineRequest& r) {
         std::string s = r.segment.text;
         if (!s.empty() && s.back() == '\n') s.pop_back();
         return patch_json(s);
       }},
  };

  auto templates = load_prompt_templates(testing::prompts_dir());
  SourceFile file("m.py", "import yaml\n\ncfg = yaml.load(stream)\n");
  int passed = 0;
  std::string failure;
  for (const auto& c : cases) {
    std::atomic<int> calls_for_task{0};
    ChatTransport transport = [&](const EngineRequest& r, const std::vector<ChatMessage>&, int) {
      if (r.task != c.task) return verdict_json();
      ++calls_for_task;
      return c.reply(r);
    };
    ChatEngine engine("llm:malformed", transport, templates, kMaxRetries);

    std::optional<MalformedCategory> got;
    OutputPackage pkg;
    bool aborted = false;
    try {
      pkg = run_session(file, engine, RuleCatalog::standard(), {});
    } catch (const std::exception&) {
      aborted = true;
    }
    // The category as surfaced by the engine for the same request.
    {
      EngineRequest req;
      req.task = c.task;
      req.finding = scan(file, RuleCatalog::standard(), 0).findings.at(0);
      req.segment = extract_segment(file, req.finding.span());
      ChatEngine probe("llm:probe", [&](const EngineRequest& r, const std::vector<ChatMessage>&, int) {
        return c.reply(r);
      }, templates, kMaxRetries);
      try {
        if (c.task == CV) probe.cross_validate(req);
        else probe.propose_patch(req);
      } catch (const EngineError& e) {
        got = e.malformed();
      }
    }
    bool unresolved = !aborted && !pkg.records.empty() &&
                      pkg.records.front().failure_reason == FailureReason::Malformed && !pkg.final_report().empty();
    bool retries_ok = calls_for_task.load() == 1 + kMaxRetries;
    if (got == c.expected && unresolved && retries_ok) {
      ++passed;
    } else if (failure.empty()) {
      failure = c.label + ": category " + (got ? std::string(to_string(*got)) : "none") + ", transport calls " +
                std::to_string(calls_for_task.load()) + (aborted ? ", session aborted" : "") +
                (unresolved ? "" : ", not degraded to unresolved");
    }
  }
  Outcome o;
  int n = static_cast<int>(cases.size());
  o.pass = n >= kMinMalformedReplies && passed == n;
  o.detail = std::to_string(passed) + "/" + std::to_string(n) + " malformed replies categorized, retried " +
             std::to_string(kMaxRetries) + " times and left unresolved" + (failure.empty() ? "" : "; " + failure);
  return o;
}

Outcome criterion9(std::string* table) {
  Environment env = clean_env();
  std::unique_ptr<testing::StubChatServer> stub;
  std::string endpoint;
  const char* live = std::getenv("SFA_ENGINE_ENDPOINT");
  if (live && *live) {
    endpoint = live;
    if (const char* model = std::getenv("SFA_MODEL")) env["SFA_MODEL"] = model;
  } else {
    stub = std::make_unique<testing::StubChatServer>();
    endpoint = stub->endpoint();
  }

  testing::TempDir dir;
  CorpusOptions options;
  options.count = kSmokeFiles;
  options.seed = 42;
  options.fp_plant_rate = 0.3;
  generate_corpus(load_base_files(testing::base_dir()), dir / "corpus", options);
  auto files = corpus_files(dir / "corpus", kSmokeFiles);

  const std::string key_hex = "0f1e2d3c4b5a69788796a5b4c3d2e1f0";
  auto fix = [&](std::vector<std::string> engine_args, const std::string& out, bool encrypt) {
    std::vector<std::string> args = {"fix", "--max-iter", "5", "--out", (dir / out).string()};
    args.insert(args.end(), engine_args.begin(), engine_args.end());
    if (encrypt) args.push_back("--encrypt");
    args.insert(args.end(), files.begin(), files.end());
    Environment e = env;
    e["SFA_AES_KEY"] = key_hex;
    return testing::run_cli(args, e);
  };
  std::string transcript = (dir / "transcript.ndjson").string();
  auto live_run = fix({"--engine", "llm", "--endpoint", endpoint, "--record", transcript}, "live", false);
  auto replay_run = fix({"--engine", "replay", "--transcript", transcript}, "replay", false);
  auto enc_run = fix({"--engine", "replay", "--transcript", transcript}, "enc", true);
  bool completed = (live_run.code == exit_code::kOk || live_run.code == exit_code::kFindings) &&
                   replay_run.code == live_run.code && enc_run.code == live_run.code;

  auto strip_digest = [](std::map<std::string, std::string> contents) {
    auto j = nlohmann::ordered_json::parse(contents.at("session.json"));
    j.erase("config_digest");
    contents["session.json"] = j.dump();
    return contents;
  };
  const AesKey key = parse_hex_key(key_hex);
  int terminated = 0, confined = 0, deterministic = 0, encrypted = 0;
  std::string why;
  for (const auto& f : files) {
    std::string name = fs::path(f).filename().string();
    try {
      auto a = read_package(dir / "live" / name, std::nullopt);
      auto b = read_package(dir / "replay" / name, std::nullopt);
      auto c = read_package(dir / "enc" / name, key);
      auto session = nlohmann::json::parse(a.at("session.json"));
      int iterations = session["iterations"].get<int>();
      parse_session_status(session["status"].get<std::string>());
      if (iterations <= 5) ++terminated;
      std::string initial_name = a.contains("reports/iter_000.json") ? "reports/iter_000.json" : "reports/final.json";
      std::string w;
      if (edits_confined(a.at("original.py"), a.at("patched.py"), parse_report(a.at(initial_name)), &w)) {
        ++confined;
      } else if (why.empty()) {
        why = name + ": " + w;
      }
      if (package_digest(strip_digest(a)) == package_digest(strip_digest(b))) ++deterministic;
      if (package_digest(strip_digest(b)) == package_digest(strip_digest(c))) ++encrypted;
    } catch (const std::exception& e) {
      if (why.empty()) why = name + ": " + e.what();
    }
  }

  auto eval = testing::run_cli({"eval", "--corpus", (dir / "corpus").string(), "--all", "--engine", "llm",
                                "--endpoint", endpoint},
                               env);
  *table = eval.out;
  auto rows = lines_of(eval.out);
  bool table_ok = rows.size() == 5 && rows[0].find("Configuration") == 0 &&
                  rows[0].find("Fix Accuracy (%)") != std::string::npos &&
                  rows[0].find("False Positives (%)") != std::string::npos &&
                  rows[0].find("Avg. Iterations") != std::string::npos && rows[2].starts_with("scan-only") &&
                  rows[3].starts_with("single-pass") && rows[4].starts_with("full-loop");
  if (table_ok) {
    std::istringstream cols(rows[2]);
    std::string label, fix_col;
    cols >> label >> fix_col;
    table_ok = fix_col == "--";
  }

  Outcome o;
  o.pass = completed && terminated == kSmokeFiles && confined == kSmokeFiles && deterministic == kSmokeFiles &&
           encrypted == kSmokeFiles && table_ok && eval.code != exit_code::kUsage &&
           eval.code != exit_code::kEngineFailure;
  o.detail = std::string(stub ? "local stub endpoint" : "live endpoint " + endpoint) + ", fix exit " +
             std::to_string(live_run.code) + ", " + std::to_string(terminated) + " terminated, " +
             std::to_string(confined) + " byte-confined, " + std::to_string(deterministic) +
             " record/replay identical, " + std::to_string(encrypted) + " encrypted identical, table " +
             (table_ok ? "ok" : "malformed") + (why.empty() ? "" : "; " + why);
  return o;
}

}  // namespace

int main() {
  std::string table;
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"analyzer fixture agreement", criterion1},
      {"template end-to-end convergence", criterion2},
      {"iteration-value property on cascade corpus", criterion3},
      {"metric oracle identities", criterion4},
      {"termination and safety under adversarial engines", criterion5},
      {"determinism of output packages", criterion6},
      {"report and package round-trips", criterion7},
      {"engine output parsing and retries", criterion8},
      {"chat endpoint smoke run and comparison table", [&] { return criterion9(&table); }},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    Stopwatch watch;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (k + 1) << " (" << criteria[k].first
              << "): " << o.detail << " [" << fmt(watch.seconds(), 2) << " s]" << std::endl;
  }
  if (!table.empty()) std::cout << "\n" << table;
  std::cout << "\n" << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
