#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "securefix/corpus.h"
#include "securefix/errors.h"

namespace securefix {

std::string_view to_string(Label label) {
  return label == Label::TruePositive ? "true_positive" : "false_positive";
}

namespace {

VulnTemplate single(std::string rule, std::string snippet, std::vector<std::string> imports,
                    std::optional<std::string> fixed = std::nullopt, std::vector<std::string> fixed_imports = {}) {
  VulnTemplate t;
  t.rule_id = rule;
  t.rule_ids = {rule};
  t.snippet = std::move(snippet);
  t.required_imports = std::move(imports);
  t.fixed_form = std::move(fixed);
  t.fixed_imports = std::move(fixed_imports);
  return t;
}

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

}  // namespace

const std::vector<VulnTemplate>& vuln_templates() {
  static const std::vector<VulnTemplate> templates = {
      single("B101", R"(assert {v} is not None, "{v} missing")", {},
             R"(if not ({v} is not None): raise AssertionError("{v} missing"))"),
      single("B102", "exec({v}_code)", {}),
      single("B105", R"({v}_password = "s3cr3t-{v}")", {}, R"({v}_password = os.environ.get("{V}_PASSWORD"))",
             {"os"}),
      single("B301", "{v} = pickle.loads({v}_blob)", {"pickle"}),
      single("B306", "{v} = tempfile.mktemp()", {"tempfile"}, "{v} = tempfile.mkstemp()"),
      single("B311", "{v} = random.randint(1, 100)", {"random"}, "{v} = secrets.SystemRandom().randint(1, 100)",
             {"secrets"}),
      single("B324", R"({v} = hashlib.md5(b"{v}").hexdigest())", {"hashlib"},
             R"({v} = hashlib.sha256(b"{v}").hexdigest())"),
      single("B501", R"({v} = requests.get("https://example.com/{v}", verify=False))", {"requests"},
             R"({v} = requests.get("https://example.com/{v}", verify=True))"),
      single("B506", R"({v} = yaml.load(open("{v}.yml")))", {"yaml"}, R"({v} = yaml.safe_load(open("{v}.yml")))"),
      single("B602", R"(subprocess.call("ls -l /tmp/{v}", shell=True))", {"subprocess"},
             R"(subprocess.call(["ls", "-l", "/tmp/{v}"], shell=False))"),
      single("B608", R"({v}_query = "SELECT name FROM users WHERE id = %s" % {v}_id)", {}),
  };
  return templates;
}

const std::vector<VulnTemplate>& cascade_templates() {
  static const std::vector<VulnTemplate> templates = [] {
    std::vector<VulnTemplate> out;
    auto cascade = [&](std::string primary, std::string secondary, std::string snippet,
                       std::vector<std::string> imports) {
      VulnTemplate t = single(primary, std::move(snippet), std::move(imports));
      t.rule_ids.push_back(std::move(secondary));
      out.push_back(std::move(t));
    };
    // The primary is the finding processed first (descending test id on a line).
    cascade("B506", "B306", "{v} = yaml.load(open(tempfile.mktemp()))", {"yaml", "tempfile"});
    cascade("B324", "B311", "{v} = hashlib.md5(random.randbytes(8)).hexdigest()", {"hashlib", "random"});
    cascade("B501", "B311", R"({v} = requests.get("https://example.com/{v}", verify=False, timeout=random.randint(1, 5)))",
            {"requests", "random"});
    return out;
  }();
  return templates;
}

const std::vector<VulnTemplate>& false_positive_templates() {
  static const std::vector<VulnTemplate> templates = [] {
    VulnTemplate t = single("B105", R"({v}_password = "")", {});
    t.label = Label::FalsePositive;
    return std::vector<VulnTemplate>{t};
  }();
  return templates;
}

const VulnTemplate* template_for(std::string_view rule_id) {
  for (const auto& t : vuln_templates()) {
    if (t.rule_id == rule_id) return &t;
  }
  return nullptr;
}

std::string render_template(std::string_view text, std::string_view name) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.substr(i, 3) == "{v}") {
      out += name;
      i += 2;
    } else if (text.substr(i, 3) == "{V}") {
      out += upper(name);
      i += 2;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

nlohmann::ordered_json manifest_to_json(const std::vector<ManifestEntry>& entries) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["file"] = e.file;
    j["rule_id"] = e.rule_id;
    j["injected_line"] = e.injected_line;
    j["fingerprint"] = e.fingerprint;
    j["seed"] = e.seed;
    j["label"] = to_string(e.label);
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<ManifestEntry> manifest_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw IntegrityError("manifest must be a JSON array");
  std::vector<ManifestEntry> out;
  try {
    for (const auto& e : j) {
      ManifestEntry m;
      m.file = e.at("file").get<std::string>();
      m.rule_id = e.at("rule_id").get<std::string>();
      m.injected_line = e.at("injected_line").get<int>();
      m.fingerprint = e.at("fingerprint").get<std::string>();
      m.seed = e.at("seed").get<std::uint64_t>();
      auto label = e.value("label", std::string("true_positive"));
      if (label != "true_positive" && label != "false_positive") throw IntegrityError("bad manifest label " + label);
      m.label = label == "true_positive" ? Label::TruePositive : Label::FalsePositive;
      out.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("manifest schema violation: ") + e.what());
  }
  return out;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot read manifest " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw IntegrityError("manifest is not valid JSON: " + path.string());
  return manifest_from_json(j);
}

namespace {

struct Placement {
  int line;  // insert before this line; line_count + 1 means end of file
  int indent;
};

std::vector<Placement> placements(const SourceFile& file, const VulnTemplate& tmpl) {
  SyntaxModel model = parse_source(file.text());
  int after_imports = 0;
  for (const auto& b : model.imports) {
    if (b.top_level) after_imports = std::max(after_imports, b.end_line);
  }
  std::vector<Placement> out;
  const LogicalLine* previous = nullptr;
  for (const auto& ll : model.logical_lines) {
    const auto& tok = ll.first_token;
    bool continuation = tok == "elif" || tok == "else" || tok == "except" || tok == "finally";
    bool decorated = previous && previous->first_token == "@";
    previous = &ll;
    if (continuation || decorated) continue;
    if (ll.indent == 0 && tmpl.module_level && ll.span.start > after_imports) {
      out.push_back({ll.span.start, 0});
    } else if (ll.enclosing_def_line != 0 && ll.indent == ll.body_indent && tmpl.function_body) {
      out.push_back({ll.span.start, ll.indent});
    }
  }
  if (tmpl.module_level) out.push_back({file.line_count() + 1, 0});
  return out;
}

// Inserts one rendered snippet; returns the file with required imports added.
SourceFile place(const SourceFile& file, const VulnTemplate& tmpl, const std::string& name, std::mt19937_64& rng) {
  auto options = placements(file, tmpl);
  if (options.empty()) throw PlacementError("no legal placement in " + file.path().string());
  const Placement& p = options[rng() % options.size()];
  std::string nl(file.newline());
  std::string line = std::string(static_cast<std::size_t>(p.indent), ' ') + render_template(tmpl.snippet, name) + nl;
  std::string text = file.text();
  std::size_t at;
  if (p.line > file.line_count()) {
    if (!text.empty() && text.back() != '\n' && text.back() != '\r') text += nl;
    at = text.size();
  } else {
    at = file.line_offsets()[static_cast<std::size_t>(p.line - 1)];
  }
  text.insert(at, line);
  return insert_imports(SourceFile(file.path(), std::move(text)), tmpl.required_imports);
}

std::string fresh_name(int serial, std::mt19937_64& rng) {
  static const char* hex = "0123456789abcdef";
  std::string name = "sfx" + std::to_string(serial) + "_";
  for (int k = 0; k < 4; ++k) name.push_back(hex[rng() % 16]);
  return name;
}

// Locates each planted rule's finding by the unique identifier on its line.
std::vector<ManifestEntry> locate(const Report& report, const VulnTemplate& tmpl, const std::string& name,
                                  std::uint64_t seed, const std::string& path) {
  std::vector<ManifestEntry> out;
  for (const auto& rule : tmpl.rule_ids) {
    const Finding* hit = nullptr;
    for (const auto& f : report.findings) {
      if (f.test_id != rule) continue;
      // Names are sfx<k>_<hex4> with k unique per file, so a substring hit is exact.
      if (f.flagged_text().find(name) == std::string::npos) continue;
      if (hit) throw PlacementError("injected " + rule + " matched twice in " + path);
      hit = &f;
    }
    if (!hit) throw PlacementError("injected " + rule + " not detected in " + path);
    out.push_back({"", rule, hit->line_number, hit->fingerprint, seed, tmpl.label});
  }
  return out;
}

}  // namespace

Injection inject(const SourceFile& clean, const VulnTemplate& tmpl, std::uint64_t seed, const RuleCatalog& catalog) {
  if (!scan(clean, catalog, 0).empty()) {
    throw PreconditionError("injection target is not clean: " + clean.path().string());
  }
  std::mt19937_64 rng(seed);
  std::string name = fresh_name(0, rng);
  Injection result;
  result.file = place(clean, tmpl, name, rng);
  result.entries = locate(scan(result.file, catalog, 0), tmpl, name, seed, clean.path().string());
  return result;
}

std::vector<std::string> template_fixable_rules(const RuleCatalog& catalog) {
  std::vector<std::string> out;
  for (const auto& t : vuln_templates()) {
    const Rule* rule = catalog.find(t.rule_id);
    if (rule && rule->has_template_fix) out.push_back(t.rule_id);
  }
  return out;
}

std::vector<SourceFile> load_base_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> paths;
  if (!std::filesystem::is_directory(dir)) throw UsageError("base directory not found: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".py") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<SourceFile> out;
  for (const auto& p : paths) out.push_back(SourceFile::load(p));
  return out;
}

std::vector<ManifestEntry> generate_corpus(const std::vector<SourceFile>& base, const std::filesystem::path& out_dir,
                                           const CorpusOptions& options, const RuleCatalog& catalog) {
  if (base.empty()) throw UsageError("empty base file set");
  if (options.count < 1) throw UsageError("corpus count must be >= 1");
  for (const auto& f : base) {
    if (!scan(f, catalog, 0).empty()) throw PreconditionError("base file is not clean: " + f.path().string());
  }

  std::vector<const VulnTemplate*> pool;
  if (options.cascade) {
    for (const auto& t : cascade_templates()) {
      if (options.rules.empty() ||
          std::find(options.rules.begin(), options.rules.end(), t.rule_id) != options.rules.end()) {
        pool.push_back(&t);
      }
    }
  } else {
    for (const auto& t : vuln_templates()) {
      if (options.rules.empty() ||
          std::find(options.rules.begin(), options.rules.end(), t.rule_id) != options.rules.end()) {
        pool.push_back(&t);
      }
    }
  }
  for (const auto& id : options.rules) {
    if (!catalog.find(id)) throw ConfigError("unknown rule id " + id);
  }
  if (pool.empty()) throw UsageError("no injection templates match the rule filter");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<ManifestEntry> manifest;
  std::size_t round_robin = 0;
  for (int index = 0; index < options.count; ++index) {
    std::uint64_t file_seed = options.seed * 1000003ULL + static_cast<std::uint64_t>(index);
    std::mt19937_64 rng(file_seed);
    char buf[32];
    std::snprintf(buf, sizeof buf, "file_%04d.py", index);
    std::string file_name = buf;

    SourceFile current(file_name, base[rng() % base.size()].text());
    int injections = 1 + static_cast<int>(rng() % 3);
    std::vector<std::pair<const VulnTemplate*, std::string>> planted;
    for (int k = 0; k < injections; ++k) {
      const VulnTemplate* t = pool[round_robin++ % pool.size()];
      std::string name = fresh_name(k, rng);
      current = place(current, *t, name, rng);
      planted.emplace_back(t, name);
    }
    if (options.fp_plant_rate > 0.0 &&
        std::uniform_real_distribution<double>(0.0, 1.0)(rng) < options.fp_plant_rate) {
      const VulnTemplate* t = &false_positive_templates().front();
      std::string name = fresh_name(injections, rng);
      current = place(current, *t, name, rng);
      planted.emplace_back(t, name);
    }

    Report report = scan(current, catalog, 0);
    for (const auto& [t, name] : planted) {
      for (auto& e : locate(report, *t, name, file_seed, file_name)) {
        e.file = file_name;
        manifest.push_back(std::move(e));
      }
    }
    std::ofstream out(out_dir / file_name, std::ios::binary | std::ios::trunc);
    out << current.text();
    if (!out) throw IoError("cannot write " + (out_dir / file_name).string());
  }

  std::ofstream out(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest_to_json(manifest).dump(2) << "\n";
  if (!out) throw IoError("cannot write " + (out_dir / "manifest.json").string());
  return manifest;
}

}  // namespace securefix
