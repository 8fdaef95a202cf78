#include "securefix/cli.h"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "CLI11.hpp"
#include "securefix/corpus.h"
#include "securefix/errors.h"
#include "securefix/orchestrator.h"
#include "securefix/parallel.h"

namespace securefix {
namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> enable;
  std::vector<std::string> disable;
};

struct EngineOptions {
  std::string engine;
  std::string endpoint;
  std::string model;
  std::string transcript;
  std::string record;
  std::string prompts;
  int max_iter = 0;
  unsigned workers = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON configuration file (default $SFA_CONFIG)");
  auto* en = cmd->add_option("--enable", o.enable, "Only run these rule ids")->delimiter(',');
  cmd->add_option("--disable", o.disable, "Skip these rule ids")->delimiter(',')->excludes(en);
}

void add_engine(CLI::App* cmd, EngineOptions& o) {
  cmd->add_option("--engine", o.engine, "template | llm | replay");
  cmd->add_option("--endpoint", o.endpoint, "Chat-completion endpoint URL (llm)");
  cmd->add_option("--model", o.model, "Model name sent to the endpoint (llm)");
  cmd->add_option("--transcript", o.transcript, "NDJSON transcript to replay (replay)");
  cmd->add_option("--record", o.record, "Append LLM replies to this NDJSON transcript (llm)");
  cmd->add_option("--prompts", o.prompts, "Prompt template directory");
  cmd->add_option("--max-iter", o.max_iter, "Maximum repair iterations")->check(CLI::PositiveNumber);
  cmd->add_option("--workers", o.workers, "Worker threads (0 = all cores)");
}

CliOverrides overrides_from(const CommonOptions& c, const EngineOptions* e) {
  CliOverrides o;
  if (!c.enable.empty()) o.enabled = c.enable;
  if (!c.disable.empty()) o.disabled = c.disable;
  if (e) {
    if (!e->engine.empty()) o.engine = e->engine;
    if (!e->endpoint.empty()) o.endpoint = e->endpoint;
    if (!e->model.empty()) o.model_name = e->model;
    if (!e->transcript.empty()) o.transcript_path = e->transcript;
    if (!e->record.empty()) o.record_path = e->record;
    if (!e->prompts.empty()) o.prompts_dir = e->prompts;
    if (e->max_iter > 0) o.max_iterations = e->max_iter;
    if (e->workers > 0) o.workers = e->workers;
  }
  return o;
}

std::optional<fs::path> config_file(const CommonOptions& c) {
  if (c.config_path.empty()) return std::nullopt;
  return fs::path(c.config_path);
}

// Files named directly, plus *.py found recursively under directories.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::recursive_directory_iterator(p)) {
        if (entry.is_regular_file() && entry.path().extension() == ".py") found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw UsageError("no such file or directory: " + in);
    }
  }
  return out;
}

void print_text_report(const Report& report, std::ostream& out) {
  if (report.findings.empty()) {
    out << report.filename << ": no issues\n";
  }
  for (const auto& f : report.findings) {
    out << report.filename << ':' << f.line_number << ':' << f.col_offset << "  " << f.test_id << "  "
        << to_string(f.severity) << '/' << to_string(f.confidence) << "  " << f.test_name << "  " << f.message
        << '\n';
  }
  for (const auto& e : report.errors) out << report.filename << ": error: " << e.reason << '\n';
}

int cmd_scan(const std::vector<std::string>& inputs, const std::string& format, const CommonOptions& common,
             const Environment& env, std::ostream& out) {
  CliConfig config = load_config(config_file(common), env, overrides_from(common, nullptr));
  RuleCatalog catalog = select_rules(config);
  bool any = false;
  for (const auto& path : expand_inputs(inputs)) {
    Report report = scan(SourceFile::load(path), catalog, 0);
    any = any || !report.empty();
    if (format == "text") print_text_report(report, out);
    else out << serialize_report(report);
  }
  return any ? exit_code::kFindings : exit_code::kOk;
}

bool total_engine_failure(int calls, int unreachable) { return calls > 0 && unreachable == calls; }

int cmd_fix(const std::vector<std::string>& inputs, const std::string& out_dir, const CommonOptions& common,
            const EngineOptions& eo, bool encrypt, const Environment& env, std::ostream& out, std::ostream& err) {
  CliOverrides o = overrides_from(common, &eo);
  if (encrypt) o.encrypt = true;
  CliConfig config = load_config(config_file(common), env, o);
  RuleCatalog catalog = select_rules(config);
  auto key = resolve_key(config, env);
  auto engine = make_engine(config.engine, config.prompts_dir);
  auto files = expand_inputs(inputs);
  if (files.empty()) throw UsageError("no Python files to fix");

  SessionOptions session;
  session.max_iterations = config.loop.max_iterations;
  session.context_budget = config.engine.context_budget;
  session.config_digest = config_digest(config);

  // Several inputs: one package per file, laid out relative to their common directory.
  fs::path common_dir;
  for (const auto& f : files) {
    fs::path parent = fs::absolute(f).lexically_normal().parent_path();
    if (common_dir.empty()) {
      common_dir = parent;
      continue;
    }
    fs::path shared;
    for (auto a = common_dir.begin(), b = parent.begin(); a != common_dir.end() && b != parent.end() && *a == *b;
         ++a, ++b) {
      shared /= *a;
    }
    common_dir = shared;
  }
  std::vector<fs::path> targets;
  for (const auto& f : files) {
    if (files.size() == 1) {
      targets.push_back(out_dir);
    } else {
      targets.push_back(fs::path(out_dir) / fs::absolute(f).lexically_normal().lexically_relative(common_dir));
    }
  }

  std::vector<OutputPackage> packages(files.size());
  std::mutex err_mutex;
  parallel_for(files.size(), config.workers, [&](std::size_t i) {
    packages[i] = run_session(SourceFile::load(files[i]), *engine, catalog, session);
    write_package(packages[i], targets[i], key);
    std::lock_guard lock(err_mutex);
    err << files[i].string() << ": " << to_string(packages[i].status) << " after " << packages[i].iterations
        << " iteration(s), findings " << packages[i].reports.front().findings.size() << " -> "
        << packages[i].final_report().findings.size() << '\n';
  });

  bool all_converged = true;
  int calls = 0, unreachable = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& pkg = packages[i];
    nlohmann::ordered_json line;
    line["file"] = files[i].string();
    line["out"] = targets[i].string();
    line["status"] = to_string(pkg.status);
    line["iterations"] = pkg.iterations;
    line["findings_initial"] = pkg.reports.front().findings.size();
    line["findings_final"] = pkg.final_report().findings.size();
    out << line.dump() << '\n';
    all_converged = all_converged && pkg.status == SessionStatus::Converged;
    calls += pkg.engine_calls;
    unreachable += pkg.engine_unreachable;
  }
  if (total_engine_failure(calls, unreachable)) {
    err << "error: every engine call failed (engine unreachable)\n";
    return exit_code::kEngineFailure;
  }
  return all_converged ? exit_code::kOk : exit_code::kFindings;
}

struct InjectOptions {
  std::string base;
  std::string out;
  int count = 10;
  std::uint64_t seed = 0;
  std::vector<std::string> rules;
  bool fixable_only = false;
  bool cascade = false;
  double fp_rate = 0.0;
};

int cmd_inject(const InjectOptions& o, std::ostream& out, std::ostream& err) {
  CorpusOptions options;
  options.count = o.count;
  options.seed = o.seed;
  options.rules = o.rules;
  options.cascade = o.cascade;
  options.fp_plant_rate = o.fp_rate;
  if (o.fixable_only && options.rules.empty()) options.rules = template_fixable_rules();
  auto manifest = generate_corpus(load_base_files(o.base), o.out, options);
  err << "wrote " << o.count << " file(s) with " << manifest.size() << " manifest entries to " << o.out << '\n';
  out << (fs::path(o.out) / "manifest.json").string() << '\n';
  return exit_code::kOk;
}

struct EvalCliOptions {
  std::string corpus;
  std::string manifest;
  bool single_pass = false;
  bool all = false;
  std::string json_out;
};

int cmd_eval(const EvalCliOptions& eo, const CommonOptions& common, const EngineOptions& engine_opts,
             const Environment& env, std::ostream& out, std::ostream& err) {
  CliConfig config = load_config(config_file(common), env, overrides_from(common, &engine_opts));
  RuleCatalog catalog = select_rules(config);
  fs::path manifest_path = eo.manifest.empty() ? fs::path(eo.corpus) / "manifest.json" : fs::path(eo.manifest);
  auto manifest = load_manifest(manifest_path);
  auto engine = make_engine(config.engine, config.prompts_dir);

  EvalOptions base;
  base.workers = config.workers;
  base.session.max_iterations = config.loop.max_iterations;
  base.session.context_budget = config.engine.context_budget;
  base.session.config_digest = config_digest(config);

  std::vector<EvalMode> modes = {EvalMode::ScanOnly};
  if (eo.all) {
    modes.push_back(EvalMode::SinglePass);
    modes.push_back(EvalMode::FullLoop);
  } else {
    modes.push_back(eo.single_pass ? EvalMode::SinglePass : EvalMode::FullLoop);
  }

  std::vector<EvalResult> results;
  int calls = 0, unreachable = 0;
  for (EvalMode mode : modes) {
    EvalOptions options = base;
    options.mode = mode;
    results.push_back(evaluate(eo.corpus, manifest, engine.get(), options, catalog));
    calls += results.back().engine_calls;
    unreachable += results.back().engine_unreachable;
  }

  out << compare_configurations(results);
  if (!eo.json_out.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : results) arr.push_back(eval_result_to_json(r));
    std::ofstream f(eo.json_out, std::ios::binary | std::ios::trunc);
    f << arr.dump(2) << '\n';
    if (!f) throw IoError("cannot write " + eo.json_out);
  }
  if (total_engine_failure(calls, unreachable)) {
    err << "error: every engine call failed (engine unreachable)\n";
    return exit_code::kEngineFailure;
  }
  return exit_code::kOk;
}

int cmd_rules(std::ostream& out) {
  const auto& rules = RuleCatalog::standard().rules();
  std::size_t name_width = 0;
  for (const auto& r : rules) name_width = std::max(name_width, r.test_name.size());
  out << "ID    " << std::string("NAME").append(name_width - 4 + 2, ' ') << "SEVERITY  CONFIDENCE  TEMPLATE FIX\n";
  for (const auto& r : rules) {
    std::string sev(to_string(r.severity));
    std::string conf(to_string(r.confidence));
    out << r.test_id << "  " << r.test_name << std::string(name_width - r.test_name.size() + 2, ' ') << sev
        << std::string(10 - sev.size(), ' ') << conf << std::string(12 - conf.size(), ' ')
        << (r.has_template_fix ? "yes" : "no") << '\n';
  }
  return exit_code::kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, const Environment& env, std::ostream& out, std::ostream& err) {
  CLI::App app{"Iterative static-analysis-driven repair of Python security findings"};
  app.require_subcommand(1);

  CommonOptions common;
  EngineOptions engine_opts;

  std::vector<std::string> scan_inputs;
  std::string format = "json";
  auto* scan_cmd = app.add_subcommand("scan", "Scan files and print Bandit-compatible reports");
  scan_cmd->add_option("paths", scan_inputs, "Python files or directories")->required();
  scan_cmd->add_option("--format", format, "json | text")->check(CLI::IsMember({"json", "text"}));
  add_common(scan_cmd, common);

  std::vector<std::string> fix_inputs;
  std::string fix_out;
  bool encrypt = false;
  auto* fix_cmd = app.add_subcommand("fix", "Run the repair loop and write output packages");
  fix_cmd->add_option("paths", fix_inputs, "Python files or directories")->required();
  fix_cmd->add_option("--out", fix_out, "Output package directory")->required();
  fix_cmd->add_flag("--encrypt", encrypt, "Encrypt artifacts with the key in $SFA_AES_KEY");
  add_common(fix_cmd, common);
  add_engine(fix_cmd, engine_opts);

  InjectOptions inject_opts;
  auto* inject_cmd = app.add_subcommand("inject", "Generate an injected-vulnerability corpus");
  inject_cmd->add_option("--base", inject_opts.base, "Directory of clean base .py files")->required();
  inject_cmd->add_option("--out", inject_opts.out, "Corpus output directory")->required();
  inject_cmd->add_option("--count", inject_opts.count, "Number of files")->check(CLI::PositiveNumber);
  inject_cmd->add_option("--seed", inject_opts.seed, "RNG seed");
  inject_cmd->add_option("--rules", inject_opts.rules, "Rule ids to inject (round-robin)")->delimiter(',');
  inject_cmd->add_flag("--fixable-only", inject_opts.fixable_only, "Only rules with a template fix");
  inject_cmd->add_flag("--cascade", inject_opts.cascade, "Use two-finding cascade templates");
  inject_cmd->add_option("--fp-rate", inject_opts.fp_rate, "Probability of a false-positive plant per file")
      ->check(CLI::Range(0.0, 1.0));

  EvalCliOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate an engine on a corpus");
  eval_cmd->add_option("--corpus", eval_opts.corpus, "Corpus directory")->required();
  eval_cmd->add_option("--manifest", eval_opts.manifest, "Manifest (default <corpus>/manifest.json)");
  auto* sp = eval_cmd->add_flag("--single-pass", eval_opts.single_pass, "One repair iteration, no re-validation loop");
  eval_cmd->add_flag("--all", eval_opts.all, "Scan-only, single-pass and full-loop rows")->excludes(sp);
  eval_cmd->add_option("--json", eval_opts.json_out, "Write results as JSON to this file");
  add_common(eval_cmd, common);
  add_engine(eval_cmd, engine_opts);

  app.add_subcommand("rules", "List the rule catalog");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? exit_code::kOk : exit_code::kUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? exit_code::kOk : exit_code::kUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return exit_code::kUsage;
  }

  try {
    if (*scan_cmd) return cmd_scan(scan_inputs, format, common, env, out);
    if (*fix_cmd) return cmd_fix(fix_inputs, fix_out, common, engine_opts, encrypt, env, out, err);
    if (*inject_cmd) return cmd_inject(inject_opts, out, err);
    if (*eval_cmd) return cmd_eval(eval_opts, common, engine_opts, env, out, err);
    return cmd_rules(out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
  } catch (const LoadError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << '\n';
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const PlacementError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
  }
  return exit_code::kUsage;
}

}  // namespace securefix
