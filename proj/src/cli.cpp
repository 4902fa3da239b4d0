#include "ilasr/cli.hpp"

#include "ilasr/config_io.hpp"
#include "ilasr/errors.hpp"
#include "ilasr/experiments.hpp"
#include "ilasr/metrics.hpp"
#include "ilasr/param_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

namespace ilasr {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)");
  cmd->add_option("--seed", o.seed, "Run this single seed instead of the configured list");
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  auto config = o.config.empty() ? ExperimentConfig::defaults() : load_experiment_config(o.config);
  if (o.seed) config.seeds = {*o.seed};
  config.validate();
  return config;
}

void write_set(const fs::path& dir, const EvalSet& set) { write_jsonl(dir / (set.name + ".jsonl"), set.items); }

int gen_world(const CommonOptions& o, std::ostream& out) {
  const auto config = resolve_config(o);
  for (const auto seed : config.seeds) {
    const fs::path dir = fs::path(o.out) / ("seed" + std::to_string(seed));
    fs::create_directories(dir / "pools");
    fs::create_directories(dir / "evals");
    const auto world = build_world(config.world, seed);
    write_text(dir / "world.json", to_json(world).dump(1) + "\n");
    MonthStream stream(world);
    for (int m = 0; m <= world.last_month(); ++m) {
      write_jsonl(dir / "pools" / ("month-" + std::to_string(m) + ".jsonl"),
                  stream.gen_month_pool(m, world.months[static_cast<std::size_t>(m)].volume));
    }
    const auto evals = build_eval_sets(world, config.eval_sizes);
    for (const auto* set : evals.reported()) write_set(dir / "evals", *set);
    for (const auto& set : evals.gate) write_set(dir / "evals", set);
    out << "wrote " << dir.string() << "\n";
  }
  return kExitOk;
}

int pretrain_cmd(const CommonOptions& o, std::ostream& out) {
  const auto config = resolve_config(o);
  const auto result = run_experiment("pretrain", config, fs::path(o.out));
  out << summary_markdown(result);
  return kExitOk;
}

int run_cmd(const std::string& name, const CommonOptions& o, std::ostream& out) {
  const auto config = resolve_config(o);
  const auto dir = fs::path(o.out) / name;
  const auto result = run_experiment(name, config, dir);
  out << summary_markdown(result) << "\nreports written to " << dir.string() << "\n";
  return kExitOk;
}

int eval_cmd(const std::string& model_path, const std::string& set_path, std::ostream& out) {
  const auto model = load_params(model_path);
  if (!fs::exists(set_path)) throw FileError("eval set file '" + set_path + "' does not exist");
  const auto items = read_jsonl(set_path);
  for (const auto& u : items) {
    if (u.feats.cols() != model.dims.featdim) {
      throw ShapeError("utterance '" + u.id + "' has featdim " + std::to_string(u.feats.cols()) +
                       ", model expects " + std::to_string(model.dims.featdim));
    }
  }
  const auto r = corpus_wer(model, items);
  Json j = {{"model", model_path}, {"set", set_path}, {"utterances", items.size()},
            {"edits", r.total_edits}, {"ref_tokens", r.total_ref_len}, {"wer", r.wer}};
  out << j.dump() << "\n";
  return kExitOk;
}

int audit_cmd(const std::string& dir, std::ostream& out) {
  if (!fs::exists(dir)) throw FileError("campaign directory '" + dir + "' does not exist");
  std::vector<fs::path> logs;
  if (fs::is_regular_file(dir)) {
    logs.push_back(dir);
  } else {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().filename() == "audit.jsonl") logs.push_back(e.path());
    }
  }
  if (logs.empty()) throw FileError("no audit.jsonl under '" + dir + "'");
  std::sort(logs.begin(), logs.end());
  long failed = 0;
  for (const auto& path : logs) {
    std::ifstream in(path);
    std::string line;
    long rounds = 0;
    long violations = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::parse_error& e) {
        throw DataError("malformed audit line in '" + path.string() + "': " + e.what());
      }
      ++rounds;
      for (const auto& v : j.at("violations")) {
        ++violations;
        out << path.string() << ": round " << j.at("round").get<int>() << " " << v.at("id").get<std::string>()
            << " " << v.at("reason").get<std::string>() << "\n";
      }
    }
    failed += violations;
    out << path.string() << ": " << rounds << " audits, " << violations << " violations\n";
  }
  out << (failed == 0 ? "audit passed" : "audit FAILED") << "\n";
  return failed == 0 ? kExitOk : kExitRuntime;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Incremental learning simulator: drift world, teacher/student campaigns, experiment reports",
               "ilasr_cli"};
  app.require_subcommand(1);

  CommonOptions common;
  auto* gen = app.add_subcommand("gen-world", "Generate the world, monthly pools and eval sets as JSON-lines");
  add_common(gen, common);
  auto* pre = app.add_subcommand("pretrain", "Pretrain the student and teacher tiers");
  add_common(pre, common);
  std::string experiment;
  auto* run = app.add_subcommand("run", "Run a named experiment");
  run->add_option("experiment", experiment, "Experiment name")->required()->check(CLI::IsMember(kExperimentNames));
  add_common(run, common);
  std::string model_path;
  std::string set_path;
  auto* ev = app.add_subcommand("eval", "Corpus WER of a model file on a JSON-lines set");
  ev->add_option("model", model_path, "ParamSet file")->required();
  ev->add_option("set", set_path, "Eval set (.jsonl)")->required();
  std::string campaign_dir;
  auto* audit = app.add_subcommand("audit-log", "Summarize the store audits of a campaign output");
  audit->add_option("campaign", campaign_dir, "Campaign or experiment output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*gen) return gen_world(common, out);
    if (*pre) return pretrain_cmd(common, out);
    if (*run) return run_cmd(experiment, common, out);
    if (*ev) return eval_cmd(model_path, set_path, out);
    if (*audit) return audit_cmd(campaign_dir, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FileError& e) {
    err << "file error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ilasr
