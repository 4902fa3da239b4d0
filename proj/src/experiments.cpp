#include "ilasr/experiments.hpp"

#include "ilasr/errors.hpp"
#include "ilasr/param_io.hpp"
#include "ilasr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

namespace ilasr {

namespace {

std::uint64_t tier_tag(const std::string& tier) {
  if (tier == kStudentTier) return 100;
  for (std::size_t i = 0; i < kTeacherTiers.size(); ++i) {
    if (kTeacherTiers[i] == tier) return 101 + i;
  }
  throw ConfigError("unknown model tier '" + tier + "' (expected student, T1, T2 or T3)");
}

std::string ratio_label(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", ratio);
  return buf;
}

using WerTable = std::map<std::string, double>;

WerTable evaluate(const ParamSet& model, const EvalSuite& evals) {
  WerTable out;
  for (const auto* set : evals.reported()) out[set->name] = corpus_wer(model, set->items).wer;
  return out;
}

struct RowSink {
  std::string experiment;
  std::vector<ReportRow>* rows;

  void add(const std::string& variant, std::uint64_t seed, int month, const WerTable& wers,
           const WerTable& baseline, int rounds, int accepted) const {
    for (const auto& [set, wer] : wers) {
      ReportRow row;
      row.experiment = experiment;
      row.variant = variant;
      row.seed = seed;
      row.month = month;
      row.test_set = set;
      row.wer = wer;
      const auto base = baseline.at(set);
      row.werr_vs_pretrained = base > 0.0 ? werr(base, wer) : std::nan("");
      row.rounds = rounds;
      row.accepted_rounds = accepted;
      rows->push_back(std::move(row));
    }
  }
};

std::pair<int, int> round_counts(const CampaignResult& run, int up_to_month) {
  int rounds = 0;
  int accepted = 0;
  for (const auto& r : run.records) {
    if (r.month > up_to_month) continue;
    ++rounds;
    accepted += r.accepted ? 1 : 0;
  }
  return {rounds, accepted};
}

CampaignConfig campaign_for(const ExperimentConfig& config, SeedContext& ctx) {
  CampaignConfig cfg = config.campaign;
  cfg.seed = ctx.seed();
  if (config.continue_schedule) cfg.initial_step = ctx.model(kStudentTier).steps;
  return cfg;
}

CampaignResult campaign(SeedContext& ctx, const CampaignConfig& cfg) {
  return run_campaign(ctx.world(), cfg, ctx.model(kStudentTier).params, ctx.model(cfg.teacher_tier).params,
                      ctx.replay_store(), ctx.evals());
}

// Rows for the final snapshot of a campaign variant.
void add_final(const RowSink& sink, const std::string& variant, SeedContext& ctx, const CampaignResult& run,
               const WerTable& baseline) {
  const int last = static_cast<int>(run.snapshots.size()) - 1;
  const auto [rounds, accepted] = round_counts(run, last);
  sink.add(variant, ctx.seed(), last, evaluate(run.snapshots.back(), ctx.evals()), baseline, rounds, accepted);
}

}  // namespace

void TierConfig::validate() const {
  if (hidden < 1 || epochs < 0 || batch_size < 1) {
    throw ConfigError("tier needs hidden >= 1, epochs >= 0, batch_size >= 1");
  }
  if (!(data_fraction > 0.0 && data_fraction <= 1.0)) throw ConfigError("tier data_fraction must be in (0, 1]");
  schedule.validate();
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.world.month_volume = 4000;
  c.eval_sizes.general = 600;
  c.eval_sizes.gate = 600;
  c.tiers[kStudentTier] = TierConfig{12, 2, 32, 1.0, LrSchedule::desk_preset()};
  c.tiers["T1"] = TierConfig{64, 12, 32, 1.0, LrSchedule::desk_preset()};
  c.tiers["T2"] = TierConfig{16, 3, 32, 0.75, LrSchedule::desk_preset()};
  c.tiers["T3"] = TierConfig{16, 2, 32, 0.5, LrSchedule::desk_preset()};
  return c;
}

void ExperimentConfig::validate() const {
  world.validate();
  campaign.validate();
  if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
  for (const auto& [name, tier] : tiers) {
    tier_tag(name);
    tier.validate();
  }
  for (const char* needed : {"student", "T1", "T2", "T3"}) {
    if (tiers.count(needed) == 0) throw ConfigError(std::string("missing tier config '") + needed + "'");
  }
  for (double r : replay_ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("replay ratios must be in [0, 1]");
  }
  for (int b : batch_sizes) {
    if (b < 1) throw ConfigError("batch sizes must be positive");
  }
  if (freeze_month < 0 || freeze_month > world.months) throw ConfigError("freeze_month outside the campaign");
}

PretrainResult pretrain(const WorldSpec& world, const std::vector<Utterance>& pretrain_pool,
                        const std::string& tier, const TierConfig& config, std::uint64_t seed) {
  const auto tag = tier_tag(tier);
  config.validate();
  const auto n = static_cast<std::size_t>(std::floor(config.data_fraction * static_cast<double>(pretrain_pool.size())));
  std::vector<LabeledView> views;
  views.reserve(n);
  for (std::size_t i = 0; i < n; ++i) views.push_back({&pretrain_pool[i].feats, &pretrain_pool[i].truth});

  PretrainResult out{init_params({world.featdim, config.hidden, world.vocab}, make_rng(seed, {tag})()), 0};
  if (views.empty()) return out;
  auto state = OptimizerState::make(OptimizerKind::kAdam, out.params.dims);
  std::vector<LabeledView> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto rng = make_rng(seed, {tag, static_cast<std::uint64_t>(epoch)});
    std::shuffle(views.begin(), views.end(), rng);
    for (std::size_t start = 0; start < views.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const auto len = std::min(static_cast<std::size_t>(config.batch_size), views.size() - start);
      const Batch b(views.data() + start, len);
      auto next = optimizer_step(out.params, grad(out.params, b), state, lr_at(config.schedule, out.steps));
      out.params = std::move(next.params);
      state = std::move(next.state);
      ++out.steps;
    }
  }
  return out;
}

SeedContext::SeedContext(const ExperimentConfig& config, std::uint64_t seed)
    : config_(&config), seed_(seed), world_(build_world(config.world, seed)) {
  evals_ = build_eval_sets(world_, config.eval_sizes);
  MonthStream stream(world_);
  pretrain_pool_ = stream.gen_month_pool(0, world_.months.front().volume);
}

const PretrainResult& SeedContext::model(const std::string& tier) {
  auto it = models_.find(tier);
  if (it != models_.end()) return it->second;
  const auto cfg = config_->tiers.find(tier);
  if (cfg == config_->tiers.end()) throw ConfigError("no tier config for '" + tier + "'");
  return models_.emplace(tier, pretrain(world_, pretrain_pool_, tier, cfg->second, seed_)).first->second;
}

ReplayStore SeedContext::replay_store() const { return ReplayStore(pretrain_pool_, seed_); }

ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& config,
                                const std::optional<std::filesystem::path>& out_dir) {
  if (std::find(kExperimentNames.begin(), kExperimentNames.end(), name) == kExperimentNames.end()) {
    throw ConfigError("unknown experiment '" + name + "'");
  }
  config.validate();
  ExperimentResult result;
  result.name = name;
  const RowSink sink{name, &result.rows};

  for (const auto seed : config.seeds) {
    SeedContext ctx(config, seed);
    if (name != "pretrain" && ctx.world().last_month() < 1) {
      throw SetupError("experiment '" + name + "' needs at least one incremental month");
    }
    const auto baseline = evaluate(ctx.model(kStudentTier).params, ctx.evals());
    sink.add("pretrained", seed, 0, baseline, baseline, 0, 0);

    if (name == "pretrain") {
      for (const auto& tier : kTeacherTiers) {
        sink.add(tier, seed, 0, evaluate(ctx.model(tier).params, ctx.evals()), baseline, 0, 0);
      }
      for (const auto& tier : {std::string(kStudentTier), kTeacherTiers[0], kTeacherTiers[1], kTeacherTiers[2]}) {
        result.models[seed][tier] = ctx.model(tier).params;
      }
    } else if (name == "monthly-incremental") {
      auto run = campaign(ctx, campaign_for(config, ctx));
      for (int m = 1; m < static_cast<int>(run.snapshots.size()); ++m) {
        const auto [rounds, accepted] = round_counts(run, m);
        sink.add("incremental", seed, m, evaluate(run.snapshots[static_cast<std::size_t>(m)], ctx.evals()),
                 baseline, rounds, accepted);
      }
      result.runs.push_back({"incremental", seed, std::move(run)});
    } else if (name == "replay-ablation") {
      for (double ratio : config.replay_ratios) {
        auto cfg = campaign_for(config, ctx);
        cfg.replay_ratio = ratio;
        const std::string variant = ratio == 0.0 ? "no-replay" : "replay-" + ratio_label(ratio);
        auto run = campaign(ctx, cfg);
        add_final(sink, variant, ctx, run, baseline);
        result.runs.push_back({variant, seed, std::move(run)});
      }
    } else if (name == "batch-size-sweep") {
      std::optional<std::multiset<std::string>> reference;
      bool identical = true;
      for (int size : config.batch_sizes) {
        auto cfg = campaign_for(config, ctx);
        cfg.worker.effective_batch_size = size;
        cfg.worker.micro_batch_size = std::gcd(size, config.campaign.worker.micro_batch_size);
        const std::string variant = "batch-" + std::to_string(size);
        auto run = campaign(ctx, cfg);
        std::multiset<std::string> ids(run.consumed_ids.begin(), run.consumed_ids.end());
        if (!reference) reference = std::move(ids);
        else identical = identical && ids == *reference;
        add_final(sink, variant, ctx, run, baseline);
        result.runs.push_back({variant, seed, std::move(run)});
      }
      result.notes.push_back("seed " + std::to_string(seed) + ": consumed-id sets " +
                             (identical ? "identical" : "DIFFER") + " across batch sizes");
    } else if (name == "ordering-ablation") {
      for (auto ordering : {Ordering::kChronological, Ordering::kRandom}) {
        auto cfg = campaign_for(config, ctx);
        cfg.ordering = ordering;
        auto run = campaign(ctx, cfg);
        add_final(sink, to_string(ordering), ctx, run, baseline);
        result.runs.push_back({to_string(ordering), seed, std::move(run)});
      }
    } else if (name == "teacher-ablation") {
      for (const auto& tier : kTeacherTiers) {
        sink.add("teacher-" + tier, seed, 0, evaluate(ctx.model(tier).params, ctx.evals()), baseline, 0, 0);
      }
      for (const auto& tier : kTeacherTiers) {
        auto cfg = campaign_for(config, ctx);
        cfg.teacher_tier = tier;
        auto run = campaign(ctx, cfg);
        add_final(sink, "student-" + tier, ctx, run, baseline);
        result.runs.push_back({"student-" + tier, seed, std::move(run)});
      }
    } else if (name == "staleness") {
      auto run = campaign(ctx, campaign_for(config, ctx));
      const int freeze = std::min(config.freeze_month, static_cast<int>(run.snapshots.size()) - 1);
      const auto frozen = evaluate(run.snapshots[static_cast<std::size_t>(freeze)], ctx.evals());
      const auto [frozen_rounds, frozen_accepted] = round_counts(run, freeze);
      for (int m = 1; m < static_cast<int>(run.snapshots.size()); ++m) {
        const auto [rounds, accepted] = round_counts(run, m);
        sink.add("continuous", seed, m, evaluate(run.snapshots[static_cast<std::size_t>(m)], ctx.evals()),
                 baseline, rounds, accepted);
        if (m >= freeze) {
          sink.add("frozen-m" + std::to_string(freeze), seed, m, frozen, baseline, frozen_rounds, frozen_accepted);
        }
      }
      result.runs.push_back({"continuous", seed, std::move(run)});
    }
  }
  if (out_dir) write_experiment(result, *out_dir);
  return result;
}

std::optional<double> find_wer(const std::vector<ReportRow>& rows, const std::string& variant, std::uint64_t seed,
                               int month, const std::string& test_set) {
  for (const auto& r : rows) {
    if (r.variant == variant && r.seed == seed && r.month == month && r.test_set == test_set) return r.wer;
  }
  return std::nullopt;
}

std::string summary_markdown(const ExperimentResult& result) {
  // Median WER per (variant, month, test set) across seeds.
  std::map<std::tuple<std::string, int, std::string>, std::vector<double>> cells;
  std::vector<std::string> variants;
  std::set<std::string> sets;
  for (const auto& r : result.rows) {
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
    cells[{r.variant, r.month, r.test_set}].push_back(r.wer);
    sets.insert(r.test_set);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  std::string md = "# " + result.name + "\n\nMedian WER (%) across seeds.\n\n| variant | month |";
  for (const auto& s : sets) md += " " + s + " |";
  md += "\n|---|---|";
  for (std::size_t i = 0; i < sets.size(); ++i) md += "---|";
  md += "\n";
  std::set<std::pair<std::string, int>> emitted;
  for (const auto& [key, values] : cells) {
    (void)values;
    const auto& [variant, month, set] = key;
    (void)set;
    emitted.insert({variant, month});
  }
  for (const auto& variant : variants) {
    for (const auto& [v, month] : emitted) {
      if (v != variant) continue;
      md += "| " + variant + " | " + std::to_string(month) + " |";
      for (const auto& s : sets) {
        const auto it = cells.find({variant, month, s});
        if (it == cells.end()) {
          md += " |";
        } else {
          char buf[32];
          std::snprintf(buf, sizeof buf, " %.2f |", 100.0 * median(it->second));
          md += buf;
        }
      }
      md += "\n";
    }
  }
  if (!result.notes.empty()) {
    md += "\n";
    for (const auto& n : result.notes) md += "- " + n + "\n";
  }
  return md;
}

void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.csv", report_csv(result.rows));
  write_text(dir / "report.jsonl", report_jsonl(result.rows));
  write_text(dir / "summary.md", summary_markdown(result));
  for (const auto& run : result.runs) {
    const auto sub = dir / "runs" / (run.variant + "-seed" + std::to_string(run.seed));
    std::filesystem::create_directories(sub / "snapshots");
    std::string rounds;
    std::string workers;
    for (const auto& r : run.campaign.records) {
      rounds += r.to_jsonl() + "\n";
      for (const auto& w : r.workers) workers += w.to_json() + "\n";
    }
    std::string audit;
    for (const auto& a : run.campaign.audit_log) audit += a.report.to_jsonl(a.round) + "\n";
    write_text(sub / "rounds.jsonl", rounds);
    write_text(sub / "workers.jsonl", workers);
    write_text(sub / "audit.jsonl", audit);
    for (std::size_t m = 0; m < run.campaign.snapshots.size(); ++m) {
      save_params(run.campaign.snapshots[m], sub / "snapshots" / ("month-" + std::to_string(m) + ".params"));
    }
  }
  for (const auto& [seed, tiers] : result.models) {
    const auto sub = dir / "models" / ("seed" + std::to_string(seed));
    std::filesystem::create_directories(sub);
    for (const auto& [tier, params] : tiers) save_params(params, sub / (tier + ".params"));
  }
}

}  // namespace ilasr
