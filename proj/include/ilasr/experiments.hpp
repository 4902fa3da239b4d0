#pragma once

// Named, seeded experiment scenarios built on run_campaign, plus the
// pretraining of the student and the three teacher tiers.

#include "ilasr/drift_stream.hpp"
#include "ilasr/metrics.hpp"
#include "ilasr/model.hpp"
#include "ilasr/orchestrator.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ilasr {

/// Width and training budget of one pretrained model tier.
struct TierConfig {
  int hidden = 16;
  int epochs = 2;
  int batch_size = 32;
  /// Leading fraction of the pretrain-era pool the tier trains on.
  double data_fraction = 1.0;
  LrSchedule schedule = LrSchedule::desk_preset();

  void validate() const;
};

inline constexpr const char* kStudentTier = "student";
inline const std::vector<std::string> kTeacherTiers = {"T1", "T2", "T3"};

struct ExperimentConfig {
  WorldConfig world;
  EvalSizes eval_sizes;
  std::map<std::string, TierConfig> tiers;
  CampaignConfig campaign;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<double> replay_ratios = {0.0, 0.1, 0.25};
  std::vector<int> batch_sizes = {32, 128, 512, 2048};
  int freeze_month = 3;
  /// Start campaigns at the student's final pretraining step.
  bool continue_schedule = true;

  static ExperimentConfig defaults();
  void validate() const;
};

inline const std::vector<std::string> kExperimentNames = {
    "pretrain",          "monthly-incremental", "replay-ablation", "batch-size-sweep",
    "ordering-ablation", "teacher-ablation",    "staleness"};

struct PretrainResult {
  ParamSet params;
  std::int64_t steps = 0;
};

/// Trains a tier on the leading `data_fraction` of the pretrain pool with truth labels.
PretrainResult pretrain(const WorldSpec& world, const std::vector<Utterance>& pretrain_pool,
                        const std::string& tier, const TierConfig& config, std::uint64_t seed);

/// Everything one seed of an experiment needs; models are trained on first use.
class SeedContext {
 public:
  SeedContext(const ExperimentConfig& config, std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  const WorldSpec& world() const { return world_; }
  const EvalSuite& evals() const { return evals_; }
  const std::vector<Utterance>& pretrain_pool() const { return pretrain_pool_; }
  const PretrainResult& model(const std::string& tier);
  ReplayStore replay_store() const;

 private:
  const ExperimentConfig* config_;
  std::uint64_t seed_;
  WorldSpec world_;
  EvalSuite evals_;
  std::vector<Utterance> pretrain_pool_;
  std::map<std::string, PretrainResult> models_;
};

struct VariantRun {
  std::string variant;
  std::uint64_t seed = 0;
  CampaignResult campaign;
};

struct ExperimentResult {
  std::string name;
  std::vector<ReportRow> rows;
  std::vector<VariantRun> runs;
  /// Pretrained models per seed and tier (pretrain experiment only).
  std::map<std::uint64_t, std::map<std::string, ParamSet>> models;
  std::vector<std::string> notes;
};

/// Runs `name` for every seed in `config.seeds`; writes reports when `out_dir` is set.
ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& config,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Reported WER of a single row, or nullopt if absent.
std::optional<double> find_wer(const std::vector<ReportRow>& rows, const std::string& variant, std::uint64_t seed,
                               int month, const std::string& test_set);

std::string summary_markdown(const ExperimentResult& result);
void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace ilasr
