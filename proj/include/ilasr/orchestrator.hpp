#pragma once

// Round loop of the incremental learner: ingest streaming data into the
// ephemeral store, let K workers pseudo-label, select, mix replay and train
// locally, average their results, gate the candidate on an eval set (revert
// on regression), then purge and audit the store.

#include "ilasr/drift_stream.hpp"
#include "ilasr/ephemeral_store.hpp"
#include "ilasr/model.hpp"
#include "ilasr/ssl_selection.hpp"
#include "ilasr/worker.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ilasr {

enum class Ordering { kChronological, kRandom };
enum class AggregationMode { kWeightAverage, kGradientAverage };

struct SelectionConfig {
  std::vector<std::pair<int, int>> bin_edges = {{600, 700}, {700, 800}, {800, 900}, {900, 1000}};
  /// Per worker per round; split evenly over the bins.
  int target_count = 200;
  std::optional<std::set<int>> rare_token_filter;
};

struct CampaignConfig {
  int workers = 4;
  int rounds_per_month = 4;
  Ordering ordering = Ordering::kChronological;
  double replay_ratio = 0.0;
  SelectionConfig selection;
  WorkerConfig worker;
  AggregationMode aggregation = AggregationMode::kWeightAverage;
  std::string teacher_tier = "T1";
  std::uint64_t seed = 1;
  Tick ttl_ticks = 10;
  /// Schedule step of the first campaign update.
  std::int64_t initial_step = 0;
  /// Round number -> learning-rate multiplier (fault injection for gating tests).
  std::map<int, double> lr_spikes;
  /// Utterances pulled per month; < 0 means the month's full volume.
  int utterances_per_month = -1;

  void validate() const;
};

/// Truth-labelled pretrain-era utterances used for rehearsal.
class ReplayStore {
 public:
  ReplayStore() = default;
  ReplayStore(std::vector<Utterance> items, std::uint64_t seed);

  std::size_t size() const { return items_.size(); }
  const std::vector<Utterance>& items() const { return items_; }
  std::uint64_t seed() const { return seed_; }
  /// Every `count`-th item starting at `index`; shards are disjoint.
  ReplayStore shard(int index, int count) const;

 private:
  std::vector<Utterance> items_;
  std::uint64_t seed_ = 0;
};

/// Appends round(ratio * |ssl|) replay items (truth as transcript), sampled
/// without replacement, at seeded-uniform positions; the ssl items keep
/// their relative order.
std::vector<Utterance> mix_replay(std::vector<Utterance> ssl, const ReplayStore& replay, double ratio,
                                  std::uint64_t seed);

/// Element-wise mean; version = max input version + 1.
ParamSet aggregate(std::span<const ParamSet> worker_params);

struct GateResult {
  ParamSet model;
  double wer = 0.0;
  double wer_candidate = 0.0;
  bool accepted = false;
};

/// Accepts the candidate unless its WER is strictly worse than `wer_prev`.
GateResult gate(const ParamSet& candidate, const ParamSet& incumbent, std::span<const Utterance> eval_set,
                double wer_prev);

struct RoundRecord {
  int round = 0;
  int month = 0;
  double wer_candidate = 0.0;
  double wer_accepted = 0.0;
  bool accepted = false;
  bool noop = false;
  std::vector<int> worker_ids;
  int effective_batch_size = 0;
  long utterances_consumed = 0;
  int steps = 0;
  std::int64_t model_version = 0;
  Tick tick = 0;
  std::size_t selection_shortfall = 0;
  std::optional<std::string> error;
  std::vector<WorkerReport> workers;

  /// One JSON object; worker reports are summarized, not inlined.
  std::string to_jsonl() const;
};

/// Counts live per-round worker artifacts (parameter copies, gradients).
class ArtifactRegistry {
 public:
  class Lease {
   public:
    explicit Lease(ArtifactRegistry* owner) : owner_(owner) { ++owner_->live_; }
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;
    Lease(Lease&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)) {}
    Lease& operator=(Lease&&) = delete;
    ~Lease() {
      if (owner_ != nullptr) --owner_->live_;
    }

   private:
    ArtifactRegistry* owner_;
  };

  Lease acquire() { return Lease(this); }
  int live() const { return live_.load(); }

 private:
  std::atomic<int> live_{0};
};

struct AuditEntry {
  int round = 0;
  AuditReport report;
};

class Campaign {
 public:
  using FaultInjector = std::function<void(int round, int worker)>;

  Campaign(CampaignConfig config, ParamSet student, ParamSet teacher, ReplayStore replay, const EvalSuite& evals);

  /// Switches the gate set to month `month` and re-measures the incumbent on it.
  void begin_month(int month);
  RoundRecord run_round(std::vector<Utterance> incoming);

  const ParamSet& global() const { return global_; }
  double wer_accepted() const { return wer_accepted_; }
  const std::vector<RoundRecord>& records() const { return records_; }
  const std::vector<AuditEntry>& audit_log() const { return audit_log_; }
  const EphemeralStore& store() const { return store_; }
  EphemeralStore& store() { return store_; }
  int live_worker_artifacts() const { return registry_.live(); }
  Tick now() const { return tick_; }
  std::int64_t global_step() const { return global_step_; }
  int month() const { return month_; }
  const CampaignConfig& config() const { return config_; }

  void set_fault_injector(FaultInjector f) { fault_ = std::move(f); }

 private:
  struct WorkerOutcome;

  WorkerOutcome run_worker(int k, const std::vector<std::string>& ids, Tick dispatch_tick);
  void finish_round(RoundRecord& record);

  CampaignConfig config_;
  ParamSet global_;
  ParamSet teacher_;
  std::vector<ReplayStore> replay_shards_;
  const EvalSuite* evals_;
  EphemeralStore store_;
  ArtifactRegistry registry_;
  FaultInjector fault_;

  int month_ = 0;
  int round_ = 0;
  Tick tick_ = 0;
  std::int64_t global_step_ = 0;
  double wer_accepted_ = 0.0;
  std::vector<RoundRecord> records_;
  std::vector<AuditEntry> audit_log_;
};

struct CampaignResult {
  std::vector<RoundRecord> records;
  /// Accepted global model at the end of each month; [0] is the pretrained student.
  std::vector<ParamSet> snapshots;
  std::vector<AuditEntry> audit_log;
  /// Every id consumed by training, in consumption order.
  std::vector<std::string> consumed_ids;
};

CampaignResult run_campaign(const WorldSpec& world, const CampaignConfig& config, const ParamSet& student,
                            const ParamSet& teacher, const ReplayStore& replay, const EvalSuite& evals);

std::string to_string(Ordering ordering);
Ordering ordering_from_string(const std::string& name);
std::string to_string(AggregationMode mode);
AggregationMode aggregation_mode_from_string(const std::string& name);

}  // namespace ilasr
