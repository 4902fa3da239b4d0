#include "ilasr/orchestrator.hpp"

#include "ilasr/errors.hpp"
#include "ilasr/metrics.hpp"
#include "ilasr/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

namespace ilasr {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  auto rng = make_rng(seed, tags);
  return rng();
}

enum : std::uint64_t { kSelectTag = 0x5e, kReplayTag = 0x7e, kShuffleTag = 0x0d };

}  // namespace

void CampaignConfig::validate() const {
  if (workers < 1) throw ConfigError("campaign needs at least one worker");
  if (rounds_per_month < 1) throw ConfigError("rounds_per_month must be >= 1");
  if (!(replay_ratio >= 0.0 && replay_ratio <= 1.0)) throw ConfigError("replay_ratio must be in [0, 1]");
  if (selection.target_count < 0) throw ConfigError("selection target_count must be >= 0");
  if (ttl_ticks < 1) throw ConfigError("ttl_ticks must be >= 1");
  if (initial_step < 0) throw ConfigError("initial_step must be >= 0");
  ConfidenceBinList::equal_quotas(selection.bin_edges, selection.target_count);
  worker.validate();
}

ReplayStore::ReplayStore(std::vector<Utterance> items, std::uint64_t seed)
    : items_(std::move(items)), seed_(seed) {}

ReplayStore ReplayStore::shard(int index, int count) const {
  if (count < 1 || index < 0 || index >= count) throw UsageError("invalid replay shard");
  std::vector<Utterance> part;
  for (std::size_t i = static_cast<std::size_t>(index); i < items_.size(); i += static_cast<std::size_t>(count)) {
    part.push_back(items_[i]);
  }
  return ReplayStore(std::move(part), derive_seed(seed_, {static_cast<std::uint64_t>(index)}));
}

std::vector<Utterance> mix_replay(std::vector<Utterance> ssl, const ReplayStore& replay, double ratio,
                                  std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw UsageError("replay ratio must be in [0, 1]");
  const auto wanted = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(ssl.size())));
  const auto n = std::min(wanted, replay.size());
  if (n == 0) return ssl;

  auto rng = make_rng(seed, {kReplayTag});
  std::vector<std::size_t> picked;
  std::vector<std::size_t> all(replay.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::sample(all.begin(), all.end(), std::back_inserter(picked), n, rng);
  std::shuffle(picked.begin(), picked.end(), rng);

  // Slots of the merged sequence that hold replay items.
  std::vector<bool> is_replay(ssl.size() + n, false);
  std::fill(is_replay.begin(), is_replay.begin() + static_cast<std::ptrdiff_t>(n), true);
  std::shuffle(is_replay.begin(), is_replay.end(), rng);

  std::vector<Utterance> out;
  out.reserve(ssl.size() + n);
  std::size_t next_ssl = 0;
  std::size_t next_replay = 0;
  for (bool slot : is_replay) {
    if (slot) {
      Utterance u = replay.items()[picked[next_replay++]];
      u.machine_transcript = u.truth;
      u.confidence.reset();
      out.push_back(std::move(u));
    } else {
      out.push_back(std::move(ssl[next_ssl++]));
    }
  }
  return out;
}

ParamSet aggregate(std::span<const ParamSet> worker_params) {
  if (worker_params.empty()) throw UsageError("aggregate needs at least one worker result");
  ParamSet mean = worker_params.front();
  std::int64_t version = mean.version;
  for (std::size_t k = 1; k < worker_params.size(); ++k) {
    const auto& w = worker_params[k];
    if (!(w.dims == mean.dims)) throw ShapeError("aggregate: worker parameter dims differ");
    version = std::max(version, w.version);
    // Running mean: identical inputs reproduce the input bit for bit.
    const double inv = 1.0 / static_cast<double>(k + 1);
    auto acc = mean.flat();
    const auto src = w.flat();
    for (std::size_t s = 0; s < acc.size(); ++s) acc[s] += (src[s] - acc[s]) * inv;
  }
  mean.version = version + 1;
  return mean;
}

GateResult gate(const ParamSet& candidate, const ParamSet& incumbent, std::span<const Utterance> eval_set,
                double wer_prev) {
  if (eval_set.empty()) throw UsageError("gate needs a non-empty eval set");
  const double wer = corpus_wer(candidate, eval_set).wer;
  if (wer > wer_prev) return GateResult{incumbent, wer_prev, wer, false};
  return GateResult{candidate, wer, wer, true};
}

std::string RoundRecord::to_jsonl() const {
  nlohmann::ordered_json j;
  j["round"] = round;
  j["month"] = month;
  j["wer_candidate"] = wer_candidate;
  j["wer_accepted"] = wer_accepted;
  j["accepted"] = accepted;
  j["noop"] = noop;
  j["worker_ids"] = worker_ids;
  j["effective_batch_size"] = effective_batch_size;
  j["utterances_consumed"] = utterances_consumed;
  j["steps"] = steps;
  j["model_version"] = model_version;
  j["tick"] = tick;
  j["selection_shortfall"] = selection_shortfall;
  if (error) {
    j["error"] = *error;
  } else {
    j["error"] = nullptr;
  }
  return j.dump();
}

struct Campaign::WorkerOutcome {
  std::optional<ParamSet> params;
  std::optional<GradSet> grad;
  WorkerReport report;
  SelectionReport selection;
  ArtifactRegistry::Lease lease;
};

Campaign::Campaign(CampaignConfig config, ParamSet student, ParamSet teacher, ReplayStore replay,
                   const EvalSuite& evals)
    : config_(std::move(config)),
      global_(std::move(student)),
      teacher_(std::move(teacher)),
      evals_(&evals),
      store_(config_.ttl_ticks),
      global_step_(config_.initial_step) {
  config_.validate();
  if (!(teacher_.dims.featdim == global_.dims.featdim && teacher_.dims.vocab == global_.dims.vocab)) {
    throw ShapeError("teacher and student disagree on featdim or vocab");
  }
  for (int k = 0; k < config_.workers; ++k) replay_shards_.push_back(replay.shard(k, config_.workers));
  if (!evals.gate.empty()) begin_month(0);
}

void Campaign::begin_month(int month) {
  if (month < 0 || month >= static_cast<int>(evals_->gate.size())) {
    throw UsageError("no gate set for month " + std::to_string(month));
  }
  month_ = month;
  wer_accepted_ = corpus_wer(global_, evals_->gate[static_cast<std::size_t>(month)].items).wer;
}

Campaign::WorkerOutcome Campaign::run_worker(int k, const std::vector<std::string>& ids, Tick dispatch_tick) {
  WorkerOutcome out{std::nullopt, std::nullopt, {}, {}, registry_.acquire()};
  if (fault_) fault_(round_, k);

  auto pool = teacher_decode_pool(teacher_, store_.take_for_training(ids, dispatch_tick));
  const auto bins = ConfidenceBinList::equal_quotas(config_.selection.bin_edges, config_.selection.target_count);
  const auto binned = bin_utterances(pool, bins);
  SelectionCriteria criteria;
  criteria.target_count = config_.selection.target_count;
  criteria.rare_token_filter = config_.selection.rare_token_filter;
  criteria.seed = derive_seed(config_.seed, {kSelectTag, static_cast<std::uint64_t>(round_),
                                             static_cast<std::uint64_t>(k)});
  auto selection = select_utterances(pool, binned, criteria);
  pool.clear();
  out.selection = selection.report;

  const auto replay_seed = derive_seed(config_.seed, {kReplayTag, static_cast<std::uint64_t>(round_),
                                                      static_cast<std::uint64_t>(k)});
  const auto train = mix_replay(std::move(selection.dataset), replay_shards_[static_cast<std::size_t>(k)],
                                config_.replay_ratio, replay_seed);

  WorkerConfig cfg = config_.worker;
  cfg.worker_id = k;
  if (config_.aggregation == AggregationMode::kWeightAverage) {
    const auto spike = config_.lr_spikes.find(round_);
    const double lr_scale = spike == config_.lr_spikes.end() ? 1.0 : spike->second;
    auto local = local_train(global_, train, cfg, global_step_, lr_scale);
    out.params = std::move(local.params);
    out.report = std::move(local.report);
  } else {
    auto local = local_gradient(global_, train, cfg);
    out.grad = std::move(local.grad);
    out.report = std::move(local.report);
  }
  return out;
}

RoundRecord Campaign::run_round(std::vector<Utterance> incoming) {
  ++round_;
  RoundRecord record;
  record.round = round_;
  record.month = month_;
  record.effective_batch_size = config_.worker.effective_batch_size;
  record.wer_candidate = wer_accepted_;
  record.wer_accepted = wer_accepted_;
  record.model_version = global_.version;

  // Ingest.
  ++tick_;
  const int K = config_.workers;
  std::vector<std::vector<std::string>> ids(static_cast<std::size_t>(K));
  const std::size_t per = incoming.size() / static_cast<std::size_t>(K);
  const std::size_t extra = incoming.size() % static_cast<std::size_t>(K);
  std::size_t cursor = 0;
  for (int k = 0; k < K; ++k) {
    const std::size_t n = per + (static_cast<std::size_t>(k) < extra ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) ids[static_cast<std::size_t>(k)].push_back(incoming[cursor + i].id);
    cursor += n;
  }
  for (auto& u : incoming) store_.put(std::move(u), tick_);
  incoming.clear();

  // Dispatch: all K workers run concurrently against the same global model.
  ++tick_;
  std::vector<std::future<WorkerOutcome>> futures;
  for (int k = 0; k < K; ++k) {
    record.worker_ids.push_back(k);
    futures.push_back(std::async(std::launch::async, [this, k, &ids, dispatch = tick_] {
      return run_worker(k, ids[static_cast<std::size_t>(k)], dispatch);
    }));
  }
  std::vector<WorkerOutcome> outcomes;
  for (auto& f : futures) {
    try {
      outcomes.push_back(f.get());
    } catch (const std::exception& e) {
      if (!record.error) record.error = e.what();
    }
  }
  if (record.error) {
    outcomes.clear();
    finish_round(record);
    return record;
  }

  int max_steps = 0;
  for (const auto& o : outcomes) {
    record.steps += o.report.steps;
    record.utterances_consumed += static_cast<long>(o.report.consumed_ids.size());
    record.selection_shortfall += o.selection.total_shortfall;
    max_steps = std::max(max_steps, o.report.steps);
    record.workers.push_back(o.report);
  }

  // Aggregate.
  ++tick_;
  if (record.steps == 0) {
    record.noop = true;
    outcomes.clear();
    finish_round(record);
    return record;
  }
  ParamSet candidate;
  if (config_.aggregation == AggregationMode::kWeightAverage) {
    std::vector<ParamSet> params;
    params.reserve(outcomes.size());
    for (auto& o : outcomes) params.push_back(std::move(*o.params));
    candidate = aggregate(params);
  } else {
    GradSet mean = std::move(*outcomes.front().grad);
    for (std::size_t k = 1; k < outcomes.size(); ++k) {
      GradSet diff = *outcomes[k].grad;
      diff *= 1.0 / static_cast<double>(k + 1);
      mean *= static_cast<double>(k) / static_cast<double>(k + 1);
      mean += diff;
    }
    const auto spike = config_.lr_spikes.find(round_);
    const double lr = (spike == config_.lr_spikes.end() ? 1.0 : spike->second) *
                      lr_at(config_.worker.schedule, global_step_);
    candidate = optimizer_step(global_, mean, OptimizerState::make(config_.worker.optimizer, global_.dims), lr)
                    .params;
    candidate.version = global_.version + 1;
  }
  outcomes.clear();
  global_step_ += max_steps;

  // Gate.
  ++tick_;
  auto verdict = gate(candidate, global_, evals_->gate[static_cast<std::size_t>(month_)].items, wer_accepted_);
  record.wer_candidate = verdict.wer_candidate;
  record.accepted = verdict.accepted;
  if (verdict.accepted) {
    global_ = std::move(verdict.model);
    wer_accepted_ = verdict.wer;
  }
  record.wer_accepted = wer_accepted_;
  record.model_version = global_.version;
  finish_round(record);
  return record;
}

void Campaign::finish_round(RoundRecord& record) {
  ++tick_;
  store_.purge(tick_);
  audit_log_.push_back({round_, store_.audit(tick_)});
  record.tick = tick_;
  records_.push_back(record);
}

CampaignResult run_campaign(const WorldSpec& world, const CampaignConfig& config, const ParamSet& student,
                            const ParamSet& teacher, const ReplayStore& replay, const EvalSuite& evals) {
  config.validate();
  CampaignResult result;
  result.snapshots.push_back(student);
  if (world.last_month() < 1) return result;

  Campaign campaign(config, student, teacher, replay, evals);
  MonthStream stream(world);
  for (int m = 1; m <= world.last_month(); ++m) {
    const int volume = world.months[static_cast<std::size_t>(m)].volume;
    const int n = config.utterances_per_month < 0 ? volume : config.utterances_per_month;
    auto pool = stream.gen_month_pool(m, n);
    if (config.ordering == Ordering::kRandom) {
      auto rng = make_rng(config.seed, {kShuffleTag, static_cast<std::uint64_t>(m)});
      std::shuffle(pool.begin(), pool.end(), rng);
    }
    campaign.begin_month(m);
    const auto R = static_cast<std::size_t>(config.rounds_per_month);
    std::size_t start = 0;
    for (std::size_t r = 0; r < R; ++r) {
      const std::size_t len = pool.size() / R + (r < pool.size() % R ? 1 : 0);
      std::vector<Utterance> chunk(std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(start)),
                                   std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(start + len)));
      start += len;
      campaign.run_round(std::move(chunk));
    }
    result.snapshots.push_back(campaign.global());
  }
  result.records = campaign.records();
  result.audit_log = campaign.audit_log();
  for (const auto& rec : result.records) {
    for (const auto& w : rec.workers) {
      result.consumed_ids.insert(result.consumed_ids.end(), w.consumed_ids.begin(), w.consumed_ids.end());
    }
  }
  return result;
}

std::string to_string(Ordering ordering) {
  return ordering == Ordering::kChronological ? "chronological" : "random";
}

Ordering ordering_from_string(const std::string& name) {
  if (name == "chronological") return Ordering::kChronological;
  if (name == "random") return Ordering::kRandom;
  throw ConfigError("unknown ordering '" + name + "'");
}

std::string to_string(AggregationMode mode) {
  return mode == AggregationMode::kWeightAverage ? "weight-average" : "gradient-average";
}

AggregationMode aggregation_mode_from_string(const std::string& name) {
  if (name == "weight-average") return AggregationMode::kWeightAverage;
  if (name == "gradient-average") return AggregationMode::kGradientAverage;
  throw ConfigError("unknown aggregation mode '" + name + "'");
}

}  // namespace ilasr
