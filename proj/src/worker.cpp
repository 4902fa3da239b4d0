#include "ilasr/worker.hpp"

#include "ilasr/errors.hpp"

#include <json.hpp>

namespace ilasr {

namespace {

double accumulate_into(const ParamSet& params, std::span<const Batch> micro_batches, AccumulationMode mode,
                       GradSet& out) {
  if (micro_batches.empty()) throw UsageError("accumulate_gradient needs at least one micro-batch");
  out = GradSet(params.dims);
  double loss_sum = 0.0;
  std::size_t total = 0;
  for (const auto& micro : micro_batches) {
    LossGrad lg = loss_and_grad(params, micro);
    if (mode == AccumulationMode::kWeightedMean) lg.grad *= static_cast<double>(micro.size());
    out += lg.grad;
    loss_sum += lg.loss * static_cast<double>(micro.size());
    total += micro.size();
  }
  if (mode == AccumulationMode::kWeightedMean) out *= 1.0 / static_cast<double>(total);
  return loss_sum / static_cast<double>(total);
}

}  // namespace

void WorkerConfig::validate() const {
  if (micro_batch_size < 1 || effective_batch_size < 1 || effective_batch_size % micro_batch_size != 0) {
    throw ConfigError("effective_batch_size must be a positive multiple of micro_batch_size");
  }
  if (local_steps < 0) throw ConfigError("local_steps must be >= 0");
  schedule.validate();
}

GradSet accumulate_gradient(const ParamSet& params, std::span<const Batch> micro_batches, AccumulationMode mode) {
  GradSet g;
  accumulate_into(params, micro_batches, mode, g);
  return g;
}

std::vector<LabeledView> label_views(std::span<const Utterance> items) {
  std::vector<LabeledView> views;
  views.reserve(items.size());
  for (const auto& u : items) {
    if (!u.machine_transcript) {
      throw DataError("utterance '" + u.id + "' has no transcript to train on");
    }
    views.push_back({&u.feats, &*u.machine_transcript});
  }
  return views;
}

std::string WorkerReport::to_json() const {
  nlohmann::ordered_json j;
  j["worker_id"] = worker_id;
  j["steps"] = steps;
  j["loss"] = step_losses;
  j["consumed_ids"] = consumed_ids;
  j["wall_ticks"] = wall_ticks;
  return j.dump();
}

LocalResult local_train(const ParamSet& global, std::span<const Utterance> train, const WorkerConfig& cfg,
                        std::int64_t start_step, double lr_scale) {
  cfg.validate();
  const auto views = label_views(train);
  LocalResult out{global, {}};
  out.report.worker_id = cfg.worker_id;

  const auto batches = split_batches<LabeledView>(views, cfg.effective_batch_size);
  const auto steps = std::min<std::size_t>(batches.size(), static_cast<std::size_t>(cfg.local_steps));
  auto state = OptimizerState::make(cfg.optimizer, global.dims);
  GradSet g;
  std::size_t consumed = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    const auto micro = split_batches<LabeledView>(batches[s], cfg.micro_batch_size);
    std::vector<Batch> micro_batches(micro.begin(), micro.end());
    out.report.step_losses.push_back(accumulate_into(out.params, micro_batches, cfg.accumulation, g));
    out.report.wall_ticks += static_cast<long>(micro_batches.size());
    const double lr = lr_scale * lr_at(cfg.schedule, start_step + static_cast<std::int64_t>(s));
    auto next = optimizer_step(out.params, g, state, lr);
    out.params = std::move(next.params);
    state = std::move(next.state);
    consumed += batches[s].size();
  }
  out.report.steps = static_cast<int>(steps);
  for (std::size_t i = 0; i < consumed; ++i) out.report.consumed_ids.push_back(train[i].id);
  return out;
}

LocalGradient local_gradient(const ParamSet& global, std::span<const Utterance> train, const WorkerConfig& cfg) {
  cfg.validate();
  const auto views = label_views(train);
  LocalGradient out;
  out.report.worker_id = cfg.worker_id;
  if (views.empty() || cfg.local_steps == 0) {
    out.grad = GradSet(global.dims);
    return out;
  }
  const auto micro = split_batches<LabeledView>(views, cfg.micro_batch_size);
  std::vector<Batch> micro_batches(micro.begin(), micro.end());
  out.report.step_losses.push_back(accumulate_into(global, micro_batches, cfg.accumulation, out.grad));
  out.report.wall_ticks = static_cast<long>(micro_batches.size());
  out.report.steps = 1;
  for (const auto& u : train) out.report.consumed_ids.push_back(u.id);
  return out;
}

std::string to_string(AccumulationMode mode) {
  return mode == AccumulationMode::kWeightedMean ? "weighted-mean" : "raw-sum";
}

AccumulationMode accumulation_mode_from_string(const std::string& name) {
  if (name == "weighted-mean") return AccumulationMode::kWeightedMean;
  if (name == "raw-sum") return AccumulationMode::kRawSum;
  throw ConfigError("unknown accumulation mode '" + name + "'");
}

}  // namespace ilasr
