#pragma once

// Per-server training engine: batching, gradient accumulation into large
// effective batches and the local optimizer loop of one round.

#include "ilasr/drift_stream.hpp"
#include "ilasr/errors.hpp"
#include "ilasr/model.hpp"

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ilasr {

enum class AccumulationMode {
  kWeightedMean,  // sum_j n_j g_j / sum_j n_j: equals the full-batch gradient
  kRawSum,        // sum_j g_j
};

struct WorkerConfig {
  int worker_id = 0;
  /// Local batch size B; one optimizer step per effective batch.
  int effective_batch_size = 32;
  int micro_batch_size = 8;
  /// N: cap on optimizer steps per round.
  int local_steps = 1'000'000;
  LrSchedule schedule = LrSchedule::desk_preset();
  OptimizerKind optimizer = OptimizerKind::kAdam;
  AccumulationMode accumulation = AccumulationMode::kWeightedMean;

  int micro_batches_per_step() const { return effective_batch_size / micro_batch_size; }
  void validate() const;
};

/// Contiguous batches of size `batch_size` in input order; the last may be short.
template <typename T>
std::vector<std::span<const T>> split_batches(std::span<const T> items, int batch_size);

/// Gradient of a batch assembled from micro-batches.
GradSet accumulate_gradient(const ParamSet& params, std::span<const Batch> micro_batches,
                            AccumulationMode mode = AccumulationMode::kWeightedMean);

struct WorkerReport {
  int worker_id = 0;
  int steps = 0;
  std::vector<double> step_losses;
  std::vector<std::string> consumed_ids;
  long wall_ticks = 0;  // micro-batch gradient evaluations

  std::string to_json() const;
};

struct LocalResult {
  ParamSet params;
  WorkerReport report;
};

/// Runs one round of local training starting from a copy of `global`.
/// `start_step` is the global schedule step of the first update.
LocalResult local_train(const ParamSet& global, std::span<const Utterance> train, const WorkerConfig& cfg,
                        std::int64_t start_step = 0, double lr_scale = 1.0);

/// Weighted-mean gradient of the whole local set at `global` (gradient-averaging mode).
struct LocalGradient {
  GradSet grad;
  WorkerReport report;
};
LocalGradient local_gradient(const ParamSet& global, std::span<const Utterance> train, const WorkerConfig& cfg);

/// Label views over utterances' machine transcripts; DataError if one is missing.
std::vector<LabeledView> label_views(std::span<const Utterance> items);

std::string to_string(AccumulationMode mode);
AccumulationMode accumulation_mode_from_string(const std::string& name);

// --- template implementation ---

template <typename T>
std::vector<std::span<const T>> split_batches(std::span<const T> items, int batch_size) {
  if (batch_size < 1) {
    throw UsageError("split_batches: batch size must be >= 1");
  }
  std::vector<std::span<const T>> out;
  const auto b = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < items.size(); start += b) {
    out.push_back(items.subspan(start, std::min(b, items.size() - start)));
  }
  return out;
}

}  // namespace ilasr
