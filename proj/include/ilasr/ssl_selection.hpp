#pragma once

// Semi-supervised data selection: teacher decoding of a pool, confidence
// binning over the 0..1000 scale and quota-based sampling of the training
// set. Nothing here reads Utterance::truth.

#include "ilasr/drift_stream.hpp"
#include "ilasr/model.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ilasr {

/// Half-open confidence interval (lo, hi].
struct ConfidenceBin {
  int lo = 0;
  int hi = 1000;
  int quota = 0;

  bool contains(int confidence) const { return lo < confidence && confidence <= hi; }
  std::string label() const;
};

struct ConfidenceBinList {
  std::vector<ConfidenceBin> bins;

  /// (600,700], (700,800], (800,900], (900,1000] splitting `target` evenly.
  static ConfidenceBinList default_bins(int target);
  /// Same bin edges, quotas split evenly (earlier bins take the remainder).
  static ConfidenceBinList equal_quotas(std::vector<std::pair<int, int>> edges, int target);

  int total_quota() const;
  /// Throws ConfigError on overlap, empty intervals or out-of-range edges.
  void validate() const;
};

struct SelectionCriteria {
  int target_count = 0;
  std::optional<std::set<int>> rare_token_filter;
  std::uint64_t seed = 0;
};

/// Utterances per bin, by index into the pool, in pool order.
struct BinnedPool {
  ConfidenceBinList bins;
  std::vector<std::vector<std::size_t>> members;
  std::size_t dropped = 0;
};

struct BinReport {
  std::string range;
  std::size_t eligible = 0;
  std::size_t selected = 0;
  std::size_t shortfall = 0;
};

struct SelectionReport {
  std::vector<BinReport> bins;
  std::size_t total_selected = 0;
  std::size_t total_shortfall = 0;

  std::string to_json() const;
};

struct Selection {
  std::vector<Utterance> dataset;
  SelectionReport report;
};

/// Adds machine_transcript and confidence to every utterance.
std::vector<Utterance> teacher_decode_pool(const ParamSet& teacher, std::vector<Utterance> pool);

/// Recomputes confidence by re-running the teacher forward pass.
std::vector<Utterance> calc_utterance_confidence(const ParamSet& teacher, std::vector<Utterance> pool);

BinnedPool bin_utterances(const std::vector<Utterance>& pool, const ConfidenceBinList& bins);

/// Uniform sampling without replacement up to each bin quota; selections
/// accumulate across bins in bin order.
Selection select_utterances(const std::vector<Utterance>& pool, const BinnedPool& binned,
                            const SelectionCriteria& criteria);

}  // namespace ilasr
