#pragma once

// Synthetic utterance world with month-over-month concept drift.
//
// Month 0 is the pretrain era; months 1..M are the incremental months.
// Token priors drift linearly from a Zipf-shaped month-0 prior towards an
// end prior in which a set of tail "trending" types have grown, and new
// token types are injected at configured months (zero prior before).
// Every frame of an utterance is the feature mean of its token plus
// isotropic Gaussian noise.

#include "ilasr/model.hpp"
#include "ilasr/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ilasr {

struct NewTypeIntro {
  int month = 1;
  int count = 1;
};

struct WorldConfig {
  int vocab = 24;
  int featdim = 8;
  int months = 6;
  double feature_std = 1.0;
  double mean_scale = 1.0;
  double zipf_exponent = 1.0;
  /// Number of tail types whose prior grows over the months.
  int trending_count = 5;
  /// Prior multiplier of trending types at the last month (before renormalization).
  double trending_growth = 12.0;
  /// Fraction of the way to the end prior reached per month; <= 0 means 1/months.
  double drift_rate = 0.0;
  std::vector<NewTypeIntro> new_types = {{2, 1}, {4, 1}};
  /// Prior mass each injected type carries from its introduction month on.
  double new_type_mass = 0.02;
  int pretrain_volume = 4000;
  int month_volume = 2000;
  int length_min = 6;
  int length_max = 14;

  void validate() const;
};

struct MonthSpec {
  int index = 0;
  std::vector<double> token_prior;
  int length_min = 1;
  int length_max = 1;
  int volume = 0;
};

struct WorldSpec {
  int vocab = 0;
  int featdim = 0;
  std::vector<MonthSpec> months;  // index 0 = pretrain era
  Matrix token_feature_means;     // vocab x featdim
  double feature_std = 1.0;
  std::uint64_t seed = 0;
  /// Month a type is introduced in, or 0 for types present from the start.
  std::vector<int> intro_month;
  std::vector<int> trending;

  int last_month() const { return static_cast<int>(months.size()) - 1; }
  /// Throws ConfigError when a prior, length range, volume or embargo is violated.
  void validate() const;
};

struct Utterance {
  std::string id;
  int month = 0;
  FeatureSeq feats;
  TokenSeq truth;
  std::optional<TokenSeq> machine_transcript;
  std::optional<int> confidence;
  std::int64_t event_time = 0;
  std::int64_t ingest_time = 0;

  bool operator==(const Utterance& other) const;
};

struct EvalSet {
  std::string name;
  std::vector<Utterance> items;
};

struct EvalSizes {
  int general = 300;
  int rare = 300;
  int delta = 300;
  int monthly = 300;
  int gate = 300;
};

/// Held-out human-truth sets. Per-month sets are indexed 0..M. `gate[m]` is
/// the eval set the orchestrator gates month-m rounds on; it is disjoint from
/// the reported sets.
struct EvalSuite {
  std::vector<EvalSet> general;
  std::vector<EvalSet> rare;
  std::vector<EvalSet> monthly;
  std::vector<EvalSet> gate;
  EvalSet delta;

  /// Every reported set (general, rare, delta, monthly) in a stable order.
  std::vector<const EvalSet*> reported() const;
  const EvalSet& by_name(const std::string& name) const;
};

WorldSpec build_world(const WorldConfig& config, std::uint64_t seed);

/// One utterance from the month prior: length uniform in range, tokens i.i.d.
Utterance gen_utterance(const WorldSpec& world, int month, Rng& rng);

/// Hands out each month's utterances in event-time order, at most `volume`
/// per month over the lifetime of the stream.
class MonthStream {
 public:
  explicit MonthStream(const WorldSpec& world);

  std::vector<Utterance> gen_month_pool(int month, int n);
  int remaining(int month) const;

 private:
  const WorldSpec* world_;
  std::vector<int> drawn_;
  std::vector<Rng> rngs_;
};

/// Types whose prior at some month >= 1 is at least 5x the month-0 prior.
std::vector<int> delta_types(const WorldSpec& world);
/// Bottom quartile (by month-0 prior) of the types present in month 0.
std::vector<int> rare_types(const WorldSpec& world);

EvalSuite build_eval_sets(const WorldSpec& world, const EvalSizes& sizes);

// JSON-lines I/O, one utterance per line.
std::string utterance_to_jsonl(const Utterance& u);
Utterance utterance_from_jsonl(const std::string& line);
void write_jsonl(const std::filesystem::path& path, const std::vector<Utterance>& items);
std::vector<Utterance> read_jsonl(const std::filesystem::path& path);

}  // namespace ilasr
