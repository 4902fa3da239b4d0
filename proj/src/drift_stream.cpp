#include "ilasr/drift_stream.hpp"

#include "ilasr/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace ilasr {

namespace {

enum : std::uint64_t { kWorldTag = 0x57, kStreamTag = 0x53, kEvalTag = 0x45 };
enum : std::uint64_t { kGeneral = 1, kRare = 2, kDelta = 3, kMonthly = 4, kGate = 5 };

constexpr std::int64_t kTicksPerMonth = 10'000'000;

std::string padded(long value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width - s.size()), '0');
  return s;
}

std::vector<double> normalized(std::vector<double> w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= total;
  return w;
}

TokenSeq draw_tokens(const std::vector<double>& prior, int length, Rng& rng) {
  std::discrete_distribution<int> pick(prior.begin(), prior.end());
  TokenSeq tokens(static_cast<std::size_t>(length));
  for (auto& t : tokens) t = pick(rng);
  return tokens;
}

FeatureSeq render(const WorldSpec& world, const TokenSeq& tokens, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureSeq feats(static_cast<Eigen::Index>(tokens.size()), world.featdim);
  for (Eigen::Index t = 0; t < feats.rows(); ++t) {
    feats.row(t) = world.token_feature_means.row(tokens[static_cast<std::size_t>(t)]);
    if (world.feature_std > 0.0) {
      for (Eigen::Index d = 0; d < feats.cols(); ++d) feats(t, d) += world.feature_std * noise(rng);
    }
  }
  return feats;
}

Utterance draw_from_prior(const WorldSpec& world, const MonthSpec& month,
                          const std::vector<double>& prior, Rng& rng) {
  std::uniform_int_distribution<int> length(month.length_min, month.length_max);
  Utterance u;
  u.month = month.index;
  u.truth = draw_tokens(prior, length(rng), rng);
  u.feats = render(world, u.truth, rng);
  return u;
}

void check_month(const WorldSpec& world, int month) {
  if (month < 0 || month > world.last_month()) {
    throw UsageError("month " + std::to_string(month) + " outside [0, " +
                     std::to_string(world.last_month()) + "]");
  }
}

}  // namespace

void WorldConfig::validate() const {
  if (vocab < 2 || featdim < 1 || months < 0) {
    throw ConfigError("world needs vocab >= 2, featdim >= 1, months >= 0");
  }
  if (!(feature_std >= 0.0) || !(mean_scale > 0.0) || !(zipf_exponent >= 0.0)) {
    throw ConfigError("world feature_std must be >= 0 and mean_scale > 0");
  }
  if (length_min < 1 || length_max < length_min) {
    throw ConfigError("utterance length range must satisfy 1 <= min <= max");
  }
  if (pretrain_volume < 0 || month_volume < 0) {
    throw ConfigError("month volumes must be >= 0");
  }
  int injected = 0;
  for (const auto& intro : new_types) {
    if (intro.month < 1 || intro.month > months || intro.count < 0) {
      throw ConfigError("new types must be introduced in a month within [1, months]");
    }
    injected += intro.count;
  }
  if (injected >= vocab) throw ConfigError("new types would use up the whole vocabulary");
  if (!(new_type_mass > 0.0) || injected * new_type_mass >= 1.0) {
    throw ConfigError("new_type_mass must be positive and leave prior mass for existing types");
  }
  if (trending_count < 0 || !(trending_growth >= 1.0)) {
    throw ConfigError("trending_count must be >= 0 and trending_growth >= 1");
  }
}

void WorldSpec::validate() const {
  if (token_feature_means.rows() != vocab || token_feature_means.cols() != featdim) {
    throw ConfigError("token feature means must be vocab x featdim");
  }
  if (static_cast<int>(intro_month.size()) != vocab) {
    throw ConfigError("intro_month must list every token type");
  }
  for (const auto& m : months) {
    if (static_cast<int>(m.token_prior.size()) != vocab) {
      throw ConfigError("month " + std::to_string(m.index) + " prior has the wrong length");
    }
    double total = 0.0;
    for (double p : m.token_prior) {
      if (!(p >= 0.0)) throw ConfigError("month " + std::to_string(m.index) + " prior has a negative entry");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ConfigError("month " + std::to_string(m.index) + " prior sums to " + std::to_string(total));
    }
    if (m.length_min < 1 || m.length_max < m.length_min || m.volume < 0) {
      throw ConfigError("month " + std::to_string(m.index) + " has an invalid length range or volume");
    }
    for (int t = 0; t < vocab; ++t) {
      if (m.index < intro_month[static_cast<std::size_t>(t)] && m.token_prior[static_cast<std::size_t>(t)] != 0.0) {
        throw ConfigError("type " + std::to_string(t) + " has prior mass before its introduction month");
      }
    }
  }
}

WorldSpec build_world(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  auto rng = make_rng(seed, {kWorldTag});

  WorldSpec world;
  world.vocab = config.vocab;
  world.featdim = config.featdim;
  world.feature_std = config.feature_std;
  world.seed = seed;

  std::normal_distribution<double> mean_dist(0.0, config.mean_scale);
  world.token_feature_means.resize(config.vocab, config.featdim);
  for (Eigen::Index i = 0; i < world.token_feature_means.size(); ++i) {
    world.token_feature_means.data()[i] = mean_dist(rng);
  }

  // Injected types take the highest indices, in introduction order.
  world.intro_month.assign(static_cast<std::size_t>(config.vocab), 0);
  int next_new = config.vocab;
  auto intros = config.new_types;
  std::stable_sort(intros.begin(), intros.end(),
                   [](const NewTypeIntro& a, const NewTypeIntro& b) { return a.month > b.month; });
  for (const auto& intro : intros) {
    for (int c = 0; c < intro.count; ++c) world.intro_month[static_cast<std::size_t>(--next_new)] = intro.month;
  }
  const int base = next_new;

  std::vector<double> start(static_cast<std::size_t>(base));
  for (int i = 0; i < base; ++i) start[static_cast<std::size_t>(i)] = 1.0 / std::pow(i + 1.0, config.zipf_exponent);
  start = normalized(start);

  // Trending types come from the lower-frequency half of the base vocabulary.
  std::vector<int> candidates(static_cast<std::size_t>(base - base / 2));
  std::iota(candidates.begin(), candidates.end(), base / 2);
  if (config.trending_count > static_cast<int>(candidates.size())) {
    throw ConfigError("trending_count exceeds the number of tail types");
  }
  std::shuffle(candidates.begin(), candidates.end(), rng);
  world.trending.assign(candidates.begin(), candidates.begin() + config.trending_count);
  std::sort(world.trending.begin(), world.trending.end());

  std::vector<double> end = start;
  for (int t : world.trending) end[static_cast<std::size_t>(t)] *= config.trending_growth;
  end = normalized(end);

  const double rate = config.drift_rate > 0.0 ? config.drift_rate
                                              : (config.months > 0 ? 1.0 / config.months : 0.0);
  for (int m = 0; m <= config.months; ++m) {
    MonthSpec month;
    month.index = m;
    month.length_min = config.length_min;
    month.length_max = config.length_max;
    month.volume = m == 0 ? config.pretrain_volume : config.month_volume;

    const double a = std::min(1.0, rate * m);
    int active = 0;
    for (int t = base; t < config.vocab; ++t) active += world.intro_month[static_cast<std::size_t>(t)] <= m;
    const double base_mass = 1.0 - active * config.new_type_mass;

    month.token_prior.assign(static_cast<std::size_t>(config.vocab), 0.0);
    for (int t = 0; t < base; ++t) {
      const auto i = static_cast<std::size_t>(t);
      month.token_prior[i] = base_mass * ((1.0 - a) * start[i] + a * end[i]);
    }
    for (int t = base; t < config.vocab; ++t) {
      if (world.intro_month[static_cast<std::size_t>(t)] <= m) {
        month.token_prior[static_cast<std::size_t>(t)] = config.new_type_mass;
      }
    }
    world.months.push_back(std::move(month));
  }
  world.validate();
  return world;
}

bool Utterance::operator==(const Utterance& other) const {
  return id == other.id && month == other.month && feats.rows() == other.feats.rows() &&
         feats.cols() == other.feats.cols() && feats == other.feats && truth == other.truth &&
         machine_transcript == other.machine_transcript && confidence == other.confidence &&
         event_time == other.event_time && ingest_time == other.ingest_time;
}

Utterance gen_utterance(const WorldSpec& world, int month, Rng& rng) {
  check_month(world, month);
  const auto& spec = world.months[static_cast<std::size_t>(month)];
  return draw_from_prior(world, spec, spec.token_prior, rng);
}

MonthStream::MonthStream(const WorldSpec& world)
    : world_(&world), drawn_(world.months.size(), 0) {
  rngs_.reserve(world.months.size());
  for (std::size_t m = 0; m < world.months.size(); ++m) {
    rngs_.push_back(make_rng(world.seed, {kStreamTag, m}));
  }
}

int MonthStream::remaining(int month) const {
  check_month(*world_, month);
  const auto m = static_cast<std::size_t>(month);
  return world_->months[m].volume - drawn_[m];
}

std::vector<Utterance> MonthStream::gen_month_pool(int month, int n) {
  check_month(*world_, month);
  if (n < 0) throw UsageError("pool size must be >= 0");
  if (n > remaining(month)) {
    throw CapacityError("month " + std::to_string(month) + " has " + std::to_string(remaining(month)) +
                        " utterances left, " + std::to_string(n) + " requested");
  }
  const auto m = static_cast<std::size_t>(month);
  std::vector<Utterance> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Utterance u = gen_utterance(*world_, month, rngs_[m]);
    const int index = drawn_[m]++;
    u.id = "m" + std::to_string(month) + "-" + padded(index, 6);
    u.event_time = month * kTicksPerMonth + index;
    u.ingest_time = u.event_time;
    pool.push_back(std::move(u));
  }
  return pool;
}

std::vector<int> delta_types(const WorldSpec& world) {
  std::vector<int> out;
  const auto& p0 = world.months.front().token_prior;
  for (int t = 0; t < world.vocab; ++t) {
    const auto i = static_cast<std::size_t>(t);
    for (std::size_t m = 1; m < world.months.size(); ++m) {
      const double p = world.months[m].token_prior[i];
      if (p > 0.0 && p >= 5.0 * p0[i]) {
        out.push_back(t);
        break;
      }
    }
  }
  return out;
}

std::vector<int> rare_types(const WorldSpec& world) {
  const auto& p0 = world.months.front().token_prior;
  std::vector<int> present;
  for (int t = 0; t < world.vocab; ++t) {
    if (p0[static_cast<std::size_t>(t)] > 0.0) present.push_back(t);
  }
  std::stable_sort(present.begin(), present.end(), [&](int a, int b) {
    return p0[static_cast<std::size_t>(a)] < p0[static_cast<std::size_t>(b)];
  });
  present.resize((present.size() + 3) / 4);
  std::sort(present.begin(), present.end());
  return present;
}

std::vector<const EvalSet*> EvalSuite::reported() const {
  std::vector<const EvalSet*> out;
  for (const auto& s : general) out.push_back(&s);
  for (const auto& s : rare) out.push_back(&s);
  out.push_back(&delta);
  for (std::size_t m = 1; m < monthly.size(); ++m) out.push_back(&monthly[m]);
  return out;
}

const EvalSet& EvalSuite::by_name(const std::string& name) const {
  if (name == delta.name) return delta;
  for (const auto* group : {&general, &rare, &monthly, &gate}) {
    for (const auto& s : *group) {
      if (s.name == name) return s;
    }
  }
  throw UsageError("unknown eval set '" + name + "'");
}

EvalSuite build_eval_sets(const WorldSpec& world, const EvalSizes& sizes) {
  if (sizes.general < 1 || sizes.rare < 1 || sizes.delta < 1 || sizes.monthly < 1 || sizes.gate < 1) {
    throw ConfigError("eval set sizes must be positive");
  }
  EvalSuite suite;
  const auto rare = rare_types(world);
  const auto delta = delta_types(world);

  auto make_set = [&](const std::string& name, std::uint64_t kind, int month, int size,
                      const std::vector<double>& prior, auto&& accept) {
    EvalSet set;
    set.name = name;
    auto rng = make_rng(world.seed, {kEvalTag, kind, static_cast<std::uint64_t>(month)});
    const auto& spec = world.months[static_cast<std::size_t>(month)];
    const long max_attempts = 1000L * size;
    for (long attempt = 0; static_cast<int>(set.items.size()) < size; ++attempt) {
      if (attempt >= max_attempts) {
        throw ConfigError("eval set '" + name + "': could not draw enough qualifying utterances");
      }
      Utterance u = draw_from_prior(world, spec, prior, rng);
      if (!accept(u)) continue;
      u.id = "eval-" + name + "-" + padded(static_cast<long>(set.items.size()), 6);
      set.items.push_back(std::move(u));
    }
    return set;
  };
  auto any = [](const Utterance&) { return true; };
  auto has_rare = [&](const Utterance& u) {
    return std::any_of(u.truth.begin(), u.truth.end(),
                       [&](int t) { return std::binary_search(rare.begin(), rare.end(), t); });
  };

  for (const auto& month : world.months) {
    const int m = month.index;
    const auto& prior = month.token_prior;
    suite.general.push_back(make_set("general-" + std::to_string(m), kGeneral, m, sizes.general, prior, any));
    suite.rare.push_back(make_set("rare-" + std::to_string(m), kRare, m, sizes.rare, prior, has_rare));
    suite.monthly.push_back(make_set("monthly-" + std::to_string(m), kMonthly, m, sizes.monthly, prior, any));
    suite.gate.push_back(make_set("gate-" + std::to_string(m), kGate, m, sizes.gate, prior, any));
  }

  // Delta: tokens drawn from the last month's prior restricted to the types
  // that grew at least 5x over the pretrain era.
  if (delta.empty() || world.last_month() < 1) {
    throw ConfigError("delta set rule: no token type has a prior at months >= 1 that is >= 5x its month-0 prior");
  }
  const int last = world.last_month();
  std::vector<double> restricted(static_cast<std::size_t>(world.vocab), 0.0);
  for (int t : delta) {
    restricted[static_cast<std::size_t>(t)] = world.months[static_cast<std::size_t>(last)].token_prior[static_cast<std::size_t>(t)];
  }
  if (std::accumulate(restricted.begin(), restricted.end(), 0.0) <= 0.0) {
    throw ConfigError("delta set rule: qualifying types have no mass in the last month");
  }
  suite.delta = make_set("delta", kDelta, last, sizes.delta, restricted, any);
  return suite;
}

std::string utterance_to_jsonl(const Utterance& u) {
  nlohmann::ordered_json j;
  j["id"] = u.id;
  j["month"] = u.month;
  j["event_time"] = u.event_time;
  j["ingest_time"] = u.ingest_time;
  j["featdim"] = u.feats.cols();
  j["feats"] = std::vector<double>(u.feats.data(), u.feats.data() + u.feats.size());
  j["truth"] = u.truth;
  if (u.machine_transcript) j["machine_transcript"] = *u.machine_transcript;
  if (u.confidence) j["confidence"] = *u.confidence;
  return j.dump();
}

Utterance utterance_from_jsonl(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    Utterance u;
    u.id = j.at("id").get<std::string>();
    u.month = j.at("month").get<int>();
    u.event_time = j.at("event_time").get<std::int64_t>();
    u.ingest_time = j.value("ingest_time", u.event_time);
    u.truth = j.at("truth").get<TokenSeq>();
    const auto flat = j.at("feats").get<std::vector<double>>();
    const auto featdim = j.at("featdim").get<Eigen::Index>();
    if (featdim < 1 || flat.size() % static_cast<std::size_t>(featdim) != 0) {
      throw FileError("utterance '" + u.id + "': feats length is not a multiple of featdim");
    }
    u.feats = Eigen::Map<const Matrix>(flat.data(), static_cast<Eigen::Index>(flat.size()) / featdim, featdim);
    if (j.contains("machine_transcript")) u.machine_transcript = j.at("machine_transcript").get<TokenSeq>();
    if (j.contains("confidence")) u.confidence = j.at("confidence").get<int>();
    return u;
  } catch (const nlohmann::json::exception& e) {
    throw FileError(std::string("malformed utterance line: ") + e.what());
  }
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Utterance>& items) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FileError("cannot open '" + path.string() + "' for writing");
  for (const auto& u : items) out << utterance_to_jsonl(u) << '\n';
}

std::vector<Utterance> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open utterance file '" + path.string() + "'");
  std::vector<Utterance> items;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) items.push_back(utterance_from_jsonl(line));
  }
  return items;
}

}  // namespace ilasr
