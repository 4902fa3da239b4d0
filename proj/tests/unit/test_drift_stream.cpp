#include "ilasr/drift_stream.hpp"
#include "ilasr/errors.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>

using namespace ilasr;

namespace {

const WorldSpec& default_world() {
  static const WorldSpec w = build_world(WorldConfig{}, 7);
  return w;
}

std::string serialize_all(const std::vector<Utterance>& items) {
  std::string s;
  for (const auto& u : items) s += utterance_to_jsonl(u) + "\n";
  return s;
}

}  // namespace

TEST(BuildWorld, DeterministicPerSeed) {
  const auto a = build_world(WorldConfig{}, 3);
  const auto b = build_world(WorldConfig{}, 3);
  EXPECT_EQ(a.token_feature_means, b.token_feature_means);
  ASSERT_EQ(a.months.size(), b.months.size());
  for (std::size_t m = 0; m < a.months.size(); ++m) EXPECT_EQ(a.months[m].token_prior, b.months[m].token_prior);
  EXPECT_EQ(a.trending, b.trending);
  EXPECT_NE(build_world(WorldConfig{}, 4).token_feature_means, a.token_feature_means);
}

TEST(BuildWorld, PriorsAreDistributions) {
  for (const auto& m : default_world().months) {
    double total = 0.0;
    for (double p : m.token_prior) {
      EXPECT_GE(p, 0.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(BuildWorld, NewTypesEmbargoedBeforeIntroduction) {
  WorldConfig c;
  c.new_types = {{3, 2}};
  const auto w = build_world(c, 1);
  std::vector<int> fresh;
  for (int t = 0; t < w.vocab; ++t) {
    if (w.intro_month[static_cast<std::size_t>(t)] == 3) fresh.push_back(t);
  }
  ASSERT_EQ(fresh.size(), 2u);
  for (int m = 0; m < 3; ++m) {
    for (int t : fresh) EXPECT_EQ(w.months[static_cast<std::size_t>(m)].token_prior[static_cast<std::size_t>(t)], 0.0);
  }
  for (int t : fresh) EXPECT_GT(w.months[3].token_prior[static_cast<std::size_t>(t)], 0.0);
}

TEST(BuildWorld, DefaultDeskConfigNewTypesGrowFivefold) {
  const auto& w = default_world();
  EXPECT_EQ(w.vocab, 24);
  EXPECT_EQ(w.featdim, 8);
  EXPECT_EQ(w.last_month(), 6);
  double mass0 = 0.0, mass6 = 0.0;
  for (int t = 0; t < w.vocab; ++t) {
    if (w.intro_month[static_cast<std::size_t>(t)] > 0) {
      mass0 += w.months[0].token_prior[static_cast<std::size_t>(t)];
      mass6 += w.months[6].token_prior[static_cast<std::size_t>(t)];
    }
  }
  EXPECT_GT(mass6, 0.0);
  EXPECT_GE(mass6, 5.0 * mass0);
  // Trending tail types reach at least 5x their month-0 mass as well.
  for (int t : w.trending) {
    EXPECT_GE(w.months[6].token_prior[static_cast<std::size_t>(t)], 5.0 * w.months[0].token_prior[static_cast<std::size_t>(t)]);
  }
}

TEST(BuildWorld, InvalidConfigsRejected) {
  WorldConfig c;
  c.length_min = 0;
  EXPECT_THROW(build_world(c, 1), ConfigError);
  c = {};
  c.new_types = {{9, 1}};
  EXPECT_THROW(build_world(c, 1), ConfigError);
  c = {};
  c.new_type_mass = 0.5;
  EXPECT_THROW(build_world(c, 1), ConfigError);
  c = {};
  c.vocab = 1;
  EXPECT_THROW(build_world(c, 1), ConfigError);
}

TEST(GenUtterance, ZeroNoiseFeaturesAreTokenMeans) {
  WorldConfig c;
  c.feature_std = 0.0;
  const auto w = build_world(c, 2);
  auto rng = make_rng(2, {99});
  for (int i = 0; i < 20; ++i) {
    const auto u = gen_utterance(w, 1, rng);
    ASSERT_EQ(u.feats.rows(), static_cast<Eigen::Index>(u.truth.size()));
    for (std::size_t t = 0; t < u.truth.size(); ++t) {
      EXPECT_EQ(Vector(u.feats.row(static_cast<Eigen::Index>(t)).transpose()),
                Vector(w.token_feature_means.row(u.truth[t]).transpose()));
      // Nearest-mean decoding (Bayes-optimal at zero noise) recovers the truth.
      Eigen::Index best = 0;
      (w.token_feature_means.rowwise() - u.feats.row(static_cast<Eigen::Index>(t))).rowwise().squaredNorm().minCoeff(&best);
      EXPECT_EQ(best, u.truth[t]);
    }
  }
}

TEST(GenUtterance, FixedRngRepeats) {
  auto r1 = make_rng(5, {1});
  auto r2 = make_rng(5, {1});
  EXPECT_TRUE(gen_utterance(default_world(), 2, r1) == gen_utterance(default_world(), 2, r2));
}

TEST(GenUtterance, LengthsWithinRange) {
  auto rng = make_rng(5, {2});
  for (int i = 0; i < 200; ++i) {
    const auto u = gen_utterance(default_world(), 0, rng);
    EXPECT_GE(u.truth.size(), 6u);
    EXPECT_LE(u.truth.size(), 14u);
  }
}

TEST(GenUtterance, EmpiricalFrequenciesFollowPrior) {
  const auto& w = default_world();
  for (int month : {0, 6}) {
    auto rng = make_rng(11, {static_cast<std::uint64_t>(month)});
    std::vector<double> counts(static_cast<std::size_t>(w.vocab), 0.0);
    double total = 0.0;
    for (int i = 0; i < 10'000; ++i) {
      for (int t : gen_utterance(w, month, rng).truth) {
        counts[static_cast<std::size_t>(t)] += 1.0;
        total += 1.0;
      }
    }
    for (int t = 0; t < w.vocab; ++t) {
      EXPECT_NEAR(counts[static_cast<std::size_t>(t)] / total, w.months[static_cast<std::size_t>(month)].token_prior[static_cast<std::size_t>(t)], 0.02);
    }
  }
}

TEST(GenUtterance, MonthOutOfRangeRejected) {
  auto rng = make_rng(1, {});
  EXPECT_THROW(gen_utterance(default_world(), 7, rng), UsageError);
}

TEST(MonthStream, EmptyPool) {
  MonthStream s(default_world());
  EXPECT_TRUE(s.gen_month_pool(1, 0).empty());
}

TEST(MonthStream, ExhaustingVolumeThenCapacityError) {
  MonthStream s(default_world());
  const int volume = default_world().months[2].volume;
  const auto pool = s.gen_month_pool(2, volume);
  EXPECT_EQ(static_cast<int>(pool.size()), volume);
  EXPECT_EQ(s.remaining(2), 0);
  EXPECT_THROW(s.gen_month_pool(2, 1), CapacityError);
  EXPECT_NO_THROW(s.gen_month_pool(3, 1));
}

TEST(MonthStream, EventTimesIncreaseAndIdsUnique) {
  MonthStream s(default_world());
  auto pool = s.gen_month_pool(1, 300);
  const auto more = s.gen_month_pool(1, 300);
  pool.insert(pool.end(), more.begin(), more.end());
  std::set<std::string> ids;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    ids.insert(pool[i].id);
    if (i > 0) EXPECT_LT(pool[i - 1].event_time, pool[i].event_time);
  }
  EXPECT_EQ(ids.size(), pool.size());
}

TEST(MonthStream, NewTypeEmbargoHoldsInPools) {
  const auto& w = default_world();
  MonthStream s(w);
  for (int m = 0; m <= w.last_month(); ++m) {
    for (const auto& u : s.gen_month_pool(m, 500)) {
      for (int t : u.truth) EXPECT_LE(w.intro_month[static_cast<std::size_t>(t)], m);
    }
  }
}

TEST(EvalSets, RareSetsContainBottomQuartileToken) {
  const auto& w = default_world();
  const auto rare = rare_types(w);
  int nonzero = 0;
  for (double p : w.months[0].token_prior) nonzero += p > 0.0;
  EXPECT_EQ(static_cast<int>(rare.size()), (nonzero + 3) / 4);
  const auto suite = build_eval_sets(w, EvalSizes{});
  for (const auto& u : suite.rare[0].items) {
    EXPECT_TRUE(std::any_of(u.truth.begin(), u.truth.end(),
                            [&](int t) { return std::find(rare.begin(), rare.end(), t) != rare.end(); }));
  }
}

TEST(EvalSets, DeltaFramesDominatedByGrowingTypes) {
  const auto& w = default_world();
  const auto delta = delta_types(w);
  for (int t : delta) {
    double best = 0.0;
    for (int m = 1; m <= w.last_month(); ++m) best = std::max(best, w.months[static_cast<std::size_t>(m)].token_prior[static_cast<std::size_t>(t)]);
    EXPECT_GE(best, 5.0 * w.months[0].token_prior[static_cast<std::size_t>(t)]);
  }
  const auto suite = build_eval_sets(w, EvalSizes{});
  long hits = 0, frames = 0;
  for (const auto& u : suite.delta.items) {
    for (int t : u.truth) {
      ++frames;
      hits += std::find(delta.begin(), delta.end(), t) != delta.end();
    }
  }
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(frames), 0.8);
}

TEST(EvalSets, NoDriftMeansNoDeltaSet) {
  WorldConfig c;
  c.trending_count = 0;
  c.new_types = {};
  const auto w = build_world(c, 1);
  try {
    build_eval_sets(w, EvalSizes{});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("delta set rule"), std::string::npos);
  }
}

TEST(EvalSets, DisjointFromTrainingPoolsAndEachOther) {
  const auto& w = default_world();
  const auto suite = build_eval_sets(w, EvalSizes{});
  std::set<std::string> eval_ids;
  std::size_t count = 0;
  auto add = [&](const EvalSet& s) {
    for (const auto& u : s.items) eval_ids.insert(u.id);
    count += s.items.size();
  };
  for (const auto* s : suite.reported()) add(*s);
  for (const auto& s : suite.gate) add(s);
  add(suite.monthly[0]);
  EXPECT_EQ(eval_ids.size(), count);
  MonthStream stream(w);
  for (int m = 0; m <= w.last_month(); ++m) {
    for (const auto& u : stream.gen_month_pool(m, w.months[static_cast<std::size_t>(m)].volume)) {
      ASSERT_EQ(eval_ids.count(u.id), 0u);
    }
  }
}

TEST(EvalSets, LookupByName) {
  const auto suite = build_eval_sets(default_world(), EvalSizes{});
  EXPECT_EQ(suite.by_name("general-3").name, "general-3");
  EXPECT_EQ(suite.by_name("delta").items.size(), 300u);
  EXPECT_THROW(suite.by_name("nope"), UsageError);
}

TEST(Determinism, PoolsAndEvalSetsByteIdenticalThroughSerialization) {
  const auto w1 = build_world(WorldConfig{}, 9);
  const auto w2 = build_world(WorldConfig{}, 9);
  MonthStream s1(w1), s2(w2);
  EXPECT_EQ(serialize_all(s1.gen_month_pool(4, 200)), serialize_all(s2.gen_month_pool(4, 200)));
  const auto e1 = build_eval_sets(w1, EvalSizes{});
  const auto e2 = build_eval_sets(w2, EvalSizes{});
  EXPECT_EQ(serialize_all(e1.delta.items), serialize_all(e2.delta.items));
  EXPECT_EQ(serialize_all(e1.rare[2].items), serialize_all(e2.rare[2].items));
}

TEST(Jsonl, RoundTripPreservesEverything) {
  MonthStream s(default_world());
  auto pool = s.gen_month_pool(1, 5);
  pool[0].machine_transcript = TokenSeq(pool[0].truth.size(), 3);
  pool[0].confidence = 812;
  const auto path = std::filesystem::temp_directory_path() / "ilasr_drift_roundtrip.jsonl";
  write_jsonl(path, pool);
  const auto back = read_jsonl(path);
  ASSERT_EQ(back.size(), pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) EXPECT_TRUE(back[i] == pool[i]);
  EXPECT_THROW(utterance_from_jsonl("{\"id\":1}"), FileError);
  EXPECT_THROW(read_jsonl("/nonexistent/x.jsonl"), FileError);
}
