#include "ilasr/errors.hpp"
#include "ilasr/metrics.hpp"

#include "../support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ilasr;

namespace {

int ed(std::vector<int> a, std::vector<int> b) { return edit_distance(a, b); }

}  // namespace

TEST(EditDistance, Basics) {
  EXPECT_EQ(ed({1, 2, 3}, {1, 2, 3}), 0);
  EXPECT_EQ(ed({}, {4, 5}), 2);
  EXPECT_EQ(ed({4, 5}, {}), 2);
  EXPECT_EQ(ed({}, {}), 0);
  EXPECT_EQ(ed({1, 2, 3}, {1, 3}), 1);
  EXPECT_EQ(ed({1, 9, 3}, {1, 2, 3}), 1);
}

TEST(EditDistance, SymmetricAndTriangle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(0, 7), tok(0, 3);
  auto draw = [&] {
    std::vector<int> s(len(rng));
    for (auto& x : s) x = tok(rng);
    return s;
  };
  for (int i = 0; i < 300; ++i) {
    const auto a = draw(), b = draw(), c = draw();
    EXPECT_EQ(ed(a, b), ed(b, a));
    EXPECT_LE(ed(a, c), ed(a, b) + ed(b, c));
  }
}

TEST(EditDistance, MatchesRecursiveDefinition) {
  oracle::EditDistanceTable table(3, 4);
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> pick(0, table.count() - 1);
  for (int i = 0; i < 2000; ++i) {
    const auto a = table.sequence(pick(rng)), b = table.sequence(pick(rng));
    ASSERT_EQ(edit_distance(a, b), table.distance(a, b));
  }
}

TEST(CorpusWer, MicroAverage) {
  const std::vector<UtteranceScore> scores{{"a", 3, 10}, {"b", 0, 0}};
  const auto r = corpus_wer(scores);
  EXPECT_EQ(r.total_edits, 3);
  EXPECT_EQ(r.total_ref_len, 10);
  EXPECT_DOUBLE_EQ(r.wer, 0.3);
  // 1/2 and 10/100: macro mean would be 0.3
  const auto micro = corpus_wer(std::vector<UtteranceScore>{{"a", 1, 2}, {"b", 10, 100}});
  EXPECT_NEAR(micro.wer, 11.0 / 102.0, 1e-15);
}

TEST(CorpusWer, RandomModelNearChance) {
  const int V = 8;
  std::mt19937_64 rng(13);
  const ModelDims d{4, 6, V};
  ParamSet p = oracle::random_params(d, rng, 0.0);
  std::uniform_int_distribution<int> tok(0, V - 1);
  std::uniform_int_distribution<int> pick(0, V - 1);
  // Zero weights with random per-utterance output bias: prediction is a
  // fixed random token per utterance, independent of the reference.
  long edits = 0, ref = 0;
  for (int i = 0; i < 3000; ++i) {
    p.b2.setZero();
    p.b2(pick(rng)) = 1.0;
    Utterance u;
    u.id = std::to_string(i);
    u.feats = FeatureSeq::Zero(5, 4);
    for (int t = 0; t < 5; ++t) u.truth.push_back(tok(rng));
    const auto r = corpus_wer(p, std::span<const Utterance>(&u, 1));
    edits += r.total_edits;
    ref += r.total_ref_len;
  }
  const double wer = static_cast<double>(edits) / static_cast<double>(ref);
  EXPECT_NEAR(wer, (V - 1.0) / V, 0.03);
}

TEST(CorpusWer, PerfectModelScoresZero) {
  ParamSet p({2, 2, 2});
  p.w1(0, 0) = 5.0;
  p.w2(0, 0) = 5.0;
  p.b2(0) = -1.0;
  p.b2(1) = 1.0;
  Utterance u;
  u.id = "z";
  u.feats = FeatureSeq::Zero(2, 2);
  u.feats(0, 0) = 1.0;
  u.truth = {0, 1};
  const auto r = corpus_wer(p, std::span<const Utterance>(&u, 1));
  EXPECT_EQ(r.total_edits, 0);
  ASSERT_EQ(r.per_utterance.size(), 1u);
  EXPECT_EQ(r.per_utterance[0].ref_len, 2);
}

TEST(Werr, Values) {
  EXPECT_DOUBLE_EQ(werr(0.2, 0.2), 0.0);
  EXPECT_NEAR(werr(0.20, 0.1598), 20.1, 1e-9);
  EXPECT_NEAR(werr(0.2, 0.22), -10.0, 1e-9);
  EXPECT_THROW(werr(0.0, 0.1), UndefinedError);
}

TEST(Report, CsvHeaderAndRow) {
  const std::string header =
      "experiment,variant,seed,month,test_set,wer,werr_vs_pretrained,rounds,accepted_rounds\n";
  EXPECT_EQ(report_csv({}), header);
  ReportRow row{"replay-ablation", "no-replay", 3, 2, "general-2", 0.25, 1.5, 8, 6};
  const std::vector<ReportRow> rows{row};
  const auto csv = report_csv(rows);
  ASSERT_EQ(csv.rfind(header, 0), 0u);
  const auto line = csv.substr(header.size());
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8);
  EXPECT_NE(line.find("replay-ablation,no-replay,3,2,general-2,"), std::string::npos);
  EXPECT_EQ(report_csv(rows), csv);
  EXPECT_EQ(report_jsonl(rows), report_jsonl(rows));
}
