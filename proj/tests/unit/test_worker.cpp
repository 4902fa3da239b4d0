#include "ilasr/errors.hpp"
#include "ilasr/worker.hpp"

#include "../support/oracles.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <numeric>
#include <set>

using namespace ilasr;

namespace {

std::vector<Utterance> labelled(ModelDims d, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Utterance> out;
  for (int i = 0; i < n; ++i) {
    auto ex = oracle::random_example(d, 1 + i % 6, rng);
    Utterance u;
    u.id = "w" + std::to_string(i);
    u.feats = ex.feats;
    u.truth = TokenSeq(ex.labels.size(), 0);
    u.machine_transcript = ex.labels;
    u.confidence = 900;
    out.push_back(std::move(u));
  }
  return out;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / den;
}

}  // namespace

TEST(SplitBatches, SizesWithPartialTail) {
  std::vector<int> items(10);
  std::iota(items.begin(), items.end(), 0);
  const auto batches = split_batches<int>(items, 3);
  ASSERT_EQ(batches.size(), 4u);
  EXPECT_EQ(batches[0].size(), 3u);
  EXPECT_EQ(batches[3].size(), 1u);
  std::vector<int> joined;
  for (auto b : batches) joined.insert(joined.end(), b.begin(), b.end());
  EXPECT_EQ(joined, items);
}

TEST(SplitBatches, ExactFitAndErrors) {
  std::vector<int> items(6);
  EXPECT_EQ(split_batches<int>(items, 6).size(), 1u);
  EXPECT_TRUE(split_batches<int>(std::vector<int>{}, 4).empty());
  EXPECT_THROW(split_batches<int>(items, 0), UsageError);
}

TEST(Accumulate, SingleMicroBatchIsPlainGradient) {
  std::mt19937_64 rng(1);
  const ModelDims d{3, 4, 5};
  const auto p = oracle::random_params(d, rng);
  std::vector<oracle::Example> batch{oracle::random_example(d, 3, rng), oracle::random_example(d, 4, rng)};
  const auto views = oracle::views(batch);
  const std::vector<Batch> one{Batch(views)};
  EXPECT_EQ(flatten(accumulate_gradient(p, one)), flatten(grad(p, views)));
}

TEST(Accumulate, TwoEqualMicroBatchesAverage) {
  std::mt19937_64 rng(2);
  const ModelDims d{3, 4, 5};
  const auto p = oracle::random_params(d, rng);
  std::vector<oracle::Example> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(oracle::random_example(d, 2 + i, rng));
  const auto views = oracle::views(batch);
  const std::vector<Batch> halves{Batch(views.data(), 3), Batch(views.data() + 3, 3)};
  const auto ga = flatten(grad(p, halves[0])), gb = flatten(grad(p, halves[1]));
  const auto got = flatten(accumulate_gradient(p, halves));
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], 0.5 * (ga[i] + gb[i]), 1e-15);
}

TEST(Accumulate, UnevenSplitMatchesFullBatch) {
  std::mt19937_64 rng(3);
  const ModelDims d{4, 6, 5};
  const auto p = oracle::random_params(d, rng);
  std::vector<oracle::Example> batch;
  for (int i = 0; i < 64; ++i) batch.push_back(oracle::random_example(d, 1 + i % 9, rng));
  const auto views = oracle::views(batch);
  const std::vector<Batch> parts{Batch(views.data(), 10), Batch(views.data() + 10, 20), Batch(views.data() + 30, 34)};
  EXPECT_LT(max_rel(flatten(accumulate_gradient(p, parts)), flatten(grad(p, views))), 1e-6);
}

TEST(Accumulate, RawSumScalesWithMicroBatchCount) {
  std::mt19937_64 rng(4);
  const ModelDims d{2, 3, 4};
  const auto p = oracle::random_params(d, rng);
  std::vector<oracle::Example> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(oracle::random_example(d, 3, rng));
  const auto views = oracle::views(batch);
  const std::vector<Batch> quarters{Batch(views.data(), 2), Batch(views.data() + 2, 2), Batch(views.data() + 4, 2),
                                    Batch(views.data() + 6, 2)};
  const auto mean = flatten(accumulate_gradient(p, quarters));
  const auto sum = flatten(accumulate_gradient(p, quarters, AccumulationMode::kRawSum));
  for (std::size_t i = 0; i < mean.size(); ++i) EXPECT_NEAR(sum[i], 4.0 * mean[i], 1e-14);
  EXPECT_THROW(accumulate_gradient(p, std::vector<Batch>{}), UsageError);
}

TEST(LocalTrain, NoStepsOrNoDataReturnsGlobalExactly) {
  const auto global = init_params({3, 4, 5}, 1);
  WorkerConfig cfg;
  cfg.local_steps = 0;
  const auto data = labelled(global.dims, 20, 1);
  const auto a = local_train(global, data, cfg);
  EXPECT_TRUE(a.params == global);
  EXPECT_EQ(a.report.steps, 0);
  EXPECT_TRUE(a.report.consumed_ids.empty());
  cfg.local_steps = 5;
  const auto b = local_train(global, std::span<const Utterance>{}, cfg);
  EXPECT_TRUE(b.params == global);
}

TEST(LocalTrain, MicroEqualsEffectiveMatchesPlainMiniBatchTrace) {
  const auto global = init_params({3, 5, 4}, 2);
  const auto data = labelled(global.dims, 50, 2);
  WorkerConfig cfg;
  cfg.effective_batch_size = 8;
  cfg.micro_batch_size = 8;
  cfg.optimizer = OptimizerKind::kPlainSgd;
  const auto got = local_train(global, data, cfg, 40);

  ParamSet w = global;
  std::vector<double> losses;
  const auto views = label_views(data);
  for (std::size_t start = 0, s = 0; start < views.size(); start += 8, ++s) {
    const Batch b(views.data() + start, std::min<std::size_t>(8, views.size() - start));
    const auto lg = loss_and_grad(w, b);
    losses.push_back(lg.loss);
    auto next = optimizer_step(w, lg.grad, OptimizerState::make(OptimizerKind::kPlainSgd, w.dims),
                               lr_at(cfg.schedule, 40 + static_cast<std::int64_t>(s)));
    w = next.params;
  }
  EXPECT_EQ(got.report.steps, 7);
  ASSERT_EQ(got.report.step_losses.size(), losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) EXPECT_DOUBLE_EQ(got.report.step_losses[i], losses[i]);
  EXPECT_LT(max_rel(flatten(got.params), flatten(w)), 1e-12);
}

TEST(LocalTrain, AccumulatedStepsMatchFullBatchSteps) {
  const auto global = init_params({3, 5, 4}, 3);
  const auto data = labelled(global.dims, 40, 3);
  WorkerConfig big;
  big.effective_batch_size = 20;
  big.micro_batch_size = 20;
  WorkerConfig accumulated = big;
  accumulated.micro_batch_size = 4;
  const auto a = local_train(global, data, big);
  const auto b = local_train(global, data, accumulated);
  EXPECT_LT(max_rel(flatten(b.params), flatten(a.params)), 1e-6);
  EXPECT_EQ(b.report.wall_ticks, 10);
}

TEST(LocalTrain, StepCapLimitsConsumption) {
  const auto global = init_params({3, 4, 5}, 4);
  const auto data = labelled(global.dims, 30, 4);
  WorkerConfig cfg;
  cfg.effective_batch_size = 8;
  cfg.local_steps = 2;
  const auto r = local_train(global, data, cfg);
  EXPECT_EQ(r.report.steps, 2);
  EXPECT_EQ(r.report.consumed_ids.size(), 16u);
  EXPECT_EQ(r.report.consumed_ids.front(), "w0");
}

TEST(LocalTrain, DeterministicPureAndSinglePass) {
  const auto global = init_params({3, 4, 5}, 5);
  const auto copy = global;
  const auto data = labelled(global.dims, 37, 5);
  WorkerConfig cfg;
  const auto a = local_train(global, data, cfg, 100);
  const auto b = local_train(global, data, cfg, 100);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(a.report.to_json(), b.report.to_json());
  EXPECT_TRUE(global == copy);
  const std::set<std::string> unique(a.report.consumed_ids.begin(), a.report.consumed_ids.end());
  EXPECT_EQ(unique.size(), a.report.consumed_ids.size());
  EXPECT_EQ(unique.size(), data.size());
}

TEST(LocalTrain, TrainsOnTranscriptsNotTruth) {
  const auto global = init_params({3, 4, 5}, 6);
  auto data = labelled(global.dims, 16, 6);
  auto sentinel = data;
  for (auto& u : sentinel) u.truth.assign(u.truth.size(), 4);
  WorkerConfig cfg;
  EXPECT_TRUE(local_train(global, data, cfg).params == local_train(global, sentinel, cfg).params);
  data[3].machine_transcript.reset();
  try {
    local_train(global, data, cfg);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("w3"), std::string::npos);
  }
}

TEST(WorkerConfig, Validation) {
  WorkerConfig cfg;
  cfg.effective_batch_size = 30;
  cfg.micro_batch_size = 8;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.effective_batch_size = 32;
  cfg.local_steps = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(WorkerReport, JsonFields) {
  WorkerReport r;
  r.worker_id = 2;
  r.steps = 1;
  r.step_losses = {0.5};
  r.consumed_ids = {"a", "b"};
  r.wall_ticks = 4;
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["worker_id"], 2);
  EXPECT_EQ(j["loss"][0], 0.5);
  EXPECT_EQ(j["consumed_ids"][1], "b");
  EXPECT_EQ(j["wall_ticks"], 4);
}
