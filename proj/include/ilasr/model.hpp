#pragma once

// Framewise reference model: a two-layer tanh classifier applied to every
// frame of a feature sequence, with exact gradients, argmax decoding,
// utterance confidence, the learning-rate schedule and the optimizers.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ilasr {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// T x featdim, one row per frame.
using FeatureSeq = Matrix;
/// T x vocab.
using Logits = Matrix;
using TokenSeq = std::vector<int>;

struct ModelDims {
  int featdim = 0;
  int hidden = 0;
  int vocab = 0;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// The four named weight segments shared by parameters and gradients.
/// Matrices are row-major so `data()` is the serialization order.
struct Segments {
  ModelDims dims;
  Matrix w1;  // hidden x featdim
  Vector b1;  // hidden
  Matrix w2;  // vocab x hidden
  Vector b2;  // vocab

  static constexpr std::array<const char*, 4> kNames = {"W1", "b1", "W2", "b2"};

  std::size_t size() const;
  bool all_finite() const;

  /// Flat views over the segments in W1, b1, W2, b2 order.
  std::array<Eigen::Map<Vector>, 4> flat();
  std::array<Eigen::Map<const Vector>, 4> flat() const;

 protected:
  Segments() = default;
  explicit Segments(ModelDims d);
};

struct ParamSet : Segments {
  std::int64_t version = 0;

  ParamSet() = default;
  /// Zero-initialized parameters.
  explicit ParamSet(ModelDims d) : Segments(d) {}

  bool operator==(const ParamSet& other) const;
};

struct GradSet : Segments {
  GradSet() = default;
  explicit GradSet(ModelDims d) : Segments(d) {}

  GradSet& operator+=(const GradSet& other);
  GradSet& operator*=(double s);
};

/// Dense copy of a ParamSet's entries in serialization order.
std::vector<double> flatten(const Segments& s);

/// Random init: weights ~ N(0, 1/fan_in), biases zero.
ParamSet init_params(ModelDims dims, std::uint64_t seed);

/// One (features, labels) pair of a training or eval batch. Non-owning.
struct LabeledView {
  const FeatureSeq* feats;
  const TokenSeq* labels;
};

using Batch = std::span<const LabeledView>;

Logits forward(const ParamSet& params, const FeatureSeq& feats);

/// Mean over utterances of mean-over-frames cross-entropy.
double loss(const ParamSet& params, Batch batch);

/// Exact gradient of `loss`.
GradSet grad(const ParamSet& params, Batch batch);

struct LossGrad {
  double loss = 0.0;
  GradSet grad;
};

/// `loss` and `grad` from a single forward pass.
LossGrad loss_and_grad(const ParamSet& params, Batch batch);

/// Per-frame argmax, ties to the lowest token index.
TokenSeq decode(const Logits& logits);

/// floor(1000 * mean_t max_c softmax(logits_t)), in [0, 1000].
int confidence(const Logits& logits);

struct LrSchedule {
  std::int64_t warmup_steps = 30;
  double warmup_lr = 1e-3;
  double const_lr = 1e-2;
  std::int64_t const_until_step = 500;
  double final_lr = 1e-3;
  std::int64_t final_step = 5000;

  /// warm-up 3k @ 1e-7, 5e-4 until 50k, exponential decay to 1e-5 at 750k.
  static LrSchedule production_preset();
  /// The scaled-down schedule used by desk campaigns.
  static LrSchedule desk_preset();

  void validate() const;
};

double lr_at(const LrSchedule& schedule, std::int64_t step);

enum class OptimizerKind { kPlainSgd, kAdam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  GradSet first_moment;
  GradSet second_moment;

  static OptimizerState make(OptimizerKind kind, ModelDims dims);
};

struct StepResult {
  ParamSet params;
  OptimizerState state;
};

StepResult optimizer_step(const ParamSet& params, const GradSet& grads,
                          const OptimizerState& state, double lr);

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

}  // namespace ilasr
