#include "ilasr/model.hpp"

#include "ilasr/errors.hpp"
#include "ilasr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ilasr {

namespace {

void check_dims(ModelDims d) {
  if (d.featdim < 1 || d.hidden < 1 || d.vocab < 1) {
    throw ShapeError("model dims must be positive, got featdim=" + std::to_string(d.featdim) +
                     " hidden=" + std::to_string(d.hidden) + " vocab=" + std::to_string(d.vocab));
  }
}

void check_same_dims(const Segments& a, const Segments& b, const char* what) {
  if (!(a.dims == b.dims)) {
    throw ShapeError(std::string(what) + ": segment dims differ");
  }
}

void check_feats(const ParamSet& params, const FeatureSeq& feats) {
  if (feats.rows() < 1) {
    throw ShapeError("feature sequence has no frames");
  }
  if (feats.cols() != params.dims.featdim) {
    throw ShapeError("feature dim " + std::to_string(feats.cols()) + " does not match model featdim " +
                     std::to_string(params.dims.featdim));
  }
}

void check_batch(const ParamSet& params, Batch batch) {
  if (batch.empty()) {
    throw UsageError("loss/grad called on an empty batch");
  }
  for (const auto& item : batch) {
    check_feats(params, *item.feats);
    if (static_cast<Eigen::Index>(item.labels->size()) != item.feats->rows()) {
      throw ShapeError("label length " + std::to_string(item.labels->size()) + " does not match " +
                       std::to_string(item.feats->rows()) + " frames");
    }
    for (int token : *item.labels) {
      if (token < 0 || token >= params.dims.vocab) {
        throw ShapeError("label token " + std::to_string(token) + " outside vocab");
      }
    }
  }
}

// Row-wise log-softmax, numerically stable.
Matrix log_softmax_rows(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index t = 0; t < z.rows(); ++t) {
    const double mx = z.row(t).maxCoeff();
    const double lse = mx + std::log((z.row(t).array() - mx).exp().sum());
    out.row(t) = z.row(t).array() - lse;
  }
  return out;
}

struct Activations {
  Matrix hidden;  // T x hidden, post-tanh
  Logits logits;  // T x vocab
};

Activations run_forward(const ParamSet& p, const FeatureSeq& x) {
  Activations a;
  a.hidden = ((x * p.w1.transpose()).rowwise() + p.b1.transpose()).array().tanh();
  a.logits = (a.hidden * p.w2.transpose()).rowwise() + p.b2.transpose();
  return a;
}

}  // namespace

Segments::Segments(ModelDims d) : dims(d) {
  check_dims(d);
  w1 = Matrix::Zero(d.hidden, d.featdim);
  b1 = Vector::Zero(d.hidden);
  w2 = Matrix::Zero(d.vocab, d.hidden);
  b2 = Vector::Zero(d.vocab);
}

std::size_t Segments::size() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

bool Segments::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

std::array<Eigen::Map<Vector>, 4> Segments::flat() {
  return {Eigen::Map<Vector>(w1.data(), w1.size()), Eigen::Map<Vector>(b1.data(), b1.size()),
          Eigen::Map<Vector>(w2.data(), w2.size()), Eigen::Map<Vector>(b2.data(), b2.size())};
}

std::array<Eigen::Map<const Vector>, 4> Segments::flat() const {
  return {Eigen::Map<const Vector>(w1.data(), w1.size()),
          Eigen::Map<const Vector>(b1.data(), b1.size()),
          Eigen::Map<const Vector>(w2.data(), w2.size()),
          Eigen::Map<const Vector>(b2.data(), b2.size())};
}

bool ParamSet::operator==(const ParamSet& other) const {
  return dims == other.dims && version == other.version && w1 == other.w1 && b1 == other.b1 &&
         w2 == other.w2 && b2 == other.b2;
}

GradSet& GradSet::operator+=(const GradSet& other) {
  check_same_dims(*this, other, "gradient sum");
  w1 += other.w1;
  b1 += other.b1;
  w2 += other.w2;
  b2 += other.b2;
  return *this;
}

GradSet& GradSet::operator*=(double s) {
  w1 *= s;
  b1 *= s;
  w2 *= s;
  b2 *= s;
  return *this;
}

std::vector<double> flatten(const Segments& s) {
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& seg : s.flat()) {
    out.insert(out.end(), seg.data(), seg.data() + seg.size());
  }
  return out;
}

ParamSet init_params(ModelDims dims, std::uint64_t seed) {
  ParamSet p(dims);
  auto rng = make_rng(seed, {0x1417});
  std::normal_distribution<double> n1(0.0, 1.0 / std::sqrt(static_cast<double>(dims.featdim)));
  std::normal_distribution<double> n2(0.0, 1.0 / std::sqrt(static_cast<double>(dims.hidden)));
  for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = n1(rng);
  for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = n2(rng);
  return p;
}

Logits forward(const ParamSet& params, const FeatureSeq& feats) {
  check_feats(params, feats);
  return run_forward(params, feats).logits;
}

double loss(const ParamSet& params, Batch batch) {
  check_batch(params, batch);
  double total = 0.0;
  for (const auto& item : batch) {
    const Matrix logp = log_softmax_rows(run_forward(params, *item.feats).logits);
    double utt = 0.0;
    for (Eigen::Index t = 0; t < logp.rows(); ++t) {
      utt -= logp(t, (*item.labels)[static_cast<std::size_t>(t)]);
    }
    total += utt / static_cast<double>(logp.rows());
  }
  return total / static_cast<double>(batch.size());
}

LossGrad loss_and_grad(const ParamSet& params, Batch batch) {
  check_batch(params, batch);
  LossGrad out{0.0, GradSet(params.dims)};
  GradSet& g = out.grad;
  const double per_utt = 1.0 / static_cast<double>(batch.size());
  for (const auto& item : batch) {
    const FeatureSeq& x = *item.feats;
    const TokenSeq& labels = *item.labels;
    const Activations a = run_forward(params, x);
    const auto frames = x.rows();
    const double weight = per_utt / static_cast<double>(frames);

    // dL/dz = (softmax - onehot) / (U * T)
    const Matrix logp = log_softmax_rows(a.logits);
    Matrix dz = logp.array().exp();
    for (Eigen::Index t = 0; t < frames; ++t) {
      const auto label = labels[static_cast<std::size_t>(t)];
      out.loss -= weight * logp(t, label);
      dz(t, label) -= 1.0;
    }
    dz *= weight;

    g.w2.noalias() += dz.transpose() * a.hidden;
    g.b2 += dz.colwise().sum().transpose();
    const Matrix dpre = (dz * params.w2).array() * (1.0 - a.hidden.array().square());
    g.w1.noalias() += dpre.transpose() * x;
    g.b1 += dpre.colwise().sum().transpose();
  }
  return out;
}

GradSet grad(const ParamSet& params, Batch batch) { return loss_and_grad(params, batch).grad; }

TokenSeq decode(const Logits& logits) {
  TokenSeq out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(t, c) > logits(t, best)) best = c;
    }
    out[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return out;
}

int confidence(const Logits& logits) {
  if (logits.rows() < 1) {
    throw UsageError("confidence of an empty logit sequence");
  }
  double sum = 0.0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double mx = logits.row(t).maxCoeff();
    // max softmax = 1 / sum_c exp(z_c - max)
    sum += 1.0 / (logits.row(t).array() - mx).exp().sum();
  }
  const double mean = sum / static_cast<double>(logits.rows());
  // 1e-9 absorbs summation error so exact fractions like 1/5 land on 200.
  const int value = static_cast<int>(std::floor(1000.0 * mean + 1e-9));
  return std::clamp(value, 0, 1000);
}

LrSchedule LrSchedule::production_preset() {
  return LrSchedule{3000, 1e-7, 5e-4, 50000, 1e-5, 750000};
}

LrSchedule LrSchedule::desk_preset() { return LrSchedule{}; }

void LrSchedule::validate() const {
  if (warmup_steps < 0 || warmup_steps > const_until_step || const_until_step > final_step) {
    throw ConfigError("lr schedule requires 0 <= warmup_steps <= const_until_step <= final_step");
  }
  if (!(warmup_lr > 0 && const_lr > 0 && final_lr > 0)) {
    throw ConfigError("lr schedule rates must be positive");
  }
}

double lr_at(const LrSchedule& s, std::int64_t step) {
  if (step < 0) {
    throw UsageError("lr_at: negative step");
  }
  if (step < s.warmup_steps) return s.warmup_lr;
  if (step < s.const_until_step) return s.const_lr;
  if (step >= s.final_step) return s.final_lr;
  const double frac = static_cast<double>(step - s.const_until_step) /
                      static_cast<double>(s.final_step - s.const_until_step);
  return s.const_lr * std::pow(s.final_lr / s.const_lr, frac);
}

OptimizerState OptimizerState::make(OptimizerKind kind, ModelDims dims) {
  OptimizerState s;
  s.kind = kind;
  if (kind == OptimizerKind::kAdam) {
    s.first_moment = GradSet(dims);
    s.second_moment = GradSet(dims);
  }
  return s;
}

StepResult optimizer_step(const ParamSet& params, const GradSet& grads, const OptimizerState& state,
                          double lr) {
  check_same_dims(params, grads, "optimizer_step");
  StepResult out{params, state};
  out.state.step += 1;
  auto w = out.params.flat();
  const auto g = grads.flat();

  if (state.kind == OptimizerKind::kPlainSgd) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
    return out;
  }

  if (!(state.first_moment.dims == params.dims) || !(state.second_moment.dims == params.dims)) {
    throw ShapeError("optimizer_step: adam moments do not match parameter dims");
  }
  auto m = out.state.first_moment.flat();
  auto v = out.state.second_moment.flat();
  const double t = static_cast<double>(out.state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i].array().square().matrix();
    w[i].array() -= lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + state.epsilon);
  }
  return out;
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "plain-sgd";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "plain-sgd" || name == "sgd") return OptimizerKind::kPlainSgd;
  throw ConfigError("unknown optimizer kind '" + name + "'");
}

}  // namespace ilasr
