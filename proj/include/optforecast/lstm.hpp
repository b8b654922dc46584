#pragma once

// Two-layer LSTM with a dense sigmoid head for binary sequence
// classification, with exact backpropagation through time.
//
// Gate rows are stacked [input; forget; output; candidate], each `hidden`
// rows. All parameters live in one flat vector; the accessors return
// Eigen::Map views into it, so gradients, optimizer moments and
// finite-difference perturbations all work on the same layout.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "optforecast/error.hpp"
#include "optforecast/market_data.hpp"

namespace optforecast::lstm {

inline constexpr int kLayers = 2;
inline constexpr double kProbClamp = 1e-12;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
class LstmParams {
 public:
  using MatMap = Eigen::Map<Mat<Scalar>>;
  using ConstMatMap = Eigen::Map<const Mat<Scalar>>;
  using VecMap = Eigen::Map<Vec<Scalar>>;
  using ConstVecMap = Eigen::Map<const Vec<Scalar>>;

  LstmParams() = default;
  LstmParams(int input_size, int hidden)
      : input_size_(input_size), hidden_(hidden), values_(Vec<Scalar>::Zero(count(input_size, hidden))) {
    if (input_size <= 0 || hidden <= 0) throw DomainError("lstm: sizes must be positive");
  }

  static Eigen::Index count(int input_size, int hidden) {
    const Eigen::Index g = 4 * static_cast<Eigen::Index>(hidden);
    return g * input_size + g * hidden + g  // layer 1
           + g * hidden + g * hidden + g    // layer 2
           + hidden + 1;                    // head
  }

  int input_size() const { return input_size_; }
  int hidden() const { return hidden_; }
  Eigen::Index size() const { return values_.size(); }
  Vec<Scalar>& values() { return values_; }
  const Vec<Scalar>& values() const { return values_; }

  int layer_input(int layer) const { return layer == 0 ? input_size_ : hidden_; }

  MatMap wx(int layer) { return MatMap(values_.data() + wx_offset(layer), 4 * hidden_, layer_input(layer)); }
  ConstMatMap wx(int layer) const {
    return ConstMatMap(values_.data() + wx_offset(layer), 4 * hidden_, layer_input(layer));
  }
  MatMap wh(int layer) { return MatMap(values_.data() + wh_offset(layer), 4 * hidden_, hidden_); }
  ConstMatMap wh(int layer) const {
    return ConstMatMap(values_.data() + wh_offset(layer), 4 * hidden_, hidden_);
  }
  VecMap bias(int layer) { return VecMap(values_.data() + bias_offset(layer), 4 * hidden_); }
  ConstVecMap bias(int layer) const {
    return ConstVecMap(values_.data() + bias_offset(layer), 4 * hidden_);
  }
  VecMap head_w() { return VecMap(values_.data() + head_offset(), hidden_); }
  ConstVecMap head_w() const { return ConstVecMap(values_.data() + head_offset(), hidden_); }
  Scalar& head_b() { return values_[values_.size() - 1]; }
  Scalar head_b() const { return values_[values_.size() - 1]; }

  bool same_shape(const LstmParams& o) const {
    return input_size_ == o.input_size_ && hidden_ == o.hidden_;
  }

  template <typename Other>
  LstmParams<Other> cast() const {
    LstmParams<Other> out(input_size_, hidden_);
    out.values() = values_.template cast<Other>();
    return out;
  }

  /// FNV-1a over the parameter bytes; ties a forward cache to its parameters.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(values_.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(values_.size()) * sizeof(Scalar); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
    return h ^ static_cast<std::uint64_t>(hidden_) ^ (static_cast<std::uint64_t>(input_size_) << 32);
  }

 private:
  Eigen::Index gates() const { return 4 * static_cast<Eigen::Index>(hidden_); }
  Eigen::Index layer_offset(int layer) const {
    return layer == 0 ? 0 : gates() * input_size_ + gates() * hidden_ + gates();
  }
  Eigen::Index wx_offset(int layer) const { return layer_offset(layer); }
  Eigen::Index wh_offset(int layer) const { return wx_offset(layer) + gates() * layer_input(layer); }
  Eigen::Index bias_offset(int layer) const { return wh_offset(layer) + gates() * hidden_; }
  Eigen::Index head_offset() const { return bias_offset(1) + gates(); }

  int input_size_ = 0;
  int hidden_ = 0;
  Vec<Scalar> values_;
};

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  return x >= 0 ? Scalar(1) / (Scalar(1) + exp(-x)) : exp(x) / (Scalar(1) + exp(x));
}

/// Activations of one layer at one step.
template <typename Scalar>
struct StepCache {
  Vec<Scalar> x;       // layer input
  Vec<Scalar> gates;   // activated [i; f; o; g]
  Vec<Scalar> c;       // cell state after the step
  Vec<Scalar> tanh_c;
  Vec<Scalar> h;       // short-term state after the step
};

template <typename Scalar>
struct ForwardCache {
  std::array<std::vector<StepCache<Scalar>>, kLayers> steps;
  Scalar logit = 0;
  Scalar prob = 0;
  std::uint64_t params_fingerprint = 0;
};

/// Forward pass over a window stored as (input_size x steps).
template <typename Scalar>
ForwardCache<Scalar> forward(const LstmParams<Scalar>& params, const Mat<Scalar>& window) {
  if (window.rows() != params.input_size() || window.cols() != market_data::kWindowLength)
    throw DomainError("lstm forward: expected " + std::to_string(params.input_size()) + "x" +
                      std::to_string(market_data::kWindowLength) + " window, got " +
                      std::to_string(window.rows()) + "x" + std::to_string(window.cols()));
  using std::tanh;
  const int H = params.hidden();
  const Eigen::Index T = window.cols();
  ForwardCache<Scalar> cache;
  cache.params_fingerprint = params.fingerprint();

  for (int layer = 0; layer < kLayers; ++layer) {
    auto& steps = cache.steps[layer];
    steps.resize(static_cast<std::size_t>(T));
    Vec<Scalar> h = Vec<Scalar>::Zero(H);
    Vec<Scalar> c = Vec<Scalar>::Zero(H);
    const auto wx = params.wx(layer);
    const auto wh = params.wh(layer);
    const auto b = params.bias(layer);
    for (Eigen::Index t = 0; t < T; ++t) {
      StepCache<Scalar>& s = steps[static_cast<std::size_t>(t)];
      s.x = layer == 0 ? Vec<Scalar>(window.col(t)) : cache.steps[layer - 1][static_cast<std::size_t>(t)].h;
      Vec<Scalar> a = b;
      a.noalias() += wx * s.x;
      a.noalias() += wh * h;
      s.gates.resize(4 * H);
      for (int k = 0; k < 3 * H; ++k) s.gates[k] = sigmoid(a[k]);
      for (int k = 3 * H; k < 4 * H; ++k) s.gates[k] = tanh(a[k]);
      const auto in = s.gates.segment(0, H);
      const auto fg = s.gates.segment(H, H);
      const auto out = s.gates.segment(2 * H, H);
      const auto cand = s.gates.segment(3 * H, H);
      c = fg.cwiseProduct(c) + in.cwiseProduct(cand);
      s.c = c;
      s.tanh_c = c.unaryExpr([](Scalar v) { return tanh(v); });
      h = out.cwiseProduct(s.tanh_c);
      s.h = h;
    }
  }
  cache.logit = params.head_w().dot(cache.steps[kLayers - 1].back().h) + params.head_b();
  cache.prob = sigmoid(cache.logit);
  return cache;
}

template <typename Scalar>
Mat<Scalar> window_matrix(const market_data::SequenceSample& sample) {
  Mat<Scalar> w(market_data::kFeatureCount, market_data::kWindowLength);
  for (int t = 0; t < market_data::kWindowLength; ++t)
    w.col(t) = sample.window[static_cast<std::size_t>(t)].template cast<Scalar>();
  return w;
}

/// Binary cross-entropy with p clamped to [1e-12, 1 - 1e-12].
template <typename Scalar>
Scalar loss(Scalar prob, int label) {
  using std::log;
  const Scalar p = std::clamp(prob, Scalar(kProbClamp), Scalar(1 - kProbClamp));
  return label ? -log(p) : -log(Scalar(1) - p);
}

/// Exact gradient of loss(forward(params, window).prob, label).
template <typename Scalar>
LstmParams<Scalar> backward(const LstmParams<Scalar>& params, const ForwardCache<Scalar>& cache,
                            int label) {
  if (cache.params_fingerprint != params.fingerprint())
    throw DomainError("lstm backward: cache was produced by different parameters");
  if (label != 0 && label != 1) throw DomainError("lstm backward: label must be 0 or 1");

  const int H = params.hidden();
  LstmParams<Scalar> grad(params.input_size(), H);
  const bool clamped = cache.prob < Scalar(kProbClamp) || cache.prob > Scalar(1 - kProbClamp);
  const Scalar dlogit = clamped ? Scalar(0) : cache.prob - Scalar(label);

  const auto& top = cache.steps[kLayers - 1];
  const std::size_t T = top.size();
  grad.head_w() = dlogit * top.back().h;
  grad.head_b() = dlogit;

  // Gradient w.r.t. each step's output h from the layer above.
  std::vector<Vec<Scalar>> dh_above(T, Vec<Scalar>::Zero(H));
  dh_above.back() = dlogit * params.head_w();

  for (int layer = kLayers - 1; layer >= 0; --layer) {
    const auto& steps = cache.steps[layer];
    const auto wx = params.wx(layer);
    const auto wh = params.wh(layer);
    auto gwx = grad.wx(layer);
    auto gwh = grad.wh(layer);
    auto gb = grad.bias(layer);
    std::vector<Vec<Scalar>> dx(T);
    Vec<Scalar> dh_next = Vec<Scalar>::Zero(H);
    Vec<Scalar> dc_next = Vec<Scalar>::Zero(H);
    Vec<Scalar> da(4 * H);
    const Vec<Scalar> zero = Vec<Scalar>::Zero(H);
    for (std::size_t t = T; t-- > 0;) {
      const StepCache<Scalar>& s = steps[t];
      const Vec<Scalar>& c_prev = t > 0 ? steps[t - 1].c : zero;
      const Vec<Scalar>& h_prev = t > 0 ? steps[t - 1].h : zero;
      const auto in = s.gates.segment(0, H);
      const auto fg = s.gates.segment(H, H);
      const auto out = s.gates.segment(2 * H, H);
      const auto cand = s.gates.segment(3 * H, H);

      const Vec<Scalar> dh = dh_above[t] + dh_next;
      const Vec<Scalar> dc =
          dc_next + dh.cwiseProduct(out).cwiseProduct(
                        (Vec<Scalar>::Ones(H) - s.tanh_c.cwiseAbs2()));
      // d(pre-activation) for each gate.
      da.segment(0, H) = dc.cwiseProduct(cand).cwiseProduct(in.cwiseProduct(Vec<Scalar>::Ones(H) - in));
      da.segment(H, H) = dc.cwiseProduct(c_prev).cwiseProduct(fg.cwiseProduct(Vec<Scalar>::Ones(H) - fg));
      da.segment(2 * H, H) =
          dh.cwiseProduct(s.tanh_c).cwiseProduct(out.cwiseProduct(Vec<Scalar>::Ones(H) - out));
      da.segment(3 * H, H) = dc.cwiseProduct(in).cwiseProduct(Vec<Scalar>::Ones(H) - cand.cwiseAbs2());

      gwx.noalias() += da * s.x.transpose();
      gwh.noalias() += da * h_prev.transpose();
      gb += da;
      dx[t].noalias() = wx.transpose() * da;
      dh_next.noalias() = wh.transpose() * da;
      dc_next = dc.cwiseProduct(fg);
    }
    dh_above = std::move(dx);
  }
  return grad;
}

struct Metrics {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  bool precision_defined = false;  // tp + fp > 0
  bool recall_defined = false;     // tp + fn > 0

  static Metrics from_counts(std::int64_t tp, std::int64_t fp, std::int64_t tn, std::int64_t fn);
};

enum class Optimizer { sgd, adam };

struct TrainConfig {
  int hidden = 32;
  int batch = 8;
  int epochs = 30;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  double validation_fraction = 0.2;
  Optimizer optimizer = Optimizer::sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

void validate(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  Metrics train;
  Metrics validation;
};

struct TrainResult {
  LstmParams<double> params;  // best-validation-accuracy parameters
  int best_epoch = 0;
  std::vector<EpochRecord> history;
  std::size_t train_count = 0;
  std::size_t validation_count = 0;
};

/// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases
/// except forget-gate biases at +1. fan_in counts the layer input plus the
/// recurrent state.
LstmParams<double> initialize(int input_size, int hidden, std::uint64_t seed);

/// Sum of per-sample gradients over `batch` (indices into `data`).
LstmParams<double> batch_gradient(const LstmParams<double>& params,
                                  std::span<const market_data::SequenceSample> data,
                                  std::span<const std::size_t> batch, double* loss_sum = nullptr);

double predict(const LstmParams<double>& params, const market_data::SequenceSample& sample);

/// Threshold 0.5 (probability >= 0.5 predicts 1).
Metrics evaluate(const LstmParams<double>& params, std::span<const market_data::SequenceSample> data);

/// Mini-batch training. The first train_fraction of `data` trains, the
/// remainder validates (order preserved; chronological for market data).
TrainResult train(std::span<const market_data::SequenceSample> data, const TrainConfig& config);

/// Checkpoint JSON: {config, shapes, weights (row-major arrays), seed, epoch}.
std::string checkpoint_json(const LstmParams<double>& params, const TrainConfig& config, int epoch);
LstmParams<double> load_checkpoint(const std::string& json, TrainConfig* config = nullptr,
                                   int* epoch = nullptr);

}  // namespace optforecast::lstm
