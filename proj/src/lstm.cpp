#include "optforecast/lstm.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "optforecast/rng.hpp"

namespace optforecast::lstm {

using market_data::SequenceSample;

Metrics Metrics::from_counts(std::int64_t tp, std::int64_t fp, std::int64_t tn, std::int64_t fn) {
  if (tp < 0 || fp < 0 || tn < 0 || fn < 0) throw DomainError("metrics: negative count");
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  const std::int64_t total = tp + fp + tn + fn;
  m.accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  m.precision_defined = tp + fp > 0;
  m.recall_defined = tp + fn > 0;
  m.precision = m.precision_defined ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = m.recall_defined ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  return m;
}

void validate(const TrainConfig& c) {
  auto bad = [](const std::string& what) { throw ValidationError("train config: " + what); };
  if (c.hidden <= 0) bad("hidden must be > 0");
  if (c.batch <= 0) bad("batch must be > 0");
  if (c.epochs <= 0) bad("epochs must be > 0");
  if (!(c.learning_rate > 0) || !std::isfinite(c.learning_rate)) bad("learning_rate must be > 0");
  if (!(c.train_fraction > 0) || c.validation_fraction < 0)
    bad("train fraction must be > 0 and validation fraction >= 0");
  if (std::abs(c.train_fraction + c.validation_fraction - 1.0) > 1e-12)
    bad("train and validation fractions must sum to 1");
  if (c.optimizer == Optimizer::adam &&
      !(c.adam_beta1 >= 0 && c.adam_beta1 < 1 && c.adam_beta2 >= 0 && c.adam_beta2 < 1 &&
        c.adam_epsilon > 0))
    bad("adam parameters out of range");
}

LstmParams<double> initialize(int input_size, int hidden, std::uint64_t seed) {
  LstmParams<double> p(input_size, hidden);
  Rng rng(seed);
  for (int layer = 0; layer < kLayers; ++layer) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.layer_input(layer) + hidden));
    auto wx = p.wx(layer);
    auto wh = p.wh(layer);
    for (Eigen::Index k = 0; k < wx.size(); ++k) wx.data()[k] = rng.uniform(-bound, bound);
    for (Eigen::Index k = 0; k < wh.size(); ++k) wh.data()[k] = rng.uniform(-bound, bound);
    auto b = p.bias(layer);
    b.setZero();
    b.segment(hidden, hidden).setOnes();
  }
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto w = p.head_w();
  for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = rng.uniform(-head_bound, head_bound);
  p.head_b() = 0.0;
  return p;
}

double predict(const LstmParams<double>& params, const SequenceSample& sample) {
  return forward(params, window_matrix<double>(sample)).prob;
}

LstmParams<double> batch_gradient(const LstmParams<double>& params,
                                  std::span<const SequenceSample> data,
                                  std::span<const std::size_t> batch, double* loss_sum) {
  LstmParams<double> total(params.input_size(), params.hidden());
  double losses = 0;
  for (std::size_t idx : batch) {
    const SequenceSample& s = data[idx];
    const auto cache = forward(params, window_matrix<double>(s));
    losses += loss(cache.prob, s.label);
    total.values() += backward(params, cache, s.label).values();
  }
  if (loss_sum) *loss_sum = losses;
  return total;
}

Metrics evaluate(const LstmParams<double>& params, std::span<const SequenceSample> data) {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& s : data) {
    const bool positive = predict(params, s) >= 0.5;
    if (positive)
      (s.label ? tp : fp)++;
    else
      (s.label ? fn : tn)++;
  }
  return Metrics::from_counts(tp, fp, tn, fn);
}

TrainResult train(std::span<const SequenceSample> data, const TrainConfig& config) {
  validate(config);
  if (data.empty()) throw ValidationError("train: empty dataset");

  TrainResult result;
  result.train_count = static_cast<std::size_t>(std::llround(config.train_fraction * data.size()));
  result.train_count = std::clamp<std::size_t>(result.train_count, 1, data.size());
  result.validation_count = data.size() - result.train_count;
  if (static_cast<std::size_t>(config.batch) > result.train_count)
    throw ValidationError("train config: batch " + std::to_string(config.batch) +
                          " exceeds training-set size " + std::to_string(result.train_count));
  const auto train_set = data.first(result.train_count);
  const auto val_set = data.subspan(result.train_count);

  LstmParams<double> params =
      initialize(market_data::kFeatureCount, config.hidden, derive_seed(config.seed, 0));
  Vec<double> m1 = Vec<double>::Zero(params.size());
  Vec<double> m2 = Vec<double>::Zero(params.size());
  std::int64_t step = 0;

  std::vector<std::size_t> order(train_set.size());
  double best_accuracy = -1;
  result.params = params;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    shuffler.shuffle(std::span<std::size_t>(order));

    double loss_total = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t len = std::min<std::size_t>(config.batch, order.size() - start);
      double batch_loss = 0;
      const auto grad = batch_gradient(params, train_set,
                                       std::span<const std::size_t>(order).subspan(start, len),
                                       &batch_loss);
      if (!std::isfinite(batch_loss) || !grad.values().allFinite())
        throw ConvergenceError("train: loss diverged (NaN/inf) in epoch " + std::to_string(epoch),
                               batch_loss);
      loss_total += batch_loss;
      const Vec<double> g = grad.values() / static_cast<double>(len);
      if (config.optimizer == Optimizer::sgd) {
        params.values() -= config.learning_rate * g;
      } else {
        ++step;
        m1 = config.adam_beta1 * m1 + (1 - config.adam_beta1) * g;
        m2 = config.adam_beta2 * m2 + (1 - config.adam_beta2) * g.cwiseAbs2();
        const double c1 = 1 - std::pow(config.adam_beta1, static_cast<double>(step));
        const double c2 = 1 - std::pow(config.adam_beta2, static_cast<double>(step));
        params.values().array() -= config.learning_rate * (m1.array() / c1) /
                                   ((m2.array() / c2).sqrt() + config.adam_epsilon);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_total / static_cast<double>(train_set.size());
    if (!std::isfinite(rec.train_loss))
      throw ConvergenceError("train: loss diverged in epoch " + std::to_string(epoch), rec.train_loss);
    rec.train = evaluate(params, train_set);
    rec.validation = val_set.empty() ? rec.train : evaluate(params, val_set);
    if (rec.validation.accuracy > best_accuracy) {
      best_accuracy = rec.validation.accuracy;
      result.params = params;
      result.best_epoch = epoch;
    }
    result.history.push_back(rec);
  }
  return result;
}

namespace {

using json = nlohmann::ordered_json;

json row_major(const Eigen::Ref<const Mat<double>>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Target>
void read_row_major(const json& j, Target&& out, const std::string& name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != out.rows())
    throw ValidationError("checkpoint: " + name + " has wrong row count");
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != out.cols())
      throw ValidationError("checkpoint: " + name + " has wrong column count");
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
}

}  // namespace

std::string checkpoint_json(const LstmParams<double>& params, const TrainConfig& config, int epoch) {
  json j;
  j["schema"] = 1;
  j["config"] = {{"hidden", config.hidden},
                 {"batch", config.batch},
                 {"epochs", config.epochs},
                 {"learning_rate", config.learning_rate},
                 {"train_fraction", config.train_fraction},
                 {"validation_fraction", config.validation_fraction},
                 {"optimizer", config.optimizer == Optimizer::sgd ? "sgd" : "adam"}};
  j["shapes"] = {{"input", params.input_size()}, {"hidden", params.hidden()}, {"layers", kLayers}};
  json layers = json::array();
  for (int l = 0; l < kLayers; ++l) {
    json layer;
    layer["wx"] = row_major(params.wx(l));
    layer["wh"] = row_major(params.wh(l));
    layer["b"] = row_major(params.bias(l).transpose());
    layers.push_back(layer);
  }
  j["layers"] = layers;
  j["head_w"] = row_major(params.head_w().transpose());
  j["head_b"] = params.head_b();
  j["seed"] = config.seed;
  j["epoch"] = epoch;
  return j.dump(1);
}

LstmParams<double> load_checkpoint(const std::string& text, TrainConfig* config, int* epoch) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
  try {
    const int input = j.at("shapes").at("input").get<int>();
    const int hidden = j.at("shapes").at("hidden").get<int>();
    if (j.at("shapes").at("layers").get<int>() != kLayers || input <= 0 || hidden <= 0)
      throw ValidationError("checkpoint: unsupported shapes");
    LstmParams<double> p(input, hidden);
    const json& layers = j.at("layers");
    if (!layers.is_array() || layers.size() != kLayers)
      throw ValidationError("checkpoint: expected 2 layers");
    for (int l = 0; l < kLayers; ++l) {
      const json& layer = layers[static_cast<std::size_t>(l)];
      read_row_major(layer.at("wx"), p.wx(l), "wx");
      read_row_major(layer.at("wh"), p.wh(l), "wh");
      Mat<double> b(1, 4 * hidden);
      read_row_major(layer.at("b"), b, "b");
      p.bias(l) = b.transpose();
    }
    Mat<double> w(1, hidden);
    read_row_major(j.at("head_w"), w, "head_w");
    p.head_w() = w.transpose();
    p.head_b() = j.at("head_b").get<double>();
    if (!p.values().allFinite()) throw ValidationError("checkpoint: non-finite weight");
    if (config) {
      const json& c = j.at("config");
      config->hidden = c.at("hidden").get<int>();
      config->batch = c.at("batch").get<int>();
      config->epochs = c.at("epochs").get<int>();
      config->learning_rate = c.at("learning_rate").get<double>();
      config->train_fraction = c.at("train_fraction").get<double>();
      config->validation_fraction = c.at("validation_fraction").get<double>();
      config->optimizer = c.at("optimizer").get<std::string>() == "adam" ? Optimizer::adam : Optimizer::sgd;
      config->seed = j.at("seed").get<std::uint64_t>();
    }
    if (epoch) *epoch = j.at("epoch").get<int>();
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace optforecast::lstm
