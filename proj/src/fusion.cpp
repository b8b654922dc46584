#include "optforecast/fusion.hpp"

#include <cmath>

#include <json.hpp>

#include "optforecast/error.hpp"

namespace optforecast::fusion {

double joint_precision(double p1, double p2) {
  if (!(p1 > 0.0 && p1 < 1.0) || !(p2 > 0.0 && p2 < 1.0))
    throw DomainError("joint_precision: precisions must lie strictly inside (0, 1)");
  const double agree = p1 * p2;
  return agree / (agree + (1.0 - p1) * (1.0 - p2));
}

double joint_precision(std::span<const double> precisions) {
  if (precisions.empty()) throw DomainError("joint_precision: no precisions");
  double acc = precisions.front();
  if (precisions.size() == 1) return joint_precision(acc, 0.5);
  for (std::size_t i = 1; i < precisions.size(); ++i) acc = joint_precision(acc, precisions[i]);
  return acc;
}

FusionReport unanimous_combine(std::span<const ModelReport> reports, std::span<const int> truth) {
  if (reports.size() < 2) throw ValidationError("unanimous_combine: need at least two models");
  for (const auto& r : reports)
    if (r.predictions.size() != truth.size())
      throw ValidationError("unanimous_combine: model '" + r.name + "' has " +
                            std::to_string(r.predictions.size()) + " predictions for " +
                            std::to_string(truth.size()) + " labels");
  auto is_binary = [](int v) { return v == 0 || v == 1; };
  for (int y : truth)
    if (!is_binary(y)) throw ValidationError("unanimous_combine: labels must be 0/1");

  FusionReport out;
  bool all_interior = true;
  std::vector<double> precisions;
  for (const auto& r : reports) {
    std::size_t tp = 0, positives = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (!is_binary(r.predictions[i]))
        throw ValidationError("unanimous_combine: predictions must be 0/1");
      if (r.predictions[i]) {
        ++positives;
        tp += static_cast<std::size_t>(truth[i]);
      }
    }
    ModelPrecision mp{r.name, 0.0, positives > 0};
    if (mp.defined) mp.precision = static_cast<double>(tp) / static_cast<double>(positives);
    all_interior = all_interior && mp.defined && mp.precision > 0.0 && mp.precision < 1.0;
    precisions.push_back(mp.precision);
    out.models.push_back(std::move(mp));
  }

  std::size_t unanimous = 0, unanimous_tp = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    bool all = true;
    for (const auto& r : reports) all = all && r.predictions[i] == 1;
    if (all) {
      ++unanimous;
      unanimous_tp += static_cast<std::size_t>(truth[i]);
    }
  }
  out.coverage = truth.empty() ? 0.0 : static_cast<double>(unanimous) / static_cast<double>(truth.size());
  out.empirical_defined = unanimous > 0;
  if (out.empirical_defined)
    out.empirical_joint = static_cast<double>(unanimous_tp) / static_cast<double>(unanimous);
  out.theoretical_defined = all_interior;
  if (all_interior) out.theoretical_joint = joint_precision(precisions);
  if (out.empirical_defined && out.theoretical_defined)
    out.independence_gap = out.empirical_joint - out.theoretical_joint;
  return out;
}

std::string FusionReport::to_json() const {
  nlohmann::ordered_json j;
  j["theoretical_joint"] = theoretical_joint;
  j["theoretical_defined"] = theoretical_defined;
  j["empirical_joint"] = empirical_joint;
  j["empirical_defined"] = empirical_defined;
  j["coverage"] = coverage;
  j["independence_gap"] = independence_gap;
  auto models_json = nlohmann::ordered_json::array();
  for (const auto& m : models)
    models_json.push_back({{"name", m.name}, {"precision", m.precision}, {"defined", m.defined}});
  j["models"] = models_json;
  return j.dump(1);
}

}  // namespace optforecast::fusion
