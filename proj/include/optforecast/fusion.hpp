#pragma once

// Joint precision of agreeing classifiers.
//
// For two models that are conditionally independent given the truth and a
// balanced prior, a unanimous positive vote has precision
//
//     P = P1 P2 / (P1 P2 + (1 - P1)(1 - P2)),
//
// i.e. the odds multiply. The formula is used only as a benchmark: the gap
// between the measured precision of the unanimous vote and this value
// quantifies how far the models are from independent.

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace optforecast::fusion {

/// Throws DomainError unless both arguments are in (0, 1).
double joint_precision(double p1, double p2);

/// Left fold of joint_precision; order does not matter.
double joint_precision(std::span<const double> precisions);

struct NamedPrecision {
  std::string_view name;
  double precision;
};

/// Reported precisions of the earlier models, used as demo inputs.
inline constexpr std::array<NamedPrecision, 4> kPublishedPrecisions{{
    {"QRM", 0.5577},
    {"Binary Classification", 0.5956},
    {"Regression NN", 0.6032},
    {"Classification (CNN)", 0.5714},
}};

struct ModelReport {
  std::string name;
  std::vector<int> predictions;  // 0/1 per sample
};

struct ModelPrecision {
  std::string name;
  double precision = 0;
  bool defined = false;  // model made at least one positive call
};

struct FusionReport {
  double theoretical_joint = 0;
  bool theoretical_defined = false;  // every model precision strictly inside (0, 1)
  double empirical_joint = 0;
  bool empirical_defined = false;  // at least one unanimous positive
  double coverage = 0;             // fraction of samples with a unanimous positive vote
  double independence_gap = 0;     // empirical - theoretical (0 when either is undefined)
  std::vector<ModelPrecision> models;

  std::string to_json() const;
};

/// Combined vote is positive iff every model votes positive; disagreements
/// abstain. Per-model precisions are recomputed from `truth`.
FusionReport unanimous_combine(std::span<const ModelReport> reports, std::span<const int> truth);

}  // namespace optforecast::fusion
