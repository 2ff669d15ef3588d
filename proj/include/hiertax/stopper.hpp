#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "hiertax/error.hpp"
#include "hiertax/trace.hpp"

namespace hiertax {

inline constexpr int kStopperFeatureCount = 7;

/// max, mean, variance, kurtosis, skewness, top-gap, l2 norm.
using StopperFeatures = Eigen::Matrix<double, kStopperFeatureCount, 1>;

enum StopperFeature : int {
  kMaxScore = 0,
  kMeanScore,
  kVariance,
  kKurtosis,
  kSkewness,
  kTopGap,
  kL2Norm,
};

/// Population moments of a score vector. Skewness is m3 / sd^3, kurtosis the
/// raw m4 / sd^4; both are 0 for a single score or a constant vector. The
/// top-gap of a single score is the score itself.
template <typename Derived>
StopperFeatures extract_features(const Eigen::MatrixBase<Derived>& scores) {
  const Eigen::Index n = scores.size();
  if (n == 0) throw DomainError("extract_features: empty score vector");

  const double max = scores.maxCoeff();
  const double mean = scores.mean();
  const auto centered = (scores.array() - mean).eval();
  const double variance = centered.square().mean();
  const double sd = std::sqrt(variance);

  double skewness = 0.0;
  double kurtosis = 0.0;
  if (n > 1 && sd > 1e-12 * std::max(1.0, std::abs(max))) {
    skewness = centered.cube().mean() / (sd * sd * sd);
    kurtosis = centered.square().square().mean() / (variance * variance);
  }

  double top_gap = scores(0);
  if (n > 1) {
    double first = -std::numeric_limits<double>::infinity();
    double second = first;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = scores(i);
      if (v > first) {
        second = first;
        first = v;
      } else if (v > second) {
        second = v;
      }
    }
    top_gap = first - second;
  }

  StopperFeatures f;
  f << max, mean, variance, kurtosis, skewness, top_gap, scores.norm();
  return f;
}

/// One-hidden-layer network: sigmoid(out . relu(hidden^T f + hidden_bias) + out_bias).
struct StopperWeights {
  Eigen::Matrix<double, kStopperFeatureCount, Eigen::Dynamic> hidden;
  Eigen::VectorXd hidden_bias;
  Eigen::VectorXd out;
  double out_bias = 0.0;

  static StopperWeights zeros(int hidden_size);
  int hidden_size() const noexcept { return static_cast<int>(hidden.cols()); }
  /// Throws DomainError on inconsistent shapes or non-finite entries.
  void validate() const;
};

double stopper_logit(const StopperFeatures& features, const StopperWeights& w);
double stopper_forward(const StopperFeatures& features, const StopperWeights& w);
inline bool stopper_fires(const StopperFeatures& features, const StopperWeights& w) {
  return stopper_forward(features, w) >= 0.5;
}

struct StopperExample {
  StopperFeatures features;
  bool target = false;  // stop here
};

/// Mean binary cross-entropy over `examples`.
double stopper_loss(std::span<const StopperExample> examples, const StopperWeights& w);
/// Mean binary cross-entropy and its gradient (same shapes as `w`).
double stopper_loss_and_gradient(std::span<const StopperExample> examples,
                                 const StopperWeights& w, StopperWeights& gradient);

struct StopperTrainOptions {
  int hidden = 16;
  double learning_rate = 1e-3;
  int epochs = 500;
  std::uint64_t seed = 0;
};

struct StopperTrainResult {
  StopperWeights weights;
  std::vector<double> loss_history;  // loss before each epoch, then final
};

/// Full-batch gradient descent from weights uniform in [-0.1, 0.1].
/// Throws DomainError unless both classes are present.
StopperTrainResult train_stopper(std::span<const StopperExample> examples,
                                 const StopperTrainOptions& options);

double stopper_accuracy(std::span<const StopperExample> examples, const StopperWeights& w);

/// Stop examples from traversal traces: for every expanded non-root node,
/// target = true when the ground truth is the node itself, false when it is
/// a strict descendant; nodes off the ground-truth chain are skipped.
/// `tax` is only consulted for traces without a recorded truth chain.
std::vector<StopperExample> build_stopper_dataset(std::span<const TraversalTrace> traces,
                                                  const Taxonomy* tax = nullptr);

nlohmann::ordered_json stopper_to_json(const StopperWeights& w);
/// Throws FormatError or DomainError.
StopperWeights stopper_from_json(const nlohmann::json& j);
StopperWeights load_stopper(const std::string& path);

}  // namespace hiertax
