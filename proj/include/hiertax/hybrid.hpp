#pragma once

#include <unordered_set>

#include "hiertax/baselines.hpp"
#include "hiertax/inference.hpp"
#include "hiertax/scorer.hpp"

namespace hiertax {

/// Baseline for the classes it was trained on, cross-encoder for the rest.
/// The cross-encoder only explores subtrees that contain a class outside the
/// baseline's seen set and only its unseen answers are kept; both lists are
/// merged by score.
class HybridClassifier {
 public:
  HybridClassifier(const BaselineModel& baseline, const Taxonomy& tax);

  PredictionResult predict(const TenderRecord& rec, const PairScorer& scorer,
                           const InferenceConfig& cfg,
                           const StopperWeights* stopper = nullptr) const;

  /// Nodes whose subtree holds at least one unseen class.
  const std::unordered_set<LabelCode>& explored() const noexcept { return explore_; }

 private:
  const BaselineModel& baseline_;
  const Taxonomy& tax_;
  std::unordered_set<LabelCode> explore_;
};

}  // namespace hiertax
