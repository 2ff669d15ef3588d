#include "hiertax/hybrid.hpp"

#include <algorithm>
#include <map>

namespace hiertax {

HybridClassifier::HybridClassifier(const BaselineModel& baseline, const Taxonomy& tax)
    : baseline_(baseline), tax_(tax) {
  const auto& seen = baseline.classifier.seen_classes;
  for (const TaxonomyNode& n : tax.nodes()) {
    if (seen.contains(n.code)) continue;
    for (const LabelCode& a : tax.ancestors_and_self(n.code)) explore_.insert(a);
  }
}

PredictionResult HybridClassifier::predict(const TenderRecord& rec, const PairScorer& scorer,
                                           const InferenceConfig& cfg,
                                           const StopperWeights* stopper) const {
  PredictionResult base = baseline_predict(baseline_, rec, tax_, cfg, stopper);
  PredictionResult hce;
  if (!explore_.empty()) {
    InferenceConfig unlimited = cfg;
    unlimited.max_results.reset();
    hce = hiertax::predict(rec, tax_, scorer, stopper, unlimited, nullptr,
                           [this](LabelCode c) { return explore_.contains(c); });
  }

  std::map<LabelCode, double> merged;
  for (const RankedLabel& l : base.ranked) merged[l.code] = l.score;
  const auto& seen = baseline_.classifier.seen_classes;
  for (const RankedLabel& l : hce.ranked) {
    if (seen.contains(l.code)) continue;
    auto [it, inserted] = merged.emplace(l.code, l.score);
    if (!inserted) it->second = std::max(it->second, l.score);
  }

  PredictionResult out;
  for (const auto& [code, score] : merged) out.ranked.push_back({code, score});
  std::sort(out.ranked.begin(), out.ranked.end(), [](const RankedLabel& a, const RankedLabel& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.code < b.code;
  });
  if (cfg.max_results && out.ranked.size() > *cfg.max_results) out.ranked.resize(*cfg.max_results);
  out.abstained = out.ranked.empty();
  out.visited_nodes = base.visited_nodes + hce.visited_nodes;
  out.scorer_calls = base.scorer_calls + hce.scorer_calls;
  return out;
}

}  // namespace hiertax
