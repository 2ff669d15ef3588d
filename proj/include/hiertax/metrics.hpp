#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "hiertax/taxonomy.hpp"

namespace hiertax {

/// Hierarchical precision and recall of a single prediction over the
/// ancestor-or-self sets A(truth) and A(predicted).
struct HScores {
  double hp = 0.0;
  double hr = 0.0;
  std::size_t intersection = 0;
  std::size_t pred_depth = 0;   // |A(predicted)|
  std::size_t truth_depth = 0;  // |A(truth)|
};

HScores h_scores(LabelCode truth, LabelCode predicted, const Taxonomy& tax);

/// Per-instance score; an abstention has no prediction and scores zero.
struct InstanceScore {
  std::string record_id;
  LabelCode ground_truth;
  std::optional<LabelCode> predicted;
  double hp = 0.0;
  double hr = 0.0;
  std::size_t intersection = 0;
  std::size_t pred_depth = 0;
  std::size_t truth_depth = 0;
};

InstanceScore score_instance(const std::string& record_id, LabelCode truth,
                             std::optional<LabelCode> predicted, const Taxonomy& tax);

/// Ground truth plus the ranked candidates (empty = abstained).
struct EvaluationInstance {
  std::string record_id;
  LabelCode ground_truth;
  std::vector<LabelCode> ranked;
};

/// NaN marks a value that is undefined for the input (empty group, zero
/// variance); it serializes as null.
struct DepthScores {
  double micro = 0.0;
  double macro = 0.0;
  double micro_seen = 0.0;
  double micro_unseen = 0.0;
  double macro_seen = 0.0;
  double macro_unseen = 0.0;
};

struct PrecisionAtK {
  double micro = 0.0;         // instance mean of the best hp among the top k
  double micro_pooled = 0.0;  // ratio of summed intersections to summed depths
  double macro = 0.0;
  double macro_seen = 0.0;
  double macro_unseen = 0.0;
  double rho = 0.0;
};

struct SeenUnseen {
  double macro_seen = 0.0;
  double macro_unseen = 0.0;
  double t_statistic = 0.0;
  double p_value = 0.0;
  std::size_t n_seen_classes = 0;
  std::size_t n_unseen_classes = 0;
};

struct EvaluationReport {
  std::size_t n_instances = 0;
  std::size_t n_classes = 0;
  // Abstentions count as zero.
  double micro_hp = 0.0;
  double micro_hr = 0.0;
  double macro_hp = 0.0;
  double macro_hr = 0.0;
  // Abstentions excluded.
  double micro_hp_answered = 0.0;
  double micro_hr_answered = 0.0;
  double macro_hp_answered = 0.0;
  double macro_hr_answered = 0.0;
  /// Truncated-chain scores: both chains cut to their first depth+1 levels.
  std::map<int, DepthScores> per_depth;
  std::map<int, PrecisionAtK> precision_at_k;
  /// Pearson correlation of per-class macro hp with training frequency.
  double rho = 0.0;
  SeenUnseen seen_unseen;
  double abstention_rate = 0.0;
};

/// Throws DomainError for empty input or k < 1.
EvaluationReport aggregate(std::span<const EvaluationInstance> instances, const Taxonomy& tax,
                           const std::map<LabelCode, std::size_t>& train_class_freq,
                           const std::unordered_set<LabelCode>& seen_classes,
                           std::span<const int> k_values);

nlohmann::ordered_json report_to_json(const EvaluationReport& report);
/// Per-depth table: depth, micro/macro overall and split by seen/unseen.
void write_per_depth_csv(std::ostream& out, const EvaluationReport& report);

/// Pearson correlation; NaN when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct TTestResult {
  double t = 0.0;
  double p = 0.0;
  double df = 0.0;
};

/// Two-sided Welch t-test. Throws DomainError when a sample has fewer than
/// two values.
TTestResult welch_ttest(std::span<const double> a, std::span<const double> b);

struct ImbalanceReport {
  /// Every taxonomy class -> instances whose label is a descendant-or-self.
  std::map<LabelCode, std::size_t> support;
  /// Classes with support > 0 -> max support / support.
  std::map<LabelCode, double> irlbp;
  double hmeanir = 0.0;
  std::size_t n_zero_support = 0;
  std::size_t max_support = 0;
};

ImbalanceReport imbalance(std::span<const LabelCode> labels, const Taxonomy& tax);

}  // namespace hiertax
