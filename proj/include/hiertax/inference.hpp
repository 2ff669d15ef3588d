#pragma once

#include <exception>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hiertax/encoding.hpp"
#include "hiertax/scorer.hpp"
#include "hiertax/stopper.hpp"
#include "hiertax/taxonomy.hpp"
#include "hiertax/trace.hpp"

namespace hiertax {

struct InferenceConfig {
  double threshold = 0.5;  // in (0, 1)
  bool use_stopper = false;
  std::optional<std::size_t> max_results;
  std::string lang = "en";
  EncodingConfig encoding;
  /// When no child of an expanded node reaches the threshold, return the
  /// node itself instead of dropping the path.
  bool keep_exhausted_nodes = false;
  /// Descend only into the best-scoring candidate of each expansion.
  bool greedy = false;

  /// Throws DomainError.
  void validate() const;
};

struct RankedLabel {
  LabelCode code;
  double score = 0.0;

  friend bool operator==(const RankedLabel&, const RankedLabel&) = default;
};

struct PredictionResult {
  std::vector<RankedLabel> ranked;  // descending score, ties by ascending code
  bool abstained = true;
  std::size_t visited_nodes = 0;
  std::size_t scorer_calls = 0;
};

/// Scores `candidates`, the roots when `parent` is empty or the children of
/// `parent` otherwise. Returning nullopt marks the node as unscorable (for
/// example an untrained baseline node): the path terminates at `parent`.
using ChildScorer = std::function<std::optional<ScoreVector>(
    std::optional<LabelCode> parent, std::span<const LabelCode> candidates)>;

/// Restricts which candidates are scored and explored.
using CandidateFilter = std::function<bool(LabelCode)>;

/// Raised when scoring fails mid-traversal; carries the partial trace.
class InferenceError : public std::runtime_error {
 public:
  InferenceError(const std::string& what, std::exception_ptr cause, TraversalTrace partial)
      : std::runtime_error(what), cause_(std::move(cause)), partial_(std::move(partial)) {}

  std::exception_ptr cause() const noexcept { return cause_; }
  const TraversalTrace& partial_trace() const noexcept { return partial_; }

 private:
  std::exception_ptr cause_;
  TraversalTrace partial_;
};

/// Top-down threshold traversal: score the roots, descend into every
/// candidate scoring at least the threshold, return leaves with their score,
/// and return an expanded non-root node itself when the stopper fires on its
/// child scores. No root above threshold means abstention.
PredictionResult traverse(const Taxonomy& tax, const ChildScorer& score_children,
                          const StopperWeights* stopper, const InferenceConfig& cfg,
                          TraversalTrace* trace = nullptr,
                          const CandidateFilter& filter = nullptr);

/// traverse() with the cross-encoder seat filled by `scorer`.
PredictionResult predict(const TenderRecord& rec, const Taxonomy& tax, const PairScorer& scorer,
                         const StopperWeights* stopper, const InferenceConfig& cfg,
                         TraversalTrace* trace = nullptr,
                         const CandidateFilter& filter = nullptr);

/// Record-level predictor used by the corpus runner.
using RecordPredictor =
    std::function<PredictionResult(const TenderRecord&, TraversalTrace* trace)>;

struct CorpusOptions {
  std::size_t parallelism = 1;
  /// Abort on the first per-record error instead of recording it.
  bool strict = false;
  bool collect_traces = false;
};

struct CorpusEntry {
  std::string id;
  std::optional<PredictionResult> result;
  std::string error;
  std::optional<TraversalTrace> trace;
};

struct CorpusResult {
  /// Input order. After an abort this is the completed prefix.
  std::vector<CorpusEntry> entries;
  std::size_t scorer_calls = 0;
  bool aborted = false;
  std::exception_ptr abort_cause;
};

/// Runs `predict_one` over every line. Malformed lines and per-record
/// errors become error entries; transport failures (and, in strict mode, any
/// error) abort the run. Output order never depends on parallelism.
CorpusResult run_corpus(std::span<const RecordLine> lines, const RecordPredictor& predict_one,
                        const CorpusOptions& options);

/// Scorer for a record; lets the oracle scorer see the record's ground truth.
using ScorerProvider = std::function<std::shared_ptr<const PairScorer>(const TenderRecord&)>;

CorpusResult classify_corpus(std::span<const RecordLine> lines, const Taxonomy& tax,
                             const ScorerProvider& scorers, const StopperWeights* stopper,
                             const InferenceConfig& cfg, const CorpusOptions& options);

/// `{id, abstained, ranked:[{code, score}], visited_nodes, scorer_calls}`.
nlohmann::ordered_json prediction_to_json(const std::string& id, const PredictionResult& r);
/// One JSON line per entry; error entries are `{id, error}`.
void write_predictions_jsonl(std::ostream& out, const CorpusResult& result);
/// Parses one prediction line (error entries parse as abstentions).
std::pair<std::string, PredictionResult> prediction_from_json(const nlohmann::json& j);

}  // namespace hiertax
