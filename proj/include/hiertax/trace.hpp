#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hiertax/scorer.hpp"
#include "hiertax/taxonomy.hpp"

namespace hiertax {

/// One scorer call during a traversal: the node being expanded (empty for
/// the roots), its candidates and their scores.
struct TraceStep {
  std::optional<LabelCode> node;
  std::vector<LabelCode> candidates;
  ScoreVector scores;
  bool stopped = false;  // the stopper fired here
};

struct TraversalTrace {
  std::string record_id;
  std::optional<LabelCode> ground_truth;
  std::vector<LabelCode> truth_chain;  // root-to-truth, when known
  std::vector<TraceStep> steps;        // in visiting order
};

nlohmann::ordered_json trace_to_json(const TraversalTrace& trace);
/// Throws FormatError.
TraversalTrace trace_from_json(const nlohmann::json& j);

}  // namespace hiertax
