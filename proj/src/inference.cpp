#include "hiertax/inference.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <ostream>

#include "hiertax/error.hpp"
#include "hiertax/parallel.hpp"

namespace hiertax {

void InferenceConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw DomainError("threshold must be in (0, 1)");
  }
  if (max_results && *max_results == 0) throw DomainError("max_results must be positive");
}

namespace {

class Traversal {
 public:
  Traversal(const Taxonomy& tax, const ChildScorer& score_children,
            const StopperWeights* stopper, const InferenceConfig& cfg, TraversalTrace* trace,
            const CandidateFilter& filter)
      : tax_(tax),
        score_children_(score_children),
        stopper_(cfg.use_stopper ? stopper : nullptr),
        cfg_(cfg),
        trace_(trace),
        filter_(filter) {}

  PredictionResult run() {
    expand(std::nullopt, 0.0);
    std::sort(result_.ranked.begin(), result_.ranked.end(),
              [](const RankedLabel& a, const RankedLabel& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.code < b.code;
              });
    if (cfg_.max_results && result_.ranked.size() > *cfg_.max_results) {
      result_.ranked.resize(*cfg_.max_results);
    }
    result_.abstained = result_.ranked.empty();
    return std::move(result_);
  }

 private:
  void terminal(LabelCode code, double score) { result_.ranked.push_back({code, score}); }

  void visit(LabelCode code, double score) {
    ++result_.visited_nodes;
    if (tax_.node(code).is_leaf()) {
      terminal(code, score);
      return;
    }
    expand(code, score);
  }

  void expand(std::optional<LabelCode> parent, double parent_score) {
    std::vector<LabelCode> candidates;
    for (const LabelCode& c : tax_.candidates(parent)) {
      if (!filter_ || filter_(c)) candidates.push_back(c);
    }
    if (candidates.empty()) {
      if (parent) terminal(*parent, parent_score);
      return;
    }

    std::optional<ScoreVector> scores = score_children_(parent, candidates);
    if (!scores) {
      if (parent) terminal(*parent, parent_score);
      return;
    }
    ++result_.scorer_calls;

    bool stop = false;
    if (parent && stopper_ != nullptr) stop = stopper_fires(extract_features(*scores), *stopper_);
    if (trace_ != nullptr) trace_->steps.push_back({parent, candidates, *scores, stop});
    if (stop) {
      terminal(*parent, parent_score);
      return;
    }

    Eigen::Index best = 0;
    if (cfg_.greedy) scores->maxCoeff(&best);
    bool any = false;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (cfg_.greedy && static_cast<Eigen::Index>(i) != best) continue;
      const double s = (*scores)[static_cast<Eigen::Index>(i)];
      if (s >= cfg_.threshold) {
        any = true;
        visit(candidates[i], s);
      }
    }
    if (!any && parent && cfg_.keep_exhausted_nodes) terminal(*parent, parent_score);
  }

  const Taxonomy& tax_;
  const ChildScorer& score_children_;
  const StopperWeights* stopper_;
  const InferenceConfig& cfg_;
  TraversalTrace* trace_;
  const CandidateFilter& filter_;
  PredictionResult result_;
};

bool is_transport_failure(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const TransportError&) {
    return true;
  } catch (const InferenceError& ie) {
    return ie.cause() && is_transport_failure(ie.cause());
  } catch (...) {
    return false;
  }
}

}  // namespace

PredictionResult traverse(const Taxonomy& tax, const ChildScorer& score_children,
                          const StopperWeights* stopper, const InferenceConfig& cfg,
                          TraversalTrace* trace, const CandidateFilter& filter) {
  cfg.validate();
  if (cfg.use_stopper && stopper == nullptr) {
    throw DomainError("use_stopper is set but no stopper weights were given");
  }
  try {
    return Traversal(tax, score_children, stopper, cfg, trace, filter).run();
  } catch (const DomainError&) {
    throw;
  } catch (const std::exception& e) {
    throw InferenceError(e.what(), std::current_exception(),
                         trace != nullptr ? *trace : TraversalTrace{});
  }
}

PredictionResult predict(const TenderRecord& rec, const Taxonomy& tax, const PairScorer& scorer,
                         const StopperWeights* stopper, const InferenceConfig& cfg,
                         TraversalTrace* trace, const CandidateFilter& filter) {
  const std::string input = serialize_record(rec, cfg.encoding);
  if (trace != nullptr) {
    trace->record_id = rec.id;
    trace->ground_truth = rec.cpv;
    trace->truth_chain.clear();
    if (rec.cpv && tax.contains(*rec.cpv)) trace->truth_chain = tax.ancestors_and_self(*rec.cpv);
  }
  const ChildScorer score_children = [&](std::optional<LabelCode>,
                                         std::span<const LabelCode> candidates)
      -> std::optional<ScoreVector> {
    ScoreRequest req;
    req.input_text = input;
    req.candidates.reserve(candidates.size());
    for (const LabelCode& c : candidates) {
      req.candidates.push_back({c, sanitize_reserved(tax.node(c).description(cfg.lang))});
    }
    return scorer.score_batch(req);
  };
  return traverse(tax, score_children, stopper, cfg, trace, filter);
}

CorpusResult run_corpus(std::span<const RecordLine> lines, const RecordPredictor& predict_one,
                        const CorpusOptions& options) {
  std::vector<CorpusEntry> entries(lines.size());
  std::vector<char> done(lines.size(), 0);
  std::atomic<bool> abort{false};
  std::exception_ptr abort_cause;
  std::mutex abort_mutex;
  std::size_t abort_index = lines.size();

  parallel_for(lines.size(), options.parallelism, [&](std::size_t i) {
    if (abort.load()) return;
    const RecordLine& line = lines[i];
    CorpusEntry& entry = entries[i];
    if (!line.record) {
      entry.id = "line:" + std::to_string(line.line);
      entry.error = line.error;
      if (options.strict) {
        std::lock_guard lock(abort_mutex);
        if (i < abort_index) {
          abort_index = i;
          abort_cause = std::make_exception_ptr(FormatError(line.error));
        }
        abort = true;
        return;
      }
      done[i] = 1;
      return;
    }
    entry.id = line.record->id;
    TraversalTrace trace;
    try {
      entry.result = predict_one(*line.record, options.collect_traces ? &trace : nullptr);
      if (options.collect_traces) entry.trace = std::move(trace);
      done[i] = 1;
    } catch (const std::exception& e) {
      const auto cause = std::current_exception();
      if (options.strict || is_transport_failure(cause)) {
        std::lock_guard lock(abort_mutex);
        if (i < abort_index) {
          abort_index = i;
          abort_cause = cause;
        }
        abort = true;
        return;
      }
      entry.error = e.what();
      if (options.collect_traces) {
        if (const auto* ie = dynamic_cast<const InferenceError*>(&e)) entry.trace = ie->partial_trace();
      }
      done[i] = 1;
    }
  });

  CorpusResult result;
  result.aborted = abort.load();
  result.abort_cause = abort_cause;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!done[i]) break;
    if (entries[i].result) result.scorer_calls += entries[i].result->scorer_calls;
    result.entries.push_back(std::move(entries[i]));
  }
  return result;
}

CorpusResult classify_corpus(std::span<const RecordLine> lines, const Taxonomy& tax,
                             const ScorerProvider& scorers, const StopperWeights* stopper,
                             const InferenceConfig& cfg, const CorpusOptions& options) {
  cfg.validate();
  const RecordPredictor one = [&](const TenderRecord& rec, TraversalTrace* trace) {
    const std::shared_ptr<const PairScorer> scorer = scorers(rec);
    return predict(rec, tax, *scorer, stopper, cfg, trace);
  };
  return run_corpus(lines, one, options);
}

nlohmann::ordered_json prediction_to_json(const std::string& id, const PredictionResult& r) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["abstained"] = r.abstained;
  auto ranked = nlohmann::ordered_json::array();
  for (const RankedLabel& l : r.ranked) {
    nlohmann::ordered_json e;
    e["code"] = l.code.str();
    e["score"] = l.score;
    ranked.push_back(std::move(e));
  }
  j["ranked"] = std::move(ranked);
  j["visited_nodes"] = r.visited_nodes;
  j["scorer_calls"] = r.scorer_calls;
  return j;
}

void write_predictions_jsonl(std::ostream& out, const CorpusResult& result) {
  for (const CorpusEntry& e : result.entries) {
    if (e.result) {
      out << prediction_to_json(e.id, *e.result).dump() << '\n';
    } else {
      nlohmann::ordered_json j;
      j["id"] = e.id;
      j["error"] = e.error;
      out << j.dump() << '\n';
    }
  }
}

std::pair<std::string, PredictionResult> prediction_from_json(const nlohmann::json& j) {
  try {
    std::pair<std::string, PredictionResult> out;
    out.first = j.at("id").is_string() ? j["id"].get<std::string>() : j["id"].dump();
    PredictionResult& r = out.second;
    if (j.contains("ranked")) {
      for (const auto& e : j["ranked"]) {
        r.ranked.push_back({LabelCode::parse(e.at("code").get<std::string>()),
                            e.at("score").get<double>()});
      }
    }
    r.abstained = r.ranked.empty();
    r.visited_nodes = j.value("visited_nodes", std::size_t{0});
    r.scorer_calls = j.value("scorer_calls", std::size_t{0});
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed prediction: ") + e.what());
  }
}

}  // namespace hiertax
