#include <atomic>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"

#include "hiertax/error.hpp"
#include "hiertax/inference.hpp"
#include "synthetic.hpp"

using namespace hiertax;

namespace {

LabelCode code(const char* s) { return LabelCode::parse(s); }

/// Scores from a table; unlisted codes score 0.
struct TableScorer {
  std::map<LabelCode, double> table;
  std::set<std::optional<LabelCode>> untrained;
  mutable std::vector<std::optional<LabelCode>> calls;

  ChildScorer fn() const {
    return [this](std::optional<LabelCode> parent, std::span<const LabelCode> cands)
               -> std::optional<ScoreVector> {
      if (untrained.count(parent)) return std::nullopt;
      calls.push_back(parent);
      ScoreVector s(static_cast<Eigen::Index>(cands.size()));
      for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto it = table.find(cands[i]);
        s[static_cast<Eigen::Index>(i)] = it == table.end() ? 0.0 : it->second;
      }
      return s;
    };
  }
};

std::vector<LabelCode> codes(const PredictionResult& r) {
  std::vector<LabelCode> out;
  for (const auto& l : r.ranked) out.push_back(l.code);
  return out;
}

/// Stopper that always fires (sigmoid(out_bias) with zero weights).
StopperWeights always_stop() {
  StopperWeights w = StopperWeights::zeros(2);
  w.out_bias = 5.0;
  return w;
}

}  // namespace

TEST_CASE("abstains when no root passes") {
  const Taxonomy tax = testing::make_tree({2, 2, 2});
  TableScorer t;
  t.table = {{code("10000000"), 0.49}, {code("11000000"), 0.2}};
  InferenceConfig cfg;
  const PredictionResult r = traverse(tax, t.fn(), nullptr, cfg);
  CHECK(r.abstained);
  CHECK(r.ranked.empty());
  CHECK(r.scorer_calls == 1);
  CHECK(r.visited_nodes == 0);
}

TEST_CASE("multi-path descent returns leaves ranked by score") {
  const Taxonomy tax = testing::make_tree({2, 2, 2});
  TableScorer t;
  t.table = {{code("10000000"), 0.9}, {code("11000000"), 0.5}, {code("10100000"), 0.8},
             {code("10200000"), 0.3}, {code("10110000"), 0.7}, {code("10120000"), 0.95},
             {code("11100000"), 0.6}, {code("11110000"), 0.7}};
  InferenceConfig cfg;
  PredictionResult r = traverse(tax, t.fn(), nullptr, cfg);
  CHECK_FALSE(r.abstained);
  CHECK(codes(r) == std::vector<LabelCode>{code("10120000"), code("10110000"), code("11110000")});
  CHECK(r.ranked[0].score == 0.95);
  // roots, 10000000, 10100000, 11000000, 11100000
  CHECK(r.scorer_calls == 5);

  cfg.max_results = 2;
  CHECK(traverse(tax, t.fn(), nullptr, cfg).ranked.size() == 2);

  cfg = InferenceConfig{};
  cfg.threshold = 0.75;
  r = traverse(tax, t.fn(), nullptr, cfg);
  CHECK(codes(r) == std::vector<LabelCode>{code("10120000")});

  // Threshold is inclusive.
  cfg.threshold = 0.95;
  t.table[code("10000000")] = 0.95;
  t.table[code("10100000")] = 0.95;
  CHECK(codes(traverse(tax, t.fn(), nullptr, cfg)) == std::vector<LabelCode>{code("10120000")});
}

TEST_CASE("exhausted paths are dropped unless configured") {
  const Taxonomy tax = testing::make_tree({2, 2, 2});
  TableScorer t;
  t.table = {{code("10000000"), 0.9}, {code("10100000"), 0.8}};
  InferenceConfig cfg;
  CHECK(traverse(tax, t.fn(), nullptr, cfg).abstained);
  cfg.keep_exhausted_nodes = true;
  const PredictionResult r = traverse(tax, t.fn(), nullptr, cfg);
  REQUIRE(r.ranked.size() == 1);
  CHECK(r.ranked[0] == RankedLabel{code("10100000"), 0.8});
}

TEST_CASE("greedy follows the argmax only") {
  const Taxonomy tax = testing::make_tree({2, 2, 2});
  TableScorer t;
  t.table = {{code("10000000"), 0.9}, {code("11000000"), 0.95}, {code("11100000"), 0.6},
             {code("11110000"), 0.7}, {code("10100000"), 0.8}, {code("10110000"), 0.8}};
  InferenceConfig cfg;
  cfg.greedy = true;
  const PredictionResult r = traverse(tax, t.fn(), nullptr, cfg);
  CHECK(codes(r) == std::vector<LabelCode>{code("11110000")});
  CHECK(r.scorer_calls == 3);
}

TEST_CASE("stopper fires only below the roots") {
  const Taxonomy tax = testing::make_tree({2, 2, 2});
  TableScorer t;
  t.table = {{code("10000000"), 0.9}, {code("10100000"), 0.8}, {code("10110000"), 0.8}};
  const StopperWeights stop = always_stop();
  InferenceConfig cfg;
  cfg.use_stopper = true;
  TraversalTrace trace;
  const PredictionResult r = traverse(tax, t.fn(), &stop, cfg, &trace);
  REQUIRE(r.ranked.size() == 1);
  CHECK(r.ranked[0] == RankedLabel{code("10000000"), 0.9});
  REQUIRE(trace.steps.size() == 2);
  CHECK_FALSE(trace.steps[0].stopped);
  CHECK(trace.steps[1].stopped);

  cfg.use_stopper = false;
  CHECK(codes(traverse(tax, t.fn(), &stop, cfg)) == std::vector<LabelCode>{code("10110000")});
  cfg.use_stopper = true;
  CHECK_THROWS_AS(traverse(tax, t.fn(), nullptr, cfg), DomainError);
}

TEST_CASE("untrained nodes end the path at the parent") {
  const Taxonomy tax = testing::make_tree({2, 2, 2});
  TableScorer t;
  t.table = {{code("10000000"), 0.9}, {code("10100000"), 0.8}};
  t.untrained = {code("10100000")};
  const PredictionResult r = traverse(tax, t.fn(), nullptr, InferenceConfig{});
  CHECK(r.ranked == std::vector<RankedLabel>{{code("10100000"), 0.8}});
  t.untrained = {std::nullopt};
  CHECK(traverse(tax, t.fn(), nullptr, InferenceConfig{}).abstained);
}

TEST_CASE("candidate filter") {
  const Taxonomy tax = testing::make_tree({2, 2, 2});
  TableScorer t;
  t.table = {{code("10000000"), 0.9}, {code("11000000"), 0.9}, {code("10100000"), 0.8},
             {code("10110000"), 0.8}, {code("11100000"), 0.8}, {code("11110000"), 0.8}};
  const CandidateFilter only10 = [](LabelCode c) { return c.str().rfind("10", 0) == 0; };
  const PredictionResult r = traverse(tax, t.fn(), nullptr, InferenceConfig{}, nullptr, only10);
  CHECK(codes(r) == std::vector<LabelCode>{code("10110000")});
}

TEST_CASE("config validation") {
  const Taxonomy tax = testing::make_tree({2});
  TableScorer t;
  InferenceConfig cfg;
  for (double bad : {0.0, 1.0, -0.1, 1.5}) {
    cfg.threshold = bad;
    CHECK_THROWS_AS(traverse(tax, t.fn(), nullptr, cfg), DomainError);
  }
  cfg.threshold = 0.5;
  cfg.max_results = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("oracle scorer recovers every node at zero noise") {
  CounterRng rng(21);
  const Taxonomy tax = testing::random_tree(rng, 300);
  for (const TaxonomyNode& n : tax.nodes()) {
    const OracleScorer oracle(tax, n.code);
    const TenderRecord rec = testing::make_record("x", n.description("en"), n.code);
    InferenceConfig cfg;
    cfg.keep_exhausted_nodes = true;
    TraversalTrace trace;
    const PredictionResult r = predict(rec, tax, oracle, nullptr, cfg, &trace);
    REQUIRE(r.ranked.size() == 1);
    CHECK(r.ranked[0].code == n.code);
    CHECK(trace.truth_chain == tax.ancestors_and_self(n.code));
    CHECK(r.scorer_calls == trace.steps.size());
  }
}

TEST_CASE("trace JSON round trip") {
  const Taxonomy tax = testing::make_tree({2, 2});
  const OracleScorer oracle(tax, code("10100000"));
  TraversalTrace trace;
  predict(testing::make_record("r1", "alder", code("10100000")), tax, oracle, nullptr, InferenceConfig{},
          &trace);
  const TraversalTrace back = trace_from_json(nlohmann::json::parse(trace_to_json(trace).dump()));
  CHECK(back.record_id == "r1");
  CHECK(back.ground_truth == trace.ground_truth);
  CHECK(back.truth_chain == trace.truth_chain);
  REQUIRE(back.steps.size() == trace.steps.size());
  for (std::size_t i = 0; i < back.steps.size(); ++i) {
    CHECK(back.steps[i].node == trace.steps[i].node);
    CHECK(back.steps[i].candidates == trace.steps[i].candidates);
    CHECK(back.steps[i].scores == trace.steps[i].scores);
  }
  CHECK_THROWS_AS(trace_from_json(nlohmann::json::parse(R"({"steps":[{"node":"bad"}]})")), FormatError);
}

namespace {

std::vector<RecordLine> corpus_lines(const Taxonomy& tax, std::size_t n) {
  CounterRng rng(5);
  std::ostringstream ss;
  for (const TenderRecord& r : testing::random_records(tax, rng, n, false)) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["object"] = r.object_text;
    j["cpv"] = r.cpv->str();
    ss << j.dump() << '\n';
  }
  ss << "{not json\n";
  std::istringstream in(ss.str());
  return read_record_lines(in);
}

class FailingScorer final : public PairScorer {
 public:
  FailingScorer(std::size_t fail_after, const PairScorer& inner) : fail_after_(fail_after), inner_(inner) {}
  std::string name() const override { return "failing"; }

 protected:
  ScoreVector do_score(const ScoreRequest& r) const override {
    if (calls_.fetch_add(1) >= fail_after_) throw TransportError("connection refused");
    return inner_.score_batch(r);
  }

 private:
  std::size_t fail_after_;
  const PairScorer& inner_;
  mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace

TEST_CASE("corpus runs are order-stable across parallelism") {
  CounterRng rng(8);
  const Taxonomy tax = testing::random_tree(rng, 200);
  const std::vector<RecordLine> lines = corpus_lines(tax, 120);
  const auto lexical = std::make_shared<LexicalScorer>();
  const ScorerProvider provider = [&](const TenderRecord&) { return lexical; };
  InferenceConfig cfg;
  cfg.threshold = 0.3;
  const auto run = [&](std::size_t par) {
    CorpusOptions opts;
    opts.parallelism = par;
    opts.collect_traces = true;
    std::ostringstream out;
    const CorpusResult r = classify_corpus(lines, tax, provider, nullptr, cfg, opts);
    write_predictions_jsonl(out, r);
    CHECK_FALSE(r.aborted);
    CHECK(r.entries.size() == lines.size());
    CHECK(r.entries.back().error.find("line 121") != std::string::npos);
    return out.str();
  };
  const std::string serial = run(1);
  CHECK(run(4) == serial);
  CHECK(run(16) == serial);

  CorpusOptions strict;
  strict.strict = true;
  const CorpusResult s = classify_corpus(lines, tax, provider, nullptr, cfg, strict);
  CHECK(s.aborted);
  CHECK(s.entries.size() == 120);
}

TEST_CASE("transport failure aborts with the completed prefix") {
  const Taxonomy tax = testing::make_tree({3, 3});
  std::vector<RecordLine> lines = corpus_lines(tax, 10);
  lines.pop_back();
  const LexicalScorer lex;
  const auto failing = std::make_shared<FailingScorer>(7, lex);
  const ScorerProvider provider = [&](const TenderRecord&) { return failing; };
  InferenceConfig cfg;
  cfg.threshold = 0.05;
  const CorpusResult r = classify_corpus(lines, tax, provider, nullptr, cfg, CorpusOptions{});
  CHECK(r.aborted);
  CHECK(r.entries.size() < lines.size());
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    CHECK(r.entries[i].id == lines[i].record->id);
    CHECK(r.entries[i].result.has_value());
  }
  CHECK_THROWS_AS(std::rethrow_exception(r.abort_cause), InferenceError);

  std::ostringstream out;
  write_predictions_jsonl(out, r);
  std::istringstream in(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto [id, pred] = prediction_from_json(nlohmann::json::parse(line));
    CHECK(id == r.entries[n].id);
    CHECK(pred.ranked == r.entries[n].result->ranked);
    ++n;
  }
  CHECK(n == r.entries.size());
}
