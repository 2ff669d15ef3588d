#include "hiertax/trace.hpp"

#include "hiertax/error.hpp"

namespace hiertax {

nlohmann::ordered_json trace_to_json(const TraversalTrace& trace) {
  nlohmann::ordered_json j;
  j["record_id"] = trace.record_id;
  j["ground_truth"] = trace.ground_truth ? nlohmann::ordered_json(trace.ground_truth->str())
                                         : nlohmann::ordered_json(nullptr);
  auto chain = nlohmann::ordered_json::array();
  for (const auto& c : trace.truth_chain) chain.push_back(c.str());
  j["truth_chain"] = std::move(chain);
  auto steps = nlohmann::ordered_json::array();
  for (const TraceStep& s : trace.steps) {
    nlohmann::ordered_json step;
    step["node"] = s.node ? nlohmann::ordered_json(s.node->str()) : nlohmann::ordered_json(nullptr);
    auto cands = nlohmann::ordered_json::array();
    for (const auto& c : s.candidates) cands.push_back(c.str());
    step["candidates"] = std::move(cands);
    auto scores = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < s.scores.size(); ++i) scores.push_back(s.scores[i]);
    step["scores"] = std::move(scores);
    step["stopped"] = s.stopped;
    steps.push_back(std::move(step));
  }
  j["steps"] = std::move(steps);
  return j;
}

TraversalTrace trace_from_json(const nlohmann::json& j) {
  try {
    TraversalTrace t;
    t.record_id = j.at("record_id").get<std::string>();
    if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
      t.ground_truth = LabelCode::parse(j["ground_truth"].get<std::string>());
    }
    if (j.contains("truth_chain")) {
      for (const auto& c : j["truth_chain"]) t.truth_chain.push_back(LabelCode::parse(c.get<std::string>()));
    }
    for (const auto& s : j.at("steps")) {
      TraceStep step;
      if (!s.at("node").is_null()) step.node = LabelCode::parse(s["node"].get<std::string>());
      for (const auto& c : s.at("candidates")) step.candidates.push_back(LabelCode::parse(c.get<std::string>()));
      const auto& scores = s.at("scores");
      step.scores.resize(static_cast<Eigen::Index>(scores.size()));
      for (std::size_t i = 0; i < scores.size(); ++i) {
        step.scores[static_cast<Eigen::Index>(i)] = scores[i].get<double>();
      }
      if (static_cast<std::size_t>(step.scores.size()) != step.candidates.size()) {
        throw FormatError("trace step has mismatched candidates and scores");
      }
      step.stopped = s.value("stopped", false);
      t.steps.push_back(std::move(step));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed trace: ") + e.what());
  }
}

}  // namespace hiertax
