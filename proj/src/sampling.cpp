#include "hiertax/sampling.hpp"

#include <ostream>

#include "json.hpp"

#include "hiertax/error.hpp"
#include "hiertax/parallel.hpp"

namespace hiertax {

namespace {

// Chain levels whose node has at least one sibling.
std::vector<std::size_t> levels_with_siblings(const std::vector<LabelCode>& chain,
                                              const Taxonomy& tax) {
  std::vector<std::size_t> levels;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const auto& node = tax.node(chain[i]);
    if (tax.candidates(node.parent).size() > 1) levels.push_back(i);
  }
  return levels;
}

}  // namespace

CandidateDraw draw_candidate(LabelCode truth, const Taxonomy& tax, CounterRng& rng) {
  const std::vector<LabelCode> chain = tax.ancestors_and_self(truth);
  const bool positive = rng.coin();
  const std::vector<std::size_t> levels = levels_with_siblings(chain, tax);
  if (positive || levels.empty()) {
    const auto i = rng.uniform_index(chain.size());
    return {tax.canonical(chain[i]), true, levels.empty()};
  }
  const std::size_t level = levels[rng.uniform_index(levels.size())];
  const std::vector<LabelCode> sibs = tax.siblings(chain[level]);
  return {sibs[rng.uniform_index(sibs.size())], false, false};
}

Probability pair_probability(LabelCode truth, LabelCode candidate, bool polarity,
                             const Taxonomy& tax) {
  const std::vector<LabelCode> chain = tax.ancestors_and_self(truth);
  const TaxonomyNode& cand = tax.node(candidate);
  const auto d = static_cast<std::int64_t>(chain.size());
  const std::vector<std::size_t> levels = levels_with_siblings(chain, tax);
  const auto depth = static_cast<std::size_t>(cand.depth);
  const bool on_chain = depth < chain.size() && chain[depth] == cand.code;

  if (polarity) {
    if (!on_chain) return Probability(0);
    return levels.empty() ? Probability(1, d) : Probability(1, 2 * d);
  }
  if (on_chain || levels.empty() || depth >= chain.size()) return Probability(0);
  const TaxonomyNode& anchor = tax.node(chain[depth]);
  if (anchor.parent != cand.parent) return Probability(0);
  const auto n_sibs = static_cast<std::int64_t>(tax.candidates(anchor.parent).size() - 1);
  return Probability(1, 2 * static_cast<std::int64_t>(levels.size()) * n_sibs);
}

TrainingPair generate_pair(const TenderRecord& rec, const Taxonomy& tax, CounterRng& rng,
                           const SamplingConfig& cfg) {
  if (!rec.cpv) throw FormatError("record " + rec.id + " has no ground-truth label");
  const CandidateDraw draw = draw_candidate(*rec.cpv, tax, rng);
  TrainingPair tp;
  tp.pair = make_pair(rec, tax.node(draw.candidate), cfg.lang, cfg.encoding);
  tp.polarity = draw.polarity;
  tp.source_record = rec.id;
  tp.candidate = draw.candidate;
  tp.degenerate = draw.degenerate;
  return tp;
}

EpochResult generate_epoch(std::span<const TenderRecord> records, const Taxonomy& tax,
                           const EpochOptions& options) {
  std::vector<std::optional<TrainingPair>> slots(records.size());
  std::vector<std::string> errors(records.size());
  parallel_for(records.size(), options.parallelism, [&](std::size_t i) {
    const TenderRecord& rec = records[i];
    CounterRng rng = CounterRng::derive(options.seed, options.epoch, rec.id);
    try {
      slots[i] = generate_pair(rec, tax, rng, options.sampling);
    } catch (const std::exception& e) {
      if (!options.skip_invalid) throw;
      errors[i] = e.what();
    }
  });

  EpochResult result;
  result.pairs.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (slots[i]) {
      if (slots[i]->degenerate) {
        result.warnings.push_back("record " + records[i].id +
                                  ": no sibling on the label chain, emitted a positive");
      }
      result.pairs.push_back(std::move(*slots[i]));
    } else {
      result.warnings.push_back("record " + records[i].id + " skipped: " + errors[i]);
    }
  }
  return result;
}

void write_pairs_jsonl(std::ostream& out, std::span<const TrainingPair> pairs) {
  for (const TrainingPair& p : pairs) {
    nlohmann::ordered_json j;
    j["record_id"] = p.source_record;
    j["input_text"] = p.pair.input_text;
    j["label_text"] = p.pair.label_text;
    j["polarity"] = p.polarity;
    j["candidate"] = p.candidate.str();
    out << j.dump() << '\n';
  }
}

}  // namespace hiertax
