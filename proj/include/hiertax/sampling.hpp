#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "hiertax/encoding.hpp"
#include "hiertax/rng.hpp"
#include "hiertax/taxonomy.hpp"

namespace hiertax {

/// Exact probability of a generation outcome.
using Probability = boost::rational<std::int64_t>;

struct CandidateDraw {
  LabelCode candidate;
  bool polarity = false;
  /// No level of the chain had a sibling; a positive was forced.
  bool degenerate = false;
};

/// Exclusive-sibling draw for ground truth `truth`: with probability 1/2 a
/// positive uniform over ancestors-and-self; otherwise a level of the chain
/// that has siblings is chosen uniformly, then one of its siblings.
CandidateDraw draw_candidate(LabelCode truth, const Taxonomy& tax, CounterRng& rng);

/// Closed-form probability that draw_candidate emits (candidate, polarity).
Probability pair_probability(LabelCode truth, LabelCode candidate, bool polarity,
                             const Taxonomy& tax);

struct TrainingPair {
  PairText pair;
  bool polarity = false;
  std::string source_record;
  LabelCode candidate;
  bool degenerate = false;
};

struct SamplingConfig {
  std::string lang = "en";
  EncodingConfig encoding;
};

/// Throws FormatError when the record has no ground truth and
/// UnknownCodeError when it is not in the taxonomy.
TrainingPair generate_pair(const TenderRecord& rec, const Taxonomy& tax, CounterRng& rng,
                           const SamplingConfig& cfg = {});

struct EpochOptions {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  /// Skip records that fail (with a warning) instead of throwing.
  bool skip_invalid = false;
  std::size_t parallelism = 1;
  SamplingConfig sampling;
};

struct EpochResult {
  std::vector<TrainingPair> pairs;  // input order
  std::vector<std::string> warnings;
};

/// One pair per record, each drawn from a stream keyed by
/// (seed, epoch, record id).
EpochResult generate_epoch(std::span<const TenderRecord> records, const Taxonomy& tax,
                           const EpochOptions& options);

/// `{record_id, input_text, label_text, polarity, candidate}` per line.
void write_pairs_jsonl(std::ostream& out, std::span<const TrainingPair> pairs);

}  // namespace hiertax
