#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hiertax/taxonomy.hpp"

namespace hiertax {

struct ScoreCandidate {
  LabelCode code;
  std::string label_text;
};

struct ScoreRequest {
  std::string input_text;
  std::vector<ScoreCandidate> candidates;  // non-empty, distinct codes
};

/// One score in [0, 1] per candidate, in candidate order.
using ScoreVector = Eigen::VectorXd;

/// The cross-encoder seat: scores an input against a batch of label texts.
///
/// score_batch() checks the request and the returned vector (length and
/// range) so every implementation satisfies the same contract. Implementations
/// must be safe for concurrent calls.
class PairScorer {
 public:
  virtual ~PairScorer() = default;

  /// Throws DomainError for a malformed request and ProtocolError when the
  /// implementation returns a vector of the wrong length or a score outside
  /// [0, 1].
  ScoreVector score_batch(const ScoreRequest& request) const;

  virtual std::string name() const = 0;

 private:
  virtual ScoreVector do_score(const ScoreRequest& request) const = 0;
};

/// Cosine similarity of character-trigram count vectors of the lowercased
/// texts. Bracketed tokens such as `[MONTH]` or `[€€€]` are dropped first.
/// Zero when either side has no trigram.
double lexical_score(std::string_view input_text, std::string_view label_text);

class LexicalScorer final : public PairScorer {
 public:
  std::string name() const override { return "lexical"; }

 private:
  ScoreVector do_score(const ScoreRequest& request) const override;
};

/// Test oracle: 1 - u for candidates on the ground-truth chain, u otherwise,
/// with u uniform in [0, noise] and derived from (seed, truth, candidate) so
/// scores do not depend on candidate order.
class OracleScorer final : public PairScorer {
 public:
  OracleScorer(const Taxonomy& tax, LabelCode ground_truth, double noise = 0.0,
               std::uint64_t seed = 0);
  std::string name() const override { return "oracle"; }

 private:
  ScoreVector do_score(const ScoreRequest& request) const override;

  const Taxonomy* tax_;
  LabelCode truth_;
  double noise_;
  std::uint64_t seed_;
};

struct RemoteScorerOptions {
  std::string endpoint;  // http://host:port[/prefix]
  double timeout_seconds = 30.0;
  std::size_t max_batch = 64;
  int retries = 2;  // extra attempts after a transport failure
};

/// Client for the scoring service: `POST /score` with
/// `{"pairs":[{"input":..,"label":..}]}`, answered by `{"scores":[..]}`.
class RemoteScorer final : public PairScorer {
 public:
  explicit RemoteScorer(RemoteScorerOptions options);
  std::string name() const override { return "remote:" + options_.endpoint; }

  /// `GET /health` body; throws TransportError or ProtocolError.
  std::string health() const;
  /// HTTP requests issued so far, retries included.
  std::size_t requests_sent() const noexcept { return requests_.load(); }

 private:
  ScoreVector do_score(const ScoreRequest& request) const override;

  RemoteScorerOptions options_;
  std::string host_;  // scheme://host:port
  std::string prefix_;
  mutable std::atomic<std::size_t> requests_{0};
};

/// Wire body for a chunk of candidates.
std::string score_request_body(std::string_view input_text,
                               std::span<const ScoreCandidate> candidates);
/// Parses a `/score` response; throws ProtocolError on malformed JSON, a
/// length mismatch, or a score outside [0, 1] (naming the indices).
std::vector<double> parse_score_response(std::string_view body, std::size_t expected);

}  // namespace hiertax
