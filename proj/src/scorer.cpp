#include "hiertax/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "httplib.h"
#include "json.hpp"

#include "hiertax/error.hpp"
#include "hiertax/rng.hpp"
#include "hiertax/utf8.hpp"

namespace hiertax {

ScoreVector PairScorer::score_batch(const ScoreRequest& request) const {
  if (request.candidates.empty()) throw DomainError("score request has no candidates");
  std::unordered_set<LabelCode> seen;
  for (const auto& c : request.candidates) {
    if (!seen.insert(c.code).second) {
      throw DomainError("duplicate candidate " + c.code.str() + " in score request");
    }
  }
  ScoreVector scores = do_score(request);
  if (static_cast<std::size_t>(scores.size()) != request.candidates.size()) {
    throw ProtocolError(name() + ": returned " + std::to_string(scores.size()) +
                        " scores for " + std::to_string(request.candidates.size()) +
                        " candidates");
  }
  std::string bad;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) bad += ' ' + std::to_string(i);
  }
  if (!bad.empty()) throw ProtocolError(name() + ": score outside [0,1] at index" + bad);
  return scores;
}

// -- lexical ----------------------------------------------------------------

namespace {

using TrigramCounts = std::unordered_map<std::uint64_t, double>;

std::u32string normalize_for_trigrams(std::string_view text) {
  const std::u32string cps = utf8::decode(text);
  std::u32string stripped;
  stripped.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (cps[i] == U'[') {
      std::size_t j = i + 1;
      while (j < cps.size() && cps[j] != U']' && !utf8::is_space(cps[j])) ++j;
      if (j < cps.size() && cps[j] == U']') {
        i = j;
        stripped.push_back(U' ');
        continue;
      }
    }
    stripped.push_back(cps[i]);
  }
  std::u32string out;
  out.reserve(stripped.size());
  for (char32_t c : stripped) {
    if (utf8::is_space(c)) {
      if (!out.empty() && out.back() != U' ') out.push_back(U' ');
    } else {
      out.push_back(utf8::to_lower(c));
    }
  }
  if (!out.empty() && out.back() == U' ') out.pop_back();
  return out;
}

TrigramCounts trigrams(std::string_view text) {
  const std::u32string s = normalize_for_trigrams(text);
  TrigramCounts counts;
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) {
    const std::uint64_t key = (std::uint64_t(s[i]) << 42) | (std::uint64_t(s[i + 1]) << 21) |
                              std::uint64_t(s[i + 2]);
    counts[key] += 1.0;
  }
  return counts;
}

double squared_norm(const TrigramCounts& v) {
  double sum = 0.0;
  for (const auto& [key, count] : v) sum += count * count;
  return sum;
}

}  // namespace

double lexical_score(std::string_view input_text, std::string_view label_text) {
  const TrigramCounts a = trigrams(input_text);
  const TrigramCounts b = trigrams(label_text);
  if (a.empty() || b.empty()) return 0.0;
  const TrigramCounts& small = a.size() <= b.size() ? a : b;
  const TrigramCounts& large = a.size() <= b.size() ? b : a;
  double dot = 0.0;
  for (const auto& [key, count] : small) {
    const auto it = large.find(key);
    if (it != large.end()) dot += count * it->second;
  }
  // Integer-valued sums, so the result is exactly symmetric.
  return std::clamp(dot / std::sqrt(squared_norm(a) * squared_norm(b)), 0.0, 1.0);
}

ScoreVector LexicalScorer::do_score(const ScoreRequest& request) const {
  ScoreVector scores(static_cast<Eigen::Index>(request.candidates.size()));
  for (std::size_t i = 0; i < request.candidates.size(); ++i) {
    scores[static_cast<Eigen::Index>(i)] =
        lexical_score(request.input_text, request.candidates[i].label_text);
  }
  return scores;
}

// -- oracle -----------------------------------------------------------------

OracleScorer::OracleScorer(const Taxonomy& tax, LabelCode ground_truth, double noise,
                           std::uint64_t seed)
    : tax_(&tax), truth_(ground_truth), noise_(noise), seed_(seed) {
  if (!(noise >= 0.0 && noise < 0.5)) throw DomainError("oracle noise must be in [0, 0.5)");
  tax.node(ground_truth);
}

ScoreVector OracleScorer::do_score(const ScoreRequest& request) const {
  ScoreVector scores(static_cast<Eigen::Index>(request.candidates.size()));
  for (std::size_t i = 0; i < request.candidates.size(); ++i) {
    const LabelCode code = request.candidates[i].code;
    double u = 0.0;
    if (noise_ > 0.0) {
      CounterRng rng = CounterRng::derive(seed_, truth_.value(), code.digits());
      u = noise_ * rng.uniform01();
    }
    const bool positive = tax_->contains(code) && tax_->is_ancestor_or_self(code, truth_);
    scores[static_cast<Eigen::Index>(i)] = positive ? 1.0 - u : u;
  }
  return scores;
}

// -- remote -----------------------------------------------------------------

std::string score_request_body(std::string_view input_text,
                               std::span<const ScoreCandidate> candidates) {
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  for (const ScoreCandidate& c : candidates) {
    nlohmann::ordered_json p;
    p["input"] = input_text;
    p["label"] = c.label_text;
    pairs.push_back(std::move(p));
  }
  nlohmann::ordered_json body;
  body["pairs"] = std::move(pairs);
  return body.dump();
}

std::vector<double> parse_score_response(std::string_view body, std::size_t expected) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(std::string("score response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("scores") || !j["scores"].is_array()) {
    throw ProtocolError("score response has no 'scores' array");
  }
  const auto& arr = j["scores"];
  if (arr.size() != expected) {
    throw ProtocolError("score response has " + std::to_string(arr.size()) +
                        " scores for " + std::to_string(expected) + " pairs");
  }
  std::vector<double> scores;
  scores.reserve(expected);
  std::string bad;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) {
      bad += ' ' + std::to_string(i);
      scores.push_back(0.0);
      continue;
    }
    const double s = arr[i].get<double>();
    if (!(s >= 0.0 && s <= 1.0)) bad += ' ' + std::to_string(i);
    scores.push_back(s);
  }
  if (!bad.empty()) throw ProtocolError("score outside [0,1] at index" + bad);
  return scores;
}

RemoteScorer::RemoteScorer(RemoteScorerOptions options) : options_(std::move(options)) {
  if (options_.max_batch == 0) throw DomainError("max_batch must be positive");
  const std::string& ep = options_.endpoint;
  if (ep.rfind("http://", 0) != 0) {
    throw FormatError("scorer endpoint must start with http:// ('" + ep + "')");
  }
  const auto slash = ep.find('/', 7);
  host_ = slash == std::string::npos ? ep : ep.substr(0, slash);
  prefix_ = slash == std::string::npos ? std::string() : ep.substr(slash);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

namespace {

void configure(httplib::Client& client, double timeout_seconds) {
  const auto sec = static_cast<time_t>(timeout_seconds);
  const auto usec = static_cast<time_t>((timeout_seconds - static_cast<double>(sec)) * 1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
}

}  // namespace

std::string RemoteScorer::health() const {
  httplib::Client client(host_);
  configure(client, options_.timeout_seconds);
  ++requests_;
  auto res = client.Get(prefix_ + "/health");
  if (!res) {
    throw TransportError("health check to " + options_.endpoint +
                         " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw ProtocolError("health check returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

ScoreVector RemoteScorer::do_score(const ScoreRequest& request) const {
  const std::size_t n = request.candidates.size();
  ScoreVector scores(static_cast<Eigen::Index>(n));
  httplib::Client client(host_);
  configure(client, options_.timeout_seconds);
  const std::span<const ScoreCandidate> all(request.candidates);

  for (std::size_t begin = 0; begin < n; begin += options_.max_batch) {
    const std::size_t count = std::min(options_.max_batch, n - begin);
    const std::string body = score_request_body(request.input_text, all.subspan(begin, count));
    const std::string range =
        "candidates " + std::to_string(begin) + ".." + std::to_string(begin + count - 1);

    std::string failure;
    httplib::Result res;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
      ++requests_;
      res = client.Post(prefix_ + "/score", body, "application/json");
      if (!res) {
        failure = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        failure = "HTTP " + std::to_string(res->status);
        continue;
      }
      break;
    }
    if (!res || res->status >= 500) {
      throw TransportError("scoring " + range + " at " + options_.endpoint + " failed after " +
                           std::to_string(options_.retries + 1) + " attempts: " + failure);
    }
    if (res->status != 200) {
      throw ProtocolError("scoring " + range + ": HTTP " + std::to_string(res->status));
    }
    std::vector<double> chunk;
    try {
      chunk = parse_score_response(res->body, count);
    } catch (const ProtocolError& e) {
      throw ProtocolError(range + ": " + e.what());
    }
    for (std::size_t k = 0; k < count; ++k) {
      scores[static_cast<Eigen::Index>(begin + k)] = chunk[k];
    }
  }
  return scores;
}

}  // namespace hiertax
