#include "hiertax/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>

#include "hiertax/error.hpp"

namespace hiertax {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_or_nan(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double ratio_or_nan(double num, double den) { return den > 0.0 ? num / den : kNaN; }

std::size_t common_prefix(const std::vector<LabelCode>& a, const std::vector<LabelCode>& b) {
  std::size_t n = 0;
  while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
  return n;
}

nlohmann::ordered_json num(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

// Per-class accumulation of a per-instance value, keyed by ground truth.
struct ClassMeans {
  std::map<LabelCode, std::pair<double, std::size_t>> sums;

  void add(LabelCode cls, double v) {
    auto& [s, n] = sums[cls];
    s += v;
    ++n;
  }
  double class_mean(LabelCode cls) const {
    const auto& [s, n] = sums.at(cls);
    return s / static_cast<double>(n);
  }
  // Macro: mean over classes, optionally restricted by a predicate.
  template <typename Pred>
  double macro(Pred keep) const {
    std::vector<double> means;
    for (const auto& [cls, sn] : sums) {
      if (keep(cls)) means.push_back(sn.first / static_cast<double>(sn.second));
    }
    return mean_or_nan(means);
  }
  double macro() const {
    return macro([](LabelCode) { return true; });
  }
};

}  // namespace

HScores h_scores(LabelCode truth, LabelCode predicted, const Taxonomy& tax) {
  const auto a = tax.ancestors_and_self(truth);
  const auto b = tax.ancestors_and_self(predicted);
  HScores s;
  s.intersection = common_prefix(a, b);
  s.truth_depth = a.size();
  s.pred_depth = b.size();
  s.hp = static_cast<double>(s.intersection) / static_cast<double>(s.pred_depth);
  s.hr = static_cast<double>(s.intersection) / static_cast<double>(s.truth_depth);
  return s;
}

InstanceScore score_instance(const std::string& record_id, LabelCode truth,
                             std::optional<LabelCode> predicted, const Taxonomy& tax) {
  InstanceScore s;
  s.record_id = record_id;
  s.ground_truth = truth;
  s.predicted = predicted;
  if (!predicted) {
    s.truth_depth = tax.ancestors_and_self(truth).size();
    return s;
  }
  const HScores h = h_scores(truth, *predicted, tax);
  s.hp = h.hp;
  s.hr = h.hr;
  s.intersection = h.intersection;
  s.pred_depth = h.pred_depth;
  s.truth_depth = h.truth_depth;
  return s;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return kNaN;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return kNaN;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

TTestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw DomainError("welch_ttest needs at least two values per sample");
  }
  const auto moments = [](std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, ss / (n - 1.0)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double sa = va / na;
  const double sb = vb / nb;
  const double se2 = sa + sb;

  TTestResult r;
  if (se2 <= 0.0) {
    // Both samples constant.
    r.df = na + nb - 2.0;
    if (ma == mb) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = ma > mb ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

EvaluationReport aggregate(std::span<const EvaluationInstance> instances, const Taxonomy& tax,
                           const std::map<LabelCode, std::size_t>& train_class_freq,
                           const std::unordered_set<LabelCode>& seen_classes,
                           std::span<const int> k_values) {
  if (instances.empty()) throw DomainError("aggregate: no instances");
  for (int k : k_values) {
    if (k < 1) throw DomainError("aggregate: k must be >= 1");
  }
  const auto is_seen = [&](LabelCode c) { return seen_classes.contains(c); };
  const auto is_unseen = [&](LabelCode c) { return !seen_classes.contains(c); };

  struct Prepared {
    LabelCode truth;
    std::vector<LabelCode> truth_chain;
    std::vector<std::vector<LabelCode>> ranked_chains;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(instances.size());
  int max_depth = 0;
  for (const EvaluationInstance& inst : instances) {
    Prepared p;
    p.truth = inst.ground_truth;
    p.truth_chain = tax.ancestors_and_self(inst.ground_truth);
    for (const LabelCode& c : inst.ranked) p.ranked_chains.push_back(tax.ancestors_and_self(c));
    max_depth = std::max(max_depth, static_cast<int>(p.truth_chain.size()) - 1);
    prepared.push_back(std::move(p));
  }

  EvaluationReport rep;
  rep.n_instances = instances.size();

  // Top-1 scores, both abstention modes.
  double inter = 0.0, pred_den = 0.0, truth_den = 0.0;
  double inter_ans = 0.0, pred_den_ans = 0.0, truth_den_ans = 0.0;
  std::size_t abstained = 0;
  ClassMeans hp_all, hr_all, hp_ans, hr_ans;
  for (const Prepared& p : prepared) {
    const double td = static_cast<double>(p.truth_chain.size());
    if (p.ranked_chains.empty()) {
      ++abstained;
      truth_den += td;
      pred_den += td;  // an abstention weighs like a fully wrong answer
      hp_all.add(p.truth, 0.0);
      hr_all.add(p.truth, 0.0);
      continue;
    }
    const auto& pc = p.ranked_chains.front();
    const double i = static_cast<double>(common_prefix(p.truth_chain, pc));
    const double pd = static_cast<double>(pc.size());
    inter += i;
    pred_den += pd;
    truth_den += td;
    inter_ans += i;
    pred_den_ans += pd;
    truth_den_ans += td;
    hp_all.add(p.truth, i / pd);
    hr_all.add(p.truth, i / td);
    hp_ans.add(p.truth, i / pd);
    hr_ans.add(p.truth, i / td);
  }
  rep.n_classes = hp_all.sums.size();
  rep.abstention_rate = static_cast<double>(abstained) / static_cast<double>(prepared.size());
  rep.micro_hp = ratio_or_nan(inter, pred_den);
  rep.micro_hr = ratio_or_nan(inter, truth_den);
  rep.macro_hp = hp_all.macro();
  rep.macro_hr = hr_all.macro();
  rep.micro_hp_answered = ratio_or_nan(inter_ans, pred_den_ans);
  rep.micro_hr_answered = ratio_or_nan(inter_ans, truth_den_ans);
  rep.macro_hp_answered = hp_ans.sums.empty() ? kNaN : hp_ans.macro();
  rep.macro_hr_answered = hr_ans.sums.empty() ? kNaN : hr_ans.macro();

  // Correlation of per-class macro hp with training frequency.
  const auto class_rho = [&](const ClassMeans& means) {
    std::vector<double> x, y;
    for (const auto& [cls, sn] : means.sums) {
      x.push_back(sn.first / static_cast<double>(sn.second));
      const auto it = train_class_freq.find(cls);
      y.push_back(it == train_class_freq.end() ? 0.0 : static_cast<double>(it->second));
    }
    return pearson(x, y);
  };
  rep.rho = class_rho(hp_all);

  // Seen / unseen split of per-class macro hp.
  {
    std::vector<double> seen, unseen;
    for (const auto& [cls, sn] : hp_all.sums) {
      (is_seen(cls) ? seen : unseen).push_back(sn.first / static_cast<double>(sn.second));
    }
    SeenUnseen& su = rep.seen_unseen;
    su.macro_seen = mean_or_nan(seen);
    su.macro_unseen = mean_or_nan(unseen);
    su.n_seen_classes = seen.size();
    su.n_unseen_classes = unseen.size();
    if (seen.size() >= 2 && unseen.size() >= 2) {
      const TTestResult t = welch_ttest(seen, unseen);
      su.t_statistic = t.t;
      su.p_value = t.p;
    } else {
      su.t_statistic = kNaN;
      su.p_value = kNaN;
    }
  }

  // Truncated-chain scores per depth, top-1 prediction.
  for (int depth = 0; depth <= max_depth; ++depth) {
    const std::size_t keep = static_cast<std::size_t>(depth) + 1;
    double num = 0.0, den = 0.0, num_s = 0.0, den_s = 0.0, num_u = 0.0, den_u = 0.0;
    ClassMeans hp;
    for (const Prepared& p : prepared) {
      const std::size_t td = std::min(keep, p.truth_chain.size());
      double i = 0.0, pd = static_cast<double>(td);
      if (!p.ranked_chains.empty()) {
        const auto& pc = p.ranked_chains.front();
        pd = static_cast<double>(std::min(keep, pc.size()));
        i = static_cast<double>(std::min({common_prefix(p.truth_chain, pc), keep}));
      }
      num += i;
      den += pd;
      if (is_seen(p.truth)) {
        num_s += i;
        den_s += pd;
      } else {
        num_u += i;
        den_u += pd;
      }
      hp.add(p.truth, p.ranked_chains.empty() ? 0.0 : i / pd);
    }
    DepthScores& ds = rep.per_depth[depth];
    ds.micro = ratio_or_nan(num, den);
    ds.micro_seen = ratio_or_nan(num_s, den_s);
    ds.micro_unseen = ratio_or_nan(num_u, den_u);
    ds.macro = hp.macro();
    ds.macro_seen = hp.macro(is_seen);
    ds.macro_unseen = hp.macro(is_unseen);
  }

  // Best-of-k.
  for (int k : k_values) {
    double best_sum = 0.0, num = 0.0, den = 0.0;
    ClassMeans hp;
    for (const Prepared& p : prepared) {
      if (p.ranked_chains.empty()) {
        den += static_cast<double>(p.truth_chain.size());
        hp.add(p.truth, 0.0);
        continue;
      }
      const std::size_t limit = std::min<std::size_t>(static_cast<std::size_t>(k), p.ranked_chains.size());
      double best = -1.0, best_i = 0.0, best_d = 1.0;
      for (std::size_t r = 0; r < limit; ++r) {
        const auto& pc = p.ranked_chains[r];
        const double i = static_cast<double>(common_prefix(p.truth_chain, pc));
        const double d = static_cast<double>(pc.size());
        if (i / d > best) {
          best = i / d;
          best_i = i;
          best_d = d;
        }
      }
      best_sum += best;
      num += best_i;
      den += best_d;
      hp.add(p.truth, best);
    }
    PrecisionAtK& pk = rep.precision_at_k[k];
    pk.micro = best_sum / static_cast<double>(prepared.size());
    pk.micro_pooled = ratio_or_nan(num, den);
    pk.macro = hp.macro();
    pk.macro_seen = hp.macro(is_seen);
    pk.macro_unseen = hp.macro(is_unseen);
    pk.rho = class_rho(hp);
  }
  return rep;
}

nlohmann::ordered_json report_to_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["n_instances"] = r.n_instances;
  j["n_classes"] = r.n_classes;
  j["micro_hp"] = num(r.micro_hp);
  j["micro_hr"] = num(r.micro_hr);
  j["macro_hp"] = num(r.macro_hp);
  j["macro_hr"] = num(r.macro_hr);
  j["abstention_rate"] = num(r.abstention_rate);
  nlohmann::ordered_json answered;
  answered["micro_hp"] = num(r.micro_hp_answered);
  answered["micro_hr"] = num(r.micro_hr_answered);
  answered["macro_hp"] = num(r.macro_hp_answered);
  answered["macro_hr"] = num(r.macro_hr_answered);
  j["excluding_abstentions"] = std::move(answered);
  j["rho"] = num(r.rho);

  nlohmann::ordered_json su;
  su["macro_seen"] = num(r.seen_unseen.macro_seen);
  su["macro_unseen"] = num(r.seen_unseen.macro_unseen);
  su["t_statistic"] = num(r.seen_unseen.t_statistic);
  su["p_value"] = num(r.seen_unseen.p_value);
  su["n_seen_classes"] = r.seen_unseen.n_seen_classes;
  su["n_unseen_classes"] = r.seen_unseen.n_unseen_classes;
  j["seen_unseen"] = std::move(su);

  nlohmann::ordered_json pak = nlohmann::ordered_json::object();
  for (const auto& [k, p] : r.precision_at_k) {
    nlohmann::ordered_json e;
    e["micro"] = num(p.micro);
    e["micro_pooled"] = num(p.micro_pooled);
    e["macro"] = num(p.macro);
    e["seen"] = num(p.macro_seen);
    e["unseen"] = num(p.macro_unseen);
    e["rho"] = num(p.rho);
    pak[std::to_string(k)] = std::move(e);
  }
  j["precision_at_k"] = std::move(pak);

  nlohmann::ordered_json pd = nlohmann::ordered_json::object();
  for (const auto& [depth, d] : r.per_depth) {
    nlohmann::ordered_json e;
    e["micro"] = num(d.micro);
    e["macro"] = num(d.macro);
    e["micro_seen"] = num(d.micro_seen);
    e["micro_unseen"] = num(d.micro_unseen);
    e["macro_seen"] = num(d.macro_seen);
    e["macro_unseen"] = num(d.macro_unseen);
    pd[std::to_string(depth)] = std::move(e);
  }
  j["per_depth"] = std::move(pd);
  return j;
}

void write_per_depth_csv(std::ostream& out, const EvaluationReport& r) {
  const auto cell = [](double v) {
    if (!std::isfinite(v)) return std::string();
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
  };
  out << "depth,micro,macro,micro_seen,micro_unseen,macro_seen,macro_unseen\n";
  for (const auto& [depth, d] : r.per_depth) {
    out << (depth == 0 ? std::string("root") : std::to_string(depth)) << ',' << cell(d.micro)
        << ',' << cell(d.macro) << ',' << cell(d.micro_seen) << ',' << cell(d.micro_unseen)
        << ',' << cell(d.macro_seen) << ',' << cell(d.macro_unseen) << '\n';
  }
}

ImbalanceReport imbalance(std::span<const LabelCode> labels, const Taxonomy& tax) {
  ImbalanceReport rep;
  std::vector<std::size_t> support(tax.size(), 0);
  for (const LabelCode& label : labels) {
    for (const LabelCode& a : tax.ancestors_and_self(label)) ++support[tax.index_of(a)];
  }
  const auto nodes = tax.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    rep.support.emplace(nodes[i].code, support[i]);
    rep.max_support = std::max(rep.max_support, support[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (support[i] == 0) {
      ++rep.n_zero_support;
      continue;
    }
    const double ir = static_cast<double>(rep.max_support) / static_cast<double>(support[i]);
    rep.irlbp.emplace(nodes[i].code, ir);
    sum += ir;
  }
  rep.hmeanir = rep.irlbp.empty() ? kNaN : sum / static_cast<double>(rep.irlbp.size());
  return rep;
}

}  // namespace hiertax
