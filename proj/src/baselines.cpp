#include "hiertax/baselines.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "json.hpp"

#include "hiertax/error.hpp"
#include "hiertax/parallel.hpp"
#include "hiertax/rng.hpp"
#include "hiertax/utf8.hpp"

namespace hiertax {

namespace {

bool is_word_char(char32_t c) {
  if (c < 0x80) {
    return (c >= U'0' && c <= U'9') || (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z');
  }
  if (utf8::is_space(c)) return false;
  if (c < 0xC0 || c == 0xD7 || c == 0xF7) return false;  // Latin-1 symbols
  if (c >= 0x2000 && c <= 0x206F) return false;           // general punctuation
  if (c == 0x20AC || c == 0xFFFD) return false;
  return true;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& z) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
  return qr.householderQ() * Eigen::MatrixXd::Identity(z.rows(), z.cols());
}

std::vector<int> targets_for(std::span<const LabelCode> labels, const std::vector<LabelCode>& classes) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (const LabelCode& l : labels) {
    const auto it = std::lower_bound(classes.begin(), classes.end(), l);
    out.push_back(static_cast<int>(it - classes.begin()));
  }
  return out;
}

NodeClassifier fit_node(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows,
                        std::span<const int> targets, int n_classes,
                        const LogisticOptions& options) {
  NodeClassifier nc;
  nc.class_weights = balanced_class_weights(targets, n_classes);
  const Eigen::MatrixXd sub = x(rows, Eigen::all);
  nc.model = train_logistic(sub, targets, n_classes, nc.class_weights, options);
  return nc;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::u32string current;
  for (char32_t c : utf8::decode(text)) {
    if (is_word_char(c)) {
      current.push_back(utf8::to_lower(c));
    } else if (!current.empty()) {
      tokens.push_back(utf8::encode(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(utf8::encode(current));
  return tokens;
}

FeatureSpace fit_features(std::span<const TenderRecord> corpus, std::size_t min_df) {
  if (corpus.empty()) throw DomainError("fit_features: empty corpus");
  FeatureSpace fs;
  fs.min_df = min_df;

  std::map<std::string, std::size_t> df;
  for (const TenderRecord& rec : corpus) {
    auto tokens = tokenize(rec.object_text);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& t : tokens) ++df[std::move(t)];
  }
  const double n = static_cast<double>(corpus.size());
  std::vector<double> idf;
  for (const auto& [term, count] : df) {
    if (count < min_df) continue;
    fs.vocabulary.emplace(term, static_cast<int>(idf.size()));
    idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  fs.idf = Eigen::Map<const Eigen::VectorXd>(idf.data(), static_cast<Eigen::Index>(idf.size()));

  std::set<std::pair<std::string, std::string>> cats;
  for (const TenderRecord& rec : corpus) {
    for (const std::string& field : kOneHotFields) {
      if (auto v = rec.category(field)) cats.emplace(field, *v);
    }
  }
  int col = static_cast<int>(fs.vocabulary.size());
  for (const auto& key : cats) fs.categorical.emplace(key, col++);
  fs.numeric_column = col;
  return fs;
}

SparseMatrix FeatureSpace::transform(std::span<const TenderRecord> records) const {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const TenderRecord& rec = records[r];
    const auto row = static_cast<int>(r);

    std::map<int, double> tf;
    for (const std::string& t : tokenize(rec.object_text)) {
      if (const auto it = vocabulary.find(t); it != vocabulary.end()) tf[it->second] += 1.0;
    }
    double norm2 = 0.0;
    for (auto& [c, v] : tf) {
      v *= idf[c];
      norm2 += v * v;
    }
    const double norm = std::sqrt(norm2);
    for (const auto& [c, v] : tf) triplets.emplace_back(row, c, v / norm);

    for (const std::string& field : kOneHotFields) {
      const auto v = rec.category(field);
      if (!v) continue;
      if (const auto it = categorical.find({field, *v}); it != categorical.end()) {
        triplets.emplace_back(row, it->second, 1.0);
      }
    }
    if (rec.value_eur && *rec.value_eur > 0.0) {
      triplets.emplace_back(row, numeric_column, std::log(*rec.value_eur));
    }
  }
  SparseMatrix m(static_cast<Eigen::Index>(records.size()), cols());
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

std::pair<FeatureSpace, SparseMatrix> build_features(std::span<const TenderRecord> corpus,
                                                     std::size_t min_df) {
  FeatureSpace fs = fit_features(corpus, min_df);
  SparseMatrix m = fs.transform(corpus);
  return {std::move(fs), std::move(m)};
}

DenseProjector fit_svd(const SparseMatrix& a, int d, const SvdOptions& options) {
  const Eigen::Index n = a.cols();
  if (d < 1 || d > std::min(a.rows(), n)) {
    throw DomainError("fit_svd: d=" + std::to_string(d) + " outside [1, " +
                      std::to_string(std::min(a.rows(), n)) + "]");
  }
  const Eigen::Index l = std::min<Eigen::Index>(n, d + std::max(options.oversample, 0));
  const Eigen::SparseMatrix<double> at = a.transpose();

  CounterRng rng(options.seed);
  Eigen::MatrixXd q(n, l);
  for (Eigen::Index j = 0; j < l; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) q(i, j) = 2.0 * rng.uniform01() - 1.0;
  }
  q = orthonormalize(q);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Eigen::MatrixXd z = at * (a * q);
    const Eigen::MatrixXd g = q.transpose() * z;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (g + g.transpose()));
    // Ascending eigenvalues: the top d sit at the end.
    const Eigen::MatrixXd w = eig.eigenvectors().rightCols(d).rowwise().reverse();
    const Eigen::VectorXd lambda = eig.eigenvalues().tail(d).reverse().cwiseMax(0.0);

    const double scale = std::max(lambda[0], std::numeric_limits<double>::min());
    const Eigen::MatrixXd v = q * w;
    const Eigen::MatrixXd residual = z * w - v * lambda.asDiagonal();
    if (lambda[0] == 0.0 || residual.colwise().norm().maxCoeff() <= options.tolerance * scale) {
      DenseProjector p;
      p.basis = v;
      for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::Index k;
        p.basis.col(j).cwiseAbs().maxCoeff(&k);
        if (p.basis(k, j) < 0.0) p.basis.col(j) *= -1.0;
      }
      p.singular_values = lambda.cwiseSqrt();
      return p;
    }
    q = orthonormalize(z);
  }
  throw ConvergenceError("fit_svd: no convergence after " +
                         std::to_string(options.max_iterations) + " iterations");
}

Eigen::VectorXd balanced_class_weights(std::span<const int> targets, int n_classes) {
  if (n_classes < 1) throw DomainError("balanced_class_weights: no classes");
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_classes);
  for (int t : targets) {
    if (t < 0 || t >= n_classes) throw DomainError("balanced_class_weights: target out of range");
    counts[t] += 1.0;
  }
  if (counts.minCoeff() == 0.0) throw DomainError("balanced_class_weights: empty class");
  return (static_cast<double>(targets.size()) / n_classes) * counts.cwiseInverse();
}

LinearClassifier train_logistic(const Eigen::MatrixXd& x, std::span<const int> targets,
                                int n_classes, const Eigen::VectorXd& class_weights,
                                const LogisticOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n == 0 || static_cast<std::size_t>(n) != targets.size()) {
    throw DomainError("train_logistic: feature rows and targets disagree");
  }
  if (class_weights.size() != n_classes) throw DomainError("train_logistic: class weight size");

  LinearClassifier clf;
  clf.weights.setZero(p, n_classes);
  clf.bias.setZero(n_classes);
  if (n_classes == 1) return clf;

  const Eigen::RowVectorXd mu = x.colwise().mean();
  Eigen::RowVectorXd sd = (x.rowwise() - mu).colwise().norm() / std::sqrt(static_cast<double>(n));
  sd = sd.unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
  const Eigen::MatrixXd z = (x.rowwise() - mu).array().rowwise() / sd.array();

  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, n_classes);
  Eigen::VectorXd sw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    y(i, t) = 1.0;
    sw[i] = class_weights[t];
  }
  sw /= sw.sum();

  const auto loss_and_grad = [&](const Eigen::MatrixXd& w, const Eigen::RowVectorXd& b,
                                 Eigen::MatrixXd* gw, Eigen::RowVectorXd* gb) {
    Eigen::MatrixXd logits = (z * w).rowwise() + b;
    const Eigen::VectorXd mx = logits.rowwise().maxCoeff();
    logits.colwise() -= mx;
    const Eigen::VectorXd lse = logits.array().exp().rowwise().sum().log();
    const Eigen::VectorXd nll = lse - (logits.cwiseProduct(y)).rowwise().sum();
    const double loss = sw.dot(nll) + 0.5 * options.l2 * w.squaredNorm();
    if (gw != nullptr) {
      Eigen::MatrixXd prob = (logits.colwise() - lse).array().exp();
      const Eigen::MatrixXd delta = sw.asDiagonal() * (prob - y);
      *gw = z.transpose() * delta + options.l2 * w;
      *gb = delta.colwise().sum();
    }
    return loss;
  };

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p, n_classes);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(n_classes);
  Eigen::MatrixXd gw;
  Eigen::RowVectorXd gb;
  double loss = loss_and_grad(w, b, &gw, &gb);
  double step = 1.0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const double gmax = std::max(gw.cwiseAbs().maxCoeff(), gb.cwiseAbs().maxCoeff());
    if (gmax < options.tolerance) break;
    const double g2 = gw.squaredNorm() + gb.squaredNorm();
    step *= 2.0;
    for (;;) {
      const Eigen::MatrixXd w_new = w - step * gw;
      const Eigen::RowVectorXd b_new = b - step * gb;
      const double trial = loss_and_grad(w_new, b_new, nullptr, nullptr);
      if (trial <= loss - 1e-4 * step * g2 || step < 1e-12) {
        w = w_new;
        b = b_new;
        break;
      }
      step *= 0.5;
    }
    loss = loss_and_grad(w, b, &gw, &gb);
  }

  clf.weights = w.array().colwise() / sd.transpose().array();
  clf.bias = (b - mu * clf.weights).transpose();
  return clf;
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::BigBang: return "bigbang";
    case Strategy::TopDown: return "topdown";
    case Strategy::PerNode: return "pernode";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "bigbang") return Strategy::BigBang;
  if (name == "topdown") return Strategy::TopDown;
  if (name == "pernode") return Strategy::PerNode;
  throw DomainError("unknown strategy '" + std::string(name) + "'");
}

HierarchicalClassifier train_hierarchical(const Eigen::MatrixXd& x,
                                          std::span<const LabelCode> labels, Strategy strategy,
                                          const Taxonomy& tax, const LogisticOptions& options,
                                          std::size_t parallelism) {
  if (labels.empty() || static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw DomainError("train_hierarchical: feature rows and labels disagree");
  }
  HierarchicalClassifier model;
  model.strategy = strategy;

  std::vector<std::vector<LabelCode>> chains;
  chains.reserve(labels.size());
  for (const LabelCode& l : labels) {
    chains.push_back(tax.ancestors_and_self(l));
    model.seen_classes.insert(chains.back().begin(), chains.back().end());
  }

  struct Job {
    std::optional<LabelCode> key;
    std::vector<Eigen::Index> rows;
    std::vector<int> targets;
    std::vector<LabelCode> classes;
    int n_classes = 0;
  };
  std::vector<Job> jobs;

  if (strategy == Strategy::BigBang) {
    Job job;
    std::set<LabelCode> distinct(labels.begin(), labels.end());
    job.classes.assign(distinct.begin(), distinct.end());
    job.targets = targets_for(labels, job.classes);
    for (Eigen::Index i = 0; i < x.rows(); ++i) job.rows.push_back(i);
    job.n_classes = static_cast<int>(job.classes.size());
    jobs.push_back(std::move(job));
  } else if (strategy == Strategy::TopDown) {
    // Parent (nullopt = root) -> (row, child) pairs.
    std::map<std::optional<LabelCode>, std::vector<std::pair<Eigen::Index, LabelCode>>> by_parent;
    for (std::size_t i = 0; i < chains.size(); ++i) {
      const auto& chain = chains[i];
      for (std::size_t depth = 0; depth < chain.size(); ++depth) {
        const std::optional<LabelCode> parent =
            depth == 0 ? std::nullopt : std::optional<LabelCode>(chain[depth - 1]);
        by_parent[parent].emplace_back(static_cast<Eigen::Index>(i), chain[depth]);
      }
    }
    for (auto& [parent, items] : by_parent) {
      Job job;
      job.key = parent;
      std::set<LabelCode> distinct;
      std::vector<LabelCode> child_labels;
      for (const auto& [row, child] : items) {
        job.rows.push_back(row);
        child_labels.push_back(child);
        distinct.insert(child);
      }
      job.classes.assign(distinct.begin(), distinct.end());
      job.targets = targets_for(child_labels, job.classes);
      job.n_classes = static_cast<int>(job.classes.size());
      jobs.push_back(std::move(job));
    }
  } else {
    std::map<LabelCode, std::vector<Eigen::Index>> members;
    for (std::size_t i = 0; i < chains.size(); ++i) {
      for (const LabelCode& c : chains[i]) members[c].push_back(static_cast<Eigen::Index>(i));
    }
    for (const auto& [node, positives] : members) {
      Job job;
      job.key = node;
      for (const LabelCode& sib : tax.siblings(node)) {
        const auto it = members.find(sib);
        if (it == members.end()) continue;
        for (Eigen::Index r : it->second) {
          job.rows.push_back(r);
          job.targets.push_back(0);
        }
      }
      const bool has_negatives = !job.rows.empty();
      for (Eigen::Index r : positives) {
        job.rows.push_back(r);
        job.targets.push_back(has_negatives ? 1 : 0);
      }
      job.n_classes = has_negatives ? 2 : 1;
      jobs.push_back(std::move(job));
    }
  }

  std::vector<NodeClassifier> fitted(jobs.size());
  parallel_for(jobs.size(), parallelism, [&](std::size_t j) {
    fitted[j] = fit_node(x, jobs[j].rows, jobs[j].targets, jobs[j].n_classes, options);
    fitted[j].classes = jobs[j].classes;
  });
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    model.classifiers.emplace(jobs[j].key, std::move(fitted[j]));
  }
  return model;
}

PredictionResult predict_hierarchical(const HierarchicalClassifier& model,
                                      const Eigen::Ref<const Eigen::VectorXd>& x,
                                      const Taxonomy& tax, const InferenceConfig& cfg,
                                      const StopperWeights* stopper, TraversalTrace* trace) {
  cfg.validate();
  if (model.strategy == Strategy::BigBang) {
    PredictionResult r;
    const auto it = model.classifiers.find(std::nullopt);
    if (it == model.classifiers.end()) return r;
    const NodeClassifier& nc = it->second;
    const Eigen::VectorXd p = nc.model.predict_proba(x);
    for (std::size_t k = 0; k < nc.classes.size(); ++k) {
      r.ranked.push_back({nc.classes[k], p[static_cast<Eigen::Index>(k)]});
    }
    std::sort(r.ranked.begin(), r.ranked.end(), [](const RankedLabel& a, const RankedLabel& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.code < b.code;
    });
    if (cfg.max_results && r.ranked.size() > *cfg.max_results) r.ranked.resize(*cfg.max_results);
    r.abstained = r.ranked.empty();
    r.scorer_calls = 1;
    return r;
  }

  const ChildScorer score_children =
      [&](std::optional<LabelCode> parent,
          std::span<const LabelCode> candidates) -> std::optional<ScoreVector> {
    ScoreVector scores = ScoreVector::Zero(static_cast<Eigen::Index>(candidates.size()));
    if (model.strategy == Strategy::TopDown) {
      const auto it = model.classifiers.find(parent);
      if (it == model.classifiers.end()) return std::nullopt;
      const NodeClassifier& nc = it->second;
      const Eigen::VectorXd p = nc.model.predict_proba(x);
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto pos = std::lower_bound(nc.classes.begin(), nc.classes.end(), candidates[i]);
        if (pos != nc.classes.end() && *pos == candidates[i]) {
          scores[static_cast<Eigen::Index>(i)] = p[pos - nc.classes.begin()];
        }
      }
      return scores;
    }
    bool any = false;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto it = model.classifiers.find(candidates[i]);
      if (it == model.classifiers.end()) continue;
      any = true;
      const LinearClassifier& m = it->second.model;
      scores[static_cast<Eigen::Index>(i)] = m.n_classes() == 1 ? 1.0 : m.predict_proba(x)[1];
    }
    if (!any) return std::nullopt;
    return scores;
  };
  InferenceConfig greedy = cfg;
  greedy.greedy = true;
  return traverse(tax, score_children, stopper, greedy, trace);
}

Eigen::MatrixXd BaselineModel::embed(std::span<const TenderRecord> records) const {
  return projector.project(features.transform(records));
}

BaselineModel train_baseline(std::span<const TenderRecord> records, const Taxonomy& tax,
                             const BaselineOptions& options) {
  std::vector<LabelCode> labels;
  labels.reserve(records.size());
  for (const TenderRecord& rec : records) {
    if (!rec.cpv) throw DomainError("record " + rec.id + " has no cpv label");
    labels.push_back(tax.canonical(*rec.cpv));
  }
  BaselineModel model;
  auto [fs, m] = build_features(records, options.min_df);
  model.features = std::move(fs);
  model.projector = fit_svd(m, options.dim, options.svd);
  const Eigen::MatrixXd x = model.projector.project(m);
  model.classifier = train_hierarchical(x, labels, options.strategy, tax, options.logistic,
                                        options.parallelism);
  return model;
}

PredictionResult baseline_predict(const BaselineModel& model, const TenderRecord& rec,
                                  const Taxonomy& tax, const InferenceConfig& cfg,
                                  const StopperWeights* stopper, TraversalTrace* trace) {
  if (trace != nullptr) {
    trace->record_id = rec.id;
    trace->ground_truth = rec.cpv;
    trace->truth_chain.clear();
    if (rec.cpv && tax.contains(*rec.cpv)) trace->truth_chain = tax.ancestors_and_self(*rec.cpv);
  }
  const Eigen::MatrixXd x = model.embed(std::span<const TenderRecord>(&rec, 1));
  return predict_hierarchical(model.classifier, x.row(0).transpose(), tax, cfg, stopper, trace);
}

// Model file.

namespace {

constexpr char kMagic[8] = {'H', 'T', 'X', 'B', 'A', 'S', 'E', '1'};
constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "model files are little-endian");

void write_block(std::ostream& out, const double* data, Eigen::Index n) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(n * static_cast<Eigen::Index>(sizeof(double))));
}

void read_block(std::istream& in, double* data, Eigen::Index n) {
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(n * static_cast<Eigen::Index>(sizeof(double))));
  if (!in) throw FormatError("baseline model: truncated matrix block");
}

std::vector<std::string> codes_to_strings(const auto& codes) {
  std::vector<std::string> out;
  for (const LabelCode& c : codes) out.push_back(c.str());
  return out;
}

}  // namespace

void save_baseline(std::ostream& out, const BaselineModel& model) {
  nlohmann::ordered_json h;
  h["format"] = "hiertax-baseline";
  h["version"] = kFormatVersion;
  h["strategy"] = std::string(strategy_name(model.classifier.strategy));
  h["min_df"] = model.features.min_df;
  std::vector<std::string> vocab(model.features.vocabulary.size());
  for (const auto& [term, col] : model.features.vocabulary) vocab[static_cast<std::size_t>(col)] = term;
  h["vocabulary"] = vocab;
  auto cats = nlohmann::ordered_json::array();
  for (const auto& [key, col] : model.features.categorical) {
    cats.push_back({key.first, key.second, col});
  }
  h["categorical"] = std::move(cats);
  h["numeric_column"] = model.features.numeric_column;
  h["projector"] = {{"rows", model.projector.basis.rows()}, {"cols", model.projector.basis.cols()}};
  h["seen_classes"] = codes_to_strings(model.classifier.seen_classes);
  auto clfs = nlohmann::ordered_json::array();
  for (const auto& [key, nc] : model.classifier.classifiers) {
    nlohmann::ordered_json c;
    c["node"] = key ? nlohmann::ordered_json(key->str()) : nlohmann::ordered_json(nullptr);
    c["classes"] = codes_to_strings(nc.classes);
    c["features"] = nc.model.weights.rows();
    c["n_classes"] = nc.model.n_classes();
    clfs.push_back(std::move(c));
  }
  h["classifiers"] = std::move(clfs);

  const std::string header = h.dump();
  const std::uint64_t len = header.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_block(out, model.features.idf.data(), model.features.idf.size());
  write_block(out, model.projector.basis.data(), model.projector.basis.size());
  write_block(out, model.projector.singular_values.data(), model.projector.singular_values.size());
  for (const auto& [key, nc] : model.classifier.classifiers) {
    write_block(out, nc.model.weights.data(), nc.model.weights.size());
    write_block(out, nc.model.bias.data(), nc.model.bias.size());
    write_block(out, nc.class_weights.data(), nc.class_weights.size());
  }
  if (!out) throw std::runtime_error("baseline model: write failed");
}

BaselineModel read_baseline(std::istream& in) {
  char magic[sizeof kMagic];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + sizeof magic, kMagic)) {
    throw FormatError("not a baseline model file");
  }
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (std::uint64_t{1} << 34)) throw FormatError("baseline model: bad header length");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("baseline model: truncated header");

  BaselineModel model;
  try {
    const nlohmann::json h = nlohmann::json::parse(header);
    if (h.at("format") != "hiertax-baseline" || h.at("version").get<int>() != kFormatVersion) {
      throw FormatError("baseline model: unsupported format or version");
    }
    FeatureSpace& fs = model.features;
    fs.min_df = h.at("min_df").get<std::size_t>();
    const auto vocab = h.at("vocabulary").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < vocab.size(); ++i) fs.vocabulary.emplace(vocab[i], static_cast<int>(i));
    for (const auto& c : h.at("categorical")) {
      fs.categorical.emplace(std::pair{c.at(0).get<std::string>(), c.at(1).get<std::string>()},
                             c.at(2).get<int>());
    }
    fs.numeric_column = h.at("numeric_column").get<int>();
    fs.idf.resize(static_cast<Eigen::Index>(vocab.size()));
    read_block(in, fs.idf.data(), fs.idf.size());

    const auto rows = h.at("projector").at("rows").get<Eigen::Index>();
    const auto cols = h.at("projector").at("cols").get<Eigen::Index>();
    if (rows != fs.cols()) throw FormatError("baseline model: projector does not match features");
    model.projector.basis.resize(rows, cols);
    read_block(in, model.projector.basis.data(), model.projector.basis.size());
    model.projector.singular_values.resize(cols);
    read_block(in, model.projector.singular_values.data(), cols);

    HierarchicalClassifier& hc = model.classifier;
    hc.strategy = parse_strategy(h.at("strategy").get<std::string>());
    for (const auto& s : h.at("seen_classes")) hc.seen_classes.insert(LabelCode::parse(s.get<std::string>()));
    for (const auto& c : h.at("classifiers")) {
      std::optional<LabelCode> key;
      if (!c.at("node").is_null()) key = LabelCode::parse(c["node"].get<std::string>());
      NodeClassifier nc;
      for (const auto& s : c.at("classes")) nc.classes.push_back(LabelCode::parse(s.get<std::string>()));
      const auto p = c.at("features").get<Eigen::Index>();
      const auto k = c.at("n_classes").get<Eigen::Index>();
      if (p != cols || k < 1) throw FormatError("baseline model: classifier shape mismatch");
      nc.model.weights.resize(p, k);
      nc.model.bias.resize(k);
      nc.class_weights.resize(k);
      read_block(in, nc.model.weights.data(), nc.model.weights.size());
      read_block(in, nc.model.bias.data(), k);
      read_block(in, nc.class_weights.data(), k);
      hc.classifiers.emplace(key, std::move(nc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("baseline model header: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("baseline model header: ") + e.what());
  }
  return model;
}

BaselineModel load_baseline(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open baseline model '" + path + "'");
  return read_baseline(in);
}

}  // namespace hiertax
