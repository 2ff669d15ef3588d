#include <cmath>
#include <sstream>

#include <Eigen/SVD>

#include "doctest.h"

#include "hiertax/baselines.hpp"
#include "hiertax/error.hpp"
#include "synthetic.hpp"

using namespace hiertax;

namespace {

LabelCode code(const char* s) { return LabelCode::parse(s); }

SparseMatrix to_sparse(const Eigen::MatrixXd& m) { return m.sparseView(); }

InferenceConfig greedy_cfg() {
  InferenceConfig cfg;
  cfg.greedy = true;
  return cfg;
}

double top1_hp(const HierarchicalClassifier& model, const Eigen::MatrixXd& x,
               const std::vector<LabelCode>& labels, const Taxonomy& tax) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const PredictionResult r = predict_hierarchical(model, x.row(i).transpose(), tax, greedy_cfg());
    if (r.ranked.empty()) continue;
    const auto truth = tax.ancestors_and_self(labels[static_cast<std::size_t>(i)]);
    const auto pred = tax.ancestors_and_self(r.ranked[0].code);
    std::size_t inter = 0;
    for (const auto& p : pred) inter += static_cast<std::size_t>(std::count(truth.begin(), truth.end(), p));
    sum += static_cast<double>(inter) / static_cast<double>(pred.size());
  }
  return sum / static_cast<double>(x.rows());
}

}  // namespace

TEST_CASE("tokenizer") {
  CHECK(tokenize("Fornitura di PANE-fresco, 2x") ==
        std::vector<std::string>{"fornitura", "di", "pane", "fresco", "2x"});
  CHECK(tokenize("caffè tè") == std::vector<std::string>{"caffè", "tè"});
  CHECK(tokenize("  ").empty());
}

TEST_CASE("features: idf, min_df, one-hot and log value") {
  std::vector<TenderRecord> corpus;
  for (int i = 0; i < 100; ++i) {
    std::string text = "common";
    if (i < 4) text += " rare";
    if (i < 5) text += " five";
    TenderRecord r = testing::make_record("r" + std::to_string(i), text, std::nullopt);
    if (i == 0) {
      r.value_eur = 1000.0;
      r.month = "April";
    }
    corpus.push_back(r);
  }
  const auto [fs, x] = build_features(corpus, 5);
  CHECK(fs.vocabulary.count("rare") == 0);
  REQUIRE(fs.vocabulary.count("five") == 1);
  REQUIRE(fs.vocabulary.count("common") == 1);
  CHECK(fs.idf[fs.vocabulary.at("common")] == doctest::Approx(1.0));
  CHECK(fs.idf[fs.vocabulary.at("five")] == doctest::Approx(std::log(101.0 / 6.0) + 1.0));
  CHECK(x.rows() == 100);
  CHECK(x.cols() == fs.cols());
  CHECK(x.coeff(0, fs.numeric_column) == doctest::Approx(6.9078).epsilon(1e-4));
  CHECK(x.coeff(1, fs.numeric_column) == 0.0);
  CHECK(x.coeff(0, fs.categorical.at({"month", "April"})) == 1.0);
  const auto nv = static_cast<Eigen::Index>(fs.vocabulary.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd row = Eigen::RowVectorXd(x.row(i)).transpose();
    CHECK(row.head(nv).norm() == doctest::Approx(1.0));
  }

  const std::vector<TenderRecord> fresh{testing::make_record("t", "unknown words common", std::nullopt)};
  const SparseMatrix t = fs.transform(fresh);
  CHECK(t.cols() == fs.cols());
  CHECK(t.nonZeros() == 1);
  CHECK_THROWS_AS(fit_features({}, 5), DomainError);
}

TEST_CASE("svd: rank-1 recovery and orthonormality") {
  const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(40, 1.0, 3.0);
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(15, -1.0, 2.0);
  const Eigen::MatrixXd a = u * v.transpose();
  const DenseProjector p = fit_svd(to_sparse(a), 1);
  const Eigen::MatrixXd rec = p.project(a) * p.basis.transpose();
  CHECK((rec - a).norm() <= 1e-8);
  CHECK(p.singular_values[0] == doctest::Approx(u.norm() * v.norm()));
  CHECK_THROWS_AS(fit_svd(to_sparse(a), 16), DomainError);
  CHECK_THROWS_AS(fit_svd(to_sparse(a), 0), DomainError);
}

TEST_CASE("svd: top singular values match a dense reference") {
  Eigen::MatrixXd a(100, 50);
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 50; ++j) a(i, j) = std::sin(0.37 * (i + 1) * (j + 2)) + std::cos(1.3 * i - 0.7 * j);
  }
  const std::vector<double> oracle{37.983585932116746, 35.78978838769936, 14.406514114175986,
                                   14.405810349693104, 14.405809701668495, 14.405809701436793,
                                   14.373732808646661, 14.167089249148448, 12.930384568130687,
                                   10.810770235031503};
  SvdOptions opts;
  opts.seed = 4;
  const DenseProjector p = fit_svd(to_sparse(a), 10, opts);
  for (int k = 0; k < 10; ++k) CHECK(p.singular_values[k] == doctest::Approx(oracle[static_cast<std::size_t>(k)]).epsilon(1e-6));
  const Eigen::MatrixXd gram = p.basis.transpose() * p.basis;
  CHECK((gram - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("svd: full rank preserves dot products") {
  CounterRng rng(9);
  Eigen::MatrixXd a(30, 12);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform01() < 0.4 ? rng.uniform01() : 0.0;
  const DenseProjector p = fit_svd(to_sparse(a), 12);
  const Eigen::MatrixXd z = p.project(a);
  CHECK(((z * z.transpose()) - (a * a.transpose())).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("balanced class weights") {
  std::vector<int> t(90, 0);
  t.insert(t.end(), 10, 1);
  const Eigen::VectorXd w = balanced_class_weights(t, 2);
  CHECK(w[1] / w[0] == doctest::Approx(9.0));
  CHECK(w[0] == doctest::Approx(100.0 / 180.0));
  CHECK_THROWS_AS(balanced_class_weights(t, 3), DomainError);
}

TEST_CASE("logistic softmax sums to one") {
  const Taxonomy tax = testing::make_tree({3, 2});
  const testing::Blobs b = testing::gaussian_blobs(tax, 10, 0.5, 2);
  std::vector<int> targets;
  for (const auto& l : b.labels) targets.push_back(static_cast<int>(tax.index_of(l)) % 3);
  const LinearClassifier m = train_logistic(b.x, targets, 3, Eigen::VectorXd::Ones(3));
  for (Eigen::Index i = 0; i < b.x.rows(); ++i) {
    CHECK(m.predict_proba(b.x.row(i).transpose()).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("strategies fit separable blobs") {
  const Taxonomy tax = testing::make_tree({3, 2, 2});
  const testing::Blobs train = testing::gaussian_blobs(tax, 20, 0.3, 1);
  const testing::Blobs test = testing::gaussian_blobs(tax, 10, 0.3, 2);
  for (Strategy s : {Strategy::BigBang, Strategy::TopDown, Strategy::PerNode}) {
    CAPTURE(strategy_name(s));
    const HierarchicalClassifier m = train_hierarchical(train.x, train.labels, s, tax, {}, 4);
    CHECK(top1_hp(m, train.x, train.labels, tax) == 1.0);
    CHECK(top1_hp(m, test.x, test.labels, tax) >= 0.95);
    CHECK(parse_strategy(strategy_name(s)) == s);
  }
  CHECK_THROWS_AS(parse_strategy("forest"), DomainError);
}

TEST_CASE("closed world and untrained nodes") {
  const Taxonomy tax = testing::make_tree({3, 2, 2});
  testing::Blobs b = testing::gaussian_blobs(tax, 15, 0.3, 3);
  // Drop every leaf under the third root from training.
  Eigen::MatrixXd x(0, b.x.cols());
  std::vector<LabelCode> labels;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < b.labels.size(); ++i) {
    if (b.labels[i].str().rfind("12", 0) != 0) keep.push_back(static_cast<Eigen::Index>(i));
  }
  x = b.x(keep, Eigen::all);
  for (Eigen::Index i : keep) labels.push_back(b.labels[static_cast<std::size_t>(i)]);
  for (Strategy s : {Strategy::BigBang, Strategy::TopDown, Strategy::PerNode}) {
    const HierarchicalClassifier m = train_hierarchical(x, labels, s, tax);
    CHECK(m.seen_classes.count(code("12000000")) == 0);
    CHECK(m.seen_classes.count(code("10000000")) == 1);
    for (Eigen::Index i = 0; i < b.x.rows(); ++i) {
      const PredictionResult r = predict_hierarchical(m, b.x.row(i).transpose(), tax, greedy_cfg());
      for (const auto& l : r.ranked) CHECK(m.seen_classes.count(l.code) == 1);
    }
  }
  HierarchicalClassifier td = train_hierarchical(x, labels, Strategy::TopDown, tax);
  td.classifiers.erase(std::nullopt);
  CHECK(predict_hierarchical(td, b.x.row(0).transpose(), tax, greedy_cfg()).abstained);
}

TEST_CASE("big-bang with one class") {
  const Taxonomy tax = testing::make_tree({2, 2});
  const testing::Blobs b = testing::gaussian_blobs(tax, 5, 0.3, 4);
  const std::vector<LabelCode> labels(b.labels.size(), code("10100000"));
  const HierarchicalClassifier m = train_hierarchical(b.x, labels, Strategy::BigBang, tax);
  const PredictionResult r = predict_hierarchical(m, b.x.row(3).transpose(), tax, greedy_cfg());
  REQUIRE(r.ranked.size() == 1);
  CHECK(r.ranked[0].code == code("10100000"));
  CHECK(r.ranked[0].score == doctest::Approx(1.0));
}

TEST_CASE("baseline model file round trip") {
  const Taxonomy tax = testing::make_tree({3, 2, 2});
  CounterRng rng(6);
  const std::vector<TenderRecord> recs = testing::random_records(tax, rng, 120, true);
  BaselineOptions opts;
  opts.dim = 8;
  opts.min_df = 1;
  const BaselineModel m = train_baseline(recs, tax, opts);
  std::stringstream buf;
  save_baseline(buf, m);
  const std::string bytes = buf.str();
  CHECK(bytes.rfind("HTXBASE1", 0) == 0);
  std::istringstream in(bytes);
  const BaselineModel back = read_baseline(in);
  for (const TenderRecord& r : recs) {
    const PredictionResult a = baseline_predict(m, r, tax, greedy_cfg());
    const PredictionResult b = baseline_predict(back, r, tax, greedy_cfg());
    CHECK(a.ranked == b.ranked);
  }
  std::stringstream again;
  save_baseline(again, back);
  CHECK(again.str() == bytes);

  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(read_baseline(truncated), FormatError);
  std::istringstream garbage("not a model");
  CHECK_THROWS_AS(read_baseline(garbage), FormatError);

  std::vector<TenderRecord> unlabeled = recs;
  unlabeled[0].cpv.reset();
  CHECK_THROWS_AS(train_baseline(unlabeled, tax, opts), DomainError);
}
