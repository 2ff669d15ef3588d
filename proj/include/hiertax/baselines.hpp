#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "hiertax/encoding.hpp"
#include "hiertax/inference.hpp"
#include "hiertax/taxonomy.hpp"

namespace hiertax {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Lowercased tokens split on non-alphanumeric boundaries.
std::vector<std::string> tokenize(std::string_view text);

inline const std::vector<std::string> kOneHotFields = {"contractual_choice", "legal_form",
                                                       "macro_area", "month"};

/// Column layout: [tf-idf | one-hot | ln(value)].
struct FeatureSpace {
  std::map<std::string, int> vocabulary;  // term -> column
  Eigen::VectorXd idf;                    // one entry per vocabulary column
  std::map<std::pair<std::string, std::string>, int> categorical;  // (field, value) -> column
  int numeric_column = 0;
  std::size_t min_df = 5;

  int cols() const noexcept { return numeric_column + 1; }
  /// Sparse feature rows; unknown terms and categories are dropped.
  SparseMatrix transform(std::span<const TenderRecord> records) const;
};

/// Throws DomainError for an empty corpus.
FeatureSpace fit_features(std::span<const TenderRecord> corpus, std::size_t min_df = 5);
std::pair<FeatureSpace, SparseMatrix> build_features(std::span<const TenderRecord> corpus,
                                                     std::size_t min_df = 5);

/// Top right-singular subspace; project(x) = x * basis.
struct DenseProjector {
  Eigen::MatrixXd basis;            // cols x d, orthonormal columns
  Eigen::VectorXd singular_values;  // descending

  Eigen::Index dim() const noexcept { return basis.cols(); }
  template <typename Derived>
  Eigen::MatrixXd project(const Eigen::EigenBase<Derived>& rows) const {
    return rows.derived() * basis;
  }
};

struct SvdOptions {
  int oversample = 10;
  int max_iterations = 1000;
  double tolerance = 1e-10;  // residual relative to the largest eigenvalue of A^T A
  std::uint64_t seed = 0;
};

/// Randomized subspace iteration on A^T A with a Rayleigh-Ritz step.
/// Throws DomainError when d is not in [1, min(rows, cols)] and
/// ConvergenceError when the iteration cap is hit.
DenseProjector fit_svd(const SparseMatrix& a, int d, const SvdOptions& options = {});

struct LogisticOptions {
  double l2 = 1e-4;
  int max_iterations = 300;
  double tolerance = 1e-7;  // on the gradient max-norm
};

/// Multinomial logistic regression; a single class always scores 1.
struct LinearClassifier {
  Eigen::MatrixXd weights;  // features x classes
  Eigen::VectorXd bias;

  Eigen::Index n_classes() const noexcept { return bias.size(); }
  template <typename Derived>
  Eigen::VectorXd predict_proba(const Eigen::MatrixBase<Derived>& x) const {
    Eigen::VectorXd z = weights.transpose() * x + bias;
    z = (z.array() - z.maxCoeff()).exp().matrix();
    return z / z.sum();
  }
};

/// n / (K * n_c) for each of the K classes; throws DomainError for an empty
/// class.
Eigen::VectorXd balanced_class_weights(std::span<const int> targets, int n_classes);

/// Class-weighted softmax regression on standardized features, fitted by
/// gradient descent with backtracking; the returned weights act on raw
/// features. Targets are in [0, n_classes).
LinearClassifier train_logistic(const Eigen::MatrixXd& x, std::span<const int> targets,
                                int n_classes, const Eigen::VectorXd& class_weights,
                                const LogisticOptions& options = {});

enum class Strategy { BigBang, TopDown, PerNode };

std::string_view strategy_name(Strategy s);
/// "bigbang", "topdown" or "pernode"; throws DomainError.
Strategy parse_strategy(std::string_view name);

struct NodeClassifier {
  /// Big-bang and top-down: the output classes. Per-node: empty, and
  /// column 1 of the classifier is the positive class.
  std::vector<LabelCode> classes;
  LinearClassifier model;
  Eigen::VectorXd class_weights;
};

/// Strategy plus its per-node classifiers over dense feature vectors.
/// Key nullopt is the root classifier (big-bang and top-down).
struct HierarchicalClassifier {
  Strategy strategy = Strategy::TopDown;
  std::map<std::optional<LabelCode>, NodeClassifier> classifiers;
  /// Observed labels and their ancestors.
  std::set<LabelCode> seen_classes;

  /// Number of taxonomy nodes with a trained classifier.
  std::size_t coverage() const noexcept { return classifiers.size(); }
};

HierarchicalClassifier train_hierarchical(const Eigen::MatrixXd& x,
                                          std::span<const LabelCode> labels, Strategy strategy,
                                          const Taxonomy& tax,
                                          const LogisticOptions& options = {},
                                          std::size_t parallelism = 1);

/// Big-bang ranks every trained class by softmax score. Top-down and
/// per-node run the greedy threshold traversal with node classifiers in the
/// scorer seat; an untrained node ends the path there.
PredictionResult predict_hierarchical(const HierarchicalClassifier& model,
                                      const Eigen::Ref<const Eigen::VectorXd>& x,
                                      const Taxonomy& tax, const InferenceConfig& cfg,
                                      const StopperWeights* stopper = nullptr,
                                      TraversalTrace* trace = nullptr);

struct BaselineOptions {
  Strategy strategy = Strategy::TopDown;
  int dim = 256;
  std::size_t min_df = 5;
  LogisticOptions logistic;
  SvdOptions svd;
  std::size_t parallelism = 1;
};

/// Feature pipeline plus hierarchical classifier.
struct BaselineModel {
  FeatureSpace features;
  DenseProjector projector;
  HierarchicalClassifier classifier;

  Eigen::MatrixXd embed(std::span<const TenderRecord> records) const;
};

/// Records without a ground truth are rejected with DomainError.
BaselineModel train_baseline(std::span<const TenderRecord> records, const Taxonomy& tax,
                             const BaselineOptions& options);

PredictionResult baseline_predict(const BaselineModel& model, const TenderRecord& rec,
                                  const Taxonomy& tax, const InferenceConfig& cfg,
                                  const StopperWeights* stopper = nullptr,
                                  TraversalTrace* trace = nullptr);

/// Magic, little-endian header length, JSON header, then float64 blocks.
void save_baseline(std::ostream& out, const BaselineModel& model);
BaselineModel read_baseline(std::istream& in);
/// Throws FormatError.
BaselineModel load_baseline(const std::string& path);

}  // namespace hiertax
