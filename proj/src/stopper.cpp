#include "hiertax/stopper.hpp"

#include <fstream>

#include "hiertax/rng.hpp"

namespace hiertax {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Batch {
  Eigen::Matrix<double, kStopperFeatureCount, Eigen::Dynamic> features;
  Eigen::RowVectorXd targets;
};

Batch make_batch(std::span<const StopperExample> examples) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(examples.size());
  b.features.resize(kStopperFeatureCount, n);
  b.targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b.features.col(i) = examples[static_cast<std::size_t>(i)].features;
    b.targets[i] = examples[static_cast<std::size_t>(i)].target ? 1.0 : 0.0;
  }
  return b;
}

double batch_loss_and_gradient(const Batch& b, const StopperWeights& w,
                               StopperWeights* gradient) {
  const auto n = static_cast<double>(b.features.cols());
  const Eigen::MatrixXd pre = (w.hidden.transpose() * b.features).colwise() + w.hidden_bias;
  const Eigen::MatrixXd act = pre.cwiseMax(0.0);
  const Eigen::RowVectorXd logits = (w.out.transpose() * act).array() + w.out_bias;

  double loss = 0.0;
  Eigen::RowVectorXd dlogit(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    loss += softplus(logits[i]) - b.targets[i] * logits[i];
    dlogit[i] = (sigmoid(logits[i]) - b.targets[i]) / n;
  }
  loss /= n;
  if (gradient == nullptr) return loss;

  gradient->out = act * dlogit.transpose();
  gradient->out_bias = dlogit.sum();
  const Eigen::MatrixXd dpre =
      ((w.out * dlogit).array() * (pre.array() > 0.0).cast<double>()).matrix();
  gradient->hidden = b.features * dpre.transpose();
  gradient->hidden_bias = dpre.rowwise().sum();
  return loss;
}

}  // namespace

StopperWeights StopperWeights::zeros(int hidden_size) {
  if (hidden_size < 1) throw DomainError("stopper hidden size must be >= 1");
  StopperWeights w;
  w.hidden.setZero(kStopperFeatureCount, hidden_size);
  w.hidden_bias.setZero(hidden_size);
  w.out.setZero(hidden_size);
  return w;
}

void StopperWeights::validate() const {
  if (hidden.cols() < 1) throw DomainError("stopper hidden size must be >= 1");
  if (hidden_bias.size() != hidden.cols() || out.size() != hidden.cols()) {
    throw DomainError("stopper weight dimensions disagree");
  }
  if (!hidden.allFinite() || !hidden_bias.allFinite() || !out.allFinite() ||
      !std::isfinite(out_bias)) {
    throw DomainError("stopper weights must be finite");
  }
}

double stopper_logit(const StopperFeatures& features, const StopperWeights& w) {
  if (w.hidden_bias.size() != w.hidden.cols() || w.out.size() != w.hidden.cols()) {
    throw DomainError("stopper weight dimensions disagree");
  }
  const Eigen::VectorXd act = (w.hidden.transpose() * features + w.hidden_bias).cwiseMax(0.0);
  return w.out.dot(act) + w.out_bias;
}

double stopper_forward(const StopperFeatures& features, const StopperWeights& w) {
  return sigmoid(stopper_logit(features, w));
}

double stopper_loss(std::span<const StopperExample> examples, const StopperWeights& w) {
  if (examples.empty()) throw DomainError("stopper_loss: no examples");
  return batch_loss_and_gradient(make_batch(examples), w, nullptr);
}

double stopper_loss_and_gradient(std::span<const StopperExample> examples,
                                 const StopperWeights& w, StopperWeights& gradient) {
  if (examples.empty()) throw DomainError("stopper_loss: no examples");
  return batch_loss_and_gradient(make_batch(examples), w, &gradient);
}

StopperTrainResult train_stopper(std::span<const StopperExample> examples,
                                 const StopperTrainOptions& options) {
  const auto positives = std::count_if(examples.begin(), examples.end(),
                                       [](const StopperExample& e) { return e.target; });
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(examples.size())) {
    throw DomainError("train_stopper needs examples of both classes");
  }
  if (options.epochs < 0) throw DomainError("train_stopper: negative epoch count");

  StopperTrainResult result;
  StopperWeights& w = result.weights;
  w = StopperWeights::zeros(options.hidden);
  CounterRng rng(options.seed);
  const auto init = [&rng] { return -0.1 + 0.2 * rng.uniform01(); };
  for (Eigen::Index c = 0; c < w.hidden.cols(); ++c) {
    for (Eigen::Index r = 0; r < w.hidden.rows(); ++r) w.hidden(r, c) = init();
  }
  for (Eigen::Index i = 0; i < w.hidden_bias.size(); ++i) w.hidden_bias[i] = init();
  for (Eigen::Index i = 0; i < w.out.size(); ++i) w.out[i] = init();
  w.out_bias = init();

  const Batch batch = make_batch(examples);
  StopperWeights grad = StopperWeights::zeros(options.hidden);
  result.loss_history.reserve(static_cast<std::size_t>(options.epochs) + 1);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    result.loss_history.push_back(batch_loss_and_gradient(batch, w, &grad));
    w.hidden -= options.learning_rate * grad.hidden;
    w.hidden_bias -= options.learning_rate * grad.hidden_bias;
    w.out -= options.learning_rate * grad.out;
    w.out_bias -= options.learning_rate * grad.out_bias;
  }
  result.loss_history.push_back(batch_loss_and_gradient(batch, w, nullptr));
  return result;
}

double stopper_accuracy(std::span<const StopperExample> examples, const StopperWeights& w) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const StopperExample& e : examples) {
    if (stopper_fires(e.features, w) == e.target) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

std::vector<StopperExample> build_stopper_dataset(std::span<const TraversalTrace> traces,
                                                  const Taxonomy* tax) {
  std::vector<StopperExample> out;
  for (const TraversalTrace& trace : traces) {
    if (!trace.ground_truth) continue;
    std::vector<LabelCode> chain = trace.truth_chain;
    if (chain.empty()) {
      if (tax == nullptr) {
        throw FormatError("trace " + trace.record_id +
                          " has no truth chain and no taxonomy was given");
      }
      chain = tax->ancestors_and_self(*trace.ground_truth);
    }
    for (const TraceStep& step : trace.steps) {
      if (!step.node || step.scores.size() == 0) continue;
      if (*step.node == *trace.ground_truth) {
        out.push_back({extract_features(step.scores), true});
      } else if (std::find(chain.begin(), chain.end(), *step.node) != chain.end()) {
        out.push_back({extract_features(step.scores), false});
      }
    }
  }
  return out;
}

nlohmann::ordered_json stopper_to_json(const StopperWeights& w) {
  nlohmann::ordered_json j;
  j["h"] = w.hidden_size();
  auto hidden = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < w.hidden.rows(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < w.hidden.cols(); ++c) row.push_back(w.hidden(r, c));
    hidden.push_back(std::move(row));
  }
  j["hidden"] = std::move(hidden);
  j["hidden_bias"] = std::vector<double>(w.hidden_bias.data(), w.hidden_bias.data() + w.hidden_bias.size());
  j["out"] = std::vector<double>(w.out.data(), w.out.data() + w.out.size());
  j["out_bias"] = w.out_bias;
  return j;
}

StopperWeights stopper_from_json(const nlohmann::json& j) {
  try {
    const int h = j.at("h").get<int>();
    StopperWeights w = StopperWeights::zeros(h);
    const auto& hidden = j.at("hidden");
    if (hidden.size() != static_cast<std::size_t>(kStopperFeatureCount)) {
      throw FormatError("stopper 'hidden' must have 7 rows");
    }
    for (int r = 0; r < kStopperFeatureCount; ++r) {
      const auto& row = hidden[static_cast<std::size_t>(r)];
      if (row.size() != static_cast<std::size_t>(h)) {
        throw FormatError("stopper 'hidden' rows must have h entries");
      }
      for (int c = 0; c < h; ++c) w.hidden(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    const auto hb = j.at("hidden_bias").get<std::vector<double>>();
    const auto out = j.at("out").get<std::vector<double>>();
    if (hb.size() != static_cast<std::size_t>(h) || out.size() != static_cast<std::size_t>(h)) {
      throw FormatError("stopper 'hidden_bias' and 'out' must have h entries");
    }
    w.hidden_bias = Eigen::Map<const Eigen::VectorXd>(hb.data(), h);
    w.out = Eigen::Map<const Eigen::VectorXd>(out.data(), h);
    w.out_bias = j.at("out_bias").get<double>();
    w.validate();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed stopper weights: ") + e.what());
  }
}

StopperWeights load_stopper(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open stopper weights '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("stopper weights '" + path + "': " + e.what());
  }
  return stopper_from_json(j);
}

}  // namespace hiertax
