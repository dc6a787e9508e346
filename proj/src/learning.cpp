#include "styleopt/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "styleopt/errors.hpp"

namespace styleopt {

double TrainerSettings::learning_rate_for(const StyleCost& cost) const {
  if (learning_rate) return *learning_rate;
  return std::holds_alternative<MlpCost>(cost) ? 1e-3 : 0.1;
}

int TrainerSettings::epochs_for(const StyleCost& cost) const {
  if (epochs_per_round) return *epochs_per_round;
  return std::holds_alternative<MlpCost>(cost) ? 500 : 200;
}

void TrainerSettings::validate() const {
  if (learning_rate && (!(*learning_rate > 0.0) || !std::isfinite(*learning_rate))) {
    throw ValueError("learning_rate must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValueError("Adam betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ValueError("Adam epsilon must be positive");
  if (epochs_per_round && *epochs_per_round < 0) throw ValueError("epochs must be >= 0");
  if (augmentation_factor < 0) throw ValueError("augmentation_factor must be >= 0");
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

std::pair<double, double> preference_probabilities(double cost_a, double cost_b) {
  if (!std::isfinite(cost_a) || !std::isfinite(cost_b)) {
    throw ValueError("preference probability needs finite costs");
  }
  return {logistic(cost_b - cost_a), logistic(cost_a - cost_b)};
}

double preference_probability(const StyleCost& cost, const ArmModel& arm, const Trajectory& a,
                              const Trajectory& b) {
  return preference_probabilities(style_cost(cost, arm, a), style_cost(cost, arm, b)).first;
}

double pair_loss(double cost_a, double cost_b, Label label) {
  if (!std::isfinite(cost_a) || !std::isfinite(cost_b)) {
    throw ValueError("pair loss needs finite costs");
  }
  switch (label) {
    case Label::kA:
      return softplus(cost_a - cost_b);
    case Label::kB:
      return softplus(cost_b - cost_a);
    case Label::kUnlabeled:
      break;
  }
  throw ValueError("pair loss requires a labeled pair");
}

namespace {

void require_label(const PreferencePair& pair) {
  if (pair.label == Label::kUnlabeled) {
    throw ValueError("pair '" + pair.pair_id + "' is unlabeled");
  }
}

const Trajectory& chosen(const PreferencePair& p) { return p.label == Label::kA ? p.a : p.b; }
const Trajectory& other(const PreferencePair& p) { return p.label == Label::kA ? p.b : p.a; }

struct Adam {
  Adam(const TrainerSettings& s, double lr, Eigen::Index n)
      : settings(s), learning_rate(lr), m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    ++t;
    m = settings.beta1 * m + (1.0 - settings.beta1) * grad;
    v = settings.beta2 * v + (1.0 - settings.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(settings.beta1, t);
    const double c2 = 1.0 - std::pow(settings.beta2, t);
    params.array() -= learning_rate * (m.array() / c1) /
                      ((v.array() / c2).sqrt() + settings.epsilon);
  }

  const TrainerSettings& settings;
  double learning_rate;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  int t = 0;
};

void check_loss(double loss, int epoch) {
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "training loss became non-finite (" << loss << ") at epoch " << epoch;
    throw ValueError(msg.str());
  }
}

// Feature differences chosen - other; the loss is softplus(w . diff).
TrainingResult train_featurized(const FeaturizedCost& start, const ArmModel& arm,
                                const std::vector<PreferencePair>& pairs,
                                const TrainerSettings& settings, int epochs) {
  const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd diffs(start.weights.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto fc = extract_features(arm, chosen(pairs[i])).stacked(start.uses_velocity);
    const auto fo = extract_features(arm, other(pairs[i])).stacked(start.uses_velocity);
    if (fc.size() != start.weights.size()) {
      throw DimensionError("pair features do not match featurized weight length");
    }
    diffs.col(i) = fc - fo;
  }

  auto loss_and_grad = [&](const Eigen::VectorXd& w, Eigen::VectorXd* grad) {
    const Eigen::VectorXd z = diffs.transpose() * w;
    double loss = 0.0;
    if (grad) grad->setZero(w.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      loss += softplus(z[i]);
      if (grad) *grad += logistic(z[i]) * diffs.col(i);
    }
    if (grad) *grad /= static_cast<double>(n);
    return loss / static_cast<double>(n);
  };

  Eigen::VectorXd w = start.weights;
  Adam adam(settings, settings.learning_rate_for(start), w.size());
  Eigen::VectorXd grad;
  const double initial = loss_and_grad(w, nullptr);
  check_loss(initial, 0);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    check_loss(loss_and_grad(w, &grad), epoch);
    adam.step(w, grad);
  }
  const double final_loss = loss_and_grad(w, nullptr);
  check_loss(final_loss, epochs);

  FeaturizedCost out = start;
  out.weights = w;
  return {out, {epochs, initial, final_loss, static_cast<int>(n), 0}};
}

// Step rows of every pair, chosen trajectory first then the other one.
struct MlpDataset {
  Eigen::MatrixXd inputs;
  Eigen::Index steps = 0;  // rows per trajectory
  Eigen::Index pairs = 0;
};

MlpDataset encode_pairs(const ArmModel& arm, const std::vector<PreferencePair>& pairs) {
  MlpDataset ds;
  ds.pairs = static_cast<Eigen::Index>(pairs.size());
  ds.steps = pairs.front().a.length() - 1;
  ds.inputs.resize(2 * ds.pairs * ds.steps, mlp_input_width(arm.dof()));
  for (Eigen::Index i = 0; i < ds.pairs; ++i) {
    const auto& p = pairs[i];
    if (p.a.length() - 1 != ds.steps || p.b.length() - 1 != ds.steps) {
      throw DimensionError("all training pairs must share the same T");
    }
    ds.inputs.middleRows(2 * i * ds.steps, ds.steps) = encode_steps(arm, chosen(p));
    ds.inputs.middleRows((2 * i + 1) * ds.steps, ds.steps) = encode_steps(arm, other(p));
  }
  return ds;
}

// Summed loss of pairs [first, first + count), and optionally dL/dy for their
// rows (scaled by inv_n).
double mlp_chunk_loss(const MlpDataset& ds, Eigen::Index count, const MlpPass& pass, double inv_n,
                      Eigen::MatrixXd* dy) {
  const Eigen::VectorXd row_cost = pass.y.rowwise().squaredNorm();
  const Eigen::Index steps = ds.steps;
  double loss = 0.0;
  if (dy) dy->resize(pass.y.rows(), pass.y.cols());
  for (Eigen::Index i = 0; i < count; ++i) {
    const double cc = row_cost.segment(2 * i * steps, steps).sum();
    const double co = row_cost.segment((2 * i + 1) * steps, steps).sum();
    loss += softplus(cc - co);
    if (dy) {
      const double s = logistic(cc - co) * inv_n;
      dy->middleRows(2 * i * steps, steps) = 2.0 * s * pass.y.middleRows(2 * i * steps, steps);
      dy->middleRows((2 * i + 1) * steps, steps) =
          -2.0 * s * pass.y.middleRows((2 * i + 1) * steps, steps);
    }
  }
  return loss;
}

// Pairs per chunk; keeps the activations of one chunk cache resident.
constexpr Eigen::Index kChunkPairs = 64;

// One full-batch pass in chunks. With grad set, dropout is drawn from rng and
// the gradient of the mean loss is accumulated.
double mlp_epoch(const MlpCost& net, const MlpDataset& ds, std::mt19937_64* rng,
                 MlpLayers* grad) {
  const double inv_n = 1.0 / static_cast<double>(ds.pairs);
  double loss = 0.0;
  Eigen::MatrixXd dy;
  if (grad) {
    for (int l = 0; l < 3; ++l) {
      (*grad)[l].weight.setZero(net.layers[l].weight.rows(), net.layers[l].weight.cols());
      (*grad)[l].bias.setZero(net.layers[l].bias.size());
    }
  }
  for (Eigen::Index first = 0; first < ds.pairs; first += kChunkPairs) {
    const Eigen::Index count = std::min(kChunkPairs, ds.pairs - first);
    const auto rows = ds.inputs.middleRows(2 * first * ds.steps, 2 * count * ds.steps);
    const MlpPass pass = mlp_pass(net, rows, grad ? rng : nullptr);
    loss += mlp_chunk_loss(ds, count, pass, inv_n, grad ? &dy : nullptr);
    if (grad) {
      const MlpLayers g = mlp_backprop(net, rows, pass, dy);
      for (int l = 0; l < 3; ++l) {
        (*grad)[l].weight += g[l].weight;
        (*grad)[l].bias += g[l].bias;
      }
    }
  }
  return loss * inv_n;
}

TrainingResult train_mlp(const MlpCost& start, const ArmModel& arm,
                         const std::vector<PreferencePair>& pairs,
                         const TrainerSettings& settings, int epochs) {
  check_mlp(start);
  std::mt19937_64 rng(settings.rng_seed);
  std::vector<PreferencePair> data = pairs;
  for (const auto& p : pairs) {
    auto extra = augment_rotations(p, settings.augmentation_factor, rng);
    data.insert(data.end(), std::make_move_iterator(extra.begin()),
                std::make_move_iterator(extra.end()));
  }
  const MlpDataset ds = encode_pairs(arm, data);

  MlpCost net = start;
  Eigen::VectorXd params = net.parameters();
  Adam adam(settings, settings.learning_rate_for(start), params.size());
  MlpLayers grad;

  const double initial = mlp_epoch(net, ds, nullptr, nullptr);
  check_loss(initial, 0);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    check_loss(mlp_epoch(net, ds, &rng, &grad), epoch);
    adam.step(params, flatten(grad));
    net.set_parameters(params);
  }
  const double final_loss = mlp_epoch(net, ds, nullptr, nullptr);
  check_loss(final_loss, epochs);
  const int augmented = static_cast<int>(data.size() - pairs.size());
  return {net, {epochs, initial, final_loss, static_cast<int>(pairs.size()), augmented}};
}

}  // namespace

double pair_loss(const StyleCost& cost, const ArmModel& arm, const PreferencePair& pair) {
  require_label(pair);
  return pair_loss(style_cost(cost, arm, pair.a), style_cost(cost, arm, pair.b), pair.label);
}

double mean_pair_loss(const StyleCost& cost, const ArmModel& arm,
                      const std::vector<PreferencePair>& pairs) {
  if (pairs.empty()) throw ValueError("mean loss of an empty pair list");
  double total = 0.0;
  for (const auto& p : pairs) total += pair_loss(cost, arm, p);
  return total / static_cast<double>(pairs.size());
}

Eigen::VectorXd pair_loss_gradient(const StyleCost& cost, const ArmModel& arm,
                                   const PreferencePair& pair) {
  require_label(pair);
  const double cc = style_cost(cost, arm, chosen(pair));
  const double co = style_cost(cost, arm, other(pair));
  const double s = logistic(cc - co);  // dL/dC_chosen = -dL/dC_other
  if (const auto* f = std::get_if<FeaturizedCost>(&cost)) {
    const auto fc = extract_features(arm, chosen(pair)).stacked(f->uses_velocity);
    const auto fo = extract_features(arm, other(pair)).stacked(f->uses_velocity);
    return s * (fc - fo);
  }
  const auto& m = std::get<MlpCost>(cost);
  return s * (flatten(mlp_cost_gradient(m, arm, chosen(pair))) -
              flatten(mlp_cost_gradient(m, arm, other(pair))));
}

std::vector<PreferencePair> augment_rotations(const PreferencePair& pair, int k,
                                              std::mt19937_64& rng) {
  if (k < 0) throw ValueError("augmentation count must be >= 0");
  require_label(pair);
  // Uniform on (-pi, pi]: negate a draw from [-pi, pi).
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::vector<PreferencePair> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    const double theta = -angle(rng);
    out.push_back({pair.pair_id + "/rot" + std::to_string(i), rotate_trajectory(pair.a, theta),
                   rotate_trajectory(pair.b, theta), pair.label, PairOrigin::kAugmented});
  }
  return out;
}

TrainingResult update_weights(const StyleCost& cost, const ArmModel& arm,
                              const std::vector<PreferencePair>& pairs,
                              const TrainerSettings& settings) {
  settings.validate();
  if (pairs.empty()) throw ValueError("update_weights needs at least one labeled pair");
  for (const auto& p : pairs) {
    require_label(p);
    if (p.a.dof() != arm.dof() || p.b.dof() != arm.dof()) {
      throw DimensionError("pair '" + p.pair_id + "' does not match the arm dof");
    }
  }
  const int epochs = settings.epochs_for(cost);
  if (const auto* f = std::get_if<FeaturizedCost>(&cost)) {
    return train_featurized(*f, arm, pairs, settings, epochs);
  }
  return train_mlp(std::get<MlpCost>(cost), arm, pairs, settings, epochs);
}

}  // namespace styleopt
