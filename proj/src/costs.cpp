#include "styleopt/costs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "styleopt/errors.hpp"

namespace styleopt {

Eigen::VectorXd FeatureVector::stacked(bool with_velocity) const {
  const Eigen::Index n = with_velocity ? 3 + velocity.size() : 3;
  Eigen::VectorXd v(n);
  v[0] = radius;
  v[1] = height;
  v[2] = orientation;
  if (with_velocity) v.tail(velocity.size()) = velocity;
  return v;
}

FeatureVector extract_features(const ArmModel& arm, const Trajectory& x) {
  const auto path = ee_path(arm, x);
  FeatureVector phi;
  for (const auto& pose : path) {
    phi.radius += pose.position.head<2>().norm();
    phi.height += pose.position.z();
    phi.orientation += std::acos(std::clamp(pose.pointing.z(), -1.0, 1.0));
  }
  const double n = static_cast<double>(path.size());
  phi.radius /= n;
  phi.height /= n;
  phi.orientation /= n;
  phi.velocity.resize(x.length() - 1);
  for (int i = 0; i + 1 < x.length(); ++i) {
    phi.velocity[i] = (x.waypoint(i + 1) - x.waypoint(i)).norm();
  }
  return phi;
}

FeaturizedCost FeaturizedCost::zero(std::string style, bool uses_velocity, int num_waypoints) {
  const int n = uses_velocity ? 3 + (num_waypoints - 1) : 3;
  return {std::move(style), Eigen::VectorXd::Zero(n), uses_velocity};
}

double featurized_cost(const FeaturizedCost& c, const FeatureVector& phi) {
  const Eigen::VectorXd f = phi.stacked(c.uses_velocity);
  if (f.size() != c.weights.size()) {
    throw DimensionError("featurized cost has " + std::to_string(c.weights.size()) +
                         " weights for " + std::to_string(f.size()) + " features");
  }
  return c.weights.dot(f);
}

double featurized_cost(const FeaturizedCost& c, const ArmModel& arm, const Trajectory& x) {
  return featurized_cost(c, extract_features(arm, x));
}

Eigen::MatrixXd featurized_cost_gradient(const FeaturizedCost& c, const ArmModel& arm,
                                         const Trajectory& x) {
  const int len = x.length();
  const Eigen::Index expected = c.uses_velocity ? 3 + (len - 1) : 3;
  if (c.weights.size() != expected) {
    throw DimensionError("featurized weights do not match trajectory length");
  }
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(x.dof(), len);
  const double wr = c.weights[0] / len;
  const double wh = c.weights[1] / len;
  const double wo = c.weights[2] / len;
  for (int t = 0; t < len; ++t) {
    const Eigen::VectorXd q = x.waypoint(t);
    const EePose pose = forward_kinematics(arm, q);
    const EeJacobian jac = fk_jacobian(arm, q);
    const double r = pose.position.head<2>().norm();
    if (r > 0.0) {
      grad.col(t) += wr * (pose.position.x() * jac.position.row(0) +
                           pose.position.y() * jac.position.row(1)).transpose() / r;
    }
    grad.col(t) += wh * jac.position.row(2).transpose();
    const double uz = pose.pointing.z();
    const double s = std::sqrt(std::max(0.0, 1.0 - uz * uz));
    if (s > 0.0) grad.col(t) -= wo * jac.pointing.row(2).transpose() / s;
  }
  if (c.uses_velocity) {
    for (int i = 0; i + 1 < len; ++i) {
      const Eigen::VectorXd step = x.waypoint(i + 1) - x.waypoint(i);
      const double n = step.norm();
      if (n == 0.0) continue;
      const Eigen::VectorXd g = c.weights[3 + i] * step / n;
      grad.col(i + 1) += g;
      grad.col(i) -= g;
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// MLP

int mlp_input_width(int dof) { return 2 * dof + 7; }

int MlpCost::parameter_count() const {
  int n = 0;
  for (const auto& l : layers) n += static_cast<int>(l.weight.size() + l.bias.size());
  return n;
}

Eigen::VectorXd flatten(const MlpLayers& layers) {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  Eigen::VectorXd flat(n);
  Eigen::Index off = 0;
  for (const auto& l : layers) {
    flat.segment(off, l.weight.size()) = l.weight.reshaped();
    off += l.weight.size();
    flat.segment(off, l.bias.size()) = l.bias.transpose();
    off += l.bias.size();
  }
  return flat;
}

Eigen::VectorXd MlpCost::parameters() const { return flatten(layers); }

void MlpCost::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) {
    throw DimensionError("MLP parameter vector has wrong length");
  }
  Eigen::Index off = 0;
  for (auto& l : layers) {
    l.weight.reshaped() = flat.segment(off, l.weight.size());
    off += l.weight.size();
    l.bias = flat.segment(off, l.bias.size()).transpose();
    off += l.bias.size();
  }
}

namespace {

MlpLayers zero_layers(int input_width) {
  const std::array<int, 4> widths{input_width, MlpCost::kHidden1, MlpCost::kHidden2,
                                  MlpCost::kOutput};
  MlpLayers layers;
  for (int i = 0; i < 3; ++i) {
    layers[i].weight = Eigen::MatrixXd::Zero(widths[i], widths[i + 1]);
    layers[i].bias = Eigen::RowVectorXd::Zero(widths[i + 1]);
  }
  return layers;
}

// Eigen vectorizes exp but not tanh for doubles.
Eigen::MatrixXd fast_tanh(const Eigen::MatrixXd& z) {
  const Eigen::ArrayXXd e = (-2.0 * z.array().abs()).exp();
  return (z.array().sign() * (1.0 - e) / (1.0 + e)).matrix();
}

void check_dropout(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw ValueError("dropout rate must be in [0, 1)");
}

// Inverted-dropout keep mask: 0 with probability p, 1/(1-p) otherwise.
Eigen::ArrayXXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p,
                             std::mt19937_64& rng) {
  Eigen::ArrayXXd mask(rows, cols);
  const auto threshold = static_cast<std::uint64_t>(p * 4294967296.0);
  const double keep = 1.0 / (1.0 - p);
  double* data = mask.data();
  const Eigen::Index n = mask.size();
  for (Eigen::Index i = 0; i < n; i += 2) {
    const std::uint64_t bits = rng();
    data[i] = (bits & 0xffffffffULL) < threshold ? 0.0 : keep;
    if (i + 1 < n) data[i + 1] = (bits >> 32) < threshold ? 0.0 : keep;
  }
  return mask;
}

}  // namespace

MlpCost MlpCost::glorot(std::string style, int dof, std::uint64_t seed, double dropout) {
  check_dropout(dropout);
  MlpCost c{std::move(style), dropout, zero_layers(mlp_input_width(dof))};
  std::mt19937_64 rng(seed);
  for (auto& l : c.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = u(rng);
    }
  }
  return c;
}

MlpCost MlpCost::zero(std::string style, int dof, double dropout) {
  check_dropout(dropout);
  return {std::move(style), dropout, zero_layers(mlp_input_width(dof))};
}

void check_mlp(const MlpCost& c) {
  check_dropout(c.dropout);
  const std::array<Eigen::Index, 3> outs{MlpCost::kHidden1, MlpCost::kHidden2, MlpCost::kOutput};
  Eigen::Index in = c.layers[0].weight.rows();
  for (int i = 0; i < 3; ++i) {
    const auto& l = c.layers[i];
    if (l.weight.rows() != in || l.weight.cols() != outs[i] || l.bias.size() != outs[i]) {
      throw DimensionError("MLP layer " + std::to_string(i) + " has the wrong shape");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw ValueError("MLP parameters must be finite");
    }
    in = outs[i];
  }
}

Eigen::MatrixXd encode_steps(const ArmModel& arm, const Trajectory& x) {
  const int dof = x.dof();
  if (dof != arm.dof()) throw DimensionError("trajectory dof does not match arm");
  const int len = x.length();
  Eigen::MatrixXd u(len - 1, mlp_input_width(dof));
  for (int t = 1; t < len; ++t) {
    const EePose pose = forward_kinematics(arm, x.waypoint(t));
    auto row = u.row(t - 1);
    row.segment(0, dof) = x.waypoint(t).transpose();
    row.segment(dof, dof) = x.waypoint(t - 1).transpose();
    row.segment(2 * dof, 3) = pose.position.transpose();
    row.segment(2 * dof + 3, 3) = pose.pointing.transpose();
    row[2 * dof + 6] = static_cast<double>(t + 1) / len;
  }
  return u;
}

MlpPass mlp_pass(const MlpCost& c, const Eigen::Ref<const Eigen::MatrixXd>& inputs, std::mt19937_64* dropout_rng) {
  if (inputs.cols() != c.input_width()) {
    throw DimensionError("MLP input width " + std::to_string(inputs.cols()) +
                         " does not match network width " + std::to_string(c.input_width()));
  }
  const bool drop = dropout_rng != nullptr && c.dropout > 0.0;
  MlpPass p;
  p.h1 = fast_tanh((inputs * c.layers[0].weight).rowwise() + c.layers[0].bias);
  if (drop) {
    p.keep1 = dropout_mask(p.h1.rows(), p.h1.cols(), c.dropout, *dropout_rng);
    p.h2 = fast_tanh(((p.h1.array() * p.keep1).matrix() * c.layers[1].weight).rowwise() +
                     c.layers[1].bias);
    p.keep2 = dropout_mask(p.h2.rows(), p.h2.cols(), c.dropout, *dropout_rng);
    p.y = ((p.h2.array() * p.keep2).matrix() * c.layers[2].weight).rowwise() + c.layers[2].bias;
  } else {
    p.h2 = fast_tanh((p.h1 * c.layers[1].weight).rowwise() + c.layers[1].bias);
    p.y = (p.h2 * c.layers[2].weight).rowwise() + c.layers[2].bias;
  }
  return p;
}

MlpLayers mlp_backprop(const MlpCost& c, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                       const MlpPass& p,
                       const Eigen::MatrixXd& dy) {
  const bool drop = p.keep1.size() > 0;
  MlpLayers g;
  const Eigen::MatrixXd a2 = drop ? Eigen::MatrixXd(p.h2.array() * p.keep2) : p.h2;
  g[2].weight = a2.transpose() * dy;
  g[2].bias = dy.colwise().sum();

  Eigen::ArrayXXd d2 = (dy * c.layers[2].weight.transpose()).array();
  if (drop) d2 *= p.keep2;
  const Eigen::MatrixXd z2 = (d2 * (1.0 - p.h2.array().square())).matrix();
  const Eigen::MatrixXd a1 = drop ? Eigen::MatrixXd(p.h1.array() * p.keep1) : p.h1;
  g[1].weight = a1.transpose() * z2;
  g[1].bias = z2.colwise().sum();

  Eigen::ArrayXXd d1 = (z2 * c.layers[1].weight.transpose()).array();
  if (drop) d1 *= p.keep1;
  const Eigen::MatrixXd z1 = (d1 * (1.0 - p.h1.array().square())).matrix();
  g[0].weight = inputs.transpose() * z1;
  g[0].bias = z1.colwise().sum();
  return g;
}

MlpOutput mlp_forward(const MlpCost& c, const ArmModel& arm, const Trajectory& x, bool training,
                      std::mt19937_64* rng) {
  if (training && rng == nullptr) throw ValueError("training-mode forward needs an rng");
  const Eigen::MatrixXd u = encode_steps(arm, x);
  const MlpPass p = mlp_pass(c, u, training ? rng : nullptr);
  MlpOutput out;
  out.cost = p.y.squaredNorm();
  out.per_step.reserve(p.y.rows());
  for (Eigen::Index t = 0; t < p.y.rows(); ++t) out.per_step.emplace_back(p.y.row(t).transpose());
  return out;
}

MlpLayers mlp_cost_gradient(const MlpCost& c, const ArmModel& arm, const Trajectory& x) {
  const Eigen::MatrixXd u = encode_steps(arm, x);
  const MlpPass p = mlp_pass(c, u);
  return mlp_backprop(c, u, p, 2.0 * p.y);
}

// ---------------------------------------------------------------------------

const std::string& style_name(const StyleCost& c) {
  return std::visit([](const auto& v) -> const std::string& { return v.style; }, c);
}

double style_cost(const StyleCost& c, const ArmModel& arm, const Trajectory& x) {
  if (const auto* f = std::get_if<FeaturizedCost>(&c)) return featurized_cost(*f, arm, x);
  const auto& m = std::get<MlpCost>(c);
  const MlpPass p = mlp_pass(m, encode_steps(arm, x));
  return p.y.squaredNorm();
}

double total_objective(const ObjectiveConfig& cfg, const ArmModel& arm, const Trajectory& x) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
    throw ValueError("lambda must be finite and non-negative");
  }
  double total = cfg.lambda * ssd_cost(x);
  if (cfg.style) total += style_cost(*cfg.style, arm, x);
  return total;
}

}  // namespace styleopt
