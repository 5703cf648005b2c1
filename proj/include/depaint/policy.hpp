#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "depaint/rng.hpp"

namespace depaint {

using ParamVector = Eigen::VectorXd;

/// Layer widths of a fully connected tanh network, input first.
struct MlpShape {
  std::vector<Eigen::Index> dims;

  static MlpShape policy(Eigen::Index actions = 5) { return {{20, 128, 64, actions}}; }
  static MlpShape critic() { return {{20, 128, 64, 1}}; }

  std::size_t layers() const noexcept { return dims.size() - 1; }
  Eigen::Index input_size() const { return dims.front(); }
  Eigen::Index output_size() const { return dims.back(); }

  // Flat layout, per layer: weight matrix (out x in, column-major) then bias.
  Eigen::Index weight_offset(std::size_t layer) const
  {
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += dims[l + 1] * dims[l] + dims[l + 1];
    return off;
  }
  Eigen::Index bias_offset(std::size_t layer) const { return weight_offset(layer) + dims[layer + 1] * dims[layer]; }
  Eigen::Index param_count() const { return weight_offset(layers()); }

  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

/// Non-owning view of one network's parameters inside a flat vector.
class MlpView {
public:
  MlpView(const MlpShape& shape, const double* data) : shape_(&shape), data_(data) {}

  const MlpShape& shape() const noexcept { return *shape_; }

  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t l) const
  {
    return {data_ + shape_->weight_offset(l), shape_->dims[l + 1], shape_->dims[l]};
  }
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const
  {
    return {data_ + shape_->bias_offset(l), shape_->dims[l + 1]};
  }

private:
  const MlpShape* shape_;
  const double* data_;
};

struct MlpParams {
  MlpShape shape;
  ParamVector values;

  MlpParams() = default;
  MlpParams(MlpShape s, ParamVector v) : shape(std::move(s)), values(std::move(v))
  {
    if (values.size() != shape.param_count()) throw std::invalid_argument("parameter count does not match network shape");
  }
  static MlpParams zeros(MlpShape s)
  {
    const Eigen::Index count = s.param_count();
    return {std::move(s), ParamVector::Zero(count)};
  }

  MlpView view() const { return {shape, values.data()}; }
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero.
inline MlpParams initial_params(const MlpShape& shape, Rng& rng)
{
  MlpParams p = MlpParams::zeros(shape);
  for (std::size_t l = 0; l < shape.layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(shape.dims[l]));
    const Eigen::Index off = shape.weight_offset(l);
    const Eigen::Index count = shape.dims[l + 1] * shape.dims[l];
    for (Eigen::Index k = 0; k < count; ++k) p.values(off + k) = uniform(rng, -bound, bound);
  }
  return p;
}

/// All agents' policy networks laid end to end: [theta_1 ... theta_n].
struct JointParams {
  MlpShape shape;
  std::size_t agents = 0;
  ParamVector values;

  JointParams() = default;
  JointParams(MlpShape s, std::size_t n, ParamVector v) : shape(std::move(s)), agents(n), values(std::move(v))
  {
    if (values.size() != shape.param_count() * static_cast<Eigen::Index>(agents))
      throw std::invalid_argument("joint parameter length does not match shape x agents");
  }

  Eigen::Index slice_size() const { return shape.param_count(); }
  Eigen::Index slice_offset(std::size_t agent) const { return slice_size() * static_cast<Eigen::Index>(agent); }

  MlpView slice(std::size_t agent) const
  {
    if (agent >= agents) throw std::out_of_range("agent slice out of range");
    return {shape, values.data() + slice_offset(agent)};
  }
  MlpParams slice_params(std::size_t agent) const
  {
    if (agent >= agents) throw std::out_of_range("agent slice out of range");
    return {shape, values.segment(slice_offset(agent), slice_size())};
  }

  static JointParams concatenate(std::span<const MlpParams> parts)
  {
    if (parts.empty()) throw std::invalid_argument("need at least one agent");
    const MlpShape& shape = parts.front().shape;
    ParamVector v(shape.param_count() * static_cast<Eigen::Index>(parts.size()));
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (!(parts[k].shape == shape)) throw std::invalid_argument("all agents must share one network shape");
      v.segment(shape.param_count() * static_cast<Eigen::Index>(k), shape.param_count()) = parts[k].values;
    }
    return {shape, parts.size(), std::move(v)};
  }
};

/// Layer outputs for a batch of inputs stored as columns. outputs[0] is the
/// input, outputs.back() the linear output layer.
struct ForwardPass {
  std::vector<Eigen::MatrixXd> outputs;

  const Eigen::MatrixXd& result() const { return outputs.back(); }
};

inline ForwardPass forward(const MlpView& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs)
{
  const MlpShape& shape = net.shape();
  if (inputs.rows() != shape.input_size()) throw std::invalid_argument("input has wrong dimension");
  ForwardPass pass;
  pass.outputs.reserve(shape.layers() + 1);
  pass.outputs.emplace_back(inputs);
  for (std::size_t l = 0; l < shape.layers(); ++l) {
    Eigen::MatrixXd z = net.weight(l) * pass.outputs.back();
    z.colwise() += net.bias(l);
    if (l + 1 < shape.layers()) z = z.array().tanh().matrix();
    pass.outputs.push_back(std::move(z));
  }
  return pass;
}

/// Accumulates the parameter gradient of sum_s <delta_s, output_s> into grad.
/// delta has one column per input column.
inline void backward(const MlpView& net, const ForwardPass& pass, Eigen::MatrixXd delta, Eigen::Ref<Eigen::VectorXd> grad)
{
  const MlpShape& shape = net.shape();
  for (std::size_t l = shape.layers(); l-- > 0;) {
    const Eigen::MatrixXd& in = pass.outputs[l];
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + shape.weight_offset(l), shape.dims[l + 1], shape.dims[l]);
    gw.noalias() += delta * in.transpose();
    grad.segment(shape.bias_offset(l), shape.dims[l + 1]) += delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd upstream = net.weight(l).transpose() * delta;
    delta = (upstream.array() * (1.0 - in.array().square())).matrix();
  }
}

/// Column-wise log-softmax with max subtraction.
inline Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits)
{
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    const double lse = m + std::log((logits.col(c).array() - m).exp().sum());
    out.col(c) = logits.col(c).array() - lse;
  }
  return out;
}

namespace detail {

inline void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what)
{
  if (!m.allFinite()) throw std::domain_error(std::string("non-finite ") + what);
}

}  // namespace detail

inline Eigen::VectorXd policy_forward(const MlpView& policy, std::span<const double> obs)
{
  const Eigen::Map<const Eigen::VectorXd> x(obs.data(), static_cast<Eigen::Index>(obs.size()));
  detail::require_finite(x, "observation");
  return log_softmax(forward(policy, x).result()).array().exp();
}

/// Inverse-CDF draw. Zero-probability actions are never returned.
inline int sample_action(std::span<const double> probs, Rng& rng)
{
  const double u = uniform01(rng);
  double cumulative = 0.0;
  int last_positive = 0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    if (probs[a] <= 0.0) continue;
    last_positive = static_cast<int>(a);
    cumulative += probs[a];
    if (u < cumulative) return last_positive;
  }
  return last_positive;
}

/// Gradient of sum_s weight_s * log pi(action_s | input_s) for a forward
/// pass already computed on the inputs.
inline void accumulate_logprob_gradient(const MlpView& policy, const ForwardPass& pass, const Eigen::MatrixXd& logp,
                                        std::span<const int> actions, std::span<const double> weights,
                                        Eigen::Ref<Eigen::VectorXd> grad)
{
  const Eigen::Index n = logp.cols();
  if (static_cast<Eigen::Index>(actions.size()) != n || static_cast<Eigen::Index>(weights.size()) != n)
    throw std::invalid_argument("actions and weights must match the batch");
  Eigen::MatrixXd delta = -(logp.array().exp()).matrix();
  for (Eigen::Index s = 0; s < n; ++s) {
    delta(actions[static_cast<std::size_t>(s)], s) += 1.0;
    delta.col(s) *= weights[static_cast<std::size_t>(s)];
  }
  backward(policy, pass, std::move(delta), grad);
}

inline Eigen::VectorXd logprob_gradient(const MlpView& policy, std::span<const double> obs, int action)
{
  const Eigen::Map<const Eigen::VectorXd> x(obs.data(), static_cast<Eigen::Index>(obs.size()));
  detail::require_finite(x, "observation");
  const ForwardPass pass = forward(policy, x);
  const Eigen::MatrixXd logp = log_softmax(pass.result());
  detail::require_finite(logp, "log-probability (diverged parameters?)");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy.shape().param_count());
  const double one = 1.0;
  accumulate_logprob_gradient(policy, pass, logp, std::span{&action, 1}, std::span{&one, 1}, grad);
  detail::require_finite(grad, "log-probability gradient");
  return grad;
}

inline double critic_forward(const MlpView& critic, std::span<const double> obs)
{
  const Eigen::Map<const Eigen::VectorXd> x(obs.data(), static_cast<Eigen::Index>(obs.size()));
  detail::require_finite(x, "observation");
  return forward(critic, x).result()(0, 0);
}

/// Mean squared error between predictions and targets; inputs are columns.
inline double critic_loss(const MlpView& critic, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets)
{
  const Eigen::RowVectorXd pred = forward(critic, inputs).result().row(0);
  return (pred.transpose() - targets).squaredNorm() / static_cast<double>(targets.size());
}

inline Eigen::VectorXd critic_loss_gradient(const MlpView& critic, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets)
{
  if (inputs.cols() == 0 || inputs.cols() != targets.size()) throw std::invalid_argument("critic batch must be nonempty and aligned");
  const ForwardPass pass = forward(critic, inputs);
  const double scale = 2.0 / static_cast<double>(targets.size());
  Eigen::MatrixXd delta = scale * (pass.result().row(0).transpose() - targets).transpose();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(critic.shape().param_count());
  backward(critic, pass, std::move(delta), grad);
  return grad;
}

/// One full-batch gradient step on the mean squared error.
inline MlpParams critic_update(const MlpParams& critic, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, double lr)
{
  MlpParams next = critic;
  if (lr == 0.0) {
    if (inputs.cols() == 0) throw std::invalid_argument("critic batch must be nonempty");
    return next;
  }
  next.values -= lr * critic_loss_gradient(critic.view(), inputs, targets);
  return next;
}

}  // namespace depaint
