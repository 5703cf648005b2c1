#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "depaint/envs.hpp"
#include "depaint/policy.hpp"

namespace depaint {

struct ConstraintSpec {
  double c = 10.0;         // average-constraint threshold
  double k = 1.0;          // peak threshold
  double penalty = 100.0;  // M
  double gamma = 0.99;

  void validate() const
  {
    if (!(penalty >= 0.0) || !std::isfinite(penalty)) throw std::invalid_argument("penalty M must be finite and nonnegative");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
    if (!std::isfinite(c) || !std::isfinite(k)) throw std::invalid_argument("constraint thresholds must be finite");
  }
};

/// One finite-horizon episode. Column h of every matrix is step h; row i is
/// agent i. States are recorded before the joint action is applied.
struct Trajectory {
  std::vector<GlobalState> states;
  std::vector<Eigen::MatrixXd> observations;  // per agent, kObservationSize x H
  Eigen::MatrixXi actions;
  Eigen::MatrixXd rewards;
  Eigen::MatrixXd utilities;            // raw C
  Eigen::MatrixXd augmented_utilities;  // C - M * 1{K < k}
  Eigen::MatrixXd peak_values;
  Eigen::MatrixXd log_probs;  // per-agent log pi under the generating parameters

  std::size_t horizon() const { return static_cast<std::size_t>(actions.cols()); }
  std::size_t agents() const { return static_cast<std::size_t>(actions.rows()); }
};

enum class Channel { reward, utility };

/// Where the critic baseline enters the REINFORCE estimator.
enum class BaselineMode {
  initial_state,  // one advantage per trajectory: G_0 - V(s^0)
  per_step,       // reward-to-go from h minus gamma^h V(s^h), per step
};

inline BaselineMode parse_baseline_mode(std::string_view name)
{
  if (name == "initial_state") return BaselineMode::initial_state;
  if (name == "per_step") return BaselineMode::per_step;
  throw std::invalid_argument("unknown baseline mode (expected initial_state or per_step)");
}

inline std::string_view to_string(BaselineMode m) { return m == BaselineMode::initial_state ? "initial_state" : "per_step"; }

inline double augment_utility(double utility, double peak_value, const ConstraintSpec& spec)
{
  return peak_value < spec.k ? utility - spec.penalty : utility;
}

inline double discounted_return(std::span<const double> values, double gamma)
{
  if (values.empty()) throw std::invalid_argument("discounted return of an empty sequence");
  double total = 0.0;
  double discount = 1.0;
  for (double v : values) {
    total += discount * v;
    discount *= gamma;
  }
  return total;
}

inline double discounted_return(const Eigen::Ref<const Eigen::RowVectorXd>& values, double gamma)
{
  return discounted_return(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())), gamma);
}

namespace detail {

inline void require_batch(std::span<const Trajectory> batch)
{
  if (batch.empty()) throw std::invalid_argument("empty trajectory batch");
  const std::size_t h = batch.front().horizon();
  if (h == 0) throw std::invalid_argument("trajectory horizon must be at least 1");
  for (const auto& t : batch)
    if (t.horizon() != h || t.agents() != batch.front().agents()) throw std::invalid_argument("trajectories in a batch must share shape");
}

inline const Eigen::MatrixXd& channel_values(const Trajectory& t, Channel channel)
{
  return channel == Channel::reward ? t.rewards : t.augmented_utilities;
}

}  // namespace detail

/// Stacks one agent's observations from every trajectory; column b*H + h.
inline Eigen::MatrixXd stack_observations(std::span<const Trajectory> batch, std::size_t agent)
{
  detail::require_batch(batch);
  const auto h = static_cast<Eigen::Index>(batch.front().horizon());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(kObservationSize), h * static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) x.middleCols(static_cast<Eigen::Index>(b) * h, h) = batch[b].observations.at(agent);
  return x;
}

/// Forward passes of every agent's policy slice over a batch, shared by the
/// score-function gradient and the importance weights.
class JointPolicyEvaluation {
public:
  JointPolicyEvaluation(const JointParams& params, std::span<const Trajectory> batch) : params_(&params)
  {
    detail::require_batch(batch);
    if (batch.front().agents() != params.agents) throw std::invalid_argument("trajectory agent count does not match parameters");
    horizon_ = batch.front().horizon();
    trajectories_ = batch.size();
    for (std::size_t k = 0; k < params.agents; ++k) {
      Slice s;
      s.pass = forward(params.slice(k), stack_observations(batch, k));
      s.log_probs = log_softmax(s.pass.result());
      detail::require_finite(s.log_probs, "log-probability (diverged parameters?)");
      s.actions.reserve(horizon_ * trajectories_);
      for (const auto& t : batch)
        for (std::size_t h = 0; h < horizon_; ++h) s.actions.push_back(t.actions(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(h)));
      slices_.push_back(std::move(s));
    }
  }

  std::size_t samples() const { return horizon_ * trajectories_; }

  /// Joint log pi(a^h | s^h) summed over agents and steps, per trajectory.
  Eigen::VectorXd trajectory_log_probs() const
  {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(trajectories_));
    for (const auto& s : slices_) {
      for (std::size_t b = 0; b < trajectories_; ++b) {
        double sum = 0.0;
        for (std::size_t h = 0; h < horizon_; ++h) {
          const std::size_t col = b * horizon_ + h;
          sum += s.log_probs(s.actions[col], static_cast<Eigen::Index>(col));
        }
        out(static_cast<Eigen::Index>(b)) += sum;
      }
    }
    return out;
  }

  /// sum over samples of weight * grad log pi_theta(a|s), over the full joint vector.
  ParamVector score_gradient(std::span<const double> weights) const
  {
    if (weights.size() != samples()) throw std::invalid_argument("one weight per sample required");
    ParamVector grad = ParamVector::Zero(params_->values.size());
    for (std::size_t k = 0; k < slices_.size(); ++k) {
      accumulate_logprob_gradient(params_->slice(k), slices_[k].pass, slices_[k].log_probs, slices_[k].actions, weights,
                                  grad.segment(params_->slice_offset(k), params_->slice_size()));
    }
    detail::require_finite(grad, "policy gradient");
    return grad;
  }

private:
  struct Slice {
    ForwardPass pass;
    Eigen::MatrixXd log_probs;
    std::vector<int> actions;
  };

  const JointParams* params_;
  std::size_t horizon_ = 0;
  std::size_t trajectories_ = 0;
  std::vector<Slice> slices_;
};

/// Per-sample REINFORCE weights (already divided by B) for one agent's channel.
inline std::vector<double> reinforce_weights(std::span<const Trajectory> batch, std::size_t agent, Channel channel,
                                             const MlpParams& critic, double gamma, BaselineMode mode)
{
  detail::require_batch(batch);
  const std::size_t horizon = batch.front().horizon();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<double> weights(horizon * batch.size());
  const auto row = static_cast<Eigen::Index>(agent);

  if (mode == BaselineMode::initial_state) {
    Eigen::MatrixXd starts(static_cast<Eigen::Index>(kObservationSize), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b) starts.col(static_cast<Eigen::Index>(b)) = batch[b].observations.at(agent).col(0);
    const Eigen::MatrixXd baseline = forward(critic.view(), starts).result();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const double ret = discounted_return(detail::channel_values(batch[b], channel).row(row), gamma);
      const double w = (ret - baseline(0, static_cast<Eigen::Index>(b))) * inv_b;
      std::fill_n(weights.begin() + static_cast<std::ptrdiff_t>(b * horizon), horizon, w);
    }
    return weights;
  }

  const Eigen::MatrixXd baseline = forward(critic.view(), stack_observations(batch, agent)).result();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Eigen::MatrixXd& f = detail::channel_values(batch[b], channel);
    std::vector<double> discount(horizon);
    double d = 1.0;
    for (std::size_t h = 0; h < horizon; ++h, d *= gamma) discount[h] = d;
    double to_go = 0.0;
    for (std::size_t h = horizon; h-- > 0;) {
      to_go += discount[h] * f(row, static_cast<Eigen::Index>(h));
      const std::size_t col = b * horizon + h;
      weights[col] = (to_go - discount[h] * baseline(0, static_cast<Eigen::Index>(col))) * inv_b;
    }
  }
  return weights;
}

/// Mini-batch REINFORCE estimate of grad J_i (reward or augmented utility)
/// over the full joint parameter vector.
inline ParamVector reinforce_gradient(std::span<const Trajectory> batch, std::size_t agent, Channel channel, const JointParams& params,
                                      const MlpParams& critic, double gamma, BaselineMode mode = BaselineMode::initial_state)
{
  const JointPolicyEvaluation eval(params, batch);
  return eval.score_gradient(reinforce_weights(batch, agent, channel, critic, gamma, mode));
}

inline ParamVector lagrangian_primal_gradient(const ParamVector& grad_reward, const ParamVector& grad_utility, double lambda)
{
  if (grad_reward.size() != grad_utility.size()) throw std::invalid_argument("gradient lengths differ");
  return grad_reward + lambda * grad_utility;
}

/// Mean discounted augmented utility over the batch, minus c.
inline double lagrangian_dual_gradient(std::span<const Trajectory> batch, std::size_t agent, const ConstraintSpec& spec)
{
  detail::require_batch(batch);
  double total = 0.0;
  for (const auto& t : batch) total += discounted_return(t.augmented_utilities.row(static_cast<Eigen::Index>(agent)), spec.gamma);
  return total / static_cast<double>(batch.size()) - spec.c;
}

struct WeightClip {
  double min = 0.1;
  double max = 10.0;
};

/// p(tau | old) / p(tau | new); transition terms cancel, leaving the product
/// of joint policy ratios. Clipped to [clip.min, clip.max].
inline double importance_weight(const Trajectory& traj, const JointParams& old_params, const JointParams& new_params,
                                WeightClip clip = {})
{
  const std::span<const Trajectory> one(&traj, 1);
  const double log_old = JointPolicyEvaluation(old_params, one).trajectory_log_probs()(0);
  const double log_new = JointPolicyEvaluation(new_params, one).trajectory_log_probs()(0);
  if (!std::isfinite(log_old) || !std::isfinite(log_new)) throw std::domain_error("non-finite trajectory log-probability");
  return std::clamp(std::exp(log_old - log_new), clip.min, clip.max);
}

/// Momentum variance reduction:
///   beta * current + (1 - beta) * (prev_momentum + current - omega * prev_raw).
/// beta == 1 returns current unchanged.
template <class T>
T momentum_update(const T& current, const T& prev_raw, const T& prev_momentum, double beta, double omega)
{
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must be in (0,1]");
  if constexpr (requires { current.size(); }) {
    if (current.size() != prev_raw.size() || current.size() != prev_momentum.size())
      throw std::invalid_argument("momentum operands have different shapes");
  }
  if (beta == 1.0) return current;
  return T(beta * current + (1.0 - beta) * (prev_momentum + current - omega * prev_raw));
}

struct GradEstimates {
  ParamVector u;
  double v = 0.0;
};

}  // namespace depaint
