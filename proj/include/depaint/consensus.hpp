#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "depaint/policy.hpp"

namespace depaint {

/// Gradient-tracking variables of one agent plus the previous momentum
/// estimates that the next tracking round subtracts.
struct TrackerState {
  ParamVector x;
  double y = 0.0;
  ParamVector prev_u;
  double prev_v = 0.0;
};

struct DualState {
  double lambda = 0.0;
};

/// One neighbor's contribution to a tracking round (self included).
template <class T>
struct TrackingInput {
  double weight;
  std::reference_wrapper<const T> x;
  std::reference_wrapper<const T> u_curr;
  std::reference_wrapper<const T> u_prev;
};

namespace detail {

template <class T>
void require_same_size(const T& a, const T& b)
{
  if constexpr (requires { a.size(); }) {
    if (a.size() != b.size()) throw std::invalid_argument("neighbor vectors have different lengths");
  }
}

template <class T>
T zero_like(const T& v)
{
  if constexpr (requires { v.size(); }) {
    return T::Zero(v.size());
  } else {
    return T{};
  }
}

}  // namespace detail

/// x_i' = sum_j W_ij (x_j + u_j - u_j_prev).
template <class T>
T update_tracking(std::span<const TrackingInput<T>> neighbors)
{
  if (neighbors.empty()) throw std::invalid_argument("tracking round needs at least one input");
  T out = detail::zero_like(neighbors.front().x.get());
  for (const auto& nb : neighbors) {
    detail::require_same_size(out, nb.x.get());
    detail::require_same_size(out, nb.u_curr.get());
    detail::require_same_size(out, nb.u_prev.get());
    out += nb.weight * (nb.x.get() + nb.u_curr.get() - nb.u_prev.get());
  }
  return out;
}

/// Overload taking parallel arrays, mirroring the procedure's argument list.
template <class T>
T update_tracking(std::span<const double> weights, std::span<const T> x, std::span<const T> u_curr, std::span<const T> u_prev)
{
  if (weights.size() != x.size() || weights.size() != u_curr.size() || weights.size() != u_prev.size())
    throw std::invalid_argument("tracking inputs are misaligned");
  std::vector<TrackingInput<T>> in;
  in.reserve(weights.size());
  for (std::size_t j = 0; j < weights.size(); ++j) in.push_back({weights[j], std::cref(x[j]), std::cref(u_curr[j]), std::cref(u_prev[j])});
  return update_tracking<T>(std::span<const TrackingInput<T>>(in));
}

struct ParamsInput {
  double weight;
  std::reference_wrapper<const ParamVector> theta;
  double lambda;
  std::reference_wrapper<const ParamVector> x_next;
  double y_next;
};

struct StepSizes {
  double primal = 3e-4;  // eta_1, ascent on theta
  double dual = 1e-3;    // eta_2, descent on lambda
};

struct ParamsUpdate {
  ParamVector theta;
  DualState dual;
  double lambda_unprojected = 0.0;
};

/// theta_i' = sum_j W_ij (theta_j + eta1 x_j');
/// lambda_i' = clamp(sum_j W_ij (lambda_j - eta2 y_j'), 0, lambda_max).
///
/// neighbors[self] is agent i. Since the weights sum to one the mixing term is
/// evaluated as theta_i + sum_j W_ij (theta_j - theta_i), which leaves
/// identical copies bit-for-bit identical.
inline ParamsUpdate update_params(StepSizes eta, std::span<const ParamsInput> neighbors, std::size_t self, double lambda_max)
{
  if (neighbors.empty()) throw std::invalid_argument("parameter round needs at least one input");
  if (self >= neighbors.size()) throw std::invalid_argument("self index outside the neighbor list");
  if (!(lambda_max >= 0.0)) throw std::invalid_argument("lambda_max must be nonnegative");
  const ParamVector& own = neighbors[self].theta.get();
  const double own_lambda = neighbors[self].lambda;
  ParamsUpdate out;
  out.theta = own;
  double half = own_lambda;
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    const auto& nb = neighbors[j];
    detail::require_same_size(out.theta, nb.theta.get());
    detail::require_same_size(out.theta, nb.x_next.get());
    if (j != self) {
      out.theta += nb.weight * (nb.theta.get() - own);
      half += nb.weight * (nb.lambda - own_lambda);
    }
    if (eta.primal != 0.0) out.theta += (nb.weight * eta.primal) * nb.x_next.get();
    half -= nb.weight * eta.dual * nb.y_next;
  }
  out.lambda_unprojected = half;
  // Written so that a negative half-step (including -0.0) maps to +0.0.
  out.dual.lambda = half > 0.0 ? std::min(half, lambda_max) : 0.0;
  return out;
}

/// max_i || theta_i - mean ||_inf.
inline double consensus_gap(std::span<const ParamVector> thetas)
{
  if (thetas.empty()) throw std::invalid_argument("consensus gap needs at least one agent");
  // Mean taken relative to the first copy so identical copies give exactly 0.
  const ParamVector& ref = thetas.front();
  ParamVector offset = ParamVector::Zero(ref.size());
  for (const auto& t : thetas) {
    detail::require_same_size(offset, t);
    offset += t - ref;
  }
  offset /= static_cast<double>(thetas.size());
  double gap = 0.0;
  for (const auto& t : thetas)
    if (t.size() > 0) gap = std::max(gap, ((t - ref) - offset).cwiseAbs().maxCoeff());
  return gap;
}

}  // namespace depaint
