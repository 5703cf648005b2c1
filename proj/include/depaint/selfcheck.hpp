#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "depaint/trainer.hpp"

namespace depaint {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string fmt(const char* f, double a, double b = 0.0)
{
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

}  // namespace detail

/// Row/column sums and spectral gap of the Metropolis matrix for every
/// topology with 2..max_agents agents.
inline CheckResult check_doubly_stochastic(std::size_t max_agents = 16)
{
  CheckResult r{"doubly stochastic mixing", true, ""};
  double worst_sum = 0.0;
  double worst_lambda = 0.0;
  for (TopologyKind kind : {TopologyKind::ring, TopologyKind::dense, TopologyKind::bipartite}) {
    for (std::size_t n = kind == TopologyKind::bipartite ? 2 : 3; n <= max_agents; ++n) {
      const WeightMatrix w = metropolis_weights(build_graph(kind, n));
      const Eigen::MatrixXd& m = w.matrix();
      const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
      worst_sum = std::max({worst_sum, (m * ones - ones).cwiseAbs().maxCoeff(), (m.transpose() * ones - ones).cwiseAbs().maxCoeff()});
      worst_lambda = std::max(worst_lambda, second_largest_eigenvalue_magnitude(w));
    }
  }
  r.passed = worst_sum <= 1e-12 && worst_lambda < 1.0;
  r.detail = detail::fmt("max |row/col sum - 1| = %.3g, max |lambda2| = %.6f", worst_sum, worst_lambda);
  return r;
}

/// Analytic log-prob and critic-loss gradients against central differences.
inline CheckResult check_gradients(std::size_t trials = 10, std::uint64_t seed = 7)
{
  CheckResult r{"gradient finite differences", true, ""};
  Rng rng = derive_rng(seed, 0, Phase::perturb);
  double worst = 0.0;
  const double eps = 1e-6;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    MlpParams pol = initial_params(MlpShape::policy(), rng);
    MlpParams cri = initial_params(MlpShape::critic(), rng);
    std::vector<double> obs(kObservationSize);
    for (auto& o : obs) o = uniform(rng, -1.0, 1.0);
    const int action = static_cast<int>(rng() % kNumActions);
    const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
    const Eigen::VectorXd target = Eigen::VectorXd::Constant(1, uniform(rng, -2.0, 2.0));

    const Eigen::VectorXd g_pol = logprob_gradient(pol.view(), obs, action);
    const Eigen::VectorXd g_cri = critic_loss_gradient(cri.view(), x, target);
    Eigen::VectorXd fd_pol(g_pol.size());
    Eigen::VectorXd fd_cri(g_cri.size());
    auto logp = [&] { return std::log(policy_forward(pol.view(), obs)(action)); };
    auto loss = [&] { return critic_loss(cri.view(), x, target); };
    for (Eigen::Index i = 0; i < fd_pol.size(); ++i) {
      const double keep = pol.values(i);
      pol.values(i) = keep + eps;
      const double up = logp();
      pol.values(i) = keep - eps;
      const double down = logp();
      pol.values(i) = keep;
      fd_pol(i) = (up - down) / (2 * eps);
    }
    for (Eigen::Index i = 0; i < fd_cri.size(); ++i) {
      const double keep = cri.values(i);
      cri.values(i) = keep + eps;
      const double up = loss();
      cri.values(i) = keep - eps;
      const double down = loss();
      cri.values(i) = keep;
      fd_cri(i) = (up - down) / (2 * eps);
    }
    worst = std::max(worst, (g_pol - fd_pol).norm() / std::max({g_pol.norm(), fd_pol.norm(), 1e-12}));
    worst = std::max(worst, (g_cri - fd_cri).norm() / std::max({g_cri.norm(), fd_cri.norm(), 1e-12}));
  }
  r.passed = worst < 1e-4;
  r.detail = detail::fmt("max relative error = %.3g over %g triples", worst, static_cast<double>(trials));
  return r;
}

/// Sum over agents of the tracking variables equals the sum of the current
/// momentum estimates after every round of a short training run.
inline CheckResult check_tracking_conservation(std::size_t iterations = 10)
{
  CheckResult r{"gradient tracking conservation", true, ""};
  RunConfig cfg;
  cfg.iterations = iterations;
  cfg.horizon = 5;
  cfg.batch_size = 2;
  cfg.env = EnvConfig::coop_nav(3);
  double worst = 0.0;
  TrainOptions opts;
  opts.observer = [&](const IterationView& v) {
    ParamVector sx = ParamVector::Zero(v.agents.front().tracker.x.size());
    ParamVector su = sx;
    double sy = 0.0;
    double sv = 0.0;
    for (const auto& a : v.agents) {
      sx += a.tracker.x;
      su += a.momentum.u;
      sy += a.tracker.y;
      sv += a.momentum.v;
    }
    const double scale = std::max(1.0, su.cwiseAbs().maxCoeff());
    worst = std::max({worst, (sx - su).cwiseAbs().maxCoeff() / scale, std::abs(sy - sv) / std::max(1.0, std::abs(sv))});
  };
  train(cfg, opts);
  r.passed = worst < 1e-9;
  r.detail = detail::fmt("max relative drift = %.3g", worst);
  return r;
}

inline std::vector<CheckResult> run_self_checks()
{
  return {check_doubly_stochastic(), check_gradients(), check_tracking_conservation()};
}

}  // namespace depaint
