#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "depaint/consensus.hpp"
#include "depaint/envs.hpp"
#include "depaint/estimator.hpp"
#include "depaint/policy.hpp"
#include "depaint/rng.hpp"
#include "depaint/topology.hpp"

namespace depaint {

/// What the momentum recursion subtracts as the "previous raw estimate".
enum class MomentumReference {
  same_batch,          // estimator under theta^{t-1}, lambda^{t-1} on the current batch
  previous_iteration,  // the raw estimate computed at iteration t-1
};

inline MomentumReference parse_momentum_reference(std::string_view name)
{
  if (name == "same_batch") return MomentumReference::same_batch;
  if (name == "previous_iteration") return MomentumReference::previous_iteration;
  throw std::invalid_argument("unknown momentum reference (expected same_batch or previous_iteration)");
}

inline std::string_view to_string(MomentumReference r)
{
  return r == MomentumReference::same_batch ? "same_batch" : "previous_iteration";
}

struct RunConfig {
  std::size_t iterations = 2000;
  std::size_t horizon = 20;
  std::size_t batch_size = 8;
  StepSizes eta{};
  double critic_lr = 1e-3;
  double beta = 0.2;
  bool momentum = true;
  MomentumReference momentum_reference = MomentumReference::same_batch;
  ConstraintSpec constraint{};
  double lambda_max = 50.0;
  double lambda_init = 0.0;
  TopologyKind topology = TopologyKind::ring;
  EnvConfig env{};
  std::uint64_t seed = 0;
  BaselineMode baseline = BaselineMode::initial_state;
  WeightClip importance_clip{};
  double grad_clip = 100.0;  // max L2 norm of a local primal estimate; 0 = off
  std::size_t workers = 1;
  bool record_wall_time = false;
  std::string output;

  void validate() const
  {
    if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (!(eta.primal > 0.0)) throw std::invalid_argument("eta1 must be positive");
    if (!(eta.dual > 0.0)) throw std::invalid_argument("eta2 must be positive");
    if (!(critic_lr > 0.0)) throw std::invalid_argument("critic_lr must be positive");
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must be in (0,1]");
    constraint.validate();
    if (!(lambda_max >= 0.0)) throw std::invalid_argument("lambda_max must be nonnegative");
    if (!(lambda_init >= 0.0 && lambda_init <= lambda_max)) throw std::invalid_argument("lambda_init must be in [0, lambda_max]");
    if (!(importance_clip.min > 0.0 && importance_clip.min <= importance_clip.max))
      throw std::invalid_argument("importance weight clip must satisfy 0 < min <= max");
    if (!(grad_clip >= 0.0) || !std::isfinite(grad_clip)) throw std::invalid_argument("grad_clip must be finite and nonnegative");
    if (workers < 1) throw std::invalid_argument("workers must be at least 1");
    env.validate();
  }
};

struct MetricsRecord {
  std::size_t iteration = 0;
  double obj_return = 0.0;
  double util_return = 0.0;
  double peak_violation_rate = 0.0;
  double consensus_gap = 0.0;
  double mean_lambda = 0.0;
  double wall_ms = 0.0;
};

/// Per-agent summary of one sampled batch.
struct BatchStats {
  double objective = 0.0;       // mean discounted reward return of the agent
  double utility = 0.0;         // mean discounted raw utility return
  double violation_rate = 0.0;  // fraction of the agent's steps with K < k
};

/// Everything one agent owns during training. After iteration t completes:
/// theta = theta^{t+1}, tracker.x = x^{t+1}, tracker.prev_u = u_hat^t.
struct AgentState {
  JointParams theta;
  JointParams theta_prev;
  DualState dual;
  double lambda_prev = 0.0;
  double lambda_half = 0.0;
  MlpParams reward_critic;
  MlpParams utility_critic;
  TrackerState tracker;
  GradEstimates raw;       // u^t, v^t
  GradEstimates momentum;  // u_hat^t, v_hat^t
  double importance_weight = 1.0;
  BatchStats stats;
};

struct IterationView {
  std::size_t iteration;  // 0 = initialization pass
  std::span<const AgentState> agents;
  const WeightMatrix& weights;
};

struct TrainOptions {
  std::function<void(const IterationView&)> observer;
  // Half-width of independent uniform noise added to each agent's initial
  // copy; 0 keeps all copies identical.
  double init_perturbation = 0.0;
};

struct TrainResult {
  std::vector<JointParams> params;  // theta_i^{T+1} for every agent
  std::vector<MetricsRecord> metrics;
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads; returns after all
/// finish. The first failure by agent index is rethrown.
inline void for_each_agent(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn)
{
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < n; i += stride) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(workers, n);
  if (threads <= 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(run, w, threads);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// B episodes of length H where agent k acts with actors[k]. Episodes run in
/// lockstep; random draws are ordered (reset per episode, then per step: agent,
/// episode).
inline std::vector<Trajectory> rollout(const Game& game, std::span<const MlpView> actors, std::size_t episodes, std::size_t horizon,
                                       Rng& rng, const ConstraintSpec& spec)
{
  const std::size_t n = game.n_agents();
  if (actors.size() != n) throw std::invalid_argument("one actor per agent required");
  if (episodes < 1 || horizon < 1) throw std::invalid_argument("rollout needs at least one episode and one step");
  const auto H = static_cast<Eigen::Index>(horizon);
  const auto N = static_cast<Eigen::Index>(n);

  std::vector<Trajectory> out(episodes);
  std::vector<GlobalState> states(episodes);
  for (std::size_t b = 0; b < episodes; ++b) {
    states[b] = game.reset(rng);
    Trajectory& t = out[b];
    t.states.reserve(horizon);
    t.observations.assign(n, Eigen::MatrixXd(static_cast<Eigen::Index>(kObservationSize), H));
    t.actions.resize(N, H);
    t.rewards.resize(N, H);
    t.utilities.resize(N, H);
    t.augmented_utilities.resize(N, H);
    t.peak_values.resize(N, H);
    t.log_probs.resize(N, H);
  }

  Eigen::MatrixXd obs(static_cast<Eigen::Index>(kObservationSize), static_cast<Eigen::Index>(episodes));
  std::vector<int> joint(n);
  for (Eigen::Index h = 0; h < H; ++h) {
    for (std::size_t b = 0; b < episodes; ++b) out[b].states.push_back(states[b]);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t b = 0; b < episodes; ++b) {
        const Observation o = game.observe(states[b], k);
        obs.col(static_cast<Eigen::Index>(b)) = Eigen::Map<const Eigen::VectorXd>(o.data(), static_cast<Eigen::Index>(o.size()));
        out[b].observations[k].col(h) = obs.col(static_cast<Eigen::Index>(b));
      }
      detail::require_finite(obs, "observation");
      const Eigen::MatrixXd logp = log_softmax(forward(actors[k], obs).result());
      detail::require_finite(logp, "log-probability (diverged parameters?)");
      for (std::size_t b = 0; b < episodes; ++b) {
        const Eigen::VectorXd probs = logp.col(static_cast<Eigen::Index>(b)).array().exp();
        const int a = sample_action(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())), rng);
        out[b].actions(static_cast<Eigen::Index>(k), h) = a;
        out[b].log_probs(static_cast<Eigen::Index>(k), h) = logp(a, static_cast<Eigen::Index>(b));
      }
    }
    for (std::size_t b = 0; b < episodes; ++b) {
      Trajectory& t = out[b];
      for (std::size_t k = 0; k < n; ++k) joint[k] = t.actions(static_cast<Eigen::Index>(k), h);
      StepOutcome res = game.step(states[b], joint);
      for (std::size_t k = 0; k < n; ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        t.rewards(r, h) = res.rewards[k];
        t.utilities(r, h) = res.utilities[k];
        t.peak_values(r, h) = res.peak_values[k];
        t.augmented_utilities(r, h) = augment_utility(res.utilities[k], res.peak_values[k], spec);
      }
      states[b] = std::move(res.next_state);
    }
  }
  return out;
}

/// Agent i's local sampling: every agent in the simulated episode acts with
/// its slice of the single joint copy theta_i.
inline std::vector<Trajectory> sample_trajectories(const Game& game, const JointParams& theta, std::size_t batch_size,
                                                   std::size_t horizon, Rng& rng, const ConstraintSpec& spec)
{
  if (theta.agents != game.n_agents()) throw std::invalid_argument("parameter copy does not cover every agent");
  std::vector<MlpView> actors;
  for (std::size_t k = 0; k < theta.agents; ++k) actors.push_back(theta.slice(k));
  return rollout(game, actors, batch_size, horizon, rng, spec);
}

inline BatchStats batch_stats(std::span<const Trajectory> batch, std::size_t agent, const ConstraintSpec& spec)
{
  BatchStats s;
  std::size_t steps = 0;
  std::size_t violations = 0;
  const auto row = static_cast<Eigen::Index>(agent);
  for (const auto& t : batch) {
    s.objective += discounted_return(t.rewards.row(row), spec.gamma);
    s.utility += discounted_return(t.utilities.row(row), spec.gamma);
    for (Eigen::Index h = 0; h < t.peak_values.cols(); ++h) violations += t.peak_values(row, h) < spec.k ? 1 : 0;
    steps += t.horizon();
  }
  s.objective /= static_cast<double>(batch.size());
  s.utility /= static_cast<double>(batch.size());
  s.violation_rate = static_cast<double>(violations) / static_cast<double>(steps);
  return s;
}

namespace detail {

struct CriticBatch {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd reward_targets;
  Eigen::VectorXd utility_targets;
};

// Monte-Carlo discounted return targets: from the initial state only, or
// reward-to-go from every visited state.
inline CriticBatch critic_targets(std::span<const Trajectory> batch, std::size_t agent, double gamma, BaselineMode mode)
{
  const auto row = static_cast<Eigen::Index>(agent);
  const std::size_t horizon = batch.front().horizon();
  const std::size_t per = mode == BaselineMode::initial_state ? 1 : horizon;
  CriticBatch cb;
  const auto count = static_cast<Eigen::Index>(per * batch.size());
  cb.inputs.resize(static_cast<Eigen::Index>(kObservationSize), count);
  cb.reward_targets.resize(count);
  cb.utility_targets.resize(count);
  Eigen::Index col = 0;
  for (const auto& t : batch) {
    double g_r = 0.0;
    double g_c = 0.0;
    std::vector<double> to_go_r(horizon);
    std::vector<double> to_go_c(horizon);
    for (std::size_t h = horizon; h-- > 0;) {
      g_r = t.rewards(row, static_cast<Eigen::Index>(h)) + gamma * g_r;
      g_c = t.augmented_utilities(row, static_cast<Eigen::Index>(h)) + gamma * g_c;
      to_go_r[h] = g_r;
      to_go_c[h] = g_c;
    }
    for (std::size_t h = 0; h < per; ++h, ++col) {
      cb.inputs.col(col) = t.observations[agent].col(static_cast<Eigen::Index>(h));
      cb.reward_targets(col) = to_go_r[h];
      cb.utility_targets(col) = to_go_c[h];
    }
  }
  return cb;
}

inline MlpParams initial_critic(Rng& rng)
{
  // Zero output layer: the value baseline starts at exactly 0.
  MlpParams c = initial_params(MlpShape::critic(), rng);
  const std::size_t last = c.shape.layers() - 1;
  c.values.tail(c.values.size() - c.shape.weight_offset(last)).setZero();
  return c;
}

inline std::string at(std::size_t iteration, std::size_t agent)
{
  return "iteration " + std::to_string(iteration) + ", agent " + std::to_string(agent);
}

}  // namespace detail

/// Rescales g onto the L2 ball of radius max_norm (no-op when max_norm is 0).
inline void clip_norm(ParamVector& g, double max_norm)
{
  if (max_norm <= 0.0) return;
  const double norm = g.norm();
  if (norm > max_norm) g *= max_norm / norm;
}

/// Sampling, critic updates and (momentum) gradient estimation for one agent
/// at iteration t (t = 0 is the initialization pass).
inline void local_estimate(AgentState& a, const Game& game, const RunConfig& cfg, std::size_t agent, std::size_t t)
{
  Rng rng = derive_rng(cfg.seed, agent, Phase::sample, t);
  const std::vector<Trajectory> batch = sample_trajectories(game, a.theta, cfg.batch_size, cfg.horizon, rng, cfg.constraint);
  a.stats = batch_stats(batch, agent, cfg.constraint);

  const detail::CriticBatch cb = detail::critic_targets(batch, agent, cfg.constraint.gamma, cfg.baseline);
  a.reward_critic = critic_update(a.reward_critic, cb.inputs, cb.reward_targets, cfg.critic_lr);
  a.utility_critic = critic_update(a.utility_critic, cb.inputs, cb.utility_targets, cfg.critic_lr);

  const double gamma = cfg.constraint.gamma;
  const std::vector<double> w_reward = reinforce_weights(batch, agent, Channel::reward, a.reward_critic, gamma, cfg.baseline);
  const std::vector<double> w_utility = reinforce_weights(batch, agent, Channel::utility, a.utility_critic, gamma, cfg.baseline);
  // grad_R + lambda grad_C evaluated as one score-function pass with combined weights.
  auto lagrangian_weights = [&](double lambda) {
    std::vector<double> w(w_reward.size());
    for (std::size_t s = 0; s < w.size(); ++s) w[s] = w_reward[s] + lambda * w_utility[s];
    return w;
  };

  const JointPolicyEvaluation current(a.theta, batch);
  GradEstimates previous_raw = std::move(a.raw);
  a.raw.u = current.score_gradient(lagrangian_weights(a.dual.lambda));
  clip_norm(a.raw.u, cfg.grad_clip);
  a.raw.v = lagrangian_dual_gradient(batch, agent, cfg.constraint);

  if (t == 0 || !cfg.momentum || cfg.beta == 1.0) {
    a.momentum = a.raw;
    a.importance_weight = 1.0;
    return;
  }

  // Batch-mean importance weight of the previous iterate against the current one.
  const JointPolicyEvaluation previous(a.theta_prev, batch);
  const Eigen::VectorXd log_new = current.trajectory_log_probs();
  const Eigen::VectorXd log_old = previous.trajectory_log_probs();
  double omega = 0.0;
  for (Eigen::Index b = 0; b < log_new.size(); ++b)
    omega += std::clamp(std::exp(log_old(b) - log_new(b)), cfg.importance_clip.min, cfg.importance_clip.max);
  omega /= static_cast<double>(log_new.size());
  a.importance_weight = omega;

  if (cfg.momentum_reference == MomentumReference::same_batch) {
    previous_raw.u = previous.score_gradient(lagrangian_weights(a.lambda_prev));
    clip_norm(previous_raw.u, cfg.grad_clip);
    previous_raw.v = a.raw.v;
  }
  a.momentum.u = momentum_update(a.raw.u, previous_raw.u, a.tracker.prev_u, cfg.beta, omega);
  a.momentum.v = momentum_update(a.raw.v, previous_raw.v, a.tracker.prev_v, cfg.beta, omega);
}

inline TrainResult train(const RunConfig& cfg, const Game& game, const TrainOptions& options = {})
{
  cfg.validate();
  const std::size_t n = game.n_agents();
  const WeightMatrix w = metropolis_weights(build_graph(cfg.topology, n));
  const auto start = std::chrono::steady_clock::now();

  // Shared initialization: every agent starts from the same joint parameters.
  Rng init = derive_rng(cfg.seed, 0, Phase::initialize);
  const MlpShape shape = MlpShape::policy(game.n_actions());
  std::vector<MlpParams> slices;
  for (std::size_t k = 0; k < n; ++k) slices.push_back(initial_params(shape, init));
  const JointParams theta0 = JointParams::concatenate(slices);
  const MlpParams reward_critic0 = detail::initial_critic(init);
  const MlpParams utility_critic0 = detail::initial_critic(init);

  std::vector<AgentState> agents(n);
  for (auto& a : agents) {
    a.theta = theta0;
    a.theta_prev = theta0;
    a.dual.lambda = cfg.lambda_init;
    a.lambda_prev = cfg.lambda_init;
    a.lambda_half = cfg.lambda_init;
    a.reward_critic = reward_critic0;
    a.utility_critic = utility_critic0;
    a.tracker.x = ParamVector::Zero(theta0.values.size());
    a.tracker.prev_u = ParamVector::Zero(theta0.values.size());
  }
  if (options.init_perturbation > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      Rng noise = derive_rng(cfg.seed, i, Phase::perturb);
      for (Eigen::Index k = 0; k < agents[i].theta.values.size(); ++k)
        agents[i].theta.values(k) += uniform(noise, -options.init_perturbation, options.init_perturbation);
      agents[i].theta_prev = agents[i].theta;
    }
  }

  std::vector<ParamVector> next_x(n);
  std::vector<double> next_y(n);
  std::vector<ParamsUpdate> next_params(n);

  auto estimate_all = [&](std::size_t t) {
    for_each_agent(n, cfg.workers, [&](std::size_t i) {
      try {
        local_estimate(agents[i], game, cfg, i, t);
      } catch (const std::exception& e) {
        throw std::runtime_error(detail::at(t, i) + ": " + e.what());
      }
    });
  };

  // x_i' = sum_j W_ij (x_j + u_hat_j - u_hat_j_prev), same for y.
  auto track_all = [&] {
    for_each_agent(n, cfg.workers, [&](std::size_t i) {
      std::vector<TrackingInput<ParamVector>> in_x;
      std::vector<TrackingInput<double>> in_y;
      for (const auto& e : w.row(i)) {
        const AgentState& nb = agents[e.agent];
        in_x.push_back({e.weight, std::cref(nb.tracker.x), std::cref(nb.momentum.u), std::cref(nb.tracker.prev_u)});
        in_y.push_back({e.weight, std::cref(nb.tracker.y), std::cref(nb.momentum.v), std::cref(nb.tracker.prev_v)});
      }
      next_x[i] = update_tracking<ParamVector>(in_x);
      next_y[i] = update_tracking<double>(in_y);
    });
    for (std::size_t i = 0; i < n; ++i) {
      agents[i].tracker.x = std::move(next_x[i]);
      agents[i].tracker.y = next_y[i];
      agents[i].tracker.prev_u = agents[i].momentum.u;
      agents[i].tracker.prev_v = agents[i].momentum.v;
    }
  };

  auto mix_all = [&](std::size_t t) {
    for_each_agent(n, cfg.workers, [&](std::size_t i) {
      std::vector<ParamsInput> in;
      std::size_t self = 0;
      for (const auto& e : w.row(i)) {
        const AgentState& nb = agents[e.agent];
        if (e.agent == i) self = in.size();
        in.push_back({e.weight, std::cref(nb.theta.values), nb.dual.lambda, std::cref(nb.tracker.x), nb.tracker.y});
      }
      next_params[i] = update_params(cfg.eta, in, self, cfg.lambda_max);
      if (!next_params[i].theta.allFinite() || !std::isfinite(next_params[i].dual.lambda))
        throw std::runtime_error("non-finite parameters at " + detail::at(t, i));
    });
    for (std::size_t i = 0; i < n; ++i) {
      AgentState& a = agents[i];
      a.theta_prev.values.swap(a.theta.values);
      a.theta.values = std::move(next_params[i].theta);
      a.lambda_prev = a.dual.lambda;
      a.dual = next_params[i].dual;
      a.lambda_half = next_params[i].lambda_unprojected;
    }
  };

  TrainResult result;
  result.metrics.reserve(cfg.iterations);

  estimate_all(0);
  track_all();
  if (options.observer) options.observer({0, agents, w});

  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    estimate_all(t);
    track_all();
    mix_all(t);

    MetricsRecord m;
    m.iteration = t;
    std::vector<ParamVector> thetas;
    thetas.reserve(n);
    for (const auto& a : agents) {
      m.obj_return += a.stats.objective;
      m.util_return += a.stats.utility;
      m.peak_violation_rate += a.stats.violation_rate;
      m.mean_lambda += a.dual.lambda;
      thetas.push_back(a.theta.values);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    m.obj_return *= inv_n;
    m.util_return *= inv_n;
    m.peak_violation_rate *= inv_n;
    m.mean_lambda *= inv_n;
    m.consensus_gap = consensus_gap(thetas);
    if (cfg.record_wall_time)
      m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.metrics.push_back(m);

    if (options.observer) options.observer({t, agents, w});
  }

  for (const auto& a : agents) result.params.push_back(a.theta);
  return result;
}

inline TrainResult train(const RunConfig& cfg, const TrainOptions& options = {})
{
  const ParticleGame game(cfg.env);
  return train(cfg, game, options);
}

struct EvalResult {
  double objective = 0.0;
  double utility = 0.0;
  double violation_rate = 0.0;
};

/// Decentralized execution: agent k acts with its own slice of its own copy.
inline EvalResult evaluate(std::span<const JointParams> per_agent, const Game& game, std::size_t episodes, std::size_t horizon,
                           Rng& rng, const ConstraintSpec& spec)
{
  const std::size_t n = game.n_agents();
  if (per_agent.size() != n) throw std::invalid_argument("need one parameter copy per agent");
  std::vector<MlpView> actors;
  for (std::size_t k = 0; k < n; ++k) actors.push_back(per_agent[k].slice(k));
  const std::vector<Trajectory> eps = rollout(game, actors, episodes, horizon, rng, spec);
  EvalResult r;
  for (std::size_t k = 0; k < n; ++k) {
    const BatchStats s = batch_stats(eps, k, spec);
    r.objective += s.objective;
    r.utility += s.utility;
    r.violation_rate += s.violation_rate;
  }
  r.objective /= static_cast<double>(n);
  r.utility /= static_cast<double>(n);
  r.violation_rate /= static_cast<double>(n);
  return r;
}

inline constexpr const char* kMetricsHeader = "iter,obj_return,util_return,peak_violation_rate,consensus_gap,mean_lambda,wall_ms";

inline std::string format_metrics_csv(std::span<const MetricsRecord> records)
{
  std::string out = std::string(kMetricsHeader) + "\n";
  char line[512];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.iteration, r.obj_return, r.util_return,
                  r.peak_violation_rate, r.consensus_gap, r.mean_lambda, r.wall_ms);
    out += line;
  }
  return out;
}

inline void write_metrics_csv(const std::string& path, std::span<const MetricsRecord> records)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open metrics file '" + path + "' for writing");
  f << format_metrics_csv(records);
  if (!f) throw std::runtime_error("failed writing metrics file '" + path + "'");
}

}  // namespace depaint
