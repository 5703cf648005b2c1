// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "depaint/trainer.hpp"
#include "stub_games.hpp"

using namespace depaint;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool passed;
  std::string detail;
};

std::string fmt(const char* f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- oracles

// Dense MLP evaluated straight from the flat column-major layout.
Eigen::VectorXd oracle_mlp(const std::vector<Eigen::Index>& dims, const Eigen::VectorXd& p, const Eigen::VectorXd& x)
{
  Eigen::VectorXd h = x;
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const Eigen::Index rows = dims[l + 1], cols = dims[l];
    const Eigen::Map<const Eigen::MatrixXd> w(p.data() + off, rows, cols);
    off += rows * cols;
    Eigen::VectorXd z = w * h + p.segment(off, rows);
    off += rows;
    if (l + 2 < dims.size()) z = z.array().tanh().matrix();
    h = z;
  }
  return h;
}

double oracle_logp(const Eigen::VectorXd& p, const Eigen::VectorXd& obs, int action)
{
  const Eigen::VectorXd z = oracle_mlp({20, 128, 64, 5}, p, obs);
  const double m = z.maxCoeff();
  return z(action) - m - std::log((z.array() - m).exp().sum());
}

double oracle_critic_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& obs, double target)
{
  const double v = oracle_mlp({20, 128, 64, 1}, p, obs)(0);
  return (v - target) * (v - target);
}

Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd p, double eps)
{
  Eigen::VectorXd g(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double keep = p(i);
    p(i) = keep + eps;
    const double up = f(p);
    p(i) = keep - eps;
    const double down = f(p);
    p(i) = keep;
    g(i) = (up - down) / (2 * eps);
  }
  return g;
}

double second_eigen_magnitude(const Eigen::MatrixXd& w)
{
  Eigen::EigenSolver<Eigen::MatrixXd> es(w);
  std::vector<double> mags;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mags.push_back(std::abs(es.eigenvalues()(i)));
  std::sort(mags.rbegin(), mags.rend());
  return mags.size() > 1 ? mags[1] : 0.0;
}

double max_deviation_from_mean(std::span<const AgentState> agents)
{
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(agents.front().theta.values.size());
  for (const auto& a : agents) mean += a.theta.values;
  mean /= static_cast<double>(agents.size());
  double gap = 0.0;
  for (const auto& a : agents) gap = std::max(gap, (a.theta.values - mean).cwiseAbs().maxCoeff());
  return gap;
}

double frobenius_deviation(std::span<const AgentState> agents)
{
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(agents.front().theta.values.size());
  for (const auto& a : agents) mean += a.theta.values;
  mean /= static_cast<double>(agents.size());
  double sq = 0.0;
  for (const auto& a : agents) sq += (a.theta.values - mean).squaredNorm();
  return std::sqrt(sq);
}

double window_mean(const std::vector<double>& v, std::size_t from, std::size_t to)
{
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to), 0.0) /
         static_cast<double>(to - from);
}

RunConfig coop_nav_config(std::size_t n, TopologyKind topo, std::uint64_t seed, std::size_t iterations)
{
  RunConfig c;
  c.env = EnvConfig::coop_nav(n);
  c.topology = topo;
  c.seed = seed;
  c.iterations = iterations;
  c.workers = 1;
  return c;
}

// ---------------------------------------------------------------- criteria

Outcome doubly_stochastic()
{
  const auto t0 = Clock::now();
  double worst_sum = 0.0, worst_l2 = 0.0, worst_lib = 0.0;
  bool nonneg = true;
  for (TopologyKind kind : {TopologyKind::ring, TopologyKind::dense, TopologyKind::bipartite}) {
    for (std::size_t n = kind == TopologyKind::bipartite ? 2 : 3; n <= 16; ++n) {
      const WeightMatrix w = metropolis_weights(build_graph(kind, n));
      for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0, col = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          row += w(i, j);
          col += w(j, i);
          nonneg = nonneg && w(i, j) >= 0.0;
        }
        worst_sum = std::max({worst_sum, std::abs(row - 1.0), std::abs(col - 1.0)});
      }
      const double l2 = second_eigen_magnitude(w.matrix());
      worst_l2 = std::max(worst_l2, l2);
      worst_lib = std::max(worst_lib, std::abs(l2 - second_largest_eigenvalue_magnitude(w)));
    }
  }
  const double secs = seconds_since(t0);
  return {worst_sum <= 1e-12 && worst_l2 < 1.0 && nonneg && worst_lib < 1e-6 && secs < 1.0,
          fmt("max |sum-1| = %.2e, max |lambda2| = %.6f, library vs eigensolver %.1e, %.3f s", worst_sum, worst_l2, worst_lib, secs)};
}

Outcome gradient_correctness()
{
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(0.0, 0.1);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    MlpParams pol = MlpParams::zeros(MlpShape::policy());
    MlpParams cri = MlpParams::zeros(MlpShape::critic());
    for (Eigen::Index i = 0; i < pol.values.size(); ++i) pol.values(i) = normal(rng);
    for (Eigen::Index i = 0; i < cri.values.size(); ++i) cri.values(i) = normal(rng);
    Eigen::VectorXd obs(20);
    for (auto& o : obs) o = unit(rng);
    const int action = static_cast<int>(rng() % 5);
    const double target = 2.0 * unit(rng);
    const std::vector<double> ov(obs.data(), obs.data() + 20);

    const Eigen::VectorXd g_pol = logprob_gradient(pol.view(), ov, action);
    const Eigen::VectorXd g_cri = critic_loss_gradient(cri.view(), obs, Eigen::VectorXd::Constant(1, target));
    const Eigen::VectorXd fd_pol =
        central_difference([&](const Eigen::VectorXd& p) { return oracle_logp(p, obs, action); }, pol.values, 1e-6);
    const Eigen::VectorXd fd_cri =
        central_difference([&](const Eigen::VectorXd& p) { return oracle_critic_loss(p, obs, target); }, cri.values, 1e-6);
    worst = std::max(worst, (g_pol - fd_pol).norm() / std::max(g_pol.norm(), fd_pol.norm()));
    worst = std::max(worst, (g_cri - fd_cri).norm() / std::max(g_cri.norm(), fd_cri.norm()));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 30.0, fmt("max relative error = %.2e over 50 triples, %.1f s", worst, secs)};
}

Outcome estimator_unbiased()
{
  const auto t0 = Clock::now();
  stubs::BanditGame game;
  game.peak_on_one = true;
  ConstraintSpec spec;
  spec.gamma = 0.9;
  spec.penalty = 3.0;
  Rng init(77);
  const MlpParams pol = initial_params(MlpShape::policy(2), init);
  const JointParams theta = JointParams::concatenate(std::span<const MlpParams>(&pol, 1));
  const MlpParams critic = initial_params(MlpShape::critic(), init);  // constant baseline on the single state

  // Exact gradient: sum over the 4 trajectories of p(tau) * grad log p(tau) * return(tau).
  const std::vector<double> ov(20, game.obs_value);
  const Eigen::VectorXd probs = policy_forward(pol.view(), ov);
  const Eigen::Index dim = theta.values.size();
  Eigen::VectorXd exact_r = Eigen::VectorXd::Zero(dim), exact_c = Eigen::VectorXd::Zero(dim);
  for (int a0 = 0; a0 < 2; ++a0)
    for (int a1 = 0; a1 < 2; ++a1) {
      const double p = probs(a0) * probs(a1);
      const Eigen::VectorXd score = logprob_gradient(pol.view(), ov, a0) + logprob_gradient(pol.view(), ov, a1);
      auto aug = [&](int a) { return game.utility[static_cast<std::size_t>(a)] - (a == 1 ? spec.penalty : 0.0); };
      const double ret_r = game.reward[static_cast<std::size_t>(a0)] + spec.gamma * game.reward[static_cast<std::size_t>(a1)];
      const double ret_c = aug(a0) + spec.gamma * aug(a1);
      exact_r += p * ret_r * score;
      exact_c += p * ret_c * score;
    }

  const int batches = 100000;
  Eigen::VectorXd sum_r = Eigen::VectorXd::Zero(dim), sq_r = sum_r, sum_c = sum_r, sq_c = sum_r;
  Rng rng(78);
  for (int b = 0; b < batches; ++b) {
    const auto batch = sample_trajectories(game, theta, 1, 2, rng, spec);
    const Eigen::VectorXd gr = reinforce_gradient(batch, 0, Channel::reward, theta, critic, spec.gamma);
    const Eigen::VectorXd gc = reinforce_gradient(batch, 0, Channel::utility, theta, critic, spec.gamma);
    sum_r += gr;
    sq_r += gr.cwiseAbs2();
    sum_c += gc;
    sq_c += gc.cwiseAbs2();
  }
  int outside = 0;
  double worst_z = 0.0;
  for (auto [sum, sq, exact] : {std::tie(sum_r, sq_r, exact_r), std::tie(sum_c, sq_c, exact_c)}) {
    const Eigen::VectorXd mean = sum / batches;
    const Eigen::VectorXd se = ((sq / batches - mean.cwiseAbs2()).cwiseMax(0.0) / (batches - 1.0)).cwiseSqrt();
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double diff = std::abs(mean(i) - exact(i));
      if (se(i) > 0.0) worst_z = std::max(worst_z, diff / se(i));
      if (diff > 3.0 * se(i) + 1e-12) ++outside;
    }
  }
  const double secs = seconds_since(t0);
  return {outside == 0 && secs < 120.0,
          fmt("%d of %ld components outside 3 SE (max |z| = %.2f), reward and augmented utility, %.1f s", outside,
              static_cast<long>(2 * dim), worst_z, secs)};
}

Outcome tracking_conservation()
{
  RunConfig cfg = coop_nav_config(3, TopologyKind::ring, 0, 200);
  Eigen::VectorXd telescoped, last_u_sum;
  double tele_v = 0.0, last_v_sum = 0.0;
  double worst = 0.0;
  std::size_t rounds = 0;
  TrainOptions opts;
  opts.observer = [&](const IterationView& v) {
    Eigen::VectorXd sx = Eigen::VectorXd::Zero(v.agents.front().tracker.x.size());
    Eigen::VectorXd su = sx;
    double sy = 0.0, sv = 0.0;
    for (const auto& a : v.agents) {
      sx += a.tracker.x;
      su += a.momentum.u;
      sy += a.tracker.y;
      sv += a.momentum.v;
    }
    if (v.iteration == 0) {
      telescoped = su;
      tele_v = sv;
    } else {
      telescoped += su - last_u_sum;
      tele_v += sv - last_v_sum;
    }
    last_u_sum = su;
    last_v_sum = sv;
    worst = std::max({worst, (sx - telescoped).cwiseAbs().maxCoeff(), std::abs(sy - tele_v)});
    ++rounds;
  };
  train(cfg, opts);
  return {worst < 1e-9 && rounds == 201, fmt("max per-component drift = %.2e over %zu tracking rounds", worst, rounds)};
}

Outcome consensus_contraction()
{
  bool ok = true;
  std::string detail;
  for (TopologyKind kind : {TopologyKind::ring, TopologyKind::dense, TopologyKind::bipartite}) {
    const stubs::ZeroGame game(5);
    RunConfig cfg;
    cfg.topology = kind;
    cfg.iterations = 300;
    cfg.workers = 1;
    const double l2 = second_eigen_magnitude(metropolis_weights(build_graph(kind, 5)).matrix());
    std::vector<double> gaps, frob;
    bool zero_grad = true;
    TrainOptions opts;
    opts.init_perturbation = 0.1;
    opts.observer = [&](const IterationView& v) {
      gaps.push_back(max_deviation_from_mean(v.agents));
      frob.push_back(frobenius_deviation(v.agents));
      for (const auto& a : v.agents) zero_grad = zero_grad && a.tracker.x.cwiseAbs().maxCoeff() == 0.0;
    };
    train(cfg, game, opts);
    double worst = 0.0, worst_frob = 0.0;
    std::size_t rounds = 0;
    for (std::size_t t = 1; t < gaps.size() && gaps[t - 1] > 1e-10 * gaps[0]; ++t, ++rounds) {
      worst = std::max(worst, gaps[t] / gaps[t - 1]);
      worst_frob = std::max(worst_frob, frob[t] / frob[t - 1]);
    }
    const bool pass = zero_grad && rounds > 0 && worst <= l2 + 1e-6;
    ok = ok && pass;
    // The Frobenius ratio is informational only.
    detail += fmt("%s: max gap ratio %.4f vs |lambda2| %.4f over %zu rounds (Frobenius %.4f); ", std::string(to_string(kind)).c_str(),
                  worst, l2, rounds, worst_frob);
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

Outcome momentum_equivalence()
{
  RunConfig a = coop_nav_config(3, TopologyKind::ring, 0, 50);
  a.beta = 1.0;
  a.momentum = true;
  RunConfig b = coop_nav_config(3, TopologyKind::ring, 0, 50);
  b.momentum = false;
  const std::string ca = format_metrics_csv(train(a).metrics);
  const std::string cb = format_metrics_csv(train(b).metrics);
  return {ca == cb, fmt("beta=1 and momentum off CSVs %s (%zu bytes)", ca == cb ? "identical" : "differ", ca.size())};
}

Outcome peak_augmentation()
{
  const EnvConfig env = EnvConfig::coop_nav(3);
  const ParticleGame game(env);
  ConstraintSpec spec;
  Rng init(5);
  std::vector<MlpParams> parts;
  for (int k = 0; k < 3; ++k) parts.push_back(initial_params(MlpShape::policy(), init));
  const JointParams theta = JointParams::concatenate(parts);
  Rng rng(6);
  const auto batch = sample_trajectories(game, theta, 400, 20, rng, spec);
  std::size_t violating = 0, clean = 0, bad = 0;
  for (const auto& t : batch) {
    for (std::size_t k = 0; k < 3; ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      double raw = 0.0, aug = 0.0, d = 1.0, last_d = -1.0;
      for (std::size_t h = 0; h < t.horizon(); ++h, d *= spec.gamma) {
        const auto c = static_cast<Eigen::Index>(h);
        Vec2 p = t.states[h].agents[k];
        const int a = t.actions(r, c);
        const double s = env.move_step;
        p.x += a == 3 ? s : a == 2 ? -s : 0.0;
        p.y += a == 0 ? s : a == 1 ? -s : 0.0;
        const bool outside = p.x < env.box.lo || p.x > env.box.hi || p.y < env.box.lo || p.y > env.box.hi;
        if (outside) last_d = d;
        raw += d * t.utilities(r, c);
        aug += d * t.augmented_utilities(r, c);
      }
      if (last_d > 0.0) {
        ++violating;
        if (!(aug < raw - spec.penalty * last_d + 1e-9)) ++bad;
      } else {
        ++clean;
        if (aug != raw) ++bad;
      }
    }
  }
  return {bad == 0 && violating > 0 && clean > 0,
          fmt("%zu violating and %zu clean agent-trajectories, %zu mismatches", violating, clean, bad)};
}

// Shared n=3 coop-nav runs for criteria 8, 9, 10.
struct TopologyRuns {
  std::vector<double> objective;  // seed-averaged per iteration
  std::vector<double> violation;
  double seconds = 0.0;
};

struct SharedRuns {
  TopologyRuns ring, dense, bipartite;
  std::size_t lambda_records = 0;
  double lambda_min = 1e300, lambda_max = -1e300;
  double lambda_cap = 0.0;
  bool done = false;
};

SharedRuns& shared_runs()
{
  static SharedRuns s;
  if (s.done) return s;
  const std::size_t T = 2000;
  for (auto [kind, out] : {std::pair{TopologyKind::ring, &s.ring}, std::pair{TopologyKind::dense, &s.dense},
                           std::pair{TopologyKind::bipartite, &s.bipartite}}) {
    const auto t0 = Clock::now();
    out->objective.assign(T, 0.0);
    out->violation.assign(T, 0.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const RunConfig cfg = coop_nav_config(3, kind, seed, T);
      s.lambda_cap = cfg.lambda_max;
      TrainOptions opts;
      opts.observer = [&](const IterationView& v) {
        for (const auto& a : v.agents) {
          s.lambda_min = std::min(s.lambda_min, a.dual.lambda);
          s.lambda_max = std::max(s.lambda_max, a.dual.lambda);
          ++s.lambda_records;
        }
      };
      const TrainResult res = train(cfg, opts);
      for (std::size_t t = 0; t < T; ++t) {
        out->objective[t] += res.metrics[t].obj_return / 5.0;
        out->violation[t] += res.metrics[t].peak_violation_rate / 5.0;
      }
      std::fprintf(stderr, "  n=3 %s seed %llu: final obj %.3f\n", std::string(to_string(kind)).c_str(),
                   static_cast<unsigned long long>(seed), res.metrics.back().obj_return);
    }
    out->seconds = seconds_since(t0);
  }
  s.done = true;
  return s;
}

Outcome dual_feasibility()
{
  const SharedRuns& s = shared_runs();
  return {s.lambda_records > 0 && s.lambda_min >= 0.0 && s.lambda_max <= s.lambda_cap,
          fmt("%zu lambda values over 15 runs (3 topologies x 5 seeds) in [%.4g, %.4g], cap %.4g", s.lambda_records, s.lambda_min,
              s.lambda_max, s.lambda_cap)};
}

Outcome qualitative_convergence()
{
  const TopologyRuns& r = shared_runs().ring;
  const std::size_t T = r.objective.size(), w = T / 10;
  const double first = window_mean(r.objective, 0, w), last = window_mean(r.objective, T - w, T);
  const auto [lo, hi] = std::minmax_element(r.objective.begin(), r.objective.end());
  const double range = *hi - *lo;
  const double v_first = window_mean(r.violation, 0, w), v_last = window_mean(r.violation, T - w, T);
  const bool pass = last - first >= 0.2 * range && v_last <= 0.5 * v_first && r.seconds < 600.0;
  return {pass, fmt("objective %.3f -> %.3f (gain %.1f%% of range %.3f), violation %.4f -> %.4f, %.0f s for 5 seeds", first, last,
                    100.0 * (last - first) / range, range, v_first, v_last, r.seconds)};
}

Outcome topology_invariance()
{
  const SharedRuns& s = shared_runs();
  double lo = 1e300, hi = -1e300;
  std::vector<double> finals;
  for (const TopologyRuns* r : {&s.ring, &s.dense, &s.bipartite}) {
    const std::size_t T = r->objective.size();
    finals.push_back(window_mean(r->objective, T - T / 10, T));
    lo = std::min(lo, *std::min_element(r->objective.begin(), r->objective.end()));
    hi = std::max(hi, *std::max_element(r->objective.begin(), r->objective.end()));
  }
  const double spread = *std::max_element(finals.begin(), finals.end()) - *std::min_element(finals.begin(), finals.end());
  return {spread <= 0.25 * (hi - lo), fmt("final objective ring %.3f, dense %.3f, bipartite %.3f; spread %.3f = %.1f%% of range %.3f",
                                          finals[0], finals[1], finals[2], spread, 100.0 * spread / (hi - lo), hi - lo)};
}

// First iteration at which the trailing 50-iteration mean reaches target.
std::size_t first_crossing(const std::vector<double>& curve, double target)
{
  const std::size_t w = 50;
  double sum = 0.0;
  for (std::size_t t = 0; t < curve.size(); ++t) {
    sum += curve[t];
    if (t >= w) sum -= curve[t - w];
    if (t + 1 >= w && sum / static_cast<double>(w) >= target) return t + 1;
  }
  return curve.size() + 1;
}

Outcome momentum_ablation()
{
  const std::size_t T = 2000;
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<double> curve[2];
    for (int on = 0; on < 2; ++on) {
      RunConfig cfg = coop_nav_config(5, TopologyKind::ring, seed, T);
      cfg.momentum = on == 1;
      for (const auto& m : train(cfg).metrics) curve[on].push_back(m.obj_return);
    }
    const std::vector<double>& off = curve[0];
    const double target = 0.5 * (window_mean(off, 0, T / 10) + window_mean(off, T - T / 10, T));
    const std::size_t hit_on = first_crossing(curve[1], target), hit_off = first_crossing(off, target);
    wins += hit_on < hit_off;
    detail += fmt("seed %llu on %zu / off %zu; ", static_cast<unsigned long long>(seed), hit_on, hit_off);
    std::fprintf(stderr, "  n=5 ablation seed %llu: target %.3f, momentum reaches at %zu, no momentum at %zu\n",
                 static_cast<unsigned long long>(seed), target, hit_on, hit_off);
  }
  return {wins >= 4, fmt("momentum faster in %d of 5 seeds (%s)", wins, detail.substr(0, detail.size() - 2).c_str())};
}

Outcome determinism()
{
  RunConfig cfg = coop_nav_config(3, TopologyKind::ring, 11, 100);
  std::set<std::string> seen;
  for (int rep = 0; rep < 3; ++rep) seen.insert(format_metrics_csv(train(cfg).metrics));
  cfg.workers = 3;
  seen.insert(format_metrics_csv(train(cfg).metrics));
  cfg.workers = 1;
  cfg.env = EnvConfig::coop_nav(5);
  const std::string single = format_metrics_csv(train(cfg).metrics);
  cfg.workers = 5;
  const bool threads_match = single == format_metrics_csv(train(cfg).metrics);
  return {seen.size() == 1 && threads_match,
          fmt("%zu distinct CSV(s) over 3 repeats + 3 workers (n=3); n=5 1 vs 5 workers %s", seen.size(),
              threads_match ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv)
{
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"doubly stochastic construction", doubly_stochastic},
      {"gradient correctness", gradient_correctness},
      {"estimator unbiasedness", estimator_unbiased},
      {"gradient-tracking conservation", tracking_conservation},
      {"consensus contraction", consensus_contraction},
      {"momentum equivalence", momentum_equivalence},
      {"peak augmentation", peak_augmentation},
      {"dual feasibility", dual_feasibility},
      {"qualitative convergence", qualitative_convergence},
      {"topology invariance", topology_invariance},
      {"momentum ablation", momentum_ablation},
      {"determinism", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.passed;
    std::printf("%s %2d %s: %s\n", o.passed ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
