#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "depaint/rng.hpp"

namespace depaint {

inline constexpr std::size_t kObservationSize = 20;
inline constexpr int kNumActions = 5;

enum class Action : int { up = 0, down = 1, left = 2, right = 3, stay = 4 };

enum class EnvKind { coop_nav, predator_prey };

inline EnvKind parse_env_kind(std::string_view name)
{
  if (name == "coop_nav") return EnvKind::coop_nav;
  if (name == "predator_prey") return EnvKind::predator_prey;
  throw std::invalid_argument("unknown env kind '" + std::string(name) + "' (expected coop_nav or predator_prey)");
}

inline std::string_view to_string(EnvKind kind)
{
  return kind == EnvKind::coop_nav ? "coop_nav" : "predator_prey";
}

enum class Role { navigator, predator, prey };

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Axis-aligned square [lo, hi]^2.
struct WorldBox {
  double lo = -1.0;
  double hi = 1.0;

  bool contains(Vec2 p) const { return p.x >= lo && p.x <= hi && p.y >= lo && p.y <= hi; }
  double half_width() const { return 0.5 * (hi - lo); }
  double diagonal() const { return std::sqrt(2.0) * (hi - lo); }

  /// Signed distance to the nearest edge divided by the half width: 1 at the
  /// center, 0 on the boundary, negative outside.
  double normalized_edge_distance(Vec2 p) const
  {
    const double d = std::min({p.x - lo, hi - p.x, p.y - lo, hi - p.y});
    return d / half_width();
  }
};

struct EnvConfig {
  EnvKind kind = EnvKind::coop_nav;
  std::size_t n_agents = 3;
  std::size_t n_predators = 0;
  std::size_t n_preys = 0;
  WorldBox box{};
  double collision_radius = 0.1;
  double move_step = 0.1;

  static EnvConfig coop_nav(std::size_t n)
  {
    EnvConfig cfg;
    cfg.n_agents = n;
    return cfg;
  }

  static EnvConfig predator_prey(std::size_t predators, std::size_t preys)
  {
    EnvConfig cfg;
    cfg.kind = EnvKind::predator_prey;
    cfg.n_predators = predators;
    cfg.n_preys = preys;
    cfg.n_agents = predators + preys;
    return cfg;
  }

  void validate() const
  {
    if (n_agents < 1) throw std::invalid_argument("n_agents must be at least 1");
    if (kind == EnvKind::predator_prey) {
      if (n_predators < 1 || n_preys < 1) throw std::invalid_argument("predator_prey needs at least one predator and one prey");
      if (n_predators + n_preys != n_agents) throw std::invalid_argument("n_agents must equal n_predators + n_preys");
    }
    if (!(box.hi > box.lo) || !std::isfinite(box.lo) || !std::isfinite(box.hi))
      throw std::invalid_argument("world box must be non-degenerate");
    if (!(collision_radius > 0.0)) throw std::invalid_argument("collision_radius must be positive");
    if (!(move_step > 0.0)) throw std::invalid_argument("move_step must be positive");
  }

  Role role(std::size_t agent) const
  {
    if (kind == EnvKind::coop_nav) return Role::navigator;
    return agent < n_predators ? Role::predator : Role::prey;
  }
};

struct GlobalState {
  std::vector<Vec2> agents;
  std::vector<Vec2> landmarks;
  std::vector<Role> roles;

  friend bool operator==(const GlobalState&, const GlobalState&) = default;
};

struct StepOutcome {
  GlobalState next_state;
  std::vector<double> rewards;
  std::vector<double> utilities;
  std::vector<double> peak_values;
  bool done = false;
};

/// Initial-state sampler: agents (and landmarks) uniform in the box.
inline GlobalState reset(const EnvConfig& cfg, Rng& rng)
{
  GlobalState s;
  s.agents.resize(cfg.n_agents);
  s.roles.resize(cfg.n_agents);
  for (std::size_t i = 0; i < cfg.n_agents; ++i) {
    s.agents[i] = {uniform(rng, cfg.box.lo, cfg.box.hi), uniform(rng, cfg.box.lo, cfg.box.hi)};
    s.roles[i] = cfg.role(i);
  }
  if (cfg.kind == EnvKind::coop_nav) {
    s.landmarks.resize(cfg.n_agents);
    for (auto& l : s.landmarks) l = {uniform(rng, cfg.box.lo, cfg.box.hi), uniform(rng, cfg.box.lo, cfg.box.hi)};
  }
  return s;
}

inline Vec2 displacement(Action a, double step)
{
  switch (a) {
    case Action::up: return {0.0, step};
    case Action::down: return {0.0, -step};
    case Action::left: return {-step, 0.0};
    case Action::right: return {step, 0.0};
    case Action::stay: return {0.0, 0.0};
  }
  return {};
}

/// Moves every agent (no clipping to the box) and scores the resulting
/// positions.
inline StepOutcome step(const EnvConfig& cfg, const GlobalState& state, std::span<const int> joint_action)
{
  const std::size_t n = state.agents.size();
  if (joint_action.size() != n) throw std::invalid_argument("need exactly one action per agent");

  StepOutcome out;
  out.next_state = state;
  for (std::size_t i = 0; i < n; ++i) {
    const int a = joint_action[i];
    if (a < 0 || a >= kNumActions) throw std::out_of_range("action index " + std::to_string(a) + " out of range");
    const Vec2 d = displacement(static_cast<Action>(a), cfg.move_step);
    out.next_state.agents[i].x += d.x;
    out.next_state.agents[i].y += d.y;
  }

  const auto& pos = out.next_state.agents;
  out.rewards.assign(n, 0.0);
  out.utilities.assign(n, 0.0);
  out.peak_values.assign(n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    const Role role = state.roles[i];
    double nearest_same = std::numeric_limits<double>::infinity();
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = distance(pos[i], pos[j]);
      const bool touching = d <= cfg.collision_radius;
      if (cfg.kind == EnvKind::coop_nav) {
        nearest_same = std::min(nearest_same, d);
        if (touching) r -= 1.0;
      } else {
        const Role other = state.roles[j];
        if (other == role) nearest_same = std::min(nearest_same, d);
        if (touching && role == Role::predator && other == Role::prey) r += 1.0;
        if (touching && role == Role::prey && other == Role::predator) r -= 1.0;
      }
    }
    if (cfg.kind == EnvKind::coop_nav) r -= distance(pos[i], out.next_state.landmarks[i]);
    if (!std::isfinite(nearest_same)) nearest_same = cfg.box.diagonal();

    out.rewards[i] = r;
    out.utilities[i] = nearest_same;
    out.peak_values[i] = cfg.box.contains(pos[i]) ? 1.0 : 0.0;
  }
  return out;
}

namespace detail {

// Candidates sorted by distance from origin. Equidistant candidates are
// ordered by relative x then y, so the result does not depend on storage
// order; only coincident points fall back to the index.
inline std::vector<std::size_t> nearest_order(Vec2 origin, std::span<const Vec2> points, std::span<const std::size_t> candidates)
{
  std::vector<std::size_t> order(candidates.begin(), candidates.end());
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = distance(origin, points[a]);
    const double db = distance(origin, points[b]);
    if (da != db) return da < db;
    const Vec2 ra = points[a] - origin;
    const Vec2 rb = points[b] - origin;
    if (ra.x != rb.x) return ra.x < rb.x;
    if (ra.y != rb.y) return ra.y < rb.y;
    return a < b;
  });
  return order;
}

}  // namespace detail

using Observation = std::array<double, kObservationSize>;

/// Layout: [0,2) own position; [2,10) up to four nearest other agents
/// (relative); [10,18) up to four targets (relative); [18] in-box flag;
/// [19] normalized distance to the box edge. Targets are landmarks in
/// cooperative navigation (the agent's own landmark first, then the others by
/// distance) and opposite-role agents in predator-prey. Empty slots are zero.
inline Observation observe(const EnvConfig& cfg, const GlobalState& state, std::size_t agent)
{
  Observation obs{};
  const Vec2 self = state.agents.at(agent);
  obs[0] = self.x;
  obs[1] = self.y;

  auto fill = [&](std::size_t offset, std::span<const Vec2> points, std::span<const std::size_t> picks) {
    for (std::size_t s = 0; s < picks.size() && s < 4; ++s) {
      const Vec2 rel = points[picks[s]] - self;
      obs[offset + 2 * s] = rel.x;
      obs[offset + 2 * s + 1] = rel.y;
    }
  };

  std::vector<std::size_t> others;
  std::vector<std::size_t> opposite;
  for (std::size_t j = 0; j < state.agents.size(); ++j) {
    if (j == agent) continue;
    others.push_back(j);
    if (cfg.kind == EnvKind::predator_prey && state.roles[j] != state.roles[agent]) opposite.push_back(j);
  }
  fill(2, state.agents, detail::nearest_order(self, state.agents, others));

  if (cfg.kind == EnvKind::coop_nav) {
    std::vector<std::size_t> rest;
    for (std::size_t l = 0; l < state.landmarks.size(); ++l)
      if (l != agent) rest.push_back(l);
    std::vector<std::size_t> picks{agent};
    for (std::size_t l : detail::nearest_order(self, state.landmarks, rest)) picks.push_back(l);
    fill(10, state.landmarks, picks);
  } else {
    fill(10, state.agents, detail::nearest_order(self, state.agents, opposite));
  }

  obs[18] = cfg.box.contains(self) ? 1.0 : 0.0;
  obs[19] = cfg.box.normalized_edge_distance(self);
  return obs;
}

/// Constrained Markov game seen by the trainer. Implementations are immutable;
/// all randomness comes through the caller's stream.
class Game {
public:
  virtual ~Game() = default;
  virtual std::size_t n_agents() const = 0;
  virtual int n_actions() const { return kNumActions; }
  virtual GlobalState reset(Rng& rng) const = 0;
  virtual StepOutcome step(const GlobalState& state, std::span<const int> joint_action) const = 0;
  virtual Observation observe(const GlobalState& state, std::size_t agent) const = 0;
};

/// The two benchmark environments behind the Game interface.
class ParticleGame final : public Game {
public:
  explicit ParticleGame(EnvConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const EnvConfig& config() const noexcept { return cfg_; }
  std::size_t n_agents() const override { return cfg_.n_agents; }
  GlobalState reset(Rng& rng) const override { return depaint::reset(cfg_, rng); }
  StepOutcome step(const GlobalState& state, std::span<const int> joint_action) const override
  {
    return depaint::step(cfg_, state, joint_action);
  }
  Observation observe(const GlobalState& state, std::size_t agent) const override
  {
    return depaint::observe(cfg_, state, agent);
  }

private:
  EnvConfig cfg_;
};

}  // namespace depaint
