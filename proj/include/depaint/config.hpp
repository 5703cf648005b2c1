#pragma once

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "depaint/trainer.hpp"

namespace depaint {

/// Config file error; the message names the offending key (or line).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::string unquote(std::string_view v)
{
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\'')))
    return std::string(v.substr(1, v.size() - 2));
  return std::string(v);
}

inline double to_double(const std::string& key, const std::string& v)
{
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
    throw ConfigError(key + " must be a number (got '" + v + "')");
  return d;
}

inline std::uint64_t to_unsigned(const std::string& key, const std::string& v)
{
  errno = 0;
  char* end = nullptr;
  if (v.empty() || v.front() == '-' || v.front() == '+') throw ConfigError(key + " must be a nonnegative integer (got '" + v + "')");
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || errno == ERANGE) throw ConfigError(key + " must be a nonnegative integer (got '" + v + "')");
  return u;
}

inline bool to_bool(const std::string& key, const std::string& v)
{
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + " must be a boolean (got '" + v + "')");
}

}  // namespace detail

/// Parses flat `key = value` lines; `#` starts a comment. Unlisted keys keep
/// their defaults. The result is validated.
inline RunConfig parse_config_text(std::string_view text, RunConfig cfg = {})
{
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  bool agents_set = false;
  std::size_t agents = cfg.env.n_agents;

  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value = detail::unquote(detail::trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": missing key");

    auto size = [&] { return static_cast<std::size_t>(detail::to_unsigned(key, value)); };
    auto real = [&] { return detail::to_double(key, value); };
    try {
      if (key == "iterations") cfg.iterations = size();
      else if (key == "horizon") cfg.horizon = size();
      else if (key == "batch_size") cfg.batch_size = size();
      else if (key == "eta1") cfg.eta.primal = real();
      else if (key == "eta2") cfg.eta.dual = real();
      else if (key == "critic_lr") cfg.critic_lr = real();
      else if (key == "beta") cfg.beta = real();
      else if (key == "gamma") cfg.constraint.gamma = real();
      else if (key == "c") cfg.constraint.c = real();
      else if (key == "k") cfg.constraint.k = real();
      else if (key == "penalty") cfg.constraint.penalty = real();
      else if (key == "lambda_max") cfg.lambda_max = real();
      else if (key == "lambda_init") cfg.lambda_init = real();
      else if (key == "topology") cfg.topology = parse_topology(value);
      else if (key == "env") cfg.env.kind = parse_env_kind(value);
      else if (key == "n_agents") { agents = size(); agents_set = true; }
      else if (key == "n_predators") cfg.env.n_predators = size();
      else if (key == "n_preys") cfg.env.n_preys = size();
      else if (key == "collision_radius") cfg.env.collision_radius = real();
      else if (key == "move_step") cfg.env.move_step = real();
      else if (key == "box_lo") cfg.env.box.lo = real();
      else if (key == "box_hi") cfg.env.box.hi = real();
      else if (key == "seed") cfg.seed = detail::to_unsigned(key, value);
      else if (key == "momentum") cfg.momentum = detail::to_bool(key, value);
      else if (key == "momentum_reference") cfg.momentum_reference = parse_momentum_reference(value);
      else if (key == "grad_clip") cfg.grad_clip = real();
      else if (key == "baseline") cfg.baseline = parse_baseline_mode(value);
      else if (key == "iw_clip_min") cfg.importance_clip.min = real();
      else if (key == "iw_clip_max") cfg.importance_clip.max = real();
      else if (key == "workers") cfg.workers = size();
      else if (key == "record_wall_time") cfg.record_wall_time = detail::to_bool(key, value);
      else if (key == "output") cfg.output = value;
      else throw ConfigError("unknown key '" + key + "'");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }

  if (cfg.env.kind == EnvKind::predator_prey) {
    const std::size_t total = cfg.env.n_predators + cfg.env.n_preys;
    if (agents_set && agents != total) throw ConfigError("n_agents must equal n_predators + n_preys");
    cfg.env.n_agents = total;
  } else {
    cfg.env.n_agents = agents;
    cfg.env.n_predators = 0;
    cfg.env.n_preys = 0;
  }

  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline RunConfig parse_config(const std::string& path)
{
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

/// One concrete run of a preset grid.
struct PresetRun {
  std::string label;
  RunConfig config;
};

struct ExperimentPreset {
  std::string name;
  std::vector<PresetRun> runs;
  std::vector<std::uint64_t> seeds;
};

inline std::vector<std::string> preset_names() { return {"coop-nav", "predator-prey", "ablation-momentum"}; }

/// Resolves a named preset on top of `base` (which supplies T, H, B and the
/// rest of the hyperparameters).
inline ExperimentPreset make_preset(std::string_view name, const RunConfig& base = {})
{
  ExperimentPreset p;
  p.name = std::string(name);
  p.seeds = {0, 1, 2, 3, 4};
  const TopologyKind topologies[] = {TopologyKind::ring, TopologyKind::dense, TopologyKind::bipartite};

  if (name == "coop-nav") {
    for (std::size_t n : {3, 4, 5}) {
      for (TopologyKind topo : topologies) {
        RunConfig c = base;
        c.env = EnvConfig::coop_nav(n);
        c.topology = topo;
        p.runs.push_back({"coop_nav_n" + std::to_string(n) + "_" + std::string(to_string(topo)), c});
      }
    }
  } else if (name == "predator-prey") {
    const std::pair<std::size_t, std::size_t> sides[] = {{1, 1}, {2, 1}, {3, 2}};
    for (auto [pred, prey] : sides) {
      for (TopologyKind topo : topologies) {
        RunConfig c = base;
        c.env = EnvConfig::predator_prey(pred, prey);
        c.topology = topo;
        p.runs.push_back({"predator_prey_" + std::to_string(pred) + "v" + std::to_string(prey) + "_" + std::string(to_string(topo)), c});
      }
    }
  } else if (name == "ablation-momentum") {
    for (bool on : {true, false}) {
      RunConfig c = base;
      c.env = EnvConfig::coop_nav(5);
      c.topology = TopologyKind::ring;
      c.momentum = on;
      p.runs.push_back({on ? "momentum_on" : "momentum_off", c});
    }
  } else {
    throw std::invalid_argument("unknown preset '" + std::string(name) + "' (expected coop-nav, predator-prey or ablation-momentum)");
  }
  return p;
}

/// Row-wise arithmetic mean of every column over CSV files with the same
/// header and row count.
inline std::string average_csv_texts(const std::vector<std::string>& texts, const std::vector<std::string>& names = {})
{
  if (texts.empty()) throw std::invalid_argument("need at least one CSV file to average");
  auto label = [&](std::size_t f) { return f < names.size() ? names[f] : "input " + std::to_string(f); };

  std::string header;
  std::vector<std::vector<double>> sum;
  std::size_t columns = 0;
  for (std::size_t f = 0; f < texts.size(); ++f) {
    std::istringstream in(texts[f]);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(label(f) + ": empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (f == 0) {
      header = line;
      columns = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
    } else if (line != header) {
      throw std::runtime_error(label(f) + ": header differs from " + label(0));
    }
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<double> values;
      std::stringstream cells(line);
      std::string cell;
      while (std::getline(cells, cell, ',')) values.push_back(detail::to_double(label(f) + " row " + std::to_string(row + 1), cell));
      if (values.size() != columns) throw std::runtime_error(label(f) + ": row " + std::to_string(row + 1) + " has the wrong column count");
      if (f == 0) {
        sum.push_back(values);
      } else {
        if (row >= sum.size()) throw std::runtime_error(label(f) + ": row count differs from " + label(0));
        for (std::size_t c = 0; c < columns; ++c) sum[row][c] += values[c];
      }
      ++row;
    }
    if (row != sum.size()) throw std::runtime_error(label(f) + ": row count differs from " + label(0));
  }

  std::string out = header + "\n";
  char buf[64];
  const double files = static_cast<double>(texts.size());
  for (const auto& r : sum) {
    for (std::size_t c = 0; c < columns; ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", r[c] / files);
      out += buf;
      out += c + 1 < columns ? ',' : '\n';
    }
  }
  return out;
}

inline std::string average_seeds(const std::vector<std::string>& paths)
{
  std::vector<std::string> texts;
  for (const auto& p : paths) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read CSV '" + p + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    texts.push_back(buf.str());
  }
  return average_csv_texts(texts, paths);
}

}  // namespace depaint
