#include "msurv/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace msurv {

int PopulationTrajectory::state_at(int unit, double t) const {
  int s = initial[unit];
  for (const auto& ev : events) {
    if (ev.time > t) break;
    for (const auto& m : ev.moves)
      if (m.unit == unit) s = m.to;
  }
  return s;
}

double PopulationTrajectory::absorption_time(int unit, const TransitionGraph& g) const {
  if (g.is_absorbing(initial[unit])) return 0.0;
  for (const auto& ev : events)
    for (const auto& m : ev.moves)
      if (m.unit == unit && g.is_absorbing(m.to)) return ev.time;
  return kInf;
}

double PopulationTrajectory::last_event_time() const {
  return events.empty() ? 0.0 : events.back().time;
}

Timeline build_timeline(const PopulationTrajectory& traj, int num_states) {
  Timeline tl;
  std::vector<int> y = traj.initial;
  std::vector<bool> active(traj.n, true);

  std::vector<int> x(num_states + 1, 0);
  for (int u = 0; u < traj.n; ++u) ++x[y[u]];

  // Breakpoints: event times and finite censor times.
  std::set<double> bps;
  for (const auto& ev : traj.events) bps.insert(ev.time);
  for (double c : traj.censor)
    if (std::isfinite(c)) bps.insert(c);

  double prev = 0.0;
  double last_time = -kInf;
  std::size_t next_event = 0;
  for (double t : bps) {
    if (t < 0.0) throw std::invalid_argument("timeline: negative breakpoint");
    if (t > prev) {
      tl.segments.push_back({prev, t, x});
      prev = t;
    }
    // Event first (pre-censoring config), then drop units censored at t.
    if (next_event < traj.events.size() && traj.events[next_event].time == t) {
      const TrajEvent& ev = traj.events[next_event];
      if (ev.time <= last_time)
        throw std::invalid_argument("timeline: event times must be strictly increasing");
      last_time = ev.time;
      tl.events.push_back({t, x, &ev});
      for (const auto& m : ev.moves) {
        if (m.unit < 0 || m.unit >= traj.n)
          throw std::invalid_argument("timeline: move names an unknown unit");
        if (!active[m.unit] || y[m.unit] != m.from)
          throw std::invalid_argument("timeline: move inconsistent with unit state");
        --x[m.from];
        ++x[m.to];
        y[m.unit] = m.to;
      }
      ++next_event;
    }
    for (int u = 0; u < traj.n; ++u)
      if (active[u] && traj.censor[u] == t) {
        active[u] = false;
        --x[y[u]];
      }
  }
  tl.segments.push_back({prev, kInf, x});
  return tl;
}

double sample_tilted_p(double S, double rho, Rng& rng, int grid) {
  if (!(S > 0.0)) throw std::domain_error("sample_tilted_p: S must be positive");
  const double rounded = std::round(S);
  if (rounded >= 1.0 && std::fabs(S - rounded) < 1e-9) {
    // (1 - p^S)/(1 - p) = sum_{j<S} p^j: exact Beta(rho + j, 1) mixture.
    const int si = static_cast<int>(rounded);
    std::vector<double> w(si);
    for (int j = 0; j < si; ++j) w[j] = 1.0 / (rho + j);
    const int j = rng.categorical(w);
    return std::pow(rng.uniform(), 1.0 / (rho + j));
  }
  // Substituting q = p^rho removes the p^{rho-1} endpoint; the remaining
  // density (1 - p^S)/(1 - p) is bounded and continuous on [0, 1].
  auto density_q = [&](double q) {
    if (q <= 0.0) return 1.0;
    const double p = std::pow(q, 1.0 / rho);
    if (p >= 1.0) return S;
    return -std::expm1(S * std::log(p)) / (1.0 - p);
  };
  std::vector<double> cdf(grid + 1, 0.0);
  double fprev = density_q(0.0);
  const double h = 1.0 / grid;
  for (int i = 1; i <= grid; ++i) {
    const double f = density_q(i * h);
    cdf[i] = cdf[i - 1] + 0.5 * h * (fprev + f);
    fprev = f;
  }
  const double u = rng.uniform() * cdf[grid];
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  int i = static_cast<int>(it - cdf.begin());
  if (i < 1) i = 1;
  const double frac = (u - cdf[i - 1]) / std::max(cdf[i] - cdf[i - 1], 1e-300);
  const double q = (i - 1 + frac) * h;
  return std::pow(q, 1.0 / rho);
}

PopulationTrajectory simulate_population(const Model& model,
                                         const std::vector<int>& initial,
                                         double horizon, Rng& rng) {
  const TransitionGraph& g = model.graph();
  for (int s : initial) {
    if (s < 1 || s > g.num_states)
      throw std::invalid_argument("simulate: initial state out of range");
    if (g.is_absorbing(s))
      throw std::invalid_argument("simulate: initial state is absorbing");
  }
  if (horizon < 0.0) throw std::invalid_argument("simulate: negative horizon");
  model.check_params();

  PopulationTrajectory traj;
  traj.n = static_cast<int>(initial.size());
  traj.initial = initial;
  traj.censor.assign(traj.n, kInf);

  std::vector<int> y = initial;
  auto x = configuration_of(y, g.num_states);
  double t = 0.0;

  // Event components: pair components first, then erosion edges.
  std::vector<std::pair<int, int>> erosion_edges;
  for (const auto& [i, ip] : g.edges)
    if (model.erosion(i, ip) > 0.0) erosion_edges.push_back({i, ip});

  for (;;) {
    std::vector<double> weights(model.num_pairs() + erosion_edges.size(), 0.0);
    double zeta = 0.0;
    for (int p = 0; p < model.num_pairs(); ++p) {
      weights[p] = model.zeta_component(x, p);
      zeta += weights[p];
    }
    for (std::size_t e = 0; e < erosion_edges.size(); ++e) {
      weights[model.num_pairs() + e] =
          x[erosion_edges[e].first] * model.erosion(erosion_edges[e].first,
                                                    erosion_edges[e].second);
      zeta += weights[model.num_pairs() + e];
    }
    if (!(zeta > 0.0)) break;
    t += rng.exponential(zeta);
    if (t > horizon) break;

    const int comp = rng.categorical(weights);
    TrajEvent ev;
    ev.time = t;
    if (comp >= model.num_pairs()) {
      const auto [i, ip] = erosion_edges[comp - model.num_pairs()];
      std::vector<int> candidates;
      for (int u = 0; u < traj.n; ++u)
        if (y[u] == i) candidates.push_back(u);
      const int u = candidates[static_cast<std::size_t>(
          rng.uniform() * candidates.size())];
      ev.moves.push_back({u, i, ip});
    } else {
      const int p = comp;
      const BlockPair& bp = model.pair(p);
      const double S = model.pair_risk_sum(x, p);
      const double pdraw = sample_tilted_p(S, model.rho(p), rng);
      // Rejection on the Bernoulli vector only: p keeps its size-biased law.
      std::vector<int> movers;
      do {
        movers.clear();
        for (int u = 0; u < traj.n; ++u) {
          const int slot = bp.source_slot[y[u]];
          if (slot < 0) continue;
          const double move_prob = -std::expm1(model.gamma(p, slot) * std::log(pdraw));
          if (rng.bernoulli(move_prob)) movers.push_back(u);
        }
      } while (movers.empty());
      for (int u : movers) {
        const int slot = bp.source_slot[y[u]];
        std::vector<double> w(bp.dests[slot].size());
        for (std::size_t ds = 0; ds < w.size(); ++ds)
          w[ds] = model.alpha(p, slot, static_cast<int>(ds));
        const int ds = rng.categorical(w);
        ev.moves.push_back({u, y[u], bp.dests[slot][ds]});
      }
    }
    for (const auto& m : ev.moves) {
      --x[m.from];
      ++x[m.to];
      y[m.unit] = m.to;
    }
    traj.events.push_back(std::move(ev));
  }
  return traj;
}

namespace {

// Grouped event from raw moves and the active pre-configuration; returns
// false when the event is inadmissible under the model.
bool grouped_event(const Model& model, const std::vector<Move>& moves,
                   const std::vector<int>& pre_config, TransitionEvent& out) {
  int p = -1;
  for (const auto& m : moves) {
    if (!model.graph().has_edge(m.from, m.to)) return false;
    const int pe = model.pair_of_edge(m.from, m.to);
    if (p == -1) p = pe;
    if (pe != p) return false;
  }
  if (p == -1) return false;
  const BlockPair& bp = model.pair(p);
  out.pair = p;
  out.stay.assign(bp.sources.size(), 0);
  out.move.assign(bp.sources.size(), {});
  for (std::size_t slot = 0; slot < bp.sources.size(); ++slot) {
    out.stay[slot] = pre_config[bp.sources[slot]];
    out.move[slot].assign(bp.dests[slot].size(), 0);
  }
  for (const auto& m : moves) {
    const int slot = bp.source_slot[m.from];
    const auto& dests = bp.dests[slot];
    const int ds = static_cast<int>(
        std::find(dests.begin(), dests.end(), m.to) - dests.begin());
    --out.stay[slot];
    ++out.move[slot][ds];
    if (out.stay[slot] < 0) return false;
  }
  return true;
}

}  // namespace

double log_density(const PopulationTrajectory& traj, const Model& model) {
  const Timeline tl = build_timeline(traj, model.graph().num_states);
  double logp = 0.0;
  for (const auto& seg : tl.segments) {
    const double z = model.characteristic_index(seg.x);
    if (!std::isfinite(seg.t1)) {
      if (z > 0.0) return -kInf;  // surviving mass never absorbed or censored
      break;
    }
    logp -= z * (seg.t1 - seg.t0);
  }
  for (const auto& tev : tl.events) {
    TransitionEvent ev;
    if (!grouped_event(model, tev.event->moves, tev.pre_config, ev)) return -kInf;
    const double lam = model.lambda_event(ev);
    if (!(lam > 0.0)) return -kInf;
    logp += std::log(lam);
  }
  return logp;
}

double integrate_zeta_component(const PopulationTrajectory& traj,
                                const Model& model, int pair, bool normalized) {
  const Timeline tl = build_timeline(traj, model.graph().num_states);
  double acc = 0.0;
  for (const auto& seg : tl.segments) {
    const double z = model.zeta_component(seg.x, pair);
    if (!std::isfinite(seg.t1)) {
      if (z > 0.0) return kInf;
      break;
    }
    acc += z * (seg.t1 - seg.t0);
  }
  return normalized ? acc / model.nu(pair) : acc;
}

PopulationTrajectory apply_censoring(const PopulationTrajectory& traj,
                                     const std::vector<double>& censor_times) {
  if (static_cast<int>(censor_times.size()) != traj.n)
    throw std::invalid_argument("apply_censoring: size mismatch");
  for (double c : censor_times)
    if (!(c > 0.0)) throw std::invalid_argument("apply_censoring: censor times must be positive");

  PopulationTrajectory out;
  out.n = traj.n;
  out.initial = traj.initial;
  out.censor.resize(traj.n);
  for (int u = 0; u < traj.n; ++u)
    out.censor[u] = std::min(traj.censor[u], censor_times[u]);
  for (const auto& ev : traj.events) {
    TrajEvent kept;
    kept.time = ev.time;
    for (const auto& m : ev.moves)
      if (ev.time <= out.censor[m.unit]) kept.moves.push_back(m);
    if (!kept.moves.empty()) out.events.push_back(std::move(kept));
  }
  return out;
}

UnitPath unit_path_of(const PopulationTrajectory& traj, int u) {
  UnitPath path;
  path.initial = traj.initial[u];
  for (const auto& ev : traj.events)
    for (const auto& m : ev.moves)
      if (m.unit == u) path.jumps.push_back({ev.time, m.to});
  return path;
}

PopulationTrajectory assemble_population(
    const std::vector<int>& initial,
    const std::vector<std::vector<std::pair<double, int>>>& jumps,
    const std::vector<double>& censor) {
  const int n = static_cast<int>(initial.size());
  std::vector<std::pair<double, Move>> flat;
  for (int u = 0; u < n; ++u) {
    int state = initial[u];
    for (const auto& [t, to] : jumps[u]) {
      flat.push_back({t, Move{u, state, to}});
      state = to;
    }
  }
  std::sort(flat.begin(), flat.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  PopulationTrajectory traj;
  traj.n = n;
  traj.initial = initial;
  traj.censor = censor;
  for (std::size_t i = 0; i < flat.size();) {
    TrajEvent ev;
    ev.time = flat[i].first;
    while (i < flat.size() && flat[i].first == ev.time)
      ev.moves.push_back(flat[i++].second);
    traj.events.push_back(std::move(ev));
  }
  return traj;
}

PopulationTrajectory erase_unit(const PopulationTrajectory& traj, int u) {
  PopulationTrajectory out;
  out.n = traj.n - 1;
  for (int v = 0; v < traj.n; ++v)
    if (v != u) {
      out.initial.push_back(traj.initial[v]);
      out.censor.push_back(traj.censor[v]);
    }
  for (const auto& ev : traj.events) {
    TrajEvent kept;
    kept.time = ev.time;
    for (const auto& m : ev.moves) {
      if (m.unit == u) continue;
      kept.moves.push_back({m.unit < u ? m.unit : m.unit - 1, m.from, m.to});
    }
    if (!kept.moves.empty()) out.events.push_back(std::move(kept));
  }
  return out;
}

PopulationTrajectory replace_unit_path(const PopulationTrajectory& traj, int u,
                                       const UnitPath& path, double censor_time) {
  PopulationTrajectory out;
  out.n = traj.n;
  out.initial = traj.initial;
  out.initial[u] = path.initial;
  out.censor = traj.censor;
  out.censor[u] = censor_time;
  for (const auto& ev : traj.events) {
    TrajEvent kept;
    kept.time = ev.time;
    for (const auto& m : ev.moves)
      if (m.unit != u) kept.moves.push_back(m);
    if (!kept.moves.empty()) out.events.push_back(std::move(kept));
  }
  int from = path.initial;
  for (const auto& [t, to] : path.jumps) {
    auto it = std::lower_bound(out.events.begin(), out.events.end(), t,
                               [](const TrajEvent& ev, double v) { return ev.time < v; });
    if (it != out.events.end() && it->time == t) {
      it->moves.push_back({u, from, to});
    } else {
      TrajEvent ev;
      ev.time = t;
      ev.moves.push_back({u, from, to});
      out.events.insert(it, std::move(ev));
    }
    from = to;
  }
  return out;
}

PanelData observe_panel(const PopulationTrajectory& traj,
                        const TransitionGraph& g, double every) {
  if (!(every > 0.0)) throw std::invalid_argument("observe_panel: period must be positive");
  PanelData panel;
  for (int u = 0; u < traj.n; ++u) {
    PanelRecord rec;
    rec.id = "u" + std::to_string(u + 1);
    const double t_abs = traj.absorption_time(u, g);
    const double c = traj.censor[u];
    if (!std::isfinite(t_abs) && !std::isfinite(c))
      throw std::invalid_argument(
          "observe_panel: unit neither absorbed nor censored; censor the trajectory first");
    if (t_abs <= c) {
      rec.censored = false;
      rec.terminal_time = t_abs;
      rec.death_state = traj.state_at(u, t_abs);
    } else {
      rec.censored = true;
      rec.terminal_time = c;
    }
    for (double t = 0.0; t < rec.terminal_time; t += every) {
      rec.times.push_back(t);
      rec.states.push_back(traj.state_at(u, t));
    }
    if (rec.censored && (rec.times.empty() || rec.times.back() < rec.terminal_time)) {
      // The censoring time doubles as the final appointment.
      rec.times.push_back(rec.terminal_time);
      rec.states.push_back(traj.state_at(u, rec.terminal_time));
    }
    panel.units.push_back(std::move(rec));
  }
  return panel;
}

}  // namespace msurv
