#include "msurv/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <queue>
#include <stdexcept>
#include <tuple>

namespace msurv {

GammaPrior PriorSpec::lambda_prior(int j, int jp) const {
  const auto it = lambda.find({j, jp});
  return it == lambda.end() ? GammaPrior{} : it->second;
}

double PriorSpec::alpha_weight(int i, int ip) const {
  const auto it = alpha.find({i, ip});
  return it == alpha.end() ? alpha_default : it->second;
}

double CompleteData::normalized_integral(const Model& m, int p) const {
  const double rho = m.rho(p);
  const double base = static_cast<double>(digamma_ld(rho));
  double acc = 0.0;
  for (const auto& [x, dt] : segments) {
    const double S = m.pair_risk_sum(x, p);
    if (S > 0.0) acc += dt * (static_cast<double>(digamma_ld(rho + S)) - base);
  }
  return acc;
}

double CompleteData::pair_loglik(const Model& m, int p) const {
  double ll = -m.nu(p) * normalized_integral(m, p);
  for (const auto& ev : events)
    if (ev.pair == p) ll += std::log(m.lambda_event(ev));
  return ll;
}

CompleteData build_complete_data(const PopulationTrajectory& traj, const Model& m) {
  const Timeline tl = build_timeline(traj, m.graph().num_states);
  CompleteData out;
  for (const auto& seg : tl.segments) {
    if (seg.t1 == kInf) break;
    out.segments.push_back({seg.x, seg.t1 - seg.t0});
  }
  out.events.reserve(tl.events.size());
  const int s = m.graph().num_states;
  for (const auto& tev : tl.events) {
    // event_from_states wants per-unit state lists; expand the counts.
    std::vector<int> y;
    for (int i = 1; i <= s; ++i)
      for (int c = 0; c < tev.pre_config[i]; ++c) y.push_back(i);
    std::vector<int> yp = y;
    for (const auto& mv : tev.event->moves)
      for (std::size_t u = 0; u < y.size(); ++u)
        if (y[u] == mv.from && yp[u] == mv.from) {
          yp[u] = mv.to;
          break;
        }
    out.events.push_back(m.event_from_states(y, yp));
  }
  return out;
}

namespace {

// Shortest edge path from `a` to `b`; returns the intermediate-plus-final
// state sequence (excluding `a`). Throws when unreachable.
std::vector<int> shortest_path(const TransitionGraph& g, int a, int b) {
  std::vector<int> prev(g.num_states + 1, 0);
  std::queue<int> q;
  q.push(a);
  prev[a] = a;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    if (v == b) break;
    for (int w : g.out[v])
      if (prev[w] == 0) {
        prev[w] = v;
        q.push(w);
      }
  }
  if (prev[b] == 0)
    throw std::runtime_error("latent initialization: observed state " +
                             std::to_string(b) + " unreachable from " +
                             std::to_string(a));
  std::vector<int> path;
  for (int v = b; v != a; v = prev[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

PopulationTrajectory init_latent(const Model& model, const PanelData& panel,
                                 Rng& rng) {
  const TransitionGraph& g = model.graph();
  const int n = static_cast<int>(panel.units.size());
  std::vector<int> initial(n);
  std::vector<double> censor(n, kInf);
  std::vector<std::vector<std::pair<double, int>>> jumps(n);

  // Units making a one-hop move over the same observation window within the
  // same block pair share one jump time: the posterior mass sits on heavily
  // clustered co-moves, and seeding them makes the initial event count (and
  // hence the early rate draws) commensurate with it.
  std::map<std::tuple<double, double, int>, double> shared;

  for (int u = 0; u < n; ++u) {
    const PanelRecord& rec = panel.units[u];
    initial[u] = rec.states[0];
    int state = rec.states[0];
    double last_t = 0.0;
    for (std::size_t k = 1; k < rec.times.size(); ++k) {
      if (rec.states[k] != state) {
        const std::vector<int> path = shortest_path(g, state, rec.states[k]);
        std::vector<double> ts(path.size());
        if (path.size() == 1) {
          const auto key =
              std::make_tuple(last_t, rec.times[k], model.pair_of_edge(state, path[0]));
          auto it = shared.find(key);
          if (it == shared.end())
            it = shared.emplace(key, rng.uniform(last_t, rec.times[k])).first;
          ts[0] = it->second;
        } else {
          for (double& t : ts) t = rng.uniform(last_t, rec.times[k]);
          std::sort(ts.begin(), ts.end());
        }
        for (std::size_t j = 0; j < path.size(); ++j)
          jumps[u].push_back({ts[j], path[j]});
        state = rec.states[k];
      }
      last_t = rec.times[k];
    }
    if (rec.censored) {
      censor[u] = rec.terminal_time;
    } else {
      const std::vector<int> path = shortest_path(g, state, rec.death_state);
      std::vector<double> ts(path.size() - 1);
      for (double& t : ts) t = rng.uniform(last_t, rec.terminal_time);
      std::sort(ts.begin(), ts.end());
      for (std::size_t j = 0; j + 1 < path.size(); ++j)
        jumps[u].push_back({ts[j], path[j]});
      jumps[u].push_back({rec.terminal_time, rec.death_state});
    }
  }
  return assemble_population(initial, jumps, censor);
}

namespace {

struct GridPoint {
  double time = 0.0;
  int atom = -1;  // atom index, or -1 for a uniformized candidate time
};

// Dense one-step kernel rows: K[i][j], indices 1..s (row/col 0 unused).
using Kernel = std::vector<std::vector<double>>;

Kernel uniformized_kernel(const ConditionalLaw& law, int seg, double omega) {
  const TransitionGraph& g = law.model().graph();
  const int s = g.num_states;
  Kernel K(s + 1, std::vector<double>(s + 1, 0.0));
  for (int i = 1; i <= s; ++i) {
    if (g.is_absorbing(i)) {
      K[i][i] = 1.0;
      continue;
    }
    double exit = 0.0;
    for (int ip : g.out[i]) {
      const double h = law.continuous_hazard_seg(i, ip, seg);
      K[i][ip] = h / omega;
      exit += h;
    }
    K[i][i] = 1.0 - exit / omega;
  }
  return K;
}

Kernel atomic_kernel(const ConditionalLaw& law, int atom) {
  const TransitionGraph& g = law.model().graph();
  const int s = g.num_states;
  Kernel K(s + 1, std::vector<double>(s + 1, 0.0));
  for (int i = 1; i <= s; ++i) {
    if (g.is_absorbing(i)) {
      K[i][i] = 1.0;
      continue;
    }
    const ConditionalLaw::AtomicDist dist = law.atomic_distribution(atom, i);
    K[i][i] = std::max(dist.stay, 0.0);
    for (const auto& [ip, mass] : dist.moves) K[i][ip] = std::max(mass, 0.0);
  }
  return K;
}

int state_on_path(const UnitPath& path, double t) {
  int state = path.initial;
  for (const auto& [jt, to] : path.jumps) {
    if (jt > t) break;
    state = to;
  }
  return state;
}

}  // namespace

UnitPath resample_unit(const ConditionalLaw& law, const PanelRecord& rec,
                       const UnitPath& current, double omega_c, Rng& rng) {
  const Model& m = law.model();
  const TransitionGraph& g = m.graph();
  const int s = g.num_states;
  const double V = rec.terminal_time;
  const auto& segs = law.segments();
  const auto& atoms = law.atoms();

  // Dominating rate over the window.
  double max_exit = 0.0;
  for (std::size_t seg = 0; seg < segs.size(); ++seg) {
    if (segs[seg].t0 >= V) break;
    for (int i = 1; i <= s; ++i)
      if (!g.is_absorbing(i)) max_exit = std::max(max_exit, law.total_exit_seg(i, seg));
  }
  const double omega = omega_c * max_exit;
  if (!(omega > 0.0)) throw std::runtime_error("resample_unit: zero exit rates");

  // Candidate times from the thinned Poisson process at rate
  // omega - exit(current state); piecewise constant between breakpoints.
  std::vector<double> bps;
  bps.push_back(0.0);
  for (const auto& seg : segs)
    if (seg.t0 > 0.0 && seg.t0 < V) bps.push_back(seg.t0);
  for (const auto& [jt, to] : current.jumps)
    if (jt > 0.0 && jt < V) bps.push_back(jt);
  bps.push_back(V);
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

  std::vector<GridPoint> grid;
  for (std::size_t b = 0; b + 1 < bps.size(); ++b) {
    const double a = bps[b], e = bps[b + 1];
    const int state = state_on_path(current, a);
    const double exit = g.is_absorbing(state) ? 0.0 : law.total_exit(state, a);
    const double rate = omega - exit;
    if (!(rate > 0.0)) continue;
    double t = a;
    for (;;) {
      t += rng.exponential(rate);
      if (t >= e) break;
      grid.push_back({t, -1});
    }
  }
  for (int ai = 0; ai < static_cast<int>(atoms.size()); ++ai)
    if (atoms[ai].time > 0.0 && atoms[ai].time < V) grid.push_back({atoms[ai].time, ai});
  for (const auto& [jt, to] : current.jumps) {
    if (!(jt > 0.0 && jt < V)) continue;
    bool is_atom = false;
    for (const auto& a : atoms)
      if (a.time == jt) {
        is_atom = true;
        break;
      }
    if (!is_atom) grid.push_back({jt, -1});
  }
  std::sort(grid.begin(), grid.end(),
            [](const GridPoint& a, const GridPoint& b) { return a.time < b.time; });
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](const GridPoint& a, const GridPoint& b) {
                           return a.time == b.time;
                         }),
             grid.end());
  const int M = static_cast<int>(grid.size());

  // Kernels, cached per segment / computed once per atom.
  std::map<int, Kernel> seg_kernels;
  std::vector<Kernel> K(M);
  for (int gm = 0; gm < M; ++gm) {
    if (grid[gm].atom >= 0) {
      K[gm] = atomic_kernel(law, grid[gm].atom);
    } else {
      const int seg = law.segment_at(grid[gm].time);
      auto it = seg_kernels.find(seg);
      if (it == seg_kernels.end())
        it = seg_kernels.emplace(seg, uniformized_kernel(law, seg, omega)).first;
      K[gm] = it->second;
    }
  }

  // Forward filter with panel-state masks. F[gm] is the distribution of the
  // state held on [grid[gm].time, next grid time).
  std::vector<std::vector<double>> F(M + 1, std::vector<double>(s + 1, 0.0));
  F[0][rec.states[0]] = 1.0;
  std::size_t obs = 1;
  for (int gm = 0; gm <= M; ++gm) {
    if (gm > 0) {
      for (int i = 1; i <= s; ++i) {
        if (F[gm - 1][i] == 0.0) continue;
        for (int j = 1; j <= s; ++j) F[gm][j] += F[gm - 1][i] * K[gm - 1][i][j];
      }
    }
    const double upper = (gm < M) ? grid[gm].time : V;
    while (obs < rec.times.size() &&
           (rec.times[obs] < upper || (gm == M && rec.times[obs] <= V))) {
      for (int i = 1; i <= s; ++i)
        if (i != rec.states[obs]) F[gm][i] = 0.0;
      ++obs;
    }
    double sum = 0.0;
    for (int i = 1; i <= s; ++i) sum += F[gm][i];
    if (!(sum > 0.0)) throw std::runtime_error("resample_unit: infeasible bridge");
    for (int i = 1; i <= s; ++i) F[gm][i] /= sum;
  }

  if (!rec.censored) {
    // Weight terminal states by the instantaneous chance of the recorded
    // death: the co-move mass when V is another unit's transition time, the
    // hazard density otherwise.
    int vatom = -1;
    for (int ai = 0; ai < static_cast<int>(atoms.size()); ++ai)
      if (atoms[ai].time == V) vatom = ai;
    for (int i = 1; i <= s; ++i) {
      if (F[M][i] == 0.0) continue;
      double w = 0.0;
      if (!g.is_absorbing(i) && g.has_edge(i, rec.death_state)) {
        if (vatom >= 0) {
          for (const auto& [ip, mass] : law.atomic_distribution(vatom, i).moves)
            if (ip == rec.death_state) w = std::max(mass, 0.0);
        } else {
          const int seg = law.segment_at(std::nextafter(V, 0.0));
          w = law.continuous_hazard_seg(i, rec.death_state, seg);
        }
      }
      F[M][i] *= w;
    }
    double sum = 0.0;
    for (int i = 1; i <= s; ++i) sum += F[M][i];
    if (!(sum > 0.0)) throw std::runtime_error("resample_unit: death unreachable");
    for (int i = 1; i <= s; ++i) F[M][i] /= sum;
  } else {
    for (int i = 1; i <= s; ++i)
      if (g.is_absorbing(i)) F[M][i] = 0.0;
  }

  // Backward sampling; self-transitions on the grid vanish in the path.
  std::vector<int> x(M + 1, 0);
  {
    std::vector<double> w(F[M].begin() + 1, F[M].end());
    x[M] = 1 + rng.categorical(w);
  }
  for (int gm = M; gm >= 1; --gm) {
    std::vector<double> w(s, 0.0);
    for (int i = 1; i <= s; ++i) w[i - 1] = F[gm - 1][i] * K[gm - 1][i][x[gm]];
    x[gm - 1] = 1 + rng.categorical(w);
  }

  UnitPath path;
  path.initial = rec.states[0];
  for (int gm = 1; gm <= M; ++gm)
    if (x[gm] != x[gm - 1]) path.jumps.push_back({grid[gm - 1].time, x[gm]});
  if (!rec.censored) path.jumps.push_back({V, rec.death_state});
  return path;
}

void update_lambda(Model& m, const CompleteData& data, const PriorSpec& prior,
                   Rng& rng) {
  for (int p = 0; p < m.num_pairs(); ++p) {
    const BlockPair& bp = m.pair(p);
    const GammaPrior pr = prior.lambda_prior(bp.from_block + 1, bp.to_block + 1);
    int k = 0;
    for (const auto& ev : data.events)
      if (ev.pair == p) ++k;
    const double rho = m.rho(p);
    const double rate = pr.rate + data.normalized_integral(m, p) / rho;
    const double lam = rng.gamma(pr.shape + k, rate);
    m.set_nu(bp.from_block + 1, bp.to_block + 1, lam / rho);
  }
}

void update_alpha(Model& m, const CompleteData& data, const PriorSpec& prior,
                  Rng& rng) {
  for (int p = 0; p < m.num_pairs(); ++p) {
    const BlockPair& bp = m.pair(p);
    for (std::size_t slot = 0; slot < bp.sources.size(); ++slot) {
      const auto& dests = bp.dests[slot];
      if (dests.size() < 2) continue;
      std::vector<double> conc(dests.size());
      for (std::size_t ds = 0; ds < dests.size(); ++ds)
        conc[ds] = prior.alpha_weight(bp.sources[slot], dests[ds]);
      for (const auto& ev : data.events) {
        if (ev.pair != p) continue;
        for (std::size_t ds = 0; ds < dests.size(); ++ds)
          conc[ds] += ev.move[slot][ds];
      }
      const std::vector<double> draw = rng.dirichlet(conc);
      for (std::size_t ds = 0; ds < dests.size(); ++ds)
        m.set_alpha(bp.sources[slot], dests[ds], draw[ds]);
    }
  }
}

std::vector<int> update_gamma(Model& m, const CompleteData& data,
                              const PriorSpec& prior,
                              const std::vector<double>& steps, Rng& rng) {
  const auto free = m.free_gamma();
  std::vector<int> accepted(free.size(), 0);
  const double var = prior.gamma_log_sd * prior.gamma_log_sd;
  for (std::size_t k = 0; k < free.size(); ++k) {
    const auto [p, slot] = free[k];
    const int state = m.pair(p).sources[slot];
    const int jp = m.pair(p).to_block + 1;
    const double g0 = m.gamma(p, slot);
    const double th0 = std::log(g0);
    const double th1 = th0 + steps[k] * rng.normal();
    const double ll0 = data.pair_loglik(m, p);
    m.set_gamma(state, jp, std::exp(th1));
    const double ll1 = data.pair_loglik(m, p);
    const double logr = ll1 - ll0 - (th1 * th1 - th0 * th0) / (2.0 * var);
    if (std::log(rng.uniform()) < logr)
      accepted[k] = 1;
    else
      m.set_gamma(state, jp, g0);
  }
  return accepted;
}

PosteriorDraws run_chain(const Model& init, const PanelData& panel,
                         const PriorSpec& prior, const McmcConfig& cfg) {
  Model m = init;
  Rng rng(cfg.seed);
  PopulationTrajectory traj = init_latent(m, panel, rng);
  CompleteData data = build_complete_data(traj, m);

  PosteriorDraws out;
  for (int p = 0; p < m.num_pairs(); ++p) out.names.push_back(m.param_name_nu(p));
  const auto free = m.free_gamma();
  for (const auto& [p, slot] : free)
    out.names.push_back(m.param_name_gamma(p, slot));
  std::vector<std::tuple<int, int, int>> alpha_cols;  // (pair, slot, dslot)
  for (int p = 0; p < m.num_pairs(); ++p)
    for (std::size_t slot = 0; slot < m.pair(p).sources.size(); ++slot)
      if (m.pair(p).dests[slot].size() >= 2)
        for (std::size_t ds = 0; ds < m.pair(p).dests[slot].size(); ++ds) {
          out.names.push_back(m.param_name_alpha(p, static_cast<int>(slot),
                                                 static_cast<int>(ds)));
          alpha_cols.push_back({p, static_cast<int>(slot), static_cast<int>(ds)});
        }

  std::vector<double> steps(free.size(), cfg.mh_step);
  std::vector<int> window_acc(free.size(), 0), window_n(free.size(), 0);
  std::vector<long> total_acc(free.size(), 0), total_n(free.size(), 0);
  constexpr int kAdaptWindow = 25;

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const bool refresh = (iter - 1) % cfg.latent_period == 0;
    if (refresh) {
      for (std::size_t u = 0; u < panel.units.size(); ++u) {
        const PopulationTrajectory others = erase_unit(traj, static_cast<int>(u));
        const ConditionalLaw law(m, others);
        const UnitPath cur = unit_path_of(traj, static_cast<int>(u));
        const UnitPath next =
            resample_unit(law, panel.units[u], cur, cfg.uniformization_c, rng);
        const double censor =
            panel.units[u].censored ? panel.units[u].terminal_time : kInf;
        traj = replace_unit_path(traj, static_cast<int>(u), next, censor);
      }
      data = build_complete_data(traj, m);
    }

    const std::vector<int> acc = update_gamma(m, data, prior, steps, rng);
    for (std::size_t k = 0; k < free.size(); ++k) {
      window_acc[k] += acc[k];
      ++window_n[k];
      if (iter > cfg.burnin) {
        total_acc[k] += acc[k];
        ++total_n[k];
      }
    }
    if (cfg.adapt_step && iter <= cfg.burnin && iter % kAdaptWindow == 0) {
      for (std::size_t k = 0; k < free.size(); ++k) {
        const double r = double(window_acc[k]) / window_n[k];
        if (r > 0.40) steps[k] *= 1.5;
        if (r < 0.20) steps[k] /= 1.5;
        window_acc[k] = window_n[k] = 0;
      }
    }
    update_lambda(m, data, prior, rng);
    update_alpha(m, data, prior, rng);

    if (iter > cfg.burnin) {
      std::vector<double> row;
      row.reserve(out.names.size());
      for (int p = 0; p < m.num_pairs(); ++p) row.push_back(m.nu(p));
      for (const auto& [p, slot] : free) row.push_back(m.gamma(p, slot));
      for (const auto& [p, slot, ds] : alpha_cols) row.push_back(m.alpha(p, slot, ds));
      out.rows.push_back(std::move(row));
      if (refresh) {
        out.latent_rows.push_back(static_cast<int>(out.rows.size()) - 1);
        out.latents.push_back(traj);
      }
    }
  }

  for (std::size_t k = 0; k < free.size(); ++k) {
    const auto [p, slot] = free[k];
    out.acceptance[m.param_name_gamma(p, slot)] =
        total_n[k] ? double(total_acc[k]) / total_n[k] : 0.0;
  }
  return out;
}

}  // namespace msurv
