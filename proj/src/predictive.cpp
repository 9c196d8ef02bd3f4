#include "msurv/predictive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msurv {

namespace {

TransitionEvent grouped_or_throw(const Model& model, const TrajEvent& ev,
                                 const std::vector<int>& pre_config) {
  std::vector<int> y, yp;
  // Reuse the model's grouping through per-move bookkeeping.
  int p = -1;
  for (const auto& m : ev.moves) {
    if (!model.graph().has_edge(m.from, m.to))
      throw std::invalid_argument("conditional law: others move along a non-edge");
    const int pe = model.pair_of_edge(m.from, m.to);
    if (p == -1) p = pe;
    if (pe != p)
      throw std::invalid_argument("conditional law: others' event spans two pairs");
  }
  const BlockPair& bp = model.pair(p);
  TransitionEvent out;
  out.pair = p;
  out.stay.assign(bp.sources.size(), 0);
  out.move.resize(bp.sources.size());
  for (std::size_t slot = 0; slot < bp.sources.size(); ++slot) {
    out.stay[slot] = pre_config[bp.sources[slot]];
    out.move[slot].assign(bp.dests[slot].size(), 0);
  }
  for (const auto& m : ev.moves) {
    const int slot = bp.source_slot[m.from];
    const auto& dests = bp.dests[slot];
    const int ds = static_cast<int>(
        std::find(dests.begin(), dests.end(), m.to) - dests.begin());
    --out.stay[slot];
    ++out.move[slot][ds];
  }
  return out;
}

}  // namespace

ConditionalLaw::ConditionalLaw(const Model& model, const PopulationTrajectory& others)
    : model_(&model) {
  const Timeline tl = build_timeline(others, model.graph().num_states);
  segments_ = tl.segments;
  pair_S_.resize(segments_.size());
  for (std::size_t s = 0; s < segments_.size(); ++s) {
    pair_S_[s].resize(model.num_pairs());
    for (int p = 0; p < model.num_pairs(); ++p)
      pair_S_[s][p] = model.pair_risk_sum(segments_[s].x, p);
  }
  for (const auto& tev : tl.events) {
    Atom a;
    a.time = tev.time;
    a.event = grouped_or_throw(model, *tev.event, tev.pre_config);
    a.lambda = model.lambda_event(a.event);
    atoms_.push_back(std::move(a));
  }
}

int ConditionalLaw::segment_at(double t) const {
  // Segments partition [0, inf); find the one with t0 <= t < t1.
  int lo = 0, hi = static_cast<int>(segments_.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (t < segments_[mid].t1)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

double ConditionalLaw::continuous_hazard_seg(int i, int ip, int seg) const {
  const Model& m = *model_;
  const int p = m.pair_of_edge(i, ip);
  if (p < 0) throw std::invalid_argument("continuous_hazard: (i, i') is not an edge");
  const int slot = m.pair(p).source_slot[i];
  const double S = pair_S_[seg][p];
  const double rho = m.rho(p);
  const double gi = m.gamma(p, slot);
  const double dzeta =
      m.nu(p) * static_cast<double>(digamma_ld(rho + S + gi) - digamma_ld(rho + S));
  const auto& dests = m.pair(p).dests[slot];
  const int ds = static_cast<int>(
      std::find(dests.begin(), dests.end(), ip) - dests.begin());
  return m.alpha(p, slot, ds) * dzeta + m.erosion(i, ip);
}

double ConditionalLaw::continuous_hazard(int i, int ip, double t) const {
  return continuous_hazard_seg(i, ip, segment_at(t));
}

double ConditionalLaw::total_exit_seg(int i, int seg) const {
  double tot = 0.0;
  for (int ip : model_->graph().out[i]) tot += continuous_hazard_seg(i, ip, seg);
  return tot;
}

double ConditionalLaw::total_exit(int i, double t) const {
  return total_exit_seg(i, segment_at(t));
}

double ConditionalLaw::cumulative_hazard(int i, int ip, double t1, double t2) const {
  if (t2 < t1) throw std::invalid_argument("cumulative_hazard: t2 < t1");
  double acc = 0.0;
  for (int s = segment_at(t1); s < static_cast<int>(segments_.size()); ++s) {
    const double a = std::max(t1, segments_[s].t0);
    const double b = std::min(t2, segments_[s].t1);
    if (b <= a) break;
    acc += continuous_hazard_seg(i, ip, s) * (b - a);
    if (segments_[s].t1 >= t2) break;
  }
  return acc;
}

ConditionalLaw::AtomicDist ConditionalLaw::atomic_distribution(
    std::size_t atom_index, int i) const {
  const Atom& a = atoms_[atom_index];
  const Model& m = *model_;
  const BlockPair& bp = m.pair(a.event.pair);
  AtomicDist dist;
  const int slot = bp.source_slot[i];
  if (slot < 0) return dist;  // different block (or no edge): point mass on stay

  TransitionEvent stay_ev = a.event;
  ++stay_ev.stay[slot];
  dist.stay = m.lambda_event(stay_ev) / a.lambda;
  dist.moves.reserve(bp.dests[slot].size());
  for (std::size_t ds = 0; ds < bp.dests[slot].size(); ++ds) {
    TransitionEvent mv_ev = a.event;
    ++mv_ev.move[slot][ds];
    dist.moves.push_back(
        {bp.dests[slot][ds], m.lambda_event(mv_ev) / a.lambda});
  }
  return dist;
}

ConditionalLaw::AtomicDist ConditionalLaw::atomic_distribution_at(double t,
                                                                  int i) const {
  for (std::size_t k = 0; k < atoms_.size(); ++k)
    if (atoms_[k].time == t) return atomic_distribution(k, i);
  throw std::invalid_argument("atomic_distribution_at: t is not a transition time");
}

double ConditionalLaw::stay_probability(int i, double t, double s) const {
  if (s < 0.0) throw std::invalid_argument("stay_probability: s must be >= 0");
  if (s == 0.0 || model_->graph().is_absorbing(i)) return 1.0;
  double cum = 0.0;
  for (int ip : model_->graph().out[i]) cum += cumulative_hazard(i, ip, t, t + s);
  double prob = std::exp(-cum);
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (atoms_[k].time <= t) continue;
    if (atoms_[k].time > t + s) break;
    prob *= atomic_distribution(k, i).stay;
  }
  return prob;
}

UnitPath ConditionalLaw::sample_unit(int initial_state, double horizon,
                                     Rng& rng) const {
  const TransitionGraph& g = model_->graph();
  if (g.is_absorbing(initial_state))
    throw std::invalid_argument("sample_unit: initial state is absorbing");
  UnitPath path;
  path.initial = initial_state;
  int state = initial_state;
  double t = 0.0;
  std::size_t next_atom = 0;

  while (!g.is_absorbing(state) && t < horizon) {
    const int seg = segment_at(t);
    const double seg_end = std::min(segments_[seg].t1, horizon);
    // Next atom boundary within this segment (atoms sit at segment ends).
    while (next_atom < atoms_.size() && atoms_[next_atom].time <= t) ++next_atom;

    const double total = total_exit_seg(state, seg);
    const double jump_at = (total > 0.0) ? t + rng.exponential(total) : kInf;
    if (jump_at < seg_end) {
      std::vector<double> w;
      const auto& dests = g.out[state];
      w.reserve(dests.size());
      for (int ip : dests) w.push_back(continuous_hazard_seg(state, ip, seg));
      state = dests[rng.categorical(w)];
      t = jump_at;
      path.jumps.push_back({t, state});
      continue;
    }
    t = seg_end;
    if (t >= horizon) break;
    if (next_atom < atoms_.size() && atoms_[next_atom].time == t) {
      const AtomicDist dist = atomic_distribution(next_atom, state);
      ++next_atom;
      if (!dist.moves.empty()) {
        std::vector<double> w;
        w.reserve(dist.moves.size() + 1);
        w.push_back(std::max(dist.stay, 0.0));
        for (const auto& [ip, mass] : dist.moves) w.push_back(std::max(mass, 0.0));
        const int pick = rng.categorical(w);
        if (pick > 0) {
          state = dist.moves[pick - 1].first;
          path.jumps.push_back({t, state});
        }
      }
    }
  }
  return path;
}

}  // namespace msurv
