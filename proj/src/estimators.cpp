#include "msurv/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msurv {

SurvivalCurve kaplan_meier(const std::vector<FailureRecord>& records) {
  if (records.empty()) throw std::invalid_argument("kaplan_meier: empty input");
  for (const auto& r : records)
    if (!(r.time > 0.0))
      throw std::invalid_argument("kaplan_meier: record times must be positive");

  std::vector<FailureRecord> recs = records;
  std::sort(recs.begin(), recs.end(),
            [](const FailureRecord& a, const FailureRecord& b) { return a.time < b.time; });

  SurvivalCurve curve;
  curve.times.push_back(0.0);
  curve.value.push_back(1.0);
  double s = 1.0;
  std::size_t i = 0;
  const std::size_t n = recs.size();
  while (i < n) {
    const double t = recs[i].time;
    int deaths = 0;
    const std::size_t at_risk = n - i;
    while (i < n && recs[i].time == t) {
      if (!recs[i].censored) ++deaths;
      ++i;
    }
    if (deaths > 0) {
      s *= 1.0 - double(deaths) / double(at_risk);
      curve.times.push_back(t);
      curve.value.push_back(s);
    }
  }
  return curve;
}

OccupancyCurves aalen_johansen(const PopulationTrajectory& traj,
                               const TransitionGraph& g) {
  const int s = g.num_states;
  OccupancyCurves out;
  out.occupancy.assign(s + 1, {});

  // Empirical initial distribution.
  std::vector<double> occ(s + 1, 0.0);
  for (int st : traj.initial) occ[st] += 1.0 / traj.n;
  out.times.push_back(0.0);
  for (int i = 1; i <= s; ++i) out.occupancy[i].push_back(occ[i]);

  const Timeline tl = build_timeline(traj, s);
  for (const auto& tev : tl.events) {
    const auto& y = tev.pre_config;
    // occ <- occ * (I + dN/Y)
    std::vector<double> next = occ;
    for (const auto& m : tev.event->moves) {
      const double yi = y[m.from];
      next[m.from] -= occ[m.from] / yi;
      next[m.to] += occ[m.from] / yi;
    }
    occ = next;
    out.times.push_back(tev.time);
    for (int i = 1; i <= s; ++i) out.occupancy[i].push_back(occ[i]);
  }
  return out;
}

int PosteriorDraws::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("no parameter named " + name);
  return static_cast<int>(it - names.begin());
}

double PosteriorDraws::mean(const std::string& name) const {
  const int c = column(name);
  double acc = 0.0;
  for (const auto& row : rows) acc += row[c];
  return acc / rows.size();
}

double PosteriorDraws::quantile(const std::string& name, double q) const {
  const int c = column(name);
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& row : rows) v.push_back(row[c]);
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

namespace {

// Applies a named parameter row onto a copy of the model skeleton.
Model apply_row(const Model& skeleton, const std::vector<std::string>& names,
                const std::vector<double>& row) {
  Model m = skeleton;
  for (std::size_t c = 0; c < names.size(); ++c) {
    const std::string& name = names[c];
    const auto p1 = name.find('_');
    const auto p2 = name.find('_', p1 + 1);
    if (p1 == std::string::npos || p2 == std::string::npos) continue;
    const std::string kind = name.substr(0, p1);
    const int a = std::stoi(name.substr(p1 + 1, p2 - p1 - 1));
    const int b = std::stoi(name.substr(p2 + 1));
    if (kind == "nu")
      m.set_nu(a, b, row[c]);
    else if (kind == "gamma")
      m.set_gamma(a, b, row[c]);
    else if (kind == "alpha")
      m.set_alpha(a, b, row[c]);
  }
  return m;
}

double pointwise_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

}  // namespace

SurvivalCurve posterior_survival(const PosteriorDraws& draws, const Model& skeleton,
                                 int baseline_state, const std::vector<double>& grid,
                                 int paths_per_draw, std::uint64_t seed,
                                 double at_time) {
  if (skeleton.graph().is_absorbing(baseline_state))
    throw std::invalid_argument("posterior_survival: baseline state is absorbing");
  if (draws.latents.empty())
    throw std::invalid_argument("posterior_survival: draws carry no latent snapshots");
  if (grid.empty()) throw std::invalid_argument("posterior_survival: empty grid");

  const double horizon = grid.back() + 1.0;
  std::vector<std::vector<double>> curves;  // per draw, per grid time
  Rng rng(seed);
  // The curve describes a future recruit on its own clock: by the time it
  // enters, the study units contribute neither counts nor atoms, so the
  // conditional law given an empty co-resident population applies. Draws are
  // taken at the latent-refresh rows, where the parameters have just been
  // re-equilibrated against a fresh latent process.
  const PopulationTrajectory nobody;
  for (std::size_t k = 0; k < draws.latents.size(); ++k) {
    const Model m = apply_row(skeleton, draws.names, draws.rows[draws.latent_rows[k]]);
    const ConditionalLaw law(m, nobody);
    std::vector<double> abs_times;
    abs_times.reserve(paths_per_draw);
    for (int r = 0; r < paths_per_draw; ++r) {
      const UnitPath path = law.sample_unit(baseline_state, horizon, rng);
      double ta = kInf;
      for (const auto& [t, st] : path.jumps)
        if (m.graph().is_absorbing(st)) {
          ta = t;
          break;
        }
      abs_times.push_back(ta);
    }
    int at_risk = 0;
    for (double ta : abs_times)
      if (ta > at_time) ++at_risk;
    if (at_risk == 0) continue;
    std::vector<double> curve(grid.size());
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      int alive = 0;
      for (double ta : abs_times)
        if (ta > at_time && ta > grid[gi]) ++alive;
      curve[gi] = double(alive) / at_risk;
    }
    curves.push_back(std::move(curve));
  }
  if (curves.empty())
    throw std::runtime_error("posterior_survival: no draw had survivors at at_time");

  SurvivalCurve out;
  out.baseline_state = baseline_state;
  out.times = grid;
  out.value.resize(grid.size());
  out.q05.resize(grid.size());
  out.q95.resize(grid.size());
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    std::vector<double> col;
    col.reserve(curves.size());
    for (const auto& c : curves) col.push_back(c[gi]);
    out.value[gi] = pointwise_quantile(col, 0.50);
    out.q05[gi] = pointwise_quantile(col, 0.05);
    out.q95[gi] = pointwise_quantile(col, 0.95);
  }
  return out;
}

double expected_survival(const SurvivalCurve& curve, double horizon) {
  if (curve.times.empty()) throw std::invalid_argument("expected_survival: empty curve");
  double acc = 0.0;
  for (std::size_t i = 1; i < curve.times.size(); ++i) {
    const double a = curve.times[i - 1];
    double b = curve.times[i];
    double vb = curve.value[i];
    if (b > horizon) {
      // linear interpolation at the horizon
      const double w = (horizon - a) / (b - a);
      vb = curve.value[i - 1] + w * (curve.value[i] - curve.value[i - 1]);
      b = horizon;
    }
    acc += 0.5 * (curve.value[i - 1] + vb) * (b - a);
    if (b >= horizon) return acc;
  }
  // Step curves: extend the last value to the horizon.
  if (curve.times.back() < horizon)
    acc += curve.value.back() * (horizon - curve.times.back());
  return acc;
}

}  // namespace msurv
