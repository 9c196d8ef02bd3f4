#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "msurv/predictive.hpp"
#include "msurv/trajectory.hpp"

namespace msurv {

struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> value;  // point estimate (or pointwise median)
  std::vector<double> q05, q95;
  int baseline_state = 0;
};

struct FailureRecord {
  double time = 0.0;
  bool censored = false;
};

// Product-limit estimator with right censoring. Step curve: entries at 0 and
// at each distinct event time.
SurvivalCurve kaplan_meier(const std::vector<FailureRecord>& records);

// State-occupancy curves from completely observed transition data.
struct OccupancyCurves {
  std::vector<double> times;
  std::vector<std::vector<double>> occupancy;  // [state 1..s][time index]
};
OccupancyCurves aalen_johansen(const PopulationTrajectory& traj,
                               const TransitionGraph& g);

// Parameter draws plus optional latent snapshots from the MCMC run.
struct PosteriorDraws {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;  // one row per retained iteration
  std::map<std::string, double> acceptance;
  std::vector<int> latent_rows;  // row index of each latent snapshot
  std::vector<PopulationTrajectory> latents;

  int column(const std::string& name) const;
  double mean(const std::string& name) const;
  double quantile(const std::string& name, double q) const;
};

// Predictive survival given baseline state: per latent snapshot, Monte Carlo
// over conditional unit paths; pointwise median and 5%/95% bands.
// at_time > 0 conditions on the new unit being alive at that time.
SurvivalCurve posterior_survival(const PosteriorDraws& draws, const Model& skeleton,
                                 int baseline_state, const std::vector<double>& grid,
                                 int paths_per_draw, std::uint64_t seed,
                                 double at_time = 0.0);

// Trapezoidal integral of the curve up to the horizon.
double expected_survival(const SurvivalCurve& curve, double horizon);

}  // namespace msurv
