#pragma once

#include <string>
#include <vector>

#include "msurv/estimators.hpp"
#include "msurv/mcmc.hpp"
#include "msurv/trajectory.hpp"

namespace msurv {

// Panel CSV: header `unit_id,time,state,event`; event is obs, death, or
// censor. Rows of one unit are contiguous and time-sorted, the first at
// time 0; exactly one terminal row (death or censor) closes each unit.
PanelData read_panel_csv(const std::string& path, const TransitionGraph& g);
void write_panel_csv(const std::string& path, const PanelData& panel);

// Trajectory CSV: header `unit_id,time,from_state,to_state,kind`; kind is
// init (to_state = initial state at time 0), jump, or censor.
void write_trajectory_csv(const std::string& path, const PopulationTrajectory& traj);
PopulationTrajectory read_trajectory_csv(const std::string& path,
                                         const TransitionGraph& g);

// Model plus run settings from JSON.
struct AppConfig {
  Model model;
  PriorSpec prior;
  McmcConfig mcmc;
  std::vector<int> initial_states;
};
AppConfig read_config(const std::string& path);

// Draws CSV: `# acceptance,<name>,<rate>` comment lines, then a header
// `iteration,<names...>` and one row per retained iteration, full precision.
void write_draws(const std::string& path, const PosteriorDraws& draws, int burnin);
// Latents CSV: a `# burnin,<n>` comment, then
// `iteration,unit,time,from_state,to_state,kind` rows with kind
// init/jump/censor; iterations refer to the draws file.
void write_latents(const std::string& path, const PosteriorDraws& draws, int burnin);
PosteriorDraws read_draws(const std::string& draws_path);
void read_latents(const std::string& latents_path, PosteriorDraws& draws);

void write_curve_csv(const std::string& path, const SurvivalCurve& curve);
void write_occupancy_csv(const std::string& path, const OccupancyCurves& curves);

}  // namespace msurv
