#pragma once

#include <limits>
#include <string>
#include <vector>

#include "msurv/measure.hpp"
#include "msurv/rng.hpp"

namespace msurv {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Move {
  int unit = 0;
  int from = 0;
  int to = 0;
};

struct TrajEvent {
  double time = 0.0;
  std::vector<Move> moves;
};

// Piecewise-constant paths for n units. Event times are strictly increasing;
// a unit never moves after entering an absorbing state or past its censor time.
struct PopulationTrajectory {
  int n = 0;
  std::vector<int> initial;        // per unit
  std::vector<TrajEvent> events;   // time ascending
  std::vector<double> censor;      // per unit, +inf when uncensored

  int state_at(int unit, double t) const;  // right-continuous
  // First entry into an absorbing state, +inf if none recorded.
  double absorption_time(int unit, const TransitionGraph& g) const;
  double last_event_time() const;
};

// Configuration segments of the active (unabsorbed-or-absorbed but
// uncensored) population; censored units leave the counts at their censor
// time. The last segment extends to +inf.
struct ConfigSegment {
  double t0 = 0.0, t1 = kInf;
  std::vector<int> x;
};

struct TimelineEvent {
  double time = 0.0;
  std::vector<int> pre_config;  // active configuration just before the event
  const TrajEvent* event = nullptr;
};

struct Timeline {
  std::vector<ConfigSegment> segments;
  std::vector<TimelineEvent> events;
};

Timeline build_timeline(const PopulationTrajectory& traj, int num_states);

// Size-biased p draw from density prop. to (1 - p^S) p^{rho-1} (1-p)^{-1}.
double sample_tilted_p(double S, double rho, Rng& rng, int grid = 4096);

// Gillespie-style exact simulation; horizon = +inf runs to full absorption.
PopulationTrajectory simulate_population(const Model& model,
                                         const std::vector<int>& initial,
                                         double horizon, Rng& rng);

// Joint log density (integral of zeta plus log lambda at jumps); returns
// -inf for inadmissible trajectories.
double log_density(const PopulationTrajectory& traj, const Model& model);

// Time integral of one pair's zeta component; `normalized` divides out nu.
double integrate_zeta_component(const PopulationTrajectory& traj,
                                const Model& model, int pair, bool normalized);

PopulationTrajectory apply_censoring(const PopulationTrajectory& traj,
                                     const std::vector<double>& censor_times);

// Single-unit path: start state at time 0 and its jumps.
struct UnitPath {
  int initial = 0;
  std::vector<std::pair<double, int>> jumps;  // (time, new state), ascending
};

UnitPath unit_path_of(const PopulationTrajectory& traj, int u);

// Builds a population trajectory from per-unit jump lists (time, new state);
// simultaneous jumps across units merge into one event.
PopulationTrajectory assemble_population(
    const std::vector<int>& initial,
    const std::vector<std::vector<std::pair<double, int>>>& jumps,
    const std::vector<double>& censor);

// Population with unit u removed (remaining units reindexed).
PopulationTrajectory erase_unit(const PopulationTrajectory& traj, int u);

// Population with unit u's path replaced.
PopulationTrajectory replace_unit_path(const PopulationTrajectory& traj, int u,
                                       const UnitPath& path, double censor_time);

// Intermittent observations for one unit plus the terminal record.
struct PanelRecord {
  std::string id;
  std::vector<double> times;   // appointment times, ascending, first at 0
  std::vector<int> states;     // observed (non-absorbing) states
  double terminal_time = 0.0;  // V
  bool censored = false;       // Delta = 1
  int death_state = 0;         // absorbing state entered at V when Delta = 0
};

struct PanelData {
  std::vector<PanelRecord> units;
};

// Panel-izes a complete trajectory: observations every `every` years while
// alive, exact failure times, censor rows for censored units.
PanelData observe_panel(const PopulationTrajectory& traj,
                        const TransitionGraph& g, double every);

}  // namespace msurv
