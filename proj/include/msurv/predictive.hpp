#pragma once

#include <vector>

#include "msurv/trajectory.hpp"

namespace msurv {

// Conditional law of one additional unit given n observed trajectories:
// piecewise-constant continuous hazards between the others' transition times
// and atomic co-transition masses at them.
class ConditionalLaw {
 public:
  ConditionalLaw(const Model& model, const PopulationTrajectory& others);

  struct Atom {
    double time = 0.0;
    TransitionEvent event;
    double lambda = 0.0;  // rate of the others' event alone
  };

  const Model& model() const { return *model_; }
  const std::vector<ConfigSegment>& segments() const { return segments_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  int segment_at(double t) const;

  // Delta-zeta hazard of the single move i -> i' at a non-atomic time,
  // weighted by the destination probability, plus erosion.
  double continuous_hazard(int i, int ip, double t) const;
  double continuous_hazard_seg(int i, int ip, int seg) const;
  // Total continuous exit rate of state i.
  double total_exit(int i, double t) const;
  double total_exit_seg(int i, int seg) const;

  double cumulative_hazard(int i, int ip, double t1, double t2) const;

  // Distribution at an atom for a new unit in state i: stay mass plus
  // co-move masses per destination; masses sum to 1.
  struct AtomicDist {
    double stay = 1.0;
    std::vector<std::pair<int, double>> moves;  // (destination, mass)
  };
  AtomicDist atomic_distribution(std::size_t atom_index, int i) const;
  // Lookup by exact time; throws when t is not an others' transition time.
  AtomicDist atomic_distribution_at(double t, int i) const;

  // P(new unit holds state i throughout (t, t + s]).
  double stay_probability(int i, double t, double s) const;

  // Forward simulation of the new unit from a non-absorbing state.
  UnitPath sample_unit(int initial_state, double horizon, Rng& rng) const;

 private:
  const Model* model_;
  std::vector<ConfigSegment> segments_;
  std::vector<Atom> atoms_;
  std::vector<std::vector<double>> pair_S_;  // per segment, per pair
};

}  // namespace msurv
