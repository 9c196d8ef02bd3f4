#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "msurv/estimators.hpp"
#include "msurv/predictive.hpp"
#include "msurv/trajectory.hpp"

namespace msurv {

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
};

// Priors: Gamma on the per-block-pair event intensity lambda = nu * rho,
// Dirichlet on destination weights, log-normal on free relative risks.
struct PriorSpec {
  std::map<std::pair<int, int>, GammaPrior> lambda;  // keyed by block pair (j, j')
  std::map<std::pair<int, int>, double> alpha;       // keyed by edge (i, i')
  double alpha_default = 1.0;
  double gamma_log_sd = 1.0;

  GammaPrior lambda_prior(int j, int jp) const;
  double alpha_weight(int i, int ip) const;
};

struct McmcConfig {
  int iterations = 1000;
  int burnin = 100;
  int latent_period = 25;     // refresh latent paths every this many iterations
  double mh_step = 0.1;       // random-walk scale on log gamma
  double uniformization_c = 2.0;
  std::uint64_t seed = 1;
  bool adapt_step = true;     // tune mh_step during burn-in, frozen after
};

// Sufficient view of a complete trajectory: finite configuration segments
// and the grouped transition events with their pair labels.
struct CompleteData {
  std::vector<std::pair<std::vector<int>, double>> segments;  // (config, length)
  std::vector<TransitionEvent> events;

  // Time integral of psi(rho + S) - psi(rho) for one pair (nu divided out).
  double normalized_integral(const Model& m, int p) const;
  // Complete-data log likelihood restricted to one pair's events and clock.
  double pair_loglik(const Model& m, int p) const;
};

CompleteData build_complete_data(const PopulationTrajectory& traj, const Model& m);

// A complete trajectory consistent with the panel: observed states joined by
// shortest graph paths at uniformly drawn interior times, deaths placed
// exactly at their recorded times.
PopulationTrajectory init_latent(const Model& model, const PanelData& panel,
                                 Rng& rng);

// Uniformization forward-filter backward-sampler for one unit's path on
// [0, V] given the others (law) and the unit's panel record. `current` must
// satisfy the record; its jump times seed the candidate grid.
UnitPath resample_unit(const ConditionalLaw& law, const PanelRecord& rec,
                       const UnitPath& current, double omega_c, Rng& rng);

// Conjugate draws given complete data.
void update_lambda(Model& m, const CompleteData& data, const PriorSpec& prior,
                   Rng& rng);
void update_alpha(Model& m, const CompleteData& data, const PriorSpec& prior,
                  Rng& rng);
// One random-walk proposal per free gamma; returns accept flags aligned with
// Model::free_gamma(). `steps` holds the per-parameter proposal scales.
std::vector<int> update_gamma(Model& m, const CompleteData& data,
                              const PriorSpec& prior,
                              const std::vector<double>& steps, Rng& rng);

// Full Gibbs chain: latent refresh every latent_period iterations, then
// gamma (MH), lambda, alpha. Rows are post-burn-in states; latent snapshots
// are taken on refresh iterations.
PosteriorDraws run_chain(const Model& init, const PanelData& panel,
                         const PriorSpec& prior, const McmcConfig& cfg);

}  // namespace msurv
