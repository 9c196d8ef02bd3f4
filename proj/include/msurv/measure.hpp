#pragma once

#include <string>
#include <vector>

#include "msurv/numerics.hpp"
#include "msurv/statespace.hpp"

namespace msurv {

// An ordered block pair that carries transition mass: at least one edge runs
// from a state of the source block into the destination block. Only source
// states with such an edge participate in the pair.
struct BlockPair {
  int from_block = 0;
  int to_block = 0;
  std::vector<int> sources;                // states l with >= 1 edge into to_block
  std::vector<std::vector<int>> dests;     // per source, destination states
  std::vector<int> source_slot;            // per state (1..s), slot in sources or -1
};

// Grouped description of one simultaneous transition within a block pair:
// stay[l] units remain in source state l, move[l][m] units take edge (l, m).
struct TransitionEvent {
  int pair = -1;
  std::vector<int> stay;               // aligned with BlockPair::sources
  std::vector<std::vector<int>> move;  // aligned with BlockPair::dests
  int total_moved() const;
};

// Composable harmonic-family model: graph, partition, and the measure
// parameters {nu, rho, gamma, alpha, c}. Immutable views, pure evaluation.
class Model {
 public:
  Model(TransitionGraph g, Partition b);

  const TransitionGraph& graph() const { return graph_; }
  const Partition& partition() const { return part_; }
  int num_pairs() const { return static_cast<int>(pairs_.size()); }
  const BlockPair& pair(int p) const { return pairs_[p]; }
  // Pair carrying edge (i, i'), or -1.
  int pair_of_edge(int i, int ip) const;
  // Pair for ordered blocks (1-based j, j'), or -1 when no cross edge exists.
  int pair_of_blocks(int j, int jp) const;

  // Parameter access. Blocks are 1-based in these interfaces.
  void set_rho(double rho);
  void set_rho(int j, int jp, double rho);
  void set_nu(int j, int jp, double nu);
  void set_gamma(int state, int jp, double g);
  void set_alpha(int from_state, int to_state, double a);
  void set_erosion(int from_state, int to_state, double c);
  double nu(int p) const { return nu_[p]; }
  double rho(int p) const { return rho_[p]; }
  double gamma(int p, int slot) const { return gamma_[p][slot]; }
  double gamma_of_state(int p, int state) const;
  double alpha(int p, int slot, int dslot) const { return alpha_[p][slot][dslot]; }
  double alpha_of_edge(int i, int ip) const;
  double erosion(int i, int ip) const { return erosion_[i][ip]; }
  bool has_erosion() const;
  // Free MH parameters: (pair, source slot) of every gamma not pinned to 1.
  std::vector<std::pair<int, int>> free_gamma() const;

  // S = sum_l gamma_{l,j'} x_l over participating sources.
  double pair_risk_sum(const std::vector<int>& x, int p) const;
  // nu * (psi(rho + S) - psi(rho)).
  double zeta_component(const std::vector<int>& x, int p) const;
  // Total event rate: sum of pair components plus erosion terms.
  double characteristic_index(const std::vector<int>& x) const;

  // I(r, d) = int prod_l p^{gamma_l r_l} (1 - p^{gamma_l})^{d_l}
  //           p^{rho-1} (1-p)^{-1} dp, by the alternating digamma sum.
  double event_integral(int p, const std::vector<int>& stay,
                        const std::vector<int>& moved) const;

  // Non-normalized transition rate of a grouped event, including destination
  // weights and the erosion term for single-unit moves.
  double lambda_event(const TransitionEvent& ev) const;

  // Builds the grouped event for a population move y -> y'; throws when the
  // move is inadmissible (non-edge, mixed block pairs, or y' == y).
  TransitionEvent event_from_states(const std::vector<int>& y,
                                    const std::vector<int>& yp) const;

  // q(y, y') = lambda(y, y') / zeta(configuration_of(y)).
  double transition_prob(const std::vector<int>& y,
                         const std::vector<int>& yp) const;

  // Validates parameter invariants (positivity, alpha sums, fixed gammas).
  void check_params() const;

  std::string param_name_nu(int p) const;
  std::string param_name_gamma(int p, int slot) const;
  std::string param_name_alpha(int p, int slot, int dslot) const;

 private:
  TransitionGraph graph_;
  Partition part_;
  std::vector<int> block_of_;              // per state
  std::vector<BlockPair> pairs_;
  std::vector<std::vector<int>> pair_by_blocks_;  // [j][jp] -> pair or -1
  std::vector<std::vector<int>> pair_by_edge_;    // [i][ip] -> pair or -1

  std::vector<double> nu_, rho_;
  std::vector<std::vector<double>> gamma_;
  std::vector<std::vector<std::vector<double>>> alpha_;
  std::vector<std::vector<double>> erosion_;
};

// Independent check of the digamma series: adaptive quadrature of the
// defining integral after the substitution u = -log p. All-zero d evaluates
// the characteristic-index integrand (1 - prod p^{gamma_l r_l}) instead.
QuadResult quadrature_oracle(const std::vector<int>& r, const std::vector<int>& d,
                             const std::vector<double>& gamma, double rho);

}  // namespace msurv
