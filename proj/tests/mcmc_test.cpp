#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "msurv/mcmc.hpp"

using namespace msurv;

namespace {

Model bid_model() {
  const auto g = build_graph("bidirectional_illness_death");
  Model m(g, Partition{{{1, 2}, {3}}, {1, 3}});
  m.set_nu(1, 1, 0.5);
  m.set_nu(1, 2, 0.2);
  m.set_gamma(2, 1, 0.7);
  m.set_gamma(2, 2, 1.71);
  return m;
}

int unit_state_at(const UnitPath& p, double t) {
  int state = p.initial;
  for (const auto& [jt, to] : p.jumps) {
    if (jt > t) break;
    state = to;
  }
  return state;
}

}  // namespace

TEST_CASE("latent initialization") {
  Rng rng(5);
  SUBCASE("constant observations yield no jumps") {
    const Model m = bid_model();
    PanelData panel;
    panel.units.push_back({"u", {0.0, 1.0, 2.0}, {1, 1, 1}, 2.5, true, 0});
    const auto traj = init_latent(m, panel, rng);
    CHECK(traj.events.empty());
    CHECK(traj.initial == std::vector<int>{1});
    CHECK(traj.censor[0] == 2.5);
  }
  SUBCASE("direct edge: one jump inside the gap") {
    const Model m = bid_model();
    PanelData panel;
    panel.units.push_back({"u", {0.0, 1.0, 2.0}, {1, 1, 2}, 2.5, true, 0});
    for (int rep = 0; rep < 50; ++rep) {
      const auto traj = init_latent(m, panel, rng);
      REQUIRE(traj.events.size() == 1);
      CHECK(traj.events[0].time > 1.0);
      CHECK(traj.events[0].time < 2.0);
      CHECK(traj.events[0].moves[0].to == 2);
      CHECK(log_density(traj, m) > -kInf);
    }
  }
  SUBCASE("non-adjacent observed states route through the graph") {
    const auto g = build_graph("cav");
    const Model m(g, degenerate_partition(g));
    PanelData panel;
    panel.units.push_back({"u", {0.0, 1.0}, {1, 3}, 1.5, true, 0});
    const auto traj = init_latent(m, panel, rng);
    REQUIRE(traj.events.size() == 2);  // 1 -> 2 -> 3
    CHECK(traj.events[0].moves[0].to == 2);
    CHECK(traj.events[1].moves[0].to == 3);
    CHECK(traj.events[0].time < traj.events[1].time);
    CHECK(traj.events[1].time < 1.0);
  }
  SUBCASE("death lands exactly at the recorded time") {
    const auto g = build_graph("illness_death");
    const Model m(g, degenerate_partition(g));
    PanelData panel;
    panel.units.push_back({"u", {0.0}, {1}, 2.0, false, 3});
    const auto traj = init_latent(m, panel, rng);
    REQUIRE(traj.events.size() == 1);
    CHECK(traj.events[0].time == 2.0);
    CHECK(traj.events[0].moves[0].to == 3);
  }
  SUBCASE("unreachable observation throws") {
    const auto g = build_graph("illness_death");
    const Model m(g, degenerate_partition(g));
    PanelData panel;
    panel.units.push_back({"u", {0.0, 1.0}, {2, 1}, 1.5, true, 0});
    CHECK_THROWS(init_latent(m, panel, rng));
  }
}

TEST_CASE("complete-data view matches the trajectory integrals") {
  const Model m = bid_model();
  Rng rng(11);
  const auto traj = simulate_population(m, {1, 1, 2, 1}, kInf, rng);
  const CompleteData data = build_complete_data(traj, m);
  for (int p = 0; p < m.num_pairs(); ++p)
    CHECK(data.normalized_integral(m, p) ==
          doctest::Approx(integrate_zeta_component(traj, m, p, true)).epsilon(1e-12));
  int moves = 0;
  for (const auto& ev : data.events) moves += ev.total_moved();
  int expected = 0;
  for (const auto& tev : traj.events) expected += static_cast<int>(tev.moves.size());
  CHECK(moves == expected);
}

TEST_CASE("intensity update") {
  SUBCASE("no data reproduces the prior") {
    Model m = bid_model();
    PriorSpec prior;
    prior.lambda[{1, 2}] = {3.0, 4.0};
    Rng rng(21);
    double acc11 = 0.0, acc12 = 0.0, acc12sq = 0.0;
    const int n = 40000;
    for (int k = 0; k < n; ++k) {
      update_lambda(m, CompleteData{}, prior, rng);
      acc11 += m.nu(m.pair_of_blocks(1, 1));
      const double v = m.nu(m.pair_of_blocks(1, 2));
      acc12 += v;
      acc12sq += v * v;
    }
    CHECK(acc11 / n == doctest::Approx(1.0).epsilon(0.03));          // Gamma(1,1)
    CHECK(acc12 / n == doctest::Approx(0.75).epsilon(0.03));         // Gamma(3,4)
    CHECK(acc12sq / n - 0.75 * 0.75 == doctest::Approx(3.0 / 16.0).epsilon(0.06));
  }
  SUBCASE("posterior mean is (a + k) / (b + integral)") {
    const Model truth = bid_model();
    Rng rng(22);
    const auto traj = simulate_population(truth, std::vector<int>(10, 1), kInf, rng);
    const CompleteData data = build_complete_data(traj, truth);
    PriorSpec prior;
    prior.lambda[{1, 1}] = {2.0, 1.5};
    const int p = truth.pair_of_blocks(1, 1);
    int k = 0;
    for (const auto& ev : data.events)
      if (ev.pair == p) ++k;
    const double expect =
        (2.0 + k) / (1.5 + data.normalized_integral(truth, p));  // rho = 1
    double acc = 0.0;
    const int n = 40000;
    Model m = truth;
    for (int r = 0; r < n; ++r) {
      update_lambda(m, data, prior, rng);
      acc += m.nu(p);
    }
    CHECK(acc / n == doctest::Approx(expect).epsilon(0.02));
  }
}

TEST_CASE("destination-weight update") {
  // Competing risks with both absorbing states grouped in one block so that
  // state 1 carries a two-destination weight vector.
  const auto g = build_graph("competing_risks(2)");
  Model m(g, Partition{{{1}, {2, 3}}, {1, 2}});

  SUBCASE("no transitions reproduce the prior mean") {
    PriorSpec prior;
    prior.alpha[{1, 2}] = 2.0;
    prior.alpha[{1, 3}] = 8.0;
    Rng rng(31);
    double acc = 0.0;
    const int n = 30000;
    for (int k = 0; k < n; ++k) {
      update_alpha(m, CompleteData{}, prior, rng);
      acc += m.alpha_of_edge(1, 2);
    }
    CHECK(acc / n == doctest::Approx(0.2).epsilon(0.02));
  }
  SUBCASE("counts add to the concentration") {
    // Four units leave state 1: three to 2, one to 3.
    PopulationTrajectory traj;
    traj.n = 4;
    traj.initial = {1, 1, 1, 1};
    traj.censor = {kInf, kInf, kInf, kInf};
    traj.events = {{0.5, {{0, 1, 2}}},
                   {1.0, {{1, 1, 2}}},
                   {1.5, {{2, 1, 3}}},
                   {2.0, {{3, 1, 2}}}};
    const CompleteData data = build_complete_data(traj, m);
    PriorSpec prior;
    prior.alpha[{1, 2}] = 2.0;
    prior.alpha[{1, 3}] = 8.0;
    Rng rng(32);
    double acc2 = 0.0, acc3 = 0.0;
    const int n = 30000;
    for (int k = 0; k < n; ++k) {
      update_alpha(m, data, prior, rng);
      acc2 += m.alpha_of_edge(1, 2);
      acc3 += m.alpha_of_edge(1, 3);
    }
    CHECK(acc2 / n == doctest::Approx(5.0 / 14.0).epsilon(0.02));
    CHECK(acc3 / n == doctest::Approx(9.0 / 14.0).epsilon(0.02));
  }
}

TEST_CASE("relative-risk update") {
  const Model truth = bid_model();
  Rng rng(41);
  const auto traj = simulate_population(truth, std::vector<int>(20, 1), kInf, rng);
  const CompleteData data = build_complete_data(traj, truth);
  PriorSpec prior;  // gamma_log_sd = 1

  SUBCASE("zero step always accepts and leaves the value unchanged") {
    Model m = truth;
    const auto acc = update_gamma(m, data, prior, {0.0, 0.0}, rng);
    CHECK(acc == std::vector<int>{1, 1});
    CHECK(m.gamma(m.pair_of_blocks(1, 1), 1) == doctest::Approx(0.7));
    CHECK(m.gamma(m.pair_of_blocks(1, 2), 1) == doctest::Approx(1.71));
  }

  SUBCASE("chain marginal matches the grid posterior") {
    // With nu and alpha held fixed the free risks decouple across pairs, so
    // the log-risk posterior is one dimensional and can be normalized on a
    // grid: density(theta) prop. to exp(pair_loglik - theta^2 / 2).
    const int p = truth.pair_of_blocks(1, 1);
    std::vector<double> thetas, dens;
    Model probe = truth;
    for (double th = -2.5; th <= 2.5 + 1e-9; th += 0.01) {
      probe.set_gamma(2, 1, std::exp(th));
      thetas.push_back(th);
      dens.push_back(data.pair_loglik(probe, p) - th * th / 2.0);
    }
    const double dmax = *std::max_element(dens.begin(), dens.end());
    double z = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      const double w = std::exp(dens[i] - dmax);
      z += w;
      m1 += w * thetas[i];
      m2 += w * thetas[i] * thetas[i];
    }
    const double grid_mean = m1 / z;
    const double grid_sd = std::sqrt(m2 / z - grid_mean * grid_mean);

    Model m = truth;
    Rng chain_rng(42);
    double s1 = 0.0, s2 = 0.0;
    int nkept = 0;
    const int iters = 12000, burn = 1000;
    for (int it = 0; it < iters; ++it) {
      update_gamma(m, data, prior, {0.6, 0.6}, chain_rng);
      if (it >= burn) {
        const double th = std::log(m.gamma(p, 1));
        s1 += th;
        s2 += th * th;
        ++nkept;
      }
    }
    const double chain_mean = s1 / nkept;
    const double chain_sd = std::sqrt(s2 / nkept - chain_mean * chain_mean);
    CHECK(std::abs(chain_mean - grid_mean) < 0.05);
    CHECK(chain_sd == doctest::Approx(grid_sd).epsilon(0.15));
  }
}

TEST_CASE("conditional path resampling honors the panel record") {
  const Model m = bid_model();
  Rng rng(51);
  const auto others = simulate_population(m, {1, 1, 2, 1, 2}, kInf, rng);
  const ConditionalLaw law(m, others);

  SUBCASE("death record") {
    PanelRecord rec{"u", {0.0, 1.0, 2.0}, {1, 1, 2}, 2.5, false, 3};
    UnitPath current;
    current.initial = 1;
    current.jumps = {{1.5, 2}, {2.5, 3}};
    for (int rep = 0; rep < 200; ++rep) {
      const UnitPath next = resample_unit(law, rec, current, 2.0, rng);
      CHECK(next.initial == 1);
      for (std::size_t k = 0; k < rec.times.size(); ++k)
        CHECK(unit_state_at(next, rec.times[k]) == rec.states[k]);
      REQUIRE(!next.jumps.empty());
      CHECK(next.jumps.back().first == 2.5);
      CHECK(next.jumps.back().second == 3);
      int state = next.initial;
      for (const auto& [jt, to] : next.jumps) {
        CHECK(jt <= 2.5);
        CHECK(m.graph().has_edge(state, to));
        state = to;
      }
      current = next;  // chain the sampler on its own output
    }
  }
  SUBCASE("censored record never absorbs") {
    PanelRecord rec{"u", {0.0, 1.0}, {1, 2}, 1.8, true, 0};
    UnitPath current;
    current.initial = 1;
    current.jumps = {{0.5, 2}};
    for (int rep = 0; rep < 200; ++rep) {
      const UnitPath next = resample_unit(law, rec, current, 2.0, rng);
      CHECK(unit_state_at(next, 1.0) == 2);
      CHECK(!m.graph().is_absorbing(unit_state_at(next, 1.8)));
      current = next;
    }
  }
}

TEST_CASE("full chain") {
  const Model truth = bid_model();
  Rng rng(61);
  const auto traj = simulate_population(truth, std::vector<int>(20, 1), kInf, rng);
  const PanelData panel = observe_panel(traj, truth.graph(), 1.0);

  McmcConfig cfg;
  cfg.iterations = 40;
  cfg.burnin = 10;
  cfg.latent_period = 10;
  cfg.seed = 7;

  Model init = bid_model();
  PriorSpec prior;
  const PosteriorDraws d1 = run_chain(init, panel, prior, cfg);
  CHECK(d1.names == std::vector<std::string>{"nu_1_1", "nu_1_2", "gamma_2_1",
                                             "gamma_2_2"});
  CHECK(d1.rows.size() == 30);
  // Refresh iterations are 1, 11, 21, 31; the post-burn-in ones are kept.
  CHECK(d1.latent_rows == std::vector<int>{0, 10, 20});
  CHECK(d1.latents.size() == 3);
  for (const auto& row : d1.rows)
    for (double v : row) CHECK(v > 0.0);
  CHECK(d1.acceptance.count("gamma_2_1") == 1);

  const PosteriorDraws d2 = run_chain(init, panel, prior, cfg);
  CHECK(d1.rows == d2.rows);  // same seed, same draws

  McmcConfig cfg2 = cfg;
  cfg2.seed = 8;
  const PosteriorDraws d3 = run_chain(init, panel, prior, cfg2);
  CHECK(d1.rows != d3.rows);
}
