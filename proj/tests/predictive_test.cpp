#include <doctest.h>

#include <cmath>

#include "msurv/numerics.hpp"
#include "msurv/predictive.hpp"

using namespace msurv;

namespace {

Model survival_model() {
  const auto g = build_graph("survival");
  return Model(g, degenerate_partition(g));
}

Model bid_model() {
  const auto g = build_graph("bidirectional_illness_death");
  Model m(g, Partition{{{1, 2}, {3}}, {1, 3}});
  m.set_nu(1, 1, 0.5);
  m.set_nu(1, 2, 0.2);
  m.set_gamma(2, 1, 0.7);
  m.set_gamma(2, 2, 1.71);
  return m;
}

PopulationTrajectory empty_others() {
  PopulationTrajectory t;
  t.n = 0;
  return t;
}

}  // namespace

TEST_CASE("continuous hazard with no others is the marginal rate") {
  Model m = survival_model();
  const ConditionalLaw law(m, empty_others());
  CHECK(law.continuous_hazard(1, 2, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(law.continuous_hazard(2, 1, 0.5));  // non-edge
}

TEST_CASE("hazard decreases as the population at risk grows") {
  Model m = bid_model();
  Rng rng(2);
  const auto small = simulate_population(m, std::vector<int>(4, 1), kInf, rng);
  const auto large = simulate_population(m, std::vector<int>(40, 1), kInf, rng);
  const ConditionalLaw ls(m, small), ll(m, large);
  CHECK(ll.continuous_hazard(1, 3, 1e-6) < ls.continuous_hazard(1, 3, 1e-6));
}

TEST_CASE("erosion adds to the continuous hazard") {
  Model m = survival_model();
  const double base = ConditionalLaw(m, empty_others()).continuous_hazard(1, 2, 0.0);
  m.set_erosion(1, 2, 0.3);
  const double shifted = ConditionalLaw(m, empty_others()).continuous_hazard(1, 2, 0.0);
  CHECK(shifted == doctest::Approx(base + 0.3).epsilon(1e-12));
}

TEST_CASE("continuous hazard equals lambda of the single co-move") {
  Model m = bid_model();
  Rng rng(8);
  const auto others = simulate_population(m, {1, 2, 1, 2, 1}, kInf, rng);
  const ConditionalLaw law(m, others);
  const Timeline tl = build_timeline(others, 3);
  for (const auto& seg : law.segments()) {
    if (seg.t1 == kInf) break;
    const double t = 0.5 * (seg.t0 + std::min(seg.t1, seg.t0 + 1.0));
    for (const auto& [i, ip] : m.graph().edges) {
      // lambda of a lone move of the new unit in state i, given the others
      auto x = seg.x;
      ++x[i];
      std::vector<int> y, yprime;
      for (int st = 1; st <= 3; ++st)
        for (int c = 0; c < x[st]; ++c) y.push_back(st);
      yprime = y;
      for (auto& st : yprime)
        if (st == i) {
          st = ip;
          break;
        }
      const auto ev = m.event_from_states(y, yprime);
      CHECK(law.continuous_hazard(i, ip, t) ==
            doctest::Approx(m.lambda_event(ev)).epsilon(1e-10));
    }
  }
}

TEST_CASE("cumulative hazard") {
  Model m = bid_model();
  Rng rng(14);
  const auto others = simulate_population(m, {1, 1, 2, 2}, kInf, rng);
  const ConditionalLaw law(m, others);
  CHECK(law.cumulative_hazard(1, 3, 2.0, 2.0) == doctest::Approx(0.0));

  // fine-grid numeric integration oracle
  const double t1 = 0.0, t2 = others.last_event_time() + 1.0;
  double grid = 0.0;
  const int K = 20000;
  for (int k = 0; k < K; ++k)
    grid += law.continuous_hazard(1, 3, t1 + (k + 0.5) * (t2 - t1) / K) *
            (t2 - t1) / K;
  // the midpoint rule only straddles the few segment breakpoints, so its
  // error is of order (#events) * step
  CHECK(law.cumulative_hazard(1, 3, t1, t2) == doctest::Approx(grid).epsilon(1e-4));
}

TEST_CASE("harmonic closed form of the cumulative hazard") {
  // degenerate partition, gamma = 1: increment nu * dt / (rho + m at risk)
  const auto g = build_graph("survival");
  Model m(g, degenerate_partition(g));
  m.set_rho(2.0);
  m.set_nu(1, 2, 1.3);
  PopulationTrajectory others;
  others.n = 3;
  others.initial = {1, 1, 1};
  others.censor = {kInf, kInf, kInf};
  others.events = {{1.0, {{0, 1, 2}}}, {2.5, {{1, 1, 2}}}, {4.0, {{2, 1, 2}}}};
  const ConditionalLaw law(m, others);
  const double expect = 1.3 * (1.0 / (2.0 + 3) + 1.5 / (2.0 + 2) + 1.5 / (2.0 + 1) +
                               1.0 / 2.0);
  CHECK(law.cumulative_hazard(1, 2, 0.0, 5.0) ==
        doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("atomic distributions normalize") {
  Model m = bid_model();
  Rng rng(19);
  const auto others = simulate_population(m, {1, 2, 1, 2, 1}, kInf, rng);
  const ConditionalLaw law(m, others);
  REQUIRE(!law.atoms().empty());
  for (std::size_t a = 0; a < law.atoms().size(); ++a) {
    for (int i = 1; i <= 2; ++i) {
      const auto dist = law.atomic_distribution(a, i);
      double total = dist.stay;
      for (const auto& [ip, mass] : dist.moves) {
        CHECK(mass >= 0.0);
        total += mass;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    // absorbed new unit never co-moves
    const auto dead = law.atomic_distribution(a, 3);
    CHECK(dead.stay == doctest::Approx(1.0));
    CHECK(dead.moves.empty());
  }
}

TEST_CASE("atomic stay factor matches the survival ratio (gamma = 1)") {
  // With the harmonic reduction the stay mass is (rho + r) / (rho + r + d).
  const auto g = build_graph("survival");
  Model m(g, degenerate_partition(g));
  m.set_rho(1.7);
  PopulationTrajectory others;
  others.n = 4;
  others.initial = {1, 1, 1, 1};
  others.censor = {kInf, kInf, kInf, kInf};
  others.events = {{1.0, {{0, 1, 2}, {1, 1, 2}}}, {2.0, {{2, 1, 2}}}};
  const ConditionalLaw law(m, others);
  // stay mass = (rho + r) / (rho + r + d) with r, d the others' stay/move counts
  const auto d0 = law.atomic_distribution(0, 1);  // 2 of 4 others die
  CHECK(d0.stay == doctest::Approx((1.7 + 2) / (1.7 + 4)).epsilon(1e-10));
  const auto d1 = law.atomic_distribution(1, 1);  // 1 of 2 others dies
  CHECK(d1.stay == doctest::Approx((1.7 + 1) / (1.7 + 2)).epsilon(1e-10));
}

TEST_CASE("stay probability") {
  Model m = bid_model();
  SUBCASE("no others: exponential in the total exit rate") {
    const ConditionalLaw law(m, empty_others());
    CHECK(law.stay_probability(1, 0.0, 0.0) == doctest::Approx(1.0));
    const double z1 = m.characteristic_index({0, 1, 0, 0});
    CHECK(law.stay_probability(1, 0.0, 2.0) ==
          doctest::Approx(std::exp(-2.0 * z1)).epsilon(1e-10));
  }
  SUBCASE("monotone non-increasing and includes atomic factors") {
    Rng rng(23);
    const auto others = simulate_population(m, {1, 2, 1}, kInf, rng);
    const ConditionalLaw law(m, others);
    double prev = 1.0;
    for (double s = 0.0; s < 6.0; s += 0.25) {
      const double p = law.stay_probability(1, 0.0, s);
      CHECK(p <= prev + 1e-12);
      prev = p;
    }
  }
}

TEST_CASE("conditional sampling with no others matches the marginal simulator") {
  Model m = survival_model();
  const ConditionalLaw law(m, empty_others());
  Rng rng(29);
  std::vector<double> cond, marg;
  for (int i = 0; i < 10000; ++i) {
    const UnitPath p = law.sample_unit(1, kInf, rng);
    REQUIRE(p.jumps.size() == 1);
    cond.push_back(p.jumps[0].first);
    const auto traj = simulate_population(m, {1}, kInf, rng);
    marg.push_back(traj.events[0].time);
  }
  CHECK(ks_two_sample_pvalue(cond, marg) > 0.01);
  CHECK_THROWS(law.sample_unit(2, kInf, rng));  // absorbing start
}
