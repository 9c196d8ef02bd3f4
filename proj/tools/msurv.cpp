// msurv: exchangeable multi-state survival processes.
//   simulate   exact simulation of a population trajectory (optionally panel-ized)
//   fit        MCMC over panel data (uniformization FFBS + conjugate updates)
//   predict    posterior predictive survival for a new unit
//   km         Kaplan-Meier curve from panel terminal records
//   aj         Aalen-Johansen occupancy from a complete trajectory
//   summarize  posterior means, quantiles, and acceptance rates

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "msurv/estimators.hpp"
#include "msurv/io.hpp"
#include "msurv/mcmc.hpp"

using namespace msurv;

namespace {

int max_threads() {
  if (const char* env = std::getenv("MSURV_THREADS")) {
    const int k = std::atoi(env);
    if (k >= 1) return k;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::string chain_path(const std::string& base, int chain, int chains) {
  if (chains == 1) return base;
  const auto dot = base.rfind('.');
  const std::string stem = dot == std::string::npos ? base : base.substr(0, dot);
  const std::string ext = dot == std::string::npos ? "" : base.substr(dot);
  return stem + "_chain" + std::to_string(chain + 1) + ext;
}

int run(int argc, char** argv) {
  CLI::App app{"Exchangeable Markov multi-state survival processes"};
  app.require_subcommand(1);

  // --- simulate ---
  auto* sim = app.add_subcommand("simulate", "Simulate a population trajectory");
  std::string sim_config, sim_out, sim_panel_out;
  int sim_n = 0;
  double sim_horizon = kInf, sim_censor = kInf, sim_every = 1.0;
  std::uint64_t sim_seed = 1;
  sim->add_option("--config", sim_config, "Model config (JSON)")->required();
  sim->add_option("--n", sim_n, "Units per initial state in the config list (override count)");
  sim->add_option("--horizon", sim_horizon, "Stop time (default: run to absorption)");
  sim->add_option("--censor", sim_censor, "Censor all unabsorbed units at this time");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--out", sim_out, "Trajectory CSV output")->required();
  sim->add_option("--panel-out", sim_panel_out, "Also write an intermittent panel CSV");
  sim->add_option("--observe-every", sim_every, "Panel appointment spacing");

  // --- fit ---
  auto* fit = app.add_subcommand("fit", "Posterior sampling from panel data");
  std::string fit_data, fit_config, fit_out = "draws.csv", fit_latents;
  int fit_chains = 1, fit_iters = -1, fit_burnin = -1, fit_period = -1;
  std::uint64_t fit_seed = 0;
  bool fit_has_seed = false;
  fit->add_option("--data", fit_data, "Panel CSV")->required();
  fit->add_option("--config", fit_config, "Model config (JSON)")->required();
  fit->add_option("--iters", fit_iters, "Iterations (overrides config)");
  fit->add_option("--burnin", fit_burnin, "Burn-in (overrides config)");
  fit->add_option("--latent-period", fit_period, "Latent refresh period (overrides config)");
  fit->add_option("--chains", fit_chains, "Independent chains")->check(CLI::PositiveNumber);
  fit->add_option("--seed", fit_seed, "RNG seed (overrides config)")
      ->each([&](const std::string&) { fit_has_seed = true; });
  fit->add_option("--out", fit_out, "Draws CSV output");
  fit->add_option("--latents-out", fit_latents, "Latent snapshot CSV output");

  // --- predict ---
  auto* pred = app.add_subcommand("predict", "Posterior predictive survival");
  std::string pred_draws, pred_latents, pred_config, pred_out = "curve.csv";
  int pred_state = 1, pred_paths = 200;
  double pred_max = 25.0, pred_step = 0.25, pred_at = 0.0;
  std::uint64_t pred_seed = 1;
  pred->add_option("--draws", pred_draws, "Draws CSV from fit")->required();
  pred->add_option("--latents", pred_latents, "Latents CSV from fit")->required();
  pred->add_option("--config", pred_config, "Model config (JSON)")->required();
  pred->add_option("--baseline-state", pred_state, "Initial state of the new unit");
  pred->add_option("--grid-max", pred_max, "Last grid time");
  pred->add_option("--grid-step", pred_step, "Grid spacing")->check(CLI::PositiveNumber);
  pred->add_option("--at-time", pred_at, "Condition on survival to this time");
  pred->add_option("--paths", pred_paths, "Simulated paths per posterior draw");
  pred->add_option("--seed", pred_seed, "RNG seed");
  pred->add_option("--out", pred_out, "Curve CSV output");

  // --- km ---
  auto* km = app.add_subcommand("km", "Kaplan-Meier curve from panel terminal rows");
  std::string km_data, km_config, km_out = "km.csv";
  km->add_option("--data", km_data, "Panel CSV")->required();
  km->add_option("--config", km_config, "Model config (JSON, for the graph)")->required();
  km->add_option("--out", km_out, "Curve CSV output");

  // --- aj ---
  auto* aj = app.add_subcommand("aj", "Aalen-Johansen occupancy from a trajectory");
  std::string aj_data, aj_config, aj_out = "aj.csv";
  aj->add_option("--data", aj_data, "Trajectory CSV")->required();
  aj->add_option("--config", aj_config, "Model config (JSON, for the graph)")->required();
  aj->add_option("--out", aj_out, "Occupancy CSV output");

  // --- summarize ---
  auto* summ = app.add_subcommand("summarize", "Posterior summaries of a draws file");
  std::string summ_draws;
  summ->add_option("--draws", summ_draws, "Draws CSV from fit")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // 0 covers --help/--version
  }
  if (fit->parsed() && fit_iters > 0 && fit_burnin >= 0 && fit_iters <= fit_burnin) {
    std::cerr << "usage error: --iters must exceed --burnin\n";
    return 1;
  }

  if (sim->parsed()) {
    AppConfig cfg = read_config(sim_config);
    std::vector<int> initial = cfg.initial_states;
    if (sim_n > 0) {
      std::vector<int> distinct;
      for (int s : initial)
        if (distinct.empty() || distinct.back() != s) distinct.push_back(s);
      if (distinct.empty()) distinct.push_back(1);
      initial.clear();
      for (int s : distinct)
        for (int r = 0; r < sim_n; ++r) initial.push_back(s);
    }
    if (initial.empty())
      throw std::runtime_error("simulate: no initial states (config or --n)");
    Rng rng(sim_seed);
    PopulationTrajectory traj =
        simulate_population(cfg.model, initial, std::min(sim_horizon, sim_censor), rng);
    if (std::isfinite(sim_censor))
      traj = apply_censoring(traj, std::vector<double>(traj.n, sim_censor));
    write_trajectory_csv(sim_out, traj);
    std::cout << "simulated " << traj.n << " units, " << traj.events.size()
              << " events\n";
    if (!sim_panel_out.empty()) {
      write_panel_csv(sim_panel_out, observe_panel(traj, cfg.model.graph(), sim_every));
      std::cout << "panel written to " << sim_panel_out << "\n";
    }
    return 0;
  }

  if (fit->parsed()) {
    AppConfig cfg = read_config(fit_config);
    const PanelData panel = read_panel_csv(fit_data, cfg.model.graph());
    McmcConfig mc = cfg.mcmc;
    if (fit_iters > 0) mc.iterations = fit_iters;
    if (fit_burnin >= 0) mc.burnin = fit_burnin;
    if (fit_period > 0) mc.latent_period = fit_period;
    if (fit_has_seed) mc.seed = fit_seed;

    std::vector<PosteriorDraws> results(fit_chains);
    std::vector<std::string> failures(fit_chains);
    const int workers = std::min(fit_chains, max_threads());
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int c; (c = next.fetch_add(1)) < fit_chains;) {
          McmcConfig chain_cfg = mc;
          chain_cfg.seed = mc.seed + static_cast<std::uint64_t>(c);
          try {
            results[c] = run_chain(cfg.model, panel, cfg.prior, chain_cfg);
          } catch (const std::exception& e) {
            failures[c] = e.what();
          }
        }
      });
    for (auto& t : pool) t.join();
    for (int c = 0; c < fit_chains; ++c)
      if (!failures[c].empty())
        throw std::runtime_error("chain " + std::to_string(c + 1) + ": " + failures[c]);

    for (int c = 0; c < fit_chains; ++c) {
      const std::string out_c = chain_path(fit_out, c, fit_chains);
      write_draws(out_c, results[c], mc.burnin);
      std::cout << "chain " << c + 1 << ": " << results[c].rows.size()
                << " draws -> " << out_c << "\n";
      if (!fit_latents.empty())
        write_latents(chain_path(fit_latents, c, fit_chains), results[c], mc.burnin);
    }
    return 0;
  }

  if (pred->parsed()) {
    AppConfig cfg = read_config(pred_config);
    PosteriorDraws draws = read_draws(pred_draws);
    read_latents(pred_latents, draws);
    std::vector<double> grid;
    for (double t = 0.0; t <= pred_max + 1e-12; t += pred_step) grid.push_back(t);
    const SurvivalCurve curve = posterior_survival(
        draws, cfg.model, pred_state, grid, pred_paths, pred_seed, pred_at);
    write_curve_csv(pred_out, curve);
    std::cout << "predictive curve (" << draws.latents.size() << " posterior draws) -> "
              << pred_out << "\n";
    return 0;
  }

  if (km->parsed()) {
    AppConfig cfg = read_config(km_config);
    const PanelData panel = read_panel_csv(km_data, cfg.model.graph());
    std::vector<FailureRecord> recs;
    for (const auto& rec : panel.units)
      recs.push_back({rec.terminal_time, rec.censored});
    write_curve_csv(km_out, kaplan_meier(recs));
    std::cout << "Kaplan-Meier curve -> " << km_out << "\n";
    return 0;
  }

  if (aj->parsed()) {
    AppConfig cfg = read_config(aj_config);
    const PopulationTrajectory traj = read_trajectory_csv(aj_data, cfg.model.graph());
    write_occupancy_csv(aj_out, aalen_johansen(traj, cfg.model.graph()));
    std::cout << "Aalen-Johansen occupancy -> " << aj_out << "\n";
    return 0;
  }

  if (summ->parsed()) {
    const PosteriorDraws draws = read_draws(summ_draws);
    std::cout << "parameter,mean,q05,q50,q95\n";
    if (!draws.rows.empty())
      for (const auto& name : draws.names)
      std::cout << name << ',' << draws.mean(name) << ',' << draws.quantile(name, 0.05)
                << ',' << draws.quantile(name, 0.50) << ','
                << draws.quantile(name, 0.95) << "\n";
    for (const auto& [name, rate] : draws.acceptance)
      std::cout << "# acceptance," << name << ',' << rate << "\n";
    return 0;
  }
  return 0;
}

}  // namespace

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
}
