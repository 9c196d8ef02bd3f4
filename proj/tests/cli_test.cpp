#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "msurv/io.hpp"

using namespace msurv;

namespace {

const char* cli() { return MSURV_CLI_PATH; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(cli()) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Scratch {
  std::vector<std::string> files;
  std::string add(const std::string& name) {
    files.push_back("msurv_cli_test_" + name);
    return files.back();
  }
  ~Scratch() {
    for (const auto& f : files) std::remove(f.c_str());
  }
};

std::string write_config(Scratch& s, const std::string& name) {
  const std::string path = s.add(name);
  std::ofstream out(path);
  out << R"({
    "graph": "bidirectional_illness_death",
    "partition": [[1, 2], [3]],
    "nu": {"1_1": 0.5, "1_2": 0.2},
    "gamma": {"2_1": 0.7, "2_2": 1.71},
    "mcmc": {"iterations": 30, "burnin": 10, "latent_period": 10, "seed": 4},
    "initial_states": {"1": 6, "2": 4}
  })";
  return path;
}

}  // namespace

TEST_CASE("cli usage errors exit with code 1") {
  CHECK(run_cli("") == 1);                      // missing subcommand
  CHECK(run_cli("frobnicate") == 1);            // unknown subcommand
  CHECK(run_cli("simulate") == 1);              // missing required options
  CHECK(run_cli("--help") == 0);
  Scratch s;
  const std::string cfg = write_config(s, "cfg_usage.json");
  const std::string data = s.add("usage_panel.csv");
  {
    std::ofstream out(data);
    out << "unit_id,time,state,event\na,0,1,obs\na,1,,censor\n";
  }
  CHECK(run_cli("fit --data " + data + " --config " + cfg +
                " --iters 10 --burnin 20") == 1);
}

TEST_CASE("cli data errors exit with code 2") {
  Scratch s;
  const std::string cfg = write_config(s, "cfg_data.json");
  CHECK(run_cli("simulate --config no_such_config.json --out " + s.add("x.csv")) == 2);
  CHECK(run_cli("fit --data no_such_panel.csv --config " + cfg + " --out " +
                s.add("y.csv")) == 2);
  const std::string bad = s.add("bad_panel.csv");
  {
    std::ofstream out(bad);
    out << "wrong,header\n";
  }
  CHECK(run_cli("km --data " + bad + " --config " + cfg + " --out " +
                s.add("km_bad.csv")) == 2);
}

TEST_CASE("simulate -> fit -> predict -> summarize pipeline") {
  Scratch s;
  const std::string cfg = write_config(s, "cfg_pipe.json");
  const std::string traj = s.add("pipe_traj.csv");
  const std::string panel = s.add("pipe_panel.csv");

  REQUIRE(run_cli("simulate --config " + cfg + " --out " + traj + " --panel-out " +
                  panel + " --censor 8 --observe-every 1 --seed 11") == 0);
  const auto g = build_graph("bidirectional_illness_death");
  const PopulationTrajectory t = read_trajectory_csv(traj, g);
  CHECK(t.n == 10);
  const PanelData p = read_panel_csv(panel, g);
  CHECK(p.units.size() == 10);
  for (const auto& rec : p.units) {
    // annual appointments while alive
    for (std::size_t k = 0; k + 1 < rec.times.size(); ++k)
      CHECK(rec.times[k] == doctest::Approx(static_cast<double>(k)));
    CHECK(rec.terminal_time <= 8.0 + 1e-12);
  }

  const std::string draws = s.add("pipe_draws.csv");
  const std::string lats = s.add("pipe_latents.csv");
  REQUIRE(run_cli("fit --data " + panel + " --config " + cfg + " --out " + draws +
                  " --latents-out " + lats) == 0);
  PosteriorDraws d = read_draws(draws);
  CHECK(d.rows.size() == 20);  // 30 iterations, burn-in 10
  CHECK(d.names.size() == 4);
  read_latents(lats, d);
  CHECK(d.latents.size() == 2);  // refreshes at 11 and 21 post burn-in

  const std::string curve = s.add("pipe_curve.csv");
  REQUIRE(run_cli("predict --draws " + draws + " --latents " + lats + " --config " +
                  cfg + " --baseline-state 1 --grid-max 5 --grid-step 1 --paths 50" +
                  " --out " + curve) == 0);
  std::ifstream in(curve);
  std::string line;
  std::getline(in, line);
  CHECK(line == "time,survival,q05,q95");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 6);

  // summarize prints one row per parameter
  const std::string cmd = std::string(cli()) + " summarize --draws " + draws;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[256];
  while (fgets(buf, sizeof buf, pipe)) out += buf;
  CHECK(pclose(pipe) == 0);
  CHECK(out.find("parameter,mean,q05,q50,q95") == 0);
  CHECK(out.find("nu_1_2,") != std::string::npos);
  CHECK(out.find("# acceptance,gamma_2_1,") != std::string::npos);
}

TEST_CASE("seed reproducibility and multiple chains") {
  Scratch s;
  const std::string cfg = write_config(s, "cfg_seed.json");
  const std::string traj = s.add("seed_traj.csv");
  const std::string panel = s.add("seed_panel.csv");
  REQUIRE(run_cli("simulate --config " + cfg + " --out " + traj + " --panel-out " +
                  panel + " --censor 6 --seed 13") == 0);

  const std::string d1 = s.add("seed_draws1.csv");
  const std::string d2 = s.add("seed_draws2.csv");
  REQUIRE(run_cli("fit --data " + panel + " --config " + cfg +
                  " --iters 20 --burnin 5 --seed 42 --out " + d1) == 0);
  REQUIRE(run_cli("fit --data " + panel + " --config " + cfg +
                  " --iters 20 --burnin 5 --seed 42 --out " + d2) == 0);
  CHECK(slurp(d1) == slurp(d2));  // byte-identical

  const std::string d3 = s.add("seed_draws3.csv");
  REQUIRE(run_cli("fit --data " + panel + " --config " + cfg +
                  " --iters 20 --burnin 5 --seed 43 --out " + d3) == 0);
  CHECK(slurp(d1) != slurp(d3));

  // two chains write suffixed files; chain 1 repeats the single-chain run
  const std::string dm = s.add("seed_multi.csv");
  s.add("seed_multi_chain1.csv");
  s.add("seed_multi_chain2.csv");
  REQUIRE(run_cli("fit --data " + panel + " --config " + cfg +
                  " --iters 20 --burnin 5 --seed 42 --chains 2 --out " + dm) == 0);
  CHECK(slurp("msurv_cli_test_seed_multi_chain1.csv") == slurp(d1));
  CHECK(!slurp("msurv_cli_test_seed_multi_chain2.csv").empty());
}

TEST_CASE("km and aj subcommands") {
  Scratch s;
  const std::string cfg = write_config(s, "cfg_est.json");
  const std::string panel = s.add("est_panel.csv");
  {
    std::ofstream out(panel);
    out << "unit_id,time,state,event\n"
           "a,0,1,obs\na,1,,death\n"
           "b,0,1,obs\nb,2,,death\n"
           "c,0,1,obs\nc,3,,censor\n";
  }
  const std::string km_out = s.add("est_km.csv");
  REQUIRE(run_cli("km --data " + panel + " --config " + cfg + " --out " + km_out) == 0);
  std::ifstream in(km_out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "time,survival");
  std::getline(in, line);
  CHECK(line == "0,1");
  std::getline(in, line);
  CHECK(line.substr(0, 2) == "1,");
  CHECK(std::stod(line.substr(2)) == doctest::Approx(2.0 / 3.0));

  const std::string traj = s.add("est_traj.csv");
  {
    std::ofstream out(traj);
    out << "unit_id,time,from_state,to_state,kind\n"
           "1,0,0,1,init\n"
           "1,0.5,1,2,jump\n"
           "1,1.5,2,3,jump\n";
  }
  const std::string aj_out = s.add("est_aj.csv");
  REQUIRE(run_cli("aj --data " + traj + " --config " + cfg + " --out " + aj_out) == 0);
  std::ifstream ain(aj_out);
  std::getline(ain, line);
  CHECK(line == "time,state_1,state_2,state_3");
  std::getline(ain, line);
  CHECK(line == "0,1,0,0");
}

TEST_CASE("summarize on a header-only draws file") {
  Scratch s;
  const std::string draws = s.add("empty_draws.csv");
  {
    std::ofstream out(draws);
    out << "iteration,nu_1_1\n";
  }
  const std::string cmd = std::string(cli()) + " summarize --draws " + draws;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[256];
  while (fgets(buf, sizeof buf, pipe)) out += buf;
  CHECK(pclose(pipe) == 0);
  CHECK(out == "parameter,mean,q05,q50,q95\n");
}
