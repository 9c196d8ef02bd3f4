#include "msurv/io.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace msurv {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  return out;
}

// "2_1" -> (2, 1)
std::pair<int, int> parse_key(const std::string& key) {
  const auto pos = key.find('_');
  if (pos == std::string::npos)
    throw std::runtime_error("config: malformed key '" + key + "', expected i_j");
  return {std::stoi(key.substr(0, pos)), std::stoi(key.substr(pos + 1))};
}

}  // namespace

PanelData read_panel_csv(const std::string& path, const TransitionGraph& g) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || split(line, ',') !=
      std::vector<std::string>{"unit_id", "time", "state", "event"})
    throw std::runtime_error(path + ": expected header unit_id,time,state,event");

  PanelData panel;
  PanelRecord* rec = nullptr;
  bool closed = true;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    if (f.size() != 4) throw std::runtime_error(where + "expected 4 fields");
    const double t = std::stod(f[1]);
    const int state = f[2].empty() ? 0 : std::stoi(f[2]);
    const std::string& ev = f[3];

    if (!rec || rec->id != f[0]) {
      for (const auto& u : panel.units)
        if (u.id == f[0])
          throw std::runtime_error(where + "rows of unit " + f[0] +
                                   " are not contiguous");
      if (rec && !closed)
        throw std::runtime_error(path + ": unit " + rec->id +
                                 " has no terminal (death/censor) row");
      panel.units.emplace_back();
      rec = &panel.units.back();
      rec->id = f[0];
      closed = false;
      if (ev == "obs" && t != 0.0)
        throw std::runtime_error(where + "first observation of a unit must be at time 0");
    }
    if (closed) throw std::runtime_error(where + "row after terminal row of unit " + f[0]);

    if (ev == "obs") {
      if (state < 1 || state > g.num_states)
        throw std::runtime_error(where + "state out of range");
      if (g.is_absorbing(state))
        throw std::runtime_error(where + "observed state is absorbing; use a death row");
      if (!rec->times.empty() && t <= rec->times.back())
        throw std::runtime_error(where + "observation times must be strictly increasing");
      rec->times.push_back(t);
      rec->states.push_back(state);
    } else if (ev == "death" || ev == "censor") {
      if (rec->times.empty())
        throw std::runtime_error(where + "terminal row before any observation");
      if (t < rec->times.back())
        throw std::runtime_error(where + "terminal time precedes an observation");
      rec->terminal_time = t;
      rec->censored = (ev == "censor");
      if (ev == "death") {
        int ds = state;
        if (ds == 0) {
          const auto abs = g.absorbing_states();
          if (abs.size() != 1)
            throw std::runtime_error(where +
                                     "death state required: several absorbing states");
          ds = abs[0];
        }
        if (ds < 1 || ds > g.num_states || !g.is_absorbing(ds))
          throw std::runtime_error(where + "death state is not absorbing");
        if (t == rec->times.back())
          throw std::runtime_error(where + "death coincides with an observation time");
        rec->death_state = ds;
      } else if (t > rec->times.back()) {
        // The censor time doubles as the last appointment; carry the state
        // forward when it is not restated.
        rec->times.push_back(t);
        rec->states.push_back(state >= 1 ? state : rec->states.back());
      }
      closed = true;
    } else {
      throw std::runtime_error(where + "unknown event '" + ev + "'");
    }
  }
  if (rec && !closed)
    throw std::runtime_error(path + ": unit " + rec->id +
                             " has no terminal (death/censor) row");
  if (panel.units.empty()) throw std::runtime_error(path + ": no units");
  return panel;
}

void write_panel_csv(const std::string& path, const PanelData& panel) {
  std::ofstream out = open_out(path);
  out << "unit_id,time,state,event\n";
  for (const auto& rec : panel.units) {
    for (std::size_t k = 0; k < rec.times.size(); ++k)
      out << rec.id << ',' << rec.times[k] << ',' << rec.states[k] << ",obs\n";
    if (rec.censored)
      out << rec.id << ',' << rec.terminal_time << ",,censor\n";
    else
      out << rec.id << ',' << rec.terminal_time << ',' << rec.death_state
          << ",death\n";
  }
}

void write_trajectory_csv(const std::string& path,
                          const PopulationTrajectory& traj) {
  std::ofstream out = open_out(path);
  out << "unit_id,time,from_state,to_state,kind\n";
  for (int u = 0; u < traj.n; ++u) {
    out << u + 1 << ",0,0," << traj.initial[u] << ",init\n";
    const UnitPath p = unit_path_of(traj, u);
    int from = p.initial;
    for (const auto& [t, to] : p.jumps) {
      out << u + 1 << ',' << t << ',' << from << ',' << to << ",jump\n";
      from = to;
    }
    if (std::isfinite(traj.censor[u]))
      out << u + 1 << ',' << traj.censor[u] << ",0,0,censor\n";
  }
}

PopulationTrajectory read_trajectory_csv(const std::string& path,
                                         const TransitionGraph& g) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) ||
      split(line, ',') != std::vector<std::string>{"unit_id", "time", "from_state",
                                                   "to_state", "kind"})
    throw std::runtime_error(path +
                             ": expected header unit_id,time,from_state,to_state,kind");
  std::map<int, int> initial;
  std::map<int, std::vector<std::pair<double, int>>> jumps;
  std::map<int, double> censor;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 5)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 5 fields");
    const int u = std::stoi(f[0]);
    const double t = std::stod(f[1]);
    if (f[4] == "init")
      initial[u] = std::stoi(f[3]);
    else if (f[4] == "jump")
      jumps[u].push_back({t, std::stoi(f[3])});
    else if (f[4] == "censor")
      censor[u] = t;
    else
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": unknown kind '" + f[4] + "'");
  }
  if (initial.empty()) throw std::runtime_error(path + ": no units");
  const int n = initial.rbegin()->first;
  std::vector<int> init_v(n);
  std::vector<std::vector<std::pair<double, int>>> jumps_v(n);
  std::vector<double> censor_v(n, kInf);
  for (int u = 1; u <= n; ++u) {
    const auto it = initial.find(u);
    if (it == initial.end())
      throw std::runtime_error(path + ": missing init row for unit " +
                               std::to_string(u));
    if (it->second < 1 || it->second > g.num_states)
      throw std::runtime_error(path + ": initial state out of range for unit " +
                               std::to_string(u));
    init_v[u - 1] = it->second;
    if (jumps.count(u)) jumps_v[u - 1] = jumps[u];
    if (censor.count(u)) censor_v[u - 1] = censor[u];
  }
  return assemble_population(init_v, jumps_v, censor_v);
}

AppConfig read_config(const std::string& path) {
  std::ifstream in = open_in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }

  TransitionGraph g;
  if (!j.contains("graph")) throw std::runtime_error(path + ": missing 'graph'");
  if (j["graph"].is_string()) {
    g = build_graph(j["graph"].get<std::string>());
  } else {
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : j["graph"].at("edges"))
      edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    g = build_graph(j["graph"].at("num_states").get<int>(), edges);
  }

  Partition part;
  if (j.contains("partition")) {
    for (const auto& blk : j["partition"]) {
      std::vector<int> states;
      for (const auto& s : blk) states.push_back(s.get<int>());
      part.blocks.push_back(states);
      part.representatives.push_back(states.front());
    }
  } else {
    part = degenerate_partition(g);
  }

  AppConfig cfg{Model(g, part), PriorSpec{}, McmcConfig{}, {}};
  Model& m = cfg.model;

  if (j.contains("rho")) {
    if (j["rho"].is_number()) {
      m.set_rho(j["rho"].get<double>());
    } else {
      for (const auto& [key, val] : j["rho"].items()) {
        const auto [a, b] = parse_key(key);
        m.set_rho(a, b, val.get<double>());
      }
    }
  }
  for (const char* field : {"nu", "gamma", "alpha", "erosion"}) {
    if (!j.contains(field)) continue;
    for (const auto& [key, val] : j[field].items()) {
      const auto [a, b] = parse_key(key);
      const double v = val.get<double>();
      if (std::string(field) == "nu")
        m.set_nu(a, b, v);
      else if (std::string(field) == "gamma")
        m.set_gamma(a, b, v);
      else if (std::string(field) == "alpha")
        m.set_alpha(a, b, v);
      else
        m.set_erosion(a, b, v);
    }
  }
  m.check_params();

  if (j.contains("prior")) {
    const auto& pj = j["prior"];
    if (pj.contains("lambda"))
      for (const auto& [key, val] : pj["lambda"].items())
        cfg.prior.lambda[parse_key(key)] =
            GammaPrior{val.at("shape").get<double>(), val.at("rate").get<double>()};
    if (pj.contains("alpha"))
      for (const auto& [key, val] : pj["alpha"].items())
        cfg.prior.alpha[parse_key(key)] = val.get<double>();
    if (pj.contains("alpha_default"))
      cfg.prior.alpha_default = pj["alpha_default"].get<double>();
    if (pj.contains("gamma_log_sd"))
      cfg.prior.gamma_log_sd = pj["gamma_log_sd"].get<double>();
  }

  if (j.contains("mcmc")) {
    const auto& mj = j["mcmc"];
    auto get = [&](const char* k, auto def) {
      return mj.contains(k) ? mj[k].get<decltype(def)>() : def;
    };
    cfg.mcmc.iterations = get("iterations", cfg.mcmc.iterations);
    cfg.mcmc.burnin = get("burnin", cfg.mcmc.burnin);
    cfg.mcmc.latent_period = get("latent_period", cfg.mcmc.latent_period);
    cfg.mcmc.mh_step = get("mh_step", cfg.mcmc.mh_step);
    cfg.mcmc.uniformization_c = get("uniformization_c", cfg.mcmc.uniformization_c);
    cfg.mcmc.seed = get("seed", cfg.mcmc.seed);
    cfg.mcmc.adapt_step = get("adapt_step", cfg.mcmc.adapt_step);
  }

  if (j.contains("initial_states")) {
    if (j["initial_states"].is_array()) {
      for (const auto& s : j["initial_states"])
        cfg.initial_states.push_back(s.get<int>());
    } else {
      for (const auto& [key, val] : j["initial_states"].items()) {
        const int state = std::stoi(key);
        for (int r = 0; r < val.get<int>(); ++r) cfg.initial_states.push_back(state);
      }
    }
    for (int s : cfg.initial_states)
      if (s < 1 || s > g.num_states || g.is_absorbing(s))
        throw std::runtime_error(path + ": initial state " + std::to_string(s) +
                                 " is out of range or absorbing");
  }
  return cfg;
}

void write_draws(const std::string& path, const PosteriorDraws& draws, int burnin) {
  std::ofstream out = open_out(path);
  for (const auto& [name, rate] : draws.acceptance)
    out << "# acceptance," << name << ',' << rate << '\n';
  out << "iteration";
  for (const auto& name : draws.names) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < draws.rows.size(); ++r) {
    out << burnin + 1 + r;
    for (double v : draws.rows[r]) out << ',' << v;
    out << '\n';
  }
}

PosteriorDraws read_draws(const std::string& draws_path) {
  std::ifstream in = open_in(draws_path);
  PosteriorDraws draws;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto f = split(line.substr(1), ',');
      if (f.size() == 3 && f[0] == " acceptance")
        draws.acceptance[f[1]] = std::stod(f[2]);
      continue;
    }
    const auto header = split(line, ',');
    if (header.empty() || header[0] != "iteration")
      throw std::runtime_error(draws_path + ": expected iteration header");
    draws.names.assign(header.begin() + 1, header.end());
    break;
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != draws.names.size() + 1)
      throw std::runtime_error(draws_path + ": row width mismatch");
    std::vector<double> row;
    for (std::size_t c = 1; c < f.size(); ++c) row.push_back(std::stod(f[c]));
    draws.rows.push_back(std::move(row));
  }
  if (draws.names.empty())
    throw std::runtime_error(draws_path + ": missing iteration header");
  return draws;
}

void write_latents(const std::string& path, const PosteriorDraws& draws,
                   int burnin) {
  std::ofstream out = open_out(path);
  out << "# burnin," << burnin << '\n';
  out << "iteration,unit,time,from_state,to_state,kind\n";
  for (std::size_t k = 0; k < draws.latents.size(); ++k) {
    const int iter = burnin + 1 + draws.latent_rows[k];
    const PopulationTrajectory& traj = draws.latents[k];
    for (int u = 0; u < traj.n; ++u) {
      out << iter << ',' << u + 1 << ",0,0," << traj.initial[u] << ",init\n";
      const UnitPath p = unit_path_of(traj, u);
      int from = p.initial;
      for (const auto& [t, to] : p.jumps) {
        out << iter << ',' << u + 1 << ',' << t << ',' << from << ',' << to
            << ",jump\n";
        from = to;
      }
      if (std::isfinite(traj.censor[u]))
        out << iter << ',' << u + 1 << ',' << traj.censor[u] << ",0,0,censor\n";
    }
  }
}

void read_latents(const std::string& latents_path, PosteriorDraws& draws) {
  std::ifstream in = open_in(latents_path);
  std::string line;
  int burnin = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto f = split(line.substr(1), ',');
      if (f.size() == 2 && f[0] == " burnin") burnin = std::stoi(f[1]);
      continue;
    }
    break;  // header line consumed
  }
  if (burnin < 0) throw std::runtime_error(latents_path + ": missing # burnin line");
  if (split(line, ',') != std::vector<std::string>{"iteration", "unit", "time",
                                                   "from_state", "to_state", "kind"})
    throw std::runtime_error(latents_path + ": unexpected header");

  struct Partial {
    std::map<int, int> initial;
    std::map<int, std::vector<std::pair<double, int>>> jumps;
    std::map<int, double> censor;
  };
  std::map<int, Partial> by_iter;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw std::runtime_error(latents_path + ": row width mismatch");
    Partial& pt = by_iter[std::stoi(f[0])];
    const int u = std::stoi(f[1]);
    if (f[5] == "init")
      pt.initial[u] = std::stoi(f[4]);
    else if (f[5] == "jump")
      pt.jumps[u].push_back({std::stod(f[2]), std::stoi(f[4])});
    else if (f[5] == "censor")
      pt.censor[u] = std::stod(f[2]);
    else
      throw std::runtime_error(latents_path + ": unknown kind '" + f[5] + "'");
  }

  draws.latent_rows.clear();
  draws.latents.clear();
  for (const auto& [iter, pt] : by_iter) {
    const int row = iter - burnin - 1;
    if (row < 0 || row >= static_cast<int>(draws.rows.size()))
      throw std::runtime_error(latents_path + ": iteration " + std::to_string(iter) +
                               " has no matching draw row");
    const int n = pt.initial.empty() ? 0 : pt.initial.rbegin()->first;
    std::vector<int> init_v(n);
    std::vector<std::vector<std::pair<double, int>>> jumps_v(n);
    std::vector<double> censor_v(n, kInf);
    for (int u = 1; u <= n; ++u) {
      const auto it = pt.initial.find(u);
      if (it == pt.initial.end())
        throw std::runtime_error(latents_path + ": missing init row for unit " +
                                 std::to_string(u));
      init_v[u - 1] = it->second;
      const auto jt = pt.jumps.find(u);
      if (jt != pt.jumps.end()) jumps_v[u - 1] = jt->second;
      const auto ct = pt.censor.find(u);
      if (ct != pt.censor.end()) censor_v[u - 1] = ct->second;
    }
    draws.latent_rows.push_back(row);
    draws.latents.push_back(assemble_population(init_v, jumps_v, censor_v));
  }
}

void write_curve_csv(const std::string& path, const SurvivalCurve& curve) {
  std::ofstream out = open_out(path);
  const bool bands = !curve.q05.empty();
  out << "time,survival" << (bands ? ",q05,q95" : "") << '\n';
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    out << curve.times[i] << ',' << curve.value[i];
    if (bands) out << ',' << curve.q05[i] << ',' << curve.q95[i];
    out << '\n';
  }
}

void write_occupancy_csv(const std::string& path, const OccupancyCurves& curves) {
  std::ofstream out = open_out(path);
  out << "time";
  for (std::size_t s = 1; s < curves.occupancy.size(); ++s) out << ",state_" << s;
  out << '\n';
  for (std::size_t i = 0; i < curves.times.size(); ++i) {
    out << curves.times[i];
    for (std::size_t s = 1; s < curves.occupancy.size(); ++s)
      out << ',' << curves.occupancy[s][i];
    out << '\n';
  }
}

}  // namespace msurv
