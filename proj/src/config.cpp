#include "emc/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace emc {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw std::invalid_argument("config: bad numeric value for '" + key + "': " + v);
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw std::invalid_argument("config: bad integer value for '" + key + "': " + v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean value for '" + key + "': " + v);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "env") env = v;
  else if (key == "grid_penalty") grid_penalty = parse_double(key, v);
  else if (key == "grid_sigma") grid_sigma = parse_double(key, v);
  else if (key == "grid_slip") grid_slip = parse_double(key, v);
  else if (key == "grid_horizon") grid_horizon = static_cast<int>(parse_int(key, v));
  else if (key == "pp_grid") pp_grid = static_cast<int>(parse_int(key, v));
  else if (key == "pp_predators") pp_predators = static_cast<int>(parse_int(key, v));
  else if (key == "pp_prey") pp_prey = static_cast<int>(parse_int(key, v));
  else if (key == "pp_capture_reward") pp_capture_reward = parse_double(key, v);
  else if (key == "pp_lone_penalty") pp_lone_penalty = parse_double(key, v);
  else if (key == "pp_horizon") pp_horizon = static_cast<int>(parse_int(key, v));
  else if (key == "pp_prey_moves") pp_prey_moves = parse_bool(key, v);
  else if (key == "mixer") mixer = v;
  else if (key == "curiosity") curiosity = v;
  else if (key == "lambda") lambda = parse_double(key, v);
  else if (key == "eta0") eta0 = parse_double(key, v);
  else if (key == "rho") rho = parse_double(key, v);
  else if (key == "gamma") gamma = parse_double(key, v);
  else if (key == "lr") lr = parse_double(key, v);
  else if (key == "hidden") hidden = static_cast<int>(parse_int(key, v));
  else if (key == "mixer_hidden") mixer_hidden = static_cast<int>(parse_int(key, v));
  else if (key == "batch_size") batch_size = static_cast<int>(parse_int(key, v));
  else if (key == "buffer_capacity") buffer_capacity = static_cast<int>(parse_int(key, v));
  else if (key == "target_interval") target_interval = static_cast<int>(parse_int(key, v));
  else if (key == "train_interval") train_interval = static_cast<int>(parse_int(key, v));
  else if (key == "eps_start") eps_start = parse_double(key, v);
  else if (key == "eps_end") eps_end = parse_double(key, v);
  else if (key == "eps_anneal") eps_anneal = parse_int(key, v);
  else if (key == "recompute_intrinsic") recompute_intrinsic = parse_bool(key, v);
  else if (key == "mem_latent_dim") mem_latent_dim = static_cast<int>(parse_int(key, v));
  else if (key == "mem_delta") mem_delta = parse_double(key, v);
  else if (key == "mem_capacity") mem_capacity = parse_int(key, v);
  else if (key == "total_steps") total_steps = parse_int(key, v);
  else if (key == "eval_interval") eval_interval = parse_int(key, v);
  else if (key == "eval_episodes") eval_episodes = static_cast<int>(parse_int(key, v));
  else if (key == "seeds") seeds = v;
  else if (key == "out_dir") out_dir = v;
  else if (key == "trace_dump") trace_dump = parse_bool(key, v);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig ExperimentConfig::from_lines(const std::vector<std::string>& lines) {
  ExperimentConfig cfg;
  for (const auto& raw : lines) {
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key=value, got '" + line + "'");
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  cfg.apply_env_overrides();
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return from_lines(lines);
}

void ExperimentConfig::apply_env_overrides() {
  static const char* keys[] = {
      "env", "grid_penalty", "grid_sigma", "grid_slip", "grid_horizon", "pp_grid",
      "pp_predators", "pp_prey", "pp_capture_reward", "pp_lone_penalty", "pp_horizon",
      "pp_prey_moves", "mixer", "curiosity", "lambda", "eta0", "rho", "gamma", "lr", "hidden",
      "mixer_hidden", "batch_size", "buffer_capacity", "target_interval", "train_interval",
      "eps_start", "eps_end", "eps_anneal", "recompute_intrinsic", "mem_latent_dim", "mem_delta",
      "mem_capacity", "total_steps", "eval_interval", "eval_episodes", "seeds", "out_dir",
      "trace_dump"};
  for (const char* key : keys) {
    std::string var = "EMC_";
    for (const char* c = key; *c; ++c) var += static_cast<char>(std::toupper(*c));
    if (const char* v = std::getenv(var.c_str())) set(key, v);
  }
}

void ExperimentConfig::validate() const {
  if (env != "gridworld" && env != "predator-prey")
    throw std::invalid_argument("config: unknown env '" + env + "'");
  mixer_kind_from_string(mixer);          // throws with the offending value
  curiosity_kind_from_string(curiosity);  // throws with the offending value
  if (lambda < 0.0) throw std::invalid_argument("config: lambda must be >= 0");
  if (eta0 <= 0.0) throw std::invalid_argument("config: eta0 must be > 0");
  if (rho <= 0.0 || rho > 1.0) throw std::invalid_argument("config: rho must be in (0,1]");
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("config: gamma must be in [0,1)");
  if (lr <= 0.0) throw std::invalid_argument("config: lr must be > 0");
  if (hidden <= 0) throw std::invalid_argument("config: hidden must be positive");
  if (batch_size <= 0) throw std::invalid_argument("config: batch_size must be positive");
  if (buffer_capacity < batch_size)
    throw std::invalid_argument("config: buffer_capacity must be >= batch_size");
  if (target_interval <= 0) throw std::invalid_argument("config: target_interval must be positive");
  if (train_interval < 0) throw std::invalid_argument("config: train_interval must be >= 0");
  if (mem_latent_dim <= 0) throw std::invalid_argument("config: mem_latent_dim must be positive");
  if (mem_delta < 0.0) throw std::invalid_argument("config: mem_delta must be >= 0");
  if (mem_capacity <= 0) throw std::invalid_argument("config: mem_capacity must be positive");
  if (total_steps <= 0) throw std::invalid_argument("config: total_steps must be positive");
  if (eval_interval <= 0) throw std::invalid_argument("config: eval_interval must be positive");
  if (eval_episodes <= 0) throw std::invalid_argument("config: eval_episodes must be positive");
  if (seed_list().empty()) throw std::invalid_argument("config: seeds list is empty");
  GridworldConfig g;
  g.penalty = grid_penalty;
  g.noise_sigma = grid_sigma;
  g.slip_prob = grid_slip;
  g.horizon = grid_horizon;
  if (env == "gridworld") g.validate();
  if (env == "predator-prey") {
    PredatorPreyConfig p;
    p.grid = pp_grid;
    p.n_predators = pp_predators;
    p.n_prey = pp_prey;
    p.reward_capture = pp_capture_reward;
    p.penalty_lone = pp_lone_penalty;
    p.horizon = pp_horizon;
    p.prey_moves = pp_prey_moves;
    p.validate();
  }
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream o;
  o << "env=" << env << "\n";
  o << "grid_penalty=" << fmt_double(grid_penalty) << "\n";
  o << "grid_sigma=" << fmt_double(grid_sigma) << "\n";
  o << "grid_slip=" << fmt_double(grid_slip) << "\n";
  o << "grid_horizon=" << grid_horizon << "\n";
  o << "pp_grid=" << pp_grid << "\n";
  o << "pp_predators=" << pp_predators << "\n";
  o << "pp_prey=" << pp_prey << "\n";
  o << "pp_capture_reward=" << fmt_double(pp_capture_reward) << "\n";
  o << "pp_lone_penalty=" << fmt_double(pp_lone_penalty) << "\n";
  o << "pp_horizon=" << pp_horizon << "\n";
  o << "pp_prey_moves=" << (pp_prey_moves ? 1 : 0) << "\n";
  o << "mixer=" << mixer << "\n";
  o << "curiosity=" << curiosity << "\n";
  o << "lambda=" << fmt_double(lambda) << "\n";
  o << "eta0=" << fmt_double(eta0) << "\n";
  o << "rho=" << fmt_double(rho) << "\n";
  o << "gamma=" << fmt_double(gamma) << "\n";
  o << "lr=" << fmt_double(lr) << "\n";
  o << "hidden=" << hidden << "\n";
  o << "mixer_hidden=" << mixer_hidden << "\n";
  o << "batch_size=" << batch_size << "\n";
  o << "buffer_capacity=" << buffer_capacity << "\n";
  o << "target_interval=" << target_interval << "\n";
  o << "train_interval=" << train_interval << "\n";
  o << "eps_start=" << fmt_double(eps_start) << "\n";
  o << "eps_end=" << fmt_double(eps_end) << "\n";
  o << "eps_anneal=" << eps_anneal << "\n";
  o << "recompute_intrinsic=" << (recompute_intrinsic ? 1 : 0) << "\n";
  o << "mem_latent_dim=" << mem_latent_dim << "\n";
  o << "mem_delta=" << fmt_double(mem_delta) << "\n";
  o << "mem_capacity=" << mem_capacity << "\n";
  o << "total_steps=" << total_steps << "\n";
  o << "eval_interval=" << eval_interval << "\n";
  o << "eval_episodes=" << eval_episodes << "\n";
  o << "seeds=" << seeds << "\n";
  o << "out_dir=" << out_dir << "\n";
  o << "trace_dump=" << (trace_dump ? 1 : 0) << "\n";
  return o.str();
}

std::vector<uint64_t> ExperimentConfig::seed_list() const {
  std::vector<uint64_t> out;
  std::stringstream ss(seeds);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<uint64_t>(parse_int("seeds", item)));
  }
  return out;
}

std::unique_ptr<Env> ExperimentConfig::make_env() const {
  if (env == "gridworld") {
    GridworldConfig g;
    g.penalty = grid_penalty;
    g.noise_sigma = grid_sigma;
    g.slip_prob = grid_slip;
    g.horizon = grid_horizon;
    return std::make_unique<GridworldEnv>(g);
  }
  PredatorPreyConfig p;
  p.grid = pp_grid;
  p.n_predators = pp_predators;
  p.n_prey = pp_prey;
  p.reward_capture = pp_capture_reward;
  p.penalty_lone = pp_lone_penalty;
  p.horizon = pp_horizon;
  p.prey_moves = pp_prey_moves;
  return std::make_unique<PredatorPreyEnv>(p);
}

LearnerConfig ExperimentConfig::learner_config() const {
  LearnerConfig l;
  l.mixer = mixer_kind_from_string(mixer);
  l.gamma = gamma;
  l.lambda = lambda;
  l.lr = lr;
  l.hidden = hidden;
  l.mixer_hidden = mixer_hidden;
  l.batch_size = batch_size;
  l.target_interval = target_interval;
  l.eps_start = eps_start;
  l.eps_end = eps_end;
  l.eps_anneal_steps = eps_anneal;
  l.recompute_intrinsic = recompute_intrinsic;
  return l;
}

CuriosityConfig ExperimentConfig::curiosity_config() const {
  CuriosityConfig c;
  c.kind = curiosity_kind_from_string(curiosity);
  c.rho = rho;
  c.eta0 = eta0;
  c.gamma = gamma;
  c.lr = lr;
  c.hidden = hidden;
  return c;
}

}  // namespace emc
