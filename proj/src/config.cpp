#include "auctionmatch/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "auctionmatch/errors.hpp"

namespace am {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("config: bad value for " + key + ": '" + value + "'");
}

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(value.c_str(), &end);
  if (errno != 0 || end != value.c_str() + value.size() || value.empty()) bad_value(key, value);
  return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(value.c_str(), &end, 10);
  if (errno != 0 || end != value.c_str() + value.size() || value.empty() ||
      value[0] == '-')
    bad_value(key, value);
  return static_cast<std::uint64_t>(x);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

int parse_pos_int(const std::string& key, const std::string& value) {
  const std::uint64_t x = parse_u64(key, value);
  if (x == 0 || x > 1000000000ULL) bad_value(key, value);
  return static_cast<int>(x);
}

std::vector<std::size_t> parse_dims(const std::string& key, const std::string& value) {
  std::vector<std::size_t> dims;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    const std::size_t d = parse_size(key, part);
    if (d == 0) bad_value(key, value);
    dims.push_back(d);
  }
  if (dims.empty()) bad_value(key, value);
  return dims;
}

}  // namespace

void apply_override(Config& cfg, const std::string& key, const std::string& value) {
  if (key == "auction.agents") cfg.agents = parse_size(key, value);
  else if (key == "auction.items") cfg.items = parse_size(key, value);
  else if (key == "auction.demand") {
    if (value != "k_demand" && value != "exactly_k") bad_value(key, value);
    cfg.demand = value;
  } else if (key == "auction.k") cfg.k = parse_size(key, value);
  else if (key == "net.hidden") cfg.hidden = parse_dims(key, value);
  else if (key == "sinkhorn.eps_start") cfg.eps_start = parse_double(key, value);
  else if (key == "sinkhorn.eps_final") cfg.eps_final = parse_double(key, value);
  else if (key == "sinkhorn.eps_steps") cfg.eps_steps = parse_size(key, value);
  else if (key == "sinkhorn.schedule") {
    if (value != "geometric" && value != "arithmetic") bad_value(key, value);
    cfg.schedule = value;
  } else if (key == "sinkhorn.tol") cfg.tol = parse_double(key, value);
  else if (key == "sinkhorn.max_iter") cfg.max_iter = parse_pos_int(key, value);
  else if (key == "train.size") cfg.train_size = parse_size(key, value);
  else if (key == "train.batch") cfg.batch_size = parse_size(key, value);
  else if (key == "train.epochs") cfg.epochs = parse_size(key, value);
  else if (key == "train.lr") cfg.lr = parse_double(key, value);
  else if (key == "train.misreport_steps")
    cfg.misreport_steps = static_cast<int>(parse_u64(key, value));
  else if (key == "train.misreport_lr") cfg.misreport_lr = parse_double(key, value);
  else if (key == "train.lambda_init") cfg.lambda_init = parse_double(key, value);
  else if (key == "train.rho_init") cfg.rho_init = parse_double(key, value);
  else if (key == "train.rho_increment") cfg.rho_increment = parse_double(key, value);
  else if (key == "train.rho_period") cfg.rho_period = parse_size(key, value);
  else if (key == "train.lambda_period") cfg.lambda_period = parse_size(key, value);
  else if (key == "eval.size") cfg.test_size = parse_size(key, value);
  else if (key == "eval.misreport_iters")
    cfg.eval_misreport_iters = static_cast<int>(parse_u64(key, value));
  else if (key == "eval.misreport_restarts")
    cfg.eval_misreport_restarts = static_cast<int>(parse_u64(key, value));
  else if (key == "eval.misreport_lr") cfg.eval_misreport_lr = parse_double(key, value);
  else if (key == "heatmap.resolution") cfg.heatmap_resolution = parse_size(key, value);
  else if (key == "heatmap.eps") cfg.heatmap_eps = parse_double(key, value);
  else if (key == "seed") cfg.seed = parse_u64(key, value);
  else if (key == "threads") cfg.threads = parse_pos_int(key, value);
  else throw ConfigError("config: unknown key '" + key + "'");
}

Config parse_config_text(const std::string& text) {
  Config cfg;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

Config load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const Config& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "auction.agents = " << cfg.agents << "\n";
  out << "auction.items = " << cfg.items << "\n";
  out << "auction.demand = " << cfg.demand << "\n";
  out << "auction.k = " << cfg.k << "\n";
  out << "net.hidden = ";
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i)
    out << (i ? "," : "") << cfg.hidden[i];
  out << "\n";
  out << "sinkhorn.eps_start = " << cfg.eps_start << "\n";
  out << "sinkhorn.eps_final = " << cfg.eps_final << "\n";
  out << "sinkhorn.eps_steps = " << cfg.eps_steps << "\n";
  out << "sinkhorn.schedule = " << cfg.schedule << "\n";
  out << "sinkhorn.tol = " << cfg.tol << "\n";
  out << "sinkhorn.max_iter = " << cfg.max_iter << "\n";
  out << "train.size = " << cfg.train_size << "\n";
  out << "train.batch = " << cfg.batch_size << "\n";
  out << "train.epochs = " << cfg.epochs << "\n";
  out << "train.lr = " << cfg.lr << "\n";
  out << "train.misreport_steps = " << cfg.misreport_steps << "\n";
  out << "train.misreport_lr = " << cfg.misreport_lr << "\n";
  out << "train.lambda_init = " << cfg.lambda_init << "\n";
  out << "train.rho_init = " << cfg.rho_init << "\n";
  out << "train.rho_increment = " << cfg.rho_increment << "\n";
  out << "train.rho_period = " << cfg.rho_period << "\n";
  out << "train.lambda_period = " << cfg.lambda_period << "\n";
  out << "eval.size = " << cfg.test_size << "\n";
  out << "eval.misreport_iters = " << cfg.eval_misreport_iters << "\n";
  out << "eval.misreport_restarts = " << cfg.eval_misreport_restarts << "\n";
  out << "eval.misreport_lr = " << cfg.eval_misreport_lr << "\n";
  out << "heatmap.resolution = " << cfg.heatmap_resolution << "\n";
  out << "heatmap.eps = " << cfg.heatmap_eps << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "threads = " << cfg.threads << "\n";
  return out.str();
}

DemandSpec demand_spec(const Config& cfg) {
  DemandSpec d;
  d.kind = cfg.demand == "exactly_k" ? DemandKind::exactly_k : DemandKind::k_demand;
  if (cfg.demand != "k_demand" && cfg.demand != "exactly_k")
    throw ConfigError("config: auction.demand must be k_demand or exactly_k");
  d.n = cfg.agents;
  d.m = cfg.items;
  d.k = cfg.k;
  return d;
}

SinkhornOptions sinkhorn_options(const Config& cfg) {
  if (cfg.schedule != "geometric" && cfg.schedule != "arithmetic")
    throw ConfigError("config: sinkhorn.schedule must be geometric or arithmetic");
  SinkhornOptions opt;
  opt.schedule =
      make_schedule(cfg.eps_start, cfg.eps_final, cfg.eps_steps,
                    cfg.schedule == "arithmetic" ? ScheduleKind::arithmetic
                                                 : ScheduleKind::geometric);
  opt.tol = cfg.tol;
  opt.max_iter = cfg.max_iter;
  return opt;
}

TrainConfig train_config(const Config& cfg) {
  TrainConfig t;
  t.train_size = cfg.train_size;
  t.batch_size = cfg.batch_size;
  t.epochs = cfg.epochs;
  t.lr = cfg.lr;
  t.misreport_steps = cfg.misreport_steps;
  t.misreport_lr = cfg.misreport_lr;
  t.lambda_init = cfg.lambda_init;
  t.rho_init = cfg.rho_init;
  t.rho_increment = cfg.rho_increment;
  t.rho_period = cfg.rho_period;
  t.lambda_period = cfg.lambda_period;
  t.seed = cfg.seed;
  t.threads = cfg.threads;
  return t;
}

EvalConfig eval_config(const Config& cfg) {
  EvalConfig e;
  e.test_size = cfg.test_size;
  e.misreport_iters = cfg.eval_misreport_iters;
  e.misreport_restarts = cfg.eval_misreport_restarts;
  e.misreport_lr = cfg.eval_misreport_lr;
  e.seed = cfg.seed;
  e.threads = cfg.threads;
  return e;
}

}  // namespace am
