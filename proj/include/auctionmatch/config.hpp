#ifndef AUCTIONMATCH_CONFIG_HPP
#define AUCTIONMATCH_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "auctionmatch/evaluation.hpp"
#include "auctionmatch/training.hpp"
#include "auctionmatch/transport.hpp"

namespace am {

// Flat key=value experiment configuration. Every field has a key (listed next
// to it); parsing rejects keys outside this set so typos fail loudly instead
// of silently running defaults.
struct Config {
  std::size_t agents = 1;                    // auction.agents
  std::size_t items = 2;                     // auction.items
  std::string demand = "k_demand";           // auction.demand: k_demand | exactly_k
  std::size_t k = 1;                         // auction.k

  std::vector<std::size_t> hidden = {128, 128};  // net.hidden (comma separated)

  double eps_start = 1.0;                    // sinkhorn.eps_start
  double eps_final = 0.05;                   // sinkhorn.eps_final
  std::size_t eps_steps = 10;                // sinkhorn.eps_steps
  std::string schedule = "geometric";        // sinkhorn.schedule: geometric | arithmetic
  double tol = 0.01;                         // sinkhorn.tol
  int max_iter = 200;                        // sinkhorn.max_iter

  std::size_t train_size = 1u << 19;         // train.size
  std::size_t batch_size = 4096;             // train.batch
  std::size_t epochs = 100;                  // train.epochs
  double lr = 1e-3;                          // train.lr
  int misreport_steps = 25;                  // train.misreport_steps
  double misreport_lr = 0.1;                 // train.misreport_lr
  double lambda_init = 5.0;                  // train.lambda_init
  double rho_init = 1.0;                     // train.rho_init
  double rho_increment = 1.0;                // train.rho_increment
  std::size_t rho_period = 2;                // train.rho_period
  std::size_t lambda_period = 100;           // train.lambda_period

  std::size_t test_size = 1000;              // eval.size
  int eval_misreport_iters = 1000;           // eval.misreport_iters
  int eval_misreport_restarts = 10;          // eval.misreport_restarts
  double eval_misreport_lr = 0.1;            // eval.misreport_lr

  std::size_t heatmap_resolution = 101;      // heatmap.resolution
  double heatmap_eps = 0.0;                  // heatmap.eps (0 = mechanism's own)

  std::uint64_t seed = 0;                    // seed
  int threads = 1;                           // threads
};

// Sets one key. Unknown key or malformed value throws ConfigError.
void apply_override(Config& cfg, const std::string& key, const std::string& value);

// key = value lines; '#' starts a comment, blank lines are skipped.
Config parse_config_text(const std::string& text);
Config load_config_file(const std::string& path);  // IoError when unreadable

// Canonical serialization: every key once, fixed order; parses back equal.
std::string serialize_config(const Config& cfg);

// Views into the typed configs the library layers consume. These validate
// the enum-like strings and throw ConfigError on nonsense.
DemandSpec demand_spec(const Config& cfg);
SinkhornOptions sinkhorn_options(const Config& cfg);
TrainConfig train_config(const Config& cfg);
EvalConfig eval_config(const Config& cfg);

}  // namespace am

#endif
