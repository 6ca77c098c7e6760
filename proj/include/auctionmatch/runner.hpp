#ifndef AUCTIONMATCH_RUNNER_HPP
#define AUCTIONMATCH_RUNNER_HPP

#include <string>

#include "auctionmatch/checkpoint.hpp"
#include "auctionmatch/config.hpp"

namespace am {

// Full training run. Streams one CSV row per epoch into metrics_path and
// rewrites checkpoint_path (atomically) after every epoch; pass "" to skip
// either. A numeric abort mid-epoch leaves the previous epoch's checkpoint
// on disk untouched.
TrainState run_training(MechanismParams& params, const Config& cfg,
                        const std::string& metrics_path,
                        const std::string& checkpoint_path);

// Test-set evaluation report as a JSON object (see README for the shape).
std::string eval_report_json(const MechanismParams& params, const Config& cfg);

// Monte Carlo baselines for the configured setting, independent of any
// learned model: VCG revenue (k = 1 settings) and the analytic optimum
// (single bidder, two items). Uses the same test-data stream as evaluate.
std::string baseline_json(const Config& cfg);

// Grid sweep of a single-bidder two-item mechanism as CSV. eps > 0 re-runs
// the transport layer with the schedule retargeted to that final epsilon.
std::string heatmap_csv(const MechanismParams& params, const Config& cfg,
                        std::size_t resolution, double eps);

}  // namespace am

#endif
