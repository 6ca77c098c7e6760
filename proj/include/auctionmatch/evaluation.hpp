#ifndef AUCTIONMATCH_EVALUATION_HPP
#define AUCTIONMATCH_EVALUATION_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "auctionmatch/mechanism.hpp"
#include "auctionmatch/training.hpp"

namespace am {

// Regrets over a test set. mean/std_dev/max are taken over all (profile,
// bidder) entries.
struct RegretStats {
  Tensor regrets;     // (B, n)
  Tensor best_u;      // (B, n)
  Tensor truthful_u;  // (B, n)
  double mean = 0.0;
  double std_dev = 0.0;
  double max = 0.0;
};

// Strong regret probe: one truthful-start ascent plus `restarts` random
// restarts per bidder, keeping the best utility seen across every run and
// iterate. Restart points come from substream(seed, misreport_restarts) in a
// fixed order, so restart r is the same no matter how many follow it.
RegretStats test_regret(const MisreportTarget& target, const Tensor& truth, int iters,
                        double lr, int restarts, std::uint64_t seed);

// Deterministic per-profile rule adapted to the ascent interface: rule fills
// alloc (n, m) and pay (n) from the reported profile. Utility gradients are
// reported as zero, which is exact wherever the rule is locally constant.
class RuleTarget : public MisreportTarget {
 public:
  using Rule =
      std::function<void(const Tensor& profile, Tensor& alloc, std::vector<double>& pay)>;
  RuleTarget(std::size_t n, std::size_t m, Rule rule);
  std::size_t agents() const override;
  std::size_t items() const override;
  void utilities(const Tensor& truth, std::size_t bidder, const Tensor& reports,
                 std::vector<double>& u_out, Tensor* grad_out) const override;

 private:
  std::size_t n_;
  std::size_t m_;
  Rule rule_;
};

struct VcgOutcome {
  std::vector<std::size_t> assignment;  // item index per bidder, npos = nothing
  std::vector<double> payments;
  double welfare = 0.0;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

// Welfare-maximizing assignment with Clarke pivot payments. values is (n, m).
// Unit-demand: each bidder takes at most one item, items can stay unsold.
VcgOutcome vcg_unit_demand(const Tensor& values);
// Exactly-one: every bidder receives exactly one item; requires m >= n.
VcgOutcome vcg_exactly_one(const Tensor& values);

// Revenue-optimal posted pricing for one unit-demand buyer with i.i.d. U[0,1]
// values: every item costs 1/sqrt(3), buy the best item iff it clears the
// price. alloc comes back as an (m) one-hot (or all zero) row.
inline constexpr double kUnitDemandPostedPrice = 0.577350269189625764509;
void analytic_unit_demand_optimal(const Tensor& values, Tensor& alloc, double& pay);

// Revenue-optimal two-item menu when the buyer must take exactly one item:
// item 1 is free, item 2 costs 1/3, buyer picks the better deal.
inline constexpr double kExactlyOneUpgradePrice = 1.0 / 3.0;
void analytic_exactly_one_optimal(const Tensor& values, Tensor& alloc, double& pay);

struct HeatmapGrid {
  std::size_t resolution = 0;
  std::vector<double> coords;   // shared grid axis, coords[i] = i / (res - 1)
  Tensor alloc;                 // (res * res, m), row index = i1 * res + i2
  std::vector<double> payment;  // res * res
};

// Mechanism responses over the [0,1]^2 value grid of a single-bidder,
// two-item auction. A non-null opts overrides the stored Sinkhorn options,
// e.g. to probe the plan at a lower final temperature.
HeatmapGrid heatmap_grid(const MechanismParams& params, std::size_t resolution,
                         const SinkhornOptions* opts = nullptr);

// Largest change of any allocation entry between 4-adjacent grid cells. A
// sharper (lower temperature) mechanism steepens its decision boundaries, so
// this gap grows as epsilon shrinks.
double max_adjacent_allocation_gap(const HeatmapGrid& grid);

struct EvalConfig {
  std::size_t test_size = 1000;
  int misreport_iters = 1000;
  int misreport_restarts = 10;
  double misreport_lr = 0.1;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct EvalReport {
  std::size_t agents = 0;
  std::size_t items = 0;
  std::string demand;  // "k_demand" or "exactly_k"
  std::size_t k = 1;
  std::size_t test_size = 0;
  double revenue_mean = 0.0;
  double revenue_std = 0.0;
  double regret_mean = 0.0;
  double regret_std = 0.0;
  double regret_max = 0.0;
  std::vector<double> regret_per_agent;
  double ir_violation_max = 0.0;      // max over the test set of -(truthful utility)
  double demand_violation_max = 0.0;  // max gap between a bidder's row sum and its bound
  double supply_violation_max = 0.0;  // max item column sum above 1
  int sinkhorn_iterations = 0;        // truthful pass, max over profiles
  // Baselines on the same test draw; NaN when not applicable to the setting.
  double vcg_revenue = std::numeric_limits<double>::quiet_NaN();
  double analytic_revenue = std::numeric_limits<double>::quiet_NaN();
};

// Test-set evaluation: fresh profiles from substream(seed, test_data),
// truthful forward for revenue/feasibility/IR, strong regret probe, and
// matching baselines where the setting admits them.
EvalReport evaluate(const MechanismParams& params, const EvalConfig& cfg);

}  // namespace am

#endif
