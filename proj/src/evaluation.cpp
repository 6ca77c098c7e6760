#include "auctionmatch/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "auctionmatch/errors.hpp"
#include "auctionmatch/transport.hpp"

namespace am {

RegretStats test_regret(const MisreportTarget& target, const Tensor& truth, int iters,
                        double lr, int restarts, std::uint64_t seed) {
  const std::size_t n = target.agents(), m = target.items();
  const std::size_t batch = truth.dim(0);

  const AscentResult base = misreport_ascent(target, truth, iters, lr);
  RegretStats stats;
  stats.best_u = base.best_u;
  stats.truthful_u = base.truthful_u;

  Rng rng = substream(seed, rng_stream::misreport_restarts);
  for (int r = 0; r < restarts; ++r) {
    std::vector<Tensor> init;
    init.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Tensor start({batch, m});
      for (double& x : start.values()) x = rng.uniform();
      init.push_back(std::move(start));
    }
    const AscentResult run =
        misreport_ascent(target, truth, iters, lr, &init, &stats.truthful_u);
    for (std::size_t x = 0; x < batch * n; ++x)
      stats.best_u[x] = std::max(stats.best_u[x], run.best_u[x]);
  }

  stats.regrets = Tensor({batch, n});
  double sum = 0.0, sq = 0.0;
  for (std::size_t x = 0; x < batch * n; ++x) {
    const double r = std::max(0.0, stats.best_u[x] - stats.truthful_u[x]);
    stats.regrets[x] = r;
    sum += r;
    sq += r * r;
    stats.max = std::max(stats.max, r);
  }
  const double count = static_cast<double>(batch * n);
  stats.mean = sum / count;
  stats.std_dev = std::sqrt(std::max(0.0, sq / count - stats.mean * stats.mean));
  return stats;
}

RuleTarget::RuleTarget(std::size_t n, std::size_t m, Rule rule)
    : n_(n), m_(m), rule_(std::move(rule)) {}

std::size_t RuleTarget::agents() const { return n_; }
std::size_t RuleTarget::items() const { return m_; }

void RuleTarget::utilities(const Tensor& truth, std::size_t bidder, const Tensor& reports,
                           std::vector<double>& u_out, Tensor* grad_out) const {
  const std::size_t batch = truth.dim(0);
  u_out.assign(batch, 0.0);
  if (grad_out) *grad_out = Tensor({batch, m_});
  Tensor profile({n_, m_});
  Tensor alloc({n_, m_});
  std::vector<double> pay;
  for (std::size_t b = 0; b < batch; ++b) {
    std::memcpy(profile.data(), truth.data() + b * n_ * m_, n_ * m_ * sizeof(double));
    std::memcpy(profile.data() + bidder * m_, reports.data() + b * m_, m_ * sizeof(double));
    std::fill(alloc.values().begin(), alloc.values().end(), 0.0);
    pay.assign(n_, 0.0);
    rule_(profile, alloc, pay);
    double spend = 0.0;
    for (std::size_t j = 0; j < m_; ++j)
      spend += truth[(b * n_ + bidder) * m_ + j] * alloc[bidder * m_ + j];
    u_out[b] = spend - pay[bidder];
  }
}

namespace {

// Welfare of the best assignment among `kept` bidders (skip[i] excludes i).
// Unit-demand: a dummy row absorbs unsold items, a dummy column absorbs
// unmatched bidders. Exactly-one: a dummy row of mass m - kept fills the
// items real bidders leave; every real bidder gets exactly one item.
double assignment_welfare(const Tensor& values, const std::vector<char>& skip,
                          bool exactly_one, Tensor* plan_out,
                          std::vector<std::size_t>* rows_out) {
  const std::size_t n = values.dim(0), m = values.dim(1);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i)
    if (!skip[i]) rows.push_back(i);
  const std::size_t kept = rows.size();
  if (kept == 0) {
    if (plan_out) *plan_out = Tensor();
    return 0.0;
  }

  const std::size_t extra_row = exactly_one ? (m > kept ? 1 : 0) : 1;
  const std::size_t cols = exactly_one ? m : m + 1;
  Tensor cost({kept + extra_row, cols});
  for (std::size_t r = 0; r < kept; ++r)
    for (std::size_t j = 0; j < m; ++j) cost[r * cols + j] = -values[rows[r] * m + j];

  std::vector<double> a(kept, 1.0), b(cols, 1.0);
  if (exactly_one) {
    if (extra_row) a.push_back(static_cast<double>(m - kept));
  } else {
    a.push_back(static_cast<double>(m));  // dummy row soaks unsold items
    b.back() = static_cast<double>(kept); // dummy column soaks unmatched bidders
  }

  const MatchingResult res = exact_matching_oracle(cost, a, b);
  if (plan_out) *plan_out = res.plan;
  if (rows_out) *rows_out = rows;
  return -res.cost;
}

VcgOutcome clarke_outcome(const Tensor& values, bool exactly_one) {
  if (values.rank() != 2) throw ShapeError("vcg: values must be (agents, items)");
  const std::size_t n = values.dim(0), m = values.dim(1);
  if (exactly_one && m < n)
    throw InfeasibleSpecError("vcg: exactly-one assignment needs at least as many items as bidders");

  std::vector<char> skip(n, 0);
  Tensor plan;
  std::vector<std::size_t> rows;
  VcgOutcome out;
  out.welfare = assignment_welfare(values, skip, exactly_one, &plan, &rows);

  out.assignment.assign(n, VcgOutcome::npos);
  const std::size_t cols = exactly_one ? m : m + 1;
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < m; ++j)
      if (plan[r * cols + j] > 0.5) out.assignment[rows[r]] = j;

  out.payments.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    skip[i] = 1;
    const double welfare_without = assignment_welfare(values, skip, exactly_one, nullptr, nullptr);
    skip[i] = 0;
    const double own = out.assignment[i] == VcgOutcome::npos
                           ? 0.0
                           : values[i * m + out.assignment[i]];
    // Clarke pivot; the clamp only guards float dust, the pivot is >= 0.
    out.payments[i] = std::max(0.0, welfare_without - (out.welfare - own));
  }
  return out;
}

}  // namespace

VcgOutcome vcg_unit_demand(const Tensor& values) { return clarke_outcome(values, false); }

VcgOutcome vcg_exactly_one(const Tensor& values) { return clarke_outcome(values, true); }

void analytic_unit_demand_optimal(const Tensor& values, Tensor& alloc, double& pay) {
  if (values.rank() != 1 || values.numel() == 0)
    throw ShapeError("analytic_unit_demand_optimal: values must be a nonempty vector");
  const std::size_t m = values.numel();
  alloc = Tensor({m});
  pay = 0.0;
  std::size_t best = 0;
  for (std::size_t j = 1; j < m; ++j)
    if (values[j] > values[best]) best = j;
  if (values[best] >= kUnitDemandPostedPrice) {
    alloc[best] = 1.0;
    pay = kUnitDemandPostedPrice;
  }
}

void analytic_exactly_one_optimal(const Tensor& values, Tensor& alloc, double& pay) {
  if (values.rank() != 1 || values.numel() != 2)
    throw ShapeError("analytic_exactly_one_optimal: values must have exactly two entries");
  alloc = Tensor({2});
  if (values[1] - kExactlyOneUpgradePrice > values[0]) {
    alloc[1] = 1.0;
    pay = kExactlyOneUpgradePrice;
  } else {
    alloc[0] = 1.0;
    pay = 0.0;
  }
}

HeatmapGrid heatmap_grid(const MechanismParams& params, std::size_t resolution,
                         const SinkhornOptions* opts) {
  if (params.demand.n != 1 || params.demand.m != 2)
    throw ConfigError("heatmap_grid: needs a single-bidder two-item mechanism");
  if (resolution < 2) throw ConfigError("heatmap_grid: resolution must be at least 2");

  MechanismParams probe = params;
  if (opts) probe.sinkhorn = *opts;

  HeatmapGrid grid;
  grid.resolution = resolution;
  grid.coords.resize(resolution);
  for (std::size_t i = 0; i < resolution; ++i)
    grid.coords[i] = static_cast<double>(i) / static_cast<double>(resolution - 1);

  const std::size_t cells = resolution * resolution;
  Tensor bids({cells, 1, 2});
  for (std::size_t i1 = 0; i1 < resolution; ++i1)
    for (std::size_t i2 = 0; i2 < resolution; ++i2) {
      const std::size_t cell = i1 * resolution + i2;
      bids[cell * 2] = grid.coords[i1];
      bids[cell * 2 + 1] = grid.coords[i2];
    }

  const MechanismOutput out = mechanism_forward(probe, bids);
  grid.alloc = reshape(out.allocation, {cells, 2});
  grid.payment.assign(out.payments.data(), out.payments.data() + cells);
  return grid;
}

double max_adjacent_allocation_gap(const HeatmapGrid& grid) {
  const std::size_t res = grid.resolution, m = grid.alloc.last_dim();
  double gap = 0.0;
  auto cell_gap = [&](std::size_t a, std::size_t b) {
    for (std::size_t j = 0; j < m; ++j)
      gap = std::max(gap, std::abs(grid.alloc[a * m + j] - grid.alloc[b * m + j]));
  };
  for (std::size_t i1 = 0; i1 < res; ++i1)
    for (std::size_t i2 = 0; i2 < res; ++i2) {
      const std::size_t cell = i1 * res + i2;
      if (i2 + 1 < res) cell_gap(cell, cell + 1);
      if (i1 + 1 < res) cell_gap(cell, cell + res);
    }
  return gap;
}

EvalReport evaluate(const MechanismParams& params, const EvalConfig& cfg) {
  const std::size_t n = params.demand.n, m = params.demand.m, k = params.demand.k;
  if (cfg.test_size == 0) throw ConfigError("evaluate: test_size must be positive");

  Rng rng = substream(cfg.seed, rng_stream::test_data);
  const Tensor truth = sample_valuations(cfg.test_size, n, m, rng);
  const std::size_t batch = cfg.test_size;

  EvalReport rep;
  rep.agents = n;
  rep.items = m;
  rep.k = k;
  rep.demand = params.demand.kind == DemandKind::k_demand ? "k_demand" : "exactly_k";
  rep.test_size = batch;

  const MechanismOutput fwd = mechanism_forward(params, truth);
  rep.sinkhorn_iterations = fwd.sinkhorn_iterations;

  double rev_sum = 0.0, rev_sq = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) r += fwd.payments[b * n + i];
    rev_sum += r;
    rev_sq += r * r;
  }
  rep.revenue_mean = rev_sum / static_cast<double>(batch);
  rep.revenue_std =
      std::sqrt(std::max(0.0, rev_sq / static_cast<double>(batch) -
                                  rep.revenue_mean * rep.revenue_mean));

  const double bound = static_cast<double>(k);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      double spend = 0.0, row = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double g = fwd.allocation[(b * n + i) * m + j];
        row += g;
        spend += g * truth[(b * n + i) * m + j];
      }
      rep.ir_violation_max =
          std::max(rep.ir_violation_max, -(spend - fwd.payments[b * n + i]));
      const double gap = params.demand.kind == DemandKind::exactly_k
                             ? std::abs(row - bound)
                             : std::max(0.0, row - bound);
      rep.demand_violation_max = std::max(rep.demand_violation_max, gap);
    }
    for (std::size_t j = 0; j < m; ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < n; ++i) col += fwd.allocation[(b * n + i) * m + j];
      rep.supply_violation_max = std::max(rep.supply_violation_max, std::max(0.0, col - 1.0));
    }
  }

  const NeuralTarget target(&params, cfg.threads);
  const RegretStats stats = test_regret(target, truth, cfg.misreport_iters,
                                        cfg.misreport_lr, cfg.misreport_restarts, cfg.seed);
  rep.regret_mean = stats.mean;
  rep.regret_std = stats.std_dev;
  rep.regret_max = stats.max;
  rep.regret_per_agent.assign(n, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n; ++i) rep.regret_per_agent[i] += stats.regrets[b * n + i];
  for (double& r : rep.regret_per_agent) r /= static_cast<double>(batch);

  if (k == 1) {
    double vcg_sum = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const Tensor profile = reshape(slice_front(truth, b, b + 1), {n, m});
      const VcgOutcome v = params.demand.kind == DemandKind::exactly_k
                               ? vcg_exactly_one(profile)
                               : vcg_unit_demand(profile);
      for (double p : v.payments) vcg_sum += p;
    }
    rep.vcg_revenue = vcg_sum / static_cast<double>(batch);
  }

  if (n == 1 && m == 2 && k == 1) {
    double opt_sum = 0.0;
    Tensor alloc;
    double pay = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const Tensor profile = reshape(slice_front(truth, b, b + 1), {2});
      if (params.demand.kind == DemandKind::exactly_k)
        analytic_exactly_one_optimal(profile, alloc, pay);
      else
        analytic_unit_demand_optimal(profile, alloc, pay);
      opt_sum += pay;
    }
    rep.analytic_revenue = opt_sum / static_cast<double>(batch);
  }

  return rep;
}

}  // namespace am
