#include "auctionmatch/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "auctionmatch/errors.hpp"

namespace am {

namespace {

// Stands in for epsilon * log(0) on zero-mass rows/columns. Large enough that
// exp(kLogZero / eps) underflows to exactly 0 for any eps in the schedule,
// small enough that no intermediate overflows.
constexpr double kLogZero = -1e18;

}  // namespace

Marginals build_marginals(const DemandSpec& spec) {
  if (spec.n < 1 || spec.m < 1 || spec.k < 1)
    throw InfeasibleSpecError("build_marginals: n, m, k must all be at least 1");
  const double n = static_cast<double>(spec.n);
  const double m = static_cast<double>(spec.m);
  const double k = static_cast<double>(spec.k);
  Marginals marg;
  marg.a.assign(spec.n + 1, k);
  marg.b.assign(spec.m + 1, 1.0);
  switch (spec.kind) {
    case DemandKind::k_demand:
      marg.a.back() = m;      // dummy agent may absorb every item
      marg.b.back() = k * n;  // dummy item absorbs unused demand
      break;
    case DemandKind::exactly_k:
      if (m < k * n)
        throw InfeasibleSpecError("build_marginals: exactly-" + std::to_string(spec.k) +
                                  " demand needs m >= k*n, got n=" + std::to_string(spec.n) +
                                  " m=" + std::to_string(spec.m));
      marg.a.back() = m - k * n;  // dummy agent takes the leftover items
      marg.b.back() = 0.0;        // no slack for real agents
      break;
  }
  return marg;
}

std::vector<double> make_schedule(double eps_start, double eps_final, std::size_t steps,
                                  ScheduleKind kind) {
  if (!(eps_start > 0.0) || !(eps_final > 0.0))
    throw ConfigError("make_schedule: epsilons must be positive");
  if (eps_final > eps_start)
    throw ConfigError("make_schedule: eps_final must not exceed eps_start");
  if (steps < 1) throw ConfigError("make_schedule: need at least one step");
  std::vector<double> sched(steps);
  if (steps == 1) {
    sched[0] = eps_final;
    return sched;
  }
  const double t_max = static_cast<double>(steps - 1);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / t_max;
    sched[i] = kind == ScheduleKind::geometric
                   ? eps_start * std::pow(eps_final / eps_start, t)
                   : eps_start + (eps_final - eps_start) * t;
  }
  sched.back() = eps_final;  // guard against pow rounding
  return sched;
}

namespace {

struct EagerOps {
  using V = Tensor;
  V constant(Tensor t) const { return t; }
  static const Tensor& val(const V& v) { return v; }
};

struct TapeOps {
  Graph* g = nullptr;
  using V = Var;
  V constant(Tensor t) const { return g->constant(std::move(t)); }
  static const Tensor& val(const V& v) { return v.value(); }
};

void validate_marginals(const Marginals& marg, std::size_t rows, std::size_t cols) {
  if (marg.a.size() != rows || marg.b.size() != cols)
    throw ShapeError("sinkhorn_solve: marginal sizes (" + std::to_string(marg.a.size()) + "," +
                     std::to_string(marg.b.size()) + ") do not match cost (" +
                     std::to_string(rows) + "," + std::to_string(cols) + ")");
  double sum_a = 0.0, sum_b = 0.0;
  for (double v : marg.a) {
    if (v < 0.0) throw NumericError("sinkhorn_solve: negative row mass");
    sum_a += v;
  }
  for (double v : marg.b) {
    if (v < 0.0) throw NumericError("sinkhorn_solve: negative column mass");
    sum_b += v;
  }
  if (sum_a <= 0.0) throw NumericError("sinkhorn_solve: zero total mass");
  if (std::abs(sum_a - sum_b) > 1e-9 * std::max(1.0, sum_a))
    throw NumericError("sinkhorn_solve: unbalanced marginals (" + std::to_string(sum_a) +
                       " vs " + std::to_string(sum_b) + ")");
}

// eps*log(mass) per entry, tiled over the batch; zero-mass entries get the
// log-zero sentinel so their row/column of the plan underflows to exact 0.
Tensor eps_log_mass(const std::vector<double>& mass, double eps, std::size_t batch) {
  const std::size_t k = mass.size();
  Tensor out({batch, k});
  for (std::size_t i = 0; i < k; ++i)
    out[i] = mass[i] > 0.0 ? eps * std::log(mass[i]) : kLogZero;
  for (std::size_t b = 1; b < batch; ++b)
    std::copy_n(out.data(), k, out.data() + b * k);
  return out;
}

// Per-profile relative row-marginal violation, ignoring zero-mass rows.
void row_violations(const Tensor& plan, const std::vector<double>& a,
                    std::vector<double>& out) {
  const std::size_t batch = plan.dim(0), rows = plan.dim(1), cols = plan.dim(2);
  out.assign(batch, 0.0);
  const double* p = plan.data();
  for (std::size_t b = 0; b < batch; ++b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < rows; ++i, p += cols) {
      if (a[i] <= 0.0) continue;
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += p[j];
      worst = std::max(worst, std::abs(s - a[i]) / a[i]);
    }
    out[b] = worst;
  }
}

Tensor active_mask(const std::vector<char>& active, std::size_t width) {
  const std::size_t batch = active.size();
  Tensor mask({batch, width});
  for (std::size_t b = 0; b < batch; ++b)
    if (active[b])
      for (std::size_t j = 0; j < width; ++j) mask[b * width + j] = 1.0;
  return mask;
}

// 1.0 on frozen profiles; together with active_mask this selects between the
// fresh update and the held potential so converged profiles stay bit-stable.
Tensor active_mask_complement(const std::vector<char>& active, std::size_t width) {
  const std::size_t batch = active.size();
  Tensor mask({batch, width});
  for (std::size_t b = 0; b < batch; ++b)
    if (!active[b])
      for (std::size_t j = 0; j < width; ++j) mask[b * width + j] = 1.0;
  return mask;
}

template <class Ops>
struct CoreResult {
  typename Ops::V plan, f, g;
  int iterations = 0;
  double violation = 0.0;
};

// Annealed log-domain updates. For each epsilon stage, per batch element:
// while its row violation is at least tol, refresh f against g, g against the
// new f, and rebuild the plan. Elements that have converged are frozen by a
// 0/1 mask so their values (and gradients) match a solo run exactly.
template <class Ops>
CoreResult<Ops> sinkhorn_core(Ops ops, typename Ops::V cost3, const Marginals& marg,
                              const SinkhornOptions& opt) {
  using V = typename Ops::V;
  const Tensor& cval = Ops::val(cost3);
  if (cval.rank() != 3) throw ShapeError("sinkhorn_solve: cost must be (B, rows, cols)");
  const std::size_t batch = cval.dim(0), rows = cval.dim(1), cols = cval.dim(2);
  validate_marginals(marg, rows, cols);
  if (!cval.all_finite()) throw NumericError("sinkhorn_solve: non-finite cost");
  if (opt.schedule.empty()) throw ConfigError("sinkhorn_solve: empty epsilon schedule");
  for (std::size_t s = 0; s + 1 < opt.schedule.size(); ++s)
    if (opt.schedule[s + 1] > opt.schedule[s])
      throw ConfigError("sinkhorn_solve: epsilon schedule must be non-increasing");

  V f = ops.constant(Tensor({batch, rows}));
  V g = ops.constant(Tensor({batch, cols}));

  auto make_plan = [&](const V& fv, const V& gv, double eps) {
    V fg = add(expand_last(fv, cols), transpose_last2(expand_last(gv, rows)));
    return vexp(scale(sub(fg, cost3), 1.0 / eps));
  };

  // Per-element update counts: an element is only charged for passes in which
  // it was still active, so the reported max matches a solo run of the
  // slowest element.
  std::vector<int> per_elem(batch, 0);
  double last_violation = 0.0;
  std::vector<double> viol;
  std::vector<char> active(batch, 1);
  V plan = make_plan(f, g, opt.schedule.front());

  for (std::size_t stage = 0; stage < opt.schedule.size(); ++stage) {
    const double eps = opt.schedule[stage];
    const bool final_stage = stage + 1 == opt.schedule.size();
    const V elog_a = ops.constant(eps_log_mass(marg.a, eps, batch));
    const V elog_b = ops.constant(eps_log_mass(marg.b, eps, batch));
    if (stage > 0) plan = make_plan(f, g, eps);

    for (int iter = 0;; ++iter) {
      bool all_active = true;
      if (opt.fixed_iters > 0) {
        if (iter >= opt.fixed_iters) break;
      } else {
        row_violations(Ops::val(plan), marg.a, viol);
        bool any = false;
        for (std::size_t b = 0; b < batch; ++b) {
          active[b] = viol[b] >= opt.tol ? 1 : 0;
          any = any || active[b];
          all_active = all_active && active[b];
        }
        last_violation = *std::max_element(viol.begin(), viol.end());
        if (!any) break;
        if (iter >= opt.max_iter) {
          double worst = 0.0;
          for (std::size_t b = 0; b < batch; ++b)
            if (active[b]) worst = std::max(worst, viol[b]);
          if (final_stage)
            throw ConvergenceError(
                "sinkhorn_solve: no convergence after " + std::to_string(opt.max_iter) +
                    " iterations at final epsilon (row violation " + std::to_string(worst) +
                    ", tol " + std::to_string(opt.tol) + ")",
                worst);
          break;
        }
      }

      V f_new = add(scale(logsumexp_last(scale(
                              sub(transpose_last2(expand_last(g, rows)), cost3), 1.0 / eps)),
                          -eps),
                    elog_a);
      if (!all_active) {
        const V mask = ops.constant(active_mask(active, rows));
        const V keep = ops.constant(active_mask_complement(active, rows));
        f_new = add(mul(mask, f_new), mul(keep, f));
      }
      f = f_new;
      V g_new = add(scale(logsumexp_last(transpose_last2(
                              scale(sub(expand_last(f, cols), cost3), 1.0 / eps))),
                          -eps),
                    elog_b);
      if (!all_active) {
        const V mask = ops.constant(active_mask(active, cols));
        const V keep = ops.constant(active_mask_complement(active, cols));
        g_new = add(mul(mask, g_new), mul(keep, g));
      }
      g = g_new;
      plan = make_plan(f, g, eps);
      for (std::size_t b = 0; b < batch; ++b)
        if (active[b]) ++per_elem[b];
    }
  }

  if (opt.fixed_iters > 0) {
    row_violations(Ops::val(plan), marg.a, viol);
    last_violation = *std::max_element(viol.begin(), viol.end());
  }

  CoreResult<Ops> out{plan, f, g, *std::max_element(per_elem.begin(), per_elem.end()),
                      last_violation};
  return out;
}

}  // namespace

TransportPlan sinkhorn_solve_batch(const Tensor& cost3, const Marginals& marg,
                                   const SinkhornOptions& opt) {
  auto res = sinkhorn_core(EagerOps{}, cost3, marg, opt);
  return TransportPlan{std::move(res.plan), std::move(res.f), std::move(res.g),
                       opt.schedule.back(), res.iterations, res.violation};
}

TransportPlanVars sinkhorn_solve_batch(Graph& g, Var cost3, const Marginals& marg,
                                       const SinkhornOptions& opt) {
  auto res = sinkhorn_core(TapeOps{&g}, cost3, marg, opt);
  return TransportPlanVars{res.plan, res.f, res.g, opt.schedule.back(), res.iterations,
                           res.violation};
}

TransportPlan sinkhorn_solve(const Tensor& cost, const Marginals& marg,
                             const SinkhornOptions& opt) {
  if (cost.rank() != 2) throw ShapeError("sinkhorn_solve: cost must be (rows, cols)");
  const std::size_t rows = cost.dim(0), cols = cost.dim(1);
  TransportPlan res =
      sinkhorn_solve_batch(reshape(cost, {1, rows, cols}), marg, opt);
  res.plan = reshape(res.plan, {rows, cols});
  res.f = reshape(res.f, {rows});
  res.g = reshape(res.g, {cols});
  return res;
}

TransportPlanVars sinkhorn_solve(Graph& g, Var cost, const Marginals& marg,
                                 const SinkhornOptions& opt) {
  const Tensor& cval = cost.value();
  if (cval.rank() != 2) throw ShapeError("sinkhorn_solve: cost must be (rows, cols)");
  const std::size_t rows = cval.dim(0), cols = cval.dim(1);
  auto res = sinkhorn_solve_batch(g, reshape(cost, {1, rows, cols}), marg, opt);
  res.plan = reshape(res.plan, {rows, cols});
  res.f = reshape(res.f, {rows});
  res.g = reshape(res.g, {cols});
  return res;
}

Tensor plan_from_potentials(const Tensor& f, const Tensor& g, const Tensor& cost, double eps) {
  if (cost.rank() != 2 || f.rank() != 1 || g.rank() != 1 || f.dim(0) != cost.dim(0) ||
      g.dim(0) != cost.dim(1))
    throw ShapeError("plan_from_potentials: shapes do not line up");
  if (!(eps > 0.0)) throw NumericError("plan_from_potentials: eps must be positive");
  Tensor out(cost.shape());
  for (std::size_t i = 0; i < cost.dim(0); ++i)
    for (std::size_t j = 0; j < cost.dim(1); ++j)
      out.at(i, j) = std::exp((f[i] + g[j] - cost.at(i, j)) / eps);
  return out;
}

double entropic_objective(const Tensor& plan, const Tensor& cost, double eps) {
  if (!plan.same_shape(cost))
    throw ShapeError("entropic_objective: plan and cost shapes differ");
  double linear = 0.0, entropy = 0.0;
  for (std::size_t i = 0; i < plan.numel(); ++i) {
    const double p = plan[i];
    if (p < 0.0) throw NumericError("entropic_objective: negative plan entry");
    linear += p * cost[i];
    if (p > 0.0) entropy += p * std::log(p);
  }
  return linear + eps * entropy;
}

namespace {

struct FlowEdge {
  int to;
  double cap;
  double cost;
  int rev;
};

class MinCostFlow {
 public:
  explicit MinCostFlow(int nodes) : adj_(static_cast<std::size_t>(nodes)) {}

  void add_edge(int u, int v, double cap, double cost) {
    adj_[static_cast<std::size_t>(u)].push_back(
        {v, cap, cost, static_cast<int>(adj_[static_cast<std::size_t>(v)].size())});
    adj_[static_cast<std::size_t>(v)].push_back(
        {u, 0.0, -cost, static_cast<int>(adj_[static_cast<std::size_t>(u)].size()) - 1});
  }

  // Successive shortest augmenting paths (Bellman-Ford handles the negative
  // costs a welfare objective produces). Returns total cost of the flow sent.
  double solve(int s, int t, double required) {
    const double inf = std::numeric_limits<double>::infinity();
    double total = 0.0, sent = 0.0;
    const std::size_t n = adj_.size();
    while (required - sent > 1e-12 * std::max(1.0, required)) {
      std::vector<double> dist(n, inf);
      std::vector<int> prev_node(n, -1), prev_edge(n, -1);
      dist[static_cast<std::size_t>(s)] = 0.0;
      for (std::size_t round = 0; round + 1 < n; ++round) {
        bool changed = false;
        for (std::size_t u = 0; u < n; ++u) {
          if (dist[u] == inf) continue;
          for (std::size_t e = 0; e < adj_[u].size(); ++e) {
            const FlowEdge& ed = adj_[u][e];
            if (ed.cap <= 0.0) continue;
            const double nd = dist[u] + ed.cost;
            const std::size_t v = static_cast<std::size_t>(ed.to);
            if (nd < dist[v] - 1e-15) {
              dist[v] = nd;
              prev_node[v] = static_cast<int>(u);
              prev_edge[v] = static_cast<int>(e);
              changed = true;
            }
          }
        }
        if (!changed) break;
      }
      if (dist[static_cast<std::size_t>(t)] == inf)
        throw NumericError("exact_matching_oracle: infeasible transportation instance");
      double push = required - sent;
      for (int v = t; v != s; v = prev_node[static_cast<std::size_t>(v)]) {
        const int u = prev_node[static_cast<std::size_t>(v)];
        push = std::min(push,
                        adj_[static_cast<std::size_t>(u)][static_cast<std::size_t>(
                                                              prev_edge[static_cast<std::size_t>(v)])]
                            .cap);
      }
      for (int v = t; v != s; v = prev_node[static_cast<std::size_t>(v)]) {
        const int u = prev_node[static_cast<std::size_t>(v)];
        FlowEdge& ed =
            adj_[static_cast<std::size_t>(u)][static_cast<std::size_t>(prev_edge[static_cast<std::size_t>(v)])];
        ed.cap -= push;
        adj_[static_cast<std::size_t>(v)][static_cast<std::size_t>(ed.rev)].cap += push;
        total += push * ed.cost;
      }
      sent += push;
    }
    return total;
  }

  double flow_on(int u, std::size_t edge_index) const {
    // Residual capacity of the reverse edge equals the flow pushed forward.
    const FlowEdge& ed = adj_[static_cast<std::size_t>(u)][edge_index];
    return adj_[static_cast<std::size_t>(ed.to)][static_cast<std::size_t>(ed.rev)].cap;
  }

 private:
  std::vector<std::vector<FlowEdge>> adj_;
};

}  // namespace

MatchingResult exact_matching_oracle(const Tensor& cost, const std::vector<double>& a,
                                     const std::vector<double>& b) {
  if (cost.rank() != 2) throw ShapeError("exact_matching_oracle: cost must be rank 2");
  const std::size_t rows = cost.dim(0), cols = cost.dim(1);
  if (rows + cols > 16)
    throw Error("exact_matching_oracle: instance too large (rows + cols > 16)");
  if (a.size() != rows || b.size() != cols)
    throw ShapeError("exact_matching_oracle: marginal sizes do not match cost");
  double sum_a = 0.0, sum_b = 0.0;
  for (double v : a) sum_a += v;
  for (double v : b) sum_b += v;
  if (std::abs(sum_a - sum_b) > 1e-9 * std::max(1.0, std::abs(sum_a)))
    throw NumericError("exact_matching_oracle: unbalanced marginals");

  // Node layout: source, rows, cols, sink.
  const int s = 0, t = static_cast<int>(rows + cols) + 1;
  MinCostFlow mcf(static_cast<int>(rows + cols) + 2);
  for (std::size_t i = 0; i < rows; ++i) mcf.add_edge(s, static_cast<int>(i) + 1, a[i], 0.0);
  // Row->col edges are added in a fixed order so they can be read back below.
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      mcf.add_edge(static_cast<int>(i) + 1, static_cast<int>(rows + j) + 1, sum_a,
                   cost.at(i, j));
  for (std::size_t j = 0; j < cols; ++j)
    mcf.add_edge(static_cast<int>(rows + j) + 1, t, b[j], 0.0);

  MatchingResult res;
  res.cost = mcf.solve(s, t, sum_a);
  res.plan = Tensor({rows, cols});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      // Edge j+1 within row node i+1 (edge 0 is the reverse arc from source).
      res.plan.at(i, j) = mcf.flow_on(static_cast<int>(i) + 1, j + 1);
  return res;
}

}  // namespace am
