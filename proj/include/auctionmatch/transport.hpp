#ifndef AUCTIONMATCH_TRANSPORT_HPP
#define AUCTIONMATCH_TRANSPORT_HPP

#include <cstddef>
#include <vector>

#include "auctionmatch/graph.hpp"
#include "auctionmatch/tensor.hpp"

namespace am {

enum class DemandKind {
  k_demand,   // each agent takes at most k items
  exactly_k,  // each agent takes exactly k items
};

struct DemandSpec {
  DemandKind kind = DemandKind::k_demand;
  std::size_t n = 1;  // agents
  std::size_t m = 1;  // items
  std::size_t k = 1;
};

// Row masses a (n+1 entries, dummy agent last) and column masses b (m+1,
// dummy item last) of the extended matching polytope. Total mass balances by
// construction.
struct Marginals {
  std::vector<double> a;
  std::vector<double> b;
};

// Throws InfeasibleSpecError for exactly-k with m < k*n; validates n,m,k >= 1.
Marginals build_marginals(const DemandSpec& spec);

// Epsilon schedule from eps_start down to eps_final in `steps` values
// (inclusive of both ends).
enum class ScheduleKind { geometric, arithmetic };
std::vector<double> make_schedule(double eps_start, double eps_final, std::size_t steps,
                                  ScheduleKind kind);

struct SinkhornOptions {
  std::vector<double> schedule;  // must be non-empty, positive, non-increasing
  double tol = 0.01;             // relative row-marginal violation threshold
  int max_iter = 200;            // per-epsilon iteration cap
  // When positive, runs exactly this many update pairs per epsilon stage with
  // no convergence exit. Gives finite-difference tests a fixed unroll.
  int fixed_iters = 0;
};

// Result of a solve. For the batched forms `plan` is (B, n+1, m+1) and the
// potentials are (B, n+1) / (B, m+1); the single-instance form drops the
// batch axis. `iterations` counts update pairs summed over schedule stages
// (max over the batch); `violation` is the final row-marginal violation (max
// over batch and rows).
struct TransportPlan {
  Tensor plan;
  Tensor f;
  Tensor g;
  double eps_final = 0.0;
  int iterations = 0;
  double violation = 0.0;
};

// Same fields with graph handles; values live on the tape.
struct TransportPlanVars {
  Var plan;
  Var f;
  Var g;
  double eps_final = 0.0;
  int iterations = 0;
  double violation = 0.0;
};

// Non-differentiable solve (plain tensors). cost is (n+1, m+1) with the dummy
// row/column already appended.
TransportPlan sinkhorn_solve(const Tensor& cost, const Marginals& marg,
                             const SinkhornOptions& opt);
// Differentiable solve recorded on g; gradients flow to whatever cost was
// built from.
TransportPlanVars sinkhorn_solve(Graph& g, Var cost, const Marginals& marg,
                                 const SinkhornOptions& opt);

// Batched solves over a (B, n+1, m+1) stack of cost matrices sharing one set
// of marginals. Each batch element converges against the stopping rule
// independently: once an element's rows are within tol its potentials freeze,
// so results are identical to solving it alone.
TransportPlan sinkhorn_solve_batch(const Tensor& cost3, const Marginals& marg,
                                   const SinkhornOptions& opt);
TransportPlanVars sinkhorn_solve_batch(Graph& g, Var cost3, const Marginals& marg,
                                       const SinkhornOptions& opt);

// P[i,j] = exp((f[i] + g[j] - C[i,j]) / eps) for a single (R, C) instance.
Tensor plan_from_potentials(const Tensor& f, const Tensor& g, const Tensor& cost, double eps);

// <P, C> + eps * sum P log P, with 0 log 0 = 0. Diagnostic; not differentiated.
double entropic_objective(const Tensor& plan, const Tensor& cost, double eps);

// Exact minimum-cost transportation plan for small instances (rows + cols of
// the given cost matrix <= 16), solved as min-cost flow by successive
// shortest paths. Marginal vectors must match the cost shape and balance.
struct MatchingResult {
  Tensor plan;
  double cost = 0.0;
};
MatchingResult exact_matching_oracle(const Tensor& cost, const std::vector<double>& a,
                                     const std::vector<double>& b);

}  // namespace am

#endif
