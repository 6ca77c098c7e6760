#include "auctionmatch/mechanism.hpp"

#include <cmath>
#include <string>

#include "auctionmatch/errors.hpp"

namespace am {

namespace {

void check_bids(const MechanismParams& params, const Tensor& bids, std::size_t expect_rank) {
  const std::size_t n = params.demand.n, m = params.demand.m;
  const bool ok = bids.rank() == expect_rank &&
                  bids.dim(expect_rank - 2) == n && bids.dim(expect_rank - 1) == m;
  if (!ok)
    throw ShapeError("mechanism: bids " + bids.shape_str() + " do not match " +
                     std::to_string(n) + " agents x " + std::to_string(m) + " items");
}

}  // namespace

MechanismParams make_mechanism(const DemandSpec& demand, const SinkhornOptions& sinkhorn,
                               const std::vector<std::size_t>& hidden_dims,
                               std::uint64_t seed) {
  build_marginals(demand);  // validates feasibility up front
  MechanismParams params;
  params.demand = demand;
  params.sinkhorn = sinkhorn;
  const std::size_t nm = demand.n * demand.m;
  std::vector<std::size_t> alloc_dims{nm};
  alloc_dims.insert(alloc_dims.end(), hidden_dims.begin(), hidden_dims.end());
  alloc_dims.push_back(nm);
  std::vector<std::size_t> pay_dims{nm};
  pay_dims.insert(pay_dims.end(), hidden_dims.begin(), hidden_dims.end());
  pay_dims.push_back(demand.n);
  Rng rng_alloc = substream(seed, rng_stream::init_alloc_net);
  Rng rng_pay = substream(seed, rng_stream::init_pay_net);
  params.alloc_net = make_mlp(alloc_dims, rng_alloc);
  params.pay_net = make_mlp(pay_dims, rng_pay);
  return params;
}

std::vector<Tensor*> param_refs(MechanismParams& params) {
  std::vector<Tensor*> refs;
  for (Mlp* net : {&params.alloc_net, &params.pay_net})
    for (std::size_t l = 0; l < net->layers(); ++l) {
      refs.push_back(&net->weights[l]);
      refs.push_back(&net->biases[l]);
    }
  return refs;
}

std::vector<const Tensor*> param_refs(const MechanismParams& params) {
  std::vector<const Tensor*> refs;
  for (const Mlp* net : {&params.alloc_net, &params.pay_net})
    for (std::size_t l = 0; l < net->layers(); ++l) {
      refs.push_back(&net->weights[l]);
      refs.push_back(&net->biases[l]);
    }
  return refs;
}

MechanismOutput mechanism_forward(const MechanismParams& params, const Tensor& bids) {
  check_bids(params, bids, 3);
  const std::size_t batch = bids.dim(0), n = params.demand.n, m = params.demand.m;
  const Tensor flat = reshape(bids, {batch, n * m});
  const Tensor cost = pad_last2(reshape(mlp_forward(params.alloc_net, flat), {batch, n, m}),
                                1, 1);
  const Marginals marg = build_marginals(params.demand);
  TransportPlan plan = sinkhorn_solve_batch(cost, marg, params.sinkhorn);

  MechanismOutput out;
  out.allocation = block_last2(plan.plan, 0, 0, n, m);
  out.pay_frac = sigmoid(mlp_forward(params.pay_net, flat));
  out.payments = mul(sum_last(mul(bids, out.allocation)), out.pay_frac);
  out.sinkhorn_iterations = plan.iterations;
  return out;
}

MechanismVars stage_mechanism(Graph& g, const MechanismParams& params, bool trainable) {
  return MechanismVars{stage_mlp(g, params.alloc_net, trainable),
                       stage_mlp(g, params.pay_net, trainable)};
}

std::vector<Var> var_refs(const MechanismVars& vars) {
  std::vector<Var> refs;
  for (const MlpVars* net : {&vars.alloc_net, &vars.pay_net})
    for (std::size_t l = 0; l < net->weights.size(); ++l) {
      refs.push_back(net->weights[l]);
      refs.push_back(net->biases[l]);
    }
  return refs;
}

MechanismOutputVars mechanism_forward(Graph& g, const MechanismVars& vars,
                                      const MechanismParams& params, Var bids) {
  check_bids(params, bids.value(), 3);
  const std::size_t batch = bids.value().dim(0), n = params.demand.n, m = params.demand.m;
  Var flat = reshape(bids, {batch, n * m});
  Var cost = pad_last2(reshape(mlp_forward(g, vars.alloc_net, flat), {batch, n, m}), 1, 1);
  const Marginals marg = build_marginals(params.demand);
  TransportPlanVars plan = sinkhorn_solve_batch(g, cost, marg, params.sinkhorn);

  MechanismOutputVars out;
  out.allocation = block_last2(plan.plan, 0, 0, n, m);
  out.pay_frac = sigmoid(mlp_forward(g, vars.pay_net, flat));
  out.payments = mul(sum_last(mul(bids, out.allocation)), out.pay_frac);
  out.sinkhorn_iterations = plan.iterations;
  return out;
}

Tensor allocate(const MechanismParams& params, const Tensor& bids) {
  check_bids(params, bids, 2);
  const std::size_t n = params.demand.n, m = params.demand.m;
  MechanismOutput out = mechanism_forward(params, reshape(bids, {1, n, m}));
  return reshape(out.allocation, {n, m});
}

std::vector<double> payments(const MechanismParams& params, const Tensor& bids) {
  check_bids(params, bids, 2);
  const std::size_t n = params.demand.n, m = params.demand.m;
  MechanismOutput out = mechanism_forward(params, reshape(bids, {1, n, m}));
  return out.payments.values();
}

std::vector<double> utility(const Tensor& values, const Tensor& allocation,
                            const std::vector<double>& pay) {
  if (!values.same_shape(allocation) || values.rank() != 2)
    throw ShapeError("utility: values and allocation must be matching (n, m) tensors");
  const std::size_t n = values.dim(0), m = values.dim(1);
  if (pay.size() != n) throw ShapeError("utility: payment count does not match agents");
  std::vector<double> u(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += values.at(i, j) * allocation.at(i, j);
    u[i] = s - pay[i];
  }
  return u;
}

double revenue(const Tensor& pay_batch) {
  if (pay_batch.rank() != 2) throw ShapeError("revenue: payments must be (B, n)");
  const std::size_t batch = pay_batch.dim(0);
  double total = 0.0;
  for (std::size_t i = 0; i < pay_batch.numel(); ++i) total += pay_batch[i];
  return total / static_cast<double>(batch);
}

double regret_of_misreport(const MechanismParams& params, const Tensor& values,
                           std::size_t bidder, const Tensor& report) {
  check_bids(params, values, 2);
  if (bidder >= params.demand.n) throw ShapeError("regret_of_misreport: bidder out of range");
  if (report.rank() != 1 || report.dim(0) != params.demand.m)
    throw ShapeError("regret_of_misreport: report must have one entry per item");

  MechanismOutput truthful = mechanism_forward(
      params, reshape(values, {1, params.demand.n, params.demand.m}));
  Tensor deviated = values;
  for (std::size_t j = 0; j < params.demand.m; ++j) deviated.at(bidder, j) = report[j];
  MechanismOutput dev = mechanism_forward(
      params, reshape(deviated, {1, params.demand.n, params.demand.m}));

  auto agent_utility = [&](const MechanismOutput& o) {
    double s = 0.0;
    for (std::size_t j = 0; j < params.demand.m; ++j)
      s += values.at(bidder, j) * o.allocation[bidder * params.demand.m + j];
    return s - o.payments[bidder];
  };
  return agent_utility(dev) - agent_utility(truthful);
}

Tensor regretnet_unit_head(const Tensor& row_scores, const Tensor& col_scores) {
  if (row_scores.rank() != 2 || col_scores.rank() != 2 || row_scores.dim(0) + 1 != col_scores.dim(0) ||
      col_scores.dim(1) + 1 != row_scores.dim(1))
    throw ShapeError("regretnet_unit_head: expected (n, m+1) and (n+1, m) score matrices");
  const std::size_t n = row_scores.dim(0), m = col_scores.dim(1);
  return minimum(block_last2(softmax(row_scores, 1), 0, 0, n, m),
                 block_last2(softmax(col_scores, 0), 0, 0, n, m));
}

Var regretnet_unit_head(Var row_scores, Var col_scores) {
  const Tensor& rs = row_scores.value();
  const Tensor& cs = col_scores.value();
  if (rs.rank() != 2 || cs.rank() != 2 || rs.dim(0) + 1 != cs.dim(0) ||
      cs.dim(1) + 1 != rs.dim(1))
    throw ShapeError("regretnet_unit_head: expected (n, m+1) and (n+1, m) score matrices");
  const std::size_t n = rs.dim(0), m = cs.dim(1);
  return minimum(block_last2(softmax(row_scores, 1), 0, 0, n, m),
                 block_last2(softmax(col_scores, 0), 0, 0, n, m));
}

}  // namespace am
