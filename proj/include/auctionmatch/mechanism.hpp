#ifndef AUCTIONMATCH_MECHANISM_HPP
#define AUCTIONMATCH_MECHANISM_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "auctionmatch/graph.hpp"
#include "auctionmatch/nn.hpp"
#include "auctionmatch/tensor.hpp"
#include "auctionmatch/transport.hpp"

namespace am {

// Learned auction: alloc_net maps a flattened bid profile to a cost matrix
// fed through the matching layer; pay_net maps the same bids to per-agent
// payment fractions in (0,1). Payments scale each agent's reported value for
// its allocation, which keeps truthful participation individually rational.
struct MechanismParams {
  DemandSpec demand;
  SinkhornOptions sinkhorn;
  Mlp alloc_net;  // n*m -> hidden... -> n*m
  Mlp pay_net;    // n*m -> hidden... -> n
};

MechanismParams make_mechanism(const DemandSpec& demand, const SinkhornOptions& sinkhorn,
                               const std::vector<std::size_t>& hidden_dims,
                               std::uint64_t seed);

// Canonical parameter order (alloc layers then pay layers, weight before
// bias). Checkpointing, Adam state, and gradient collection all follow it.
std::vector<Tensor*> param_refs(MechanismParams& params);
std::vector<const Tensor*> param_refs(const MechanismParams& params);

// Eager batch forward. bids is (B, n, m) with entries in [0, 1].
struct MechanismOutput {
  Tensor allocation;  // (B, n, m)
  Tensor payments;    // (B, n)
  Tensor pay_frac;    // (B, n), sigmoid output of pay_net
  int sinkhorn_iterations = 0;
};
MechanismOutput mechanism_forward(const MechanismParams& params, const Tensor& bids);

// Tape forward. Staged nets can be shared by several forwards on one graph
// (truthful pass plus one misreport pass per agent); gradients accumulate.
struct MechanismVars {
  MlpVars alloc_net;
  MlpVars pay_net;
};
MechanismVars stage_mechanism(Graph& g, const MechanismParams& params, bool trainable);

// Staged leaves in the same order as param_refs, for pairing values with
// gradients during optimization.
std::vector<Var> var_refs(const MechanismVars& vars);

struct MechanismOutputVars {
  Var allocation;
  Var payments;
  Var pay_frac;
  int sinkhorn_iterations = 0;
};
MechanismOutputVars mechanism_forward(Graph& g, const MechanismVars& vars,
                                      const MechanismParams& params, Var bids);

// Single-profile conveniences; bids is (n, m).
Tensor allocate(const MechanismParams& params, const Tensor& bids);
std::vector<double> payments(const MechanismParams& params, const Tensor& bids);

// Utility of each agent given true values, an allocation, and payments:
// u_i = <values_i, alloc_i> - pay_i. All per single profile.
std::vector<double> utility(const Tensor& values, const Tensor& allocation,
                            const std::vector<double>& pay);

// Sum of payments averaged over a (B, n) payment batch.
double revenue(const Tensor& pay_batch);

// u_i(report) - u_i(truthful) for one agent's deviation; can be negative.
double regret_of_misreport(const MechanismParams& params, const Tensor& values,
                           std::size_t bidder, const Tensor& report);

// Comparison allocation head used by additive-score baselines: element-wise
// minimum of a row-softmax over items-plus-pass and a column-softmax over
// agents-plus-pass, truncated to the real (n, m) block.
Tensor regretnet_unit_head(const Tensor& row_scores, const Tensor& col_scores);
Var regretnet_unit_head(Var row_scores, Var col_scores);

// Fixed row count processed per tape to bound graph memory; batches are cut
// into chunks of this many profiles. Results do not depend on the cut.
constexpr std::size_t kChunkRows = 256;

}  // namespace am

#endif
