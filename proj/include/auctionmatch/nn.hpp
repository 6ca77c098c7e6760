#ifndef AUCTIONMATCH_NN_HPP
#define AUCTIONMATCH_NN_HPP

#include <cstddef>
#include <vector>

#include "auctionmatch/graph.hpp"
#include "auctionmatch/rng.hpp"
#include "auctionmatch/tensor.hpp"

namespace am {

// Fully connected net with tanh hidden activations and an affine output
// layer. Activation on the output (if any) is applied by the caller.
struct Mlp {
  std::vector<Tensor> weights;  // layer l: (dims[l], dims[l+1])
  std::vector<Tensor> biases;   // layer l: (dims[l+1])

  std::size_t layers() const { return weights.size(); }
  std::size_t in_dim() const { return weights.front().dim(0); }
  std::size_t out_dim() const { return weights.back().dim(1); }
};

// Glorot-uniform weights (+/- sqrt(6/(fan_in+fan_out))), zero biases.
Mlp make_mlp(const std::vector<std::size_t>& dims, Rng& rng);

// Eager forward for a batch x of shape (B, in_dim) -> (B, out_dim).
Tensor mlp_forward(const Mlp& net, const Tensor& x);

// Tape forward. Weights are staged onto the graph once (trainable leaves or
// constants) and may be reused across several forward calls on that graph;
// gradient contributions accumulate.
struct MlpVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
};

MlpVars stage_mlp(Graph& g, const Mlp& net, bool trainable);
Var mlp_forward(Graph& g, const MlpVars& net, Var x);

// Adam with bias correction. Step t uses
//   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2,
//   x <- x - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps).
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long long t = 0;
};

AdamState make_adam_state(const std::vector<Tensor*>& params);

// Applies one update in place. Throws NumericError on non-finite gradients.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const AdamConfig& cfg);

}  // namespace am

#endif
