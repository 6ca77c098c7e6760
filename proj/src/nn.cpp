#include "auctionmatch/nn.hpp"

#include <cmath>
#include <string>

#include "auctionmatch/errors.hpp"

namespace am {

Mlp make_mlp(const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw Error("make_mlp: need at least input and output dims");
  Mlp net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w({fan_in, fan_out});
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Tensor({fan_out}));
  }
  return net;
}

Tensor mlp_forward(const Mlp& net, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != net.in_dim())
    throw ShapeError("mlp_forward: input " + x.shape_str() + " does not match net");
  Tensor h = x;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    Tensor z = matmul(h, net.weights[l]);
    // Broadcast the bias over the batch.
    const std::size_t batch = z.dim(0), out = z.dim(1);
    double* pz = z.data();
    const double* pb = net.biases[l].data();
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < out; ++j) pz[i * out + j] += pb[j];
    h = (l + 1 < net.layers()) ? vtanh(z) : std::move(z);
  }
  return h;
}

MlpVars stage_mlp(Graph& g, const Mlp& net, bool trainable) {
  MlpVars vars;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    vars.weights.push_back(trainable ? g.input(net.weights[l]) : g.constant(net.weights[l]));
    vars.biases.push_back(trainable ? g.input(net.biases[l]) : g.constant(net.biases[l]));
  }
  return vars;
}

Var mlp_forward(Graph& g, const MlpVars& net, Var x) {
  (void)g;
  Var h = x;
  const std::size_t layers = net.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t batch = h.value().dim(0);
    Var z = matmul(h, net.weights[l]);
    Var brow = transpose_last2(expand_last(net.biases[l], batch));  // (batch, out)
    z = add(z, brow);
    h = (l + 1 < layers) ? vtanh(z) : z;
  }
  return h;
}

AdamState make_adam_state(const std::vector<Tensor*>& params) {
  AdamState st;
  for (const Tensor* p : params) {
    st.m.push_back(Tensor(p->shape()));
    st.v.push_back(Tensor(p->shape()));
  }
  return st;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw Error("adam_step: parameter/gradient/state count mismatch");
  state.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& x = *params[p];
    const Tensor& g = *grads[p];
    if (!x.same_shape(g))
      throw ShapeError("adam_step: gradient shape " + g.shape_str() + " vs param " +
                       x.shape_str());
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double gi = g[i];
      if (!std::isfinite(gi))
        throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(p) +
                           " at flat index " + std::to_string(i));
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      x[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace am
