#include <cmath>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"

#include "auctionmatch/errors.hpp"
#include "auctionmatch/graph.hpp"
#include "auctionmatch/nn.hpp"
#include "auctionmatch/rng.hpp"

using am::Graph;
using am::Mlp;
using am::Tensor;
using am::Var;

TEST_CASE("make_mlp shapes, zero biases, and Glorot bounds") {
  am::Rng rng(42);
  const Mlp net = am::make_mlp({6, 16, 16, 4}, rng);
  REQUIRE(net.layers() == 3);
  CHECK(net.in_dim() == 6);
  CHECK(net.out_dim() == 4);
  REQUIRE(net.weights[0].dim(0) == 6);
  REQUIRE(net.weights[0].dim(1) == 16);
  REQUIRE(net.weights[2].dim(0) == 16);
  REQUIRE(net.weights[2].dim(1) == 4);

  for (const Tensor& b : net.biases)
    for (double v : b.values()) CHECK(v == 0.0);

  for (std::size_t l = 0; l < net.layers(); ++l) {
    const double fan_in = static_cast<double>(net.weights[l].dim(0));
    const double fan_out = static_cast<double>(net.weights[l].dim(1));
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    double max_abs = 0.0;
    for (double v : net.weights[l].values()) max_abs = std::max(max_abs, std::abs(v));
    CHECK(max_abs <= bound);
    CHECK(max_abs > 0.25 * bound);  // not degenerate
  }

  // Same seed, same weights; different seed, different weights.
  am::Rng rng2(42);
  const Mlp net2 = am::make_mlp({6, 16, 16, 4}, rng2);
  CHECK(net2.weights[1].values() == net.weights[1].values());
  am::Rng rng3(43);
  const Mlp net3 = am::make_mlp({6, 16, 16, 4}, rng3);
  CHECK(net3.weights[1].values() != net.weights[1].values());
}

TEST_CASE("forward matches a hand-computed single hidden layer") {
  // 2 -> 2 -> 1, fixed weights: h = tanh(x W1 + b1), y = h W2 + b2
  Mlp net;
  net.weights = {Tensor({2, 2}, {0.5, -0.25, 0.75, 1.0}), Tensor({2, 1}, {2.0, -1.0})};
  net.biases = {Tensor({2}, {0.1, -0.2}), Tensor({1}, {0.05})};

  const Tensor x({1, 2}, {0.4, -0.6});
  const Tensor y = am::mlp_forward(net, x);
  const double h0 = std::tanh(0.4 * 0.5 + (-0.6) * 0.75 + 0.1);
  const double h1 = std::tanh(0.4 * -0.25 + (-0.6) * 1.0 - 0.2);
  const double expect = h0 * 2.0 + h1 * -1.0 + 0.05;
  REQUIRE(y.numel() == 1);
  CHECK(y[0] == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("tape forward reproduces the eager forward bitwise") {
  am::Rng rng(5);
  const Mlp net = am::make_mlp({4, 8, 3}, rng);
  Tensor x({5, 4});
  for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);

  const Tensor eager = am::mlp_forward(net, x);

  Graph g;
  const am::MlpVars vars = am::stage_mlp(g, net, /*trainable=*/true);
  const Tensor taped = am::mlp_forward(g, vars, g.constant(x)).value();
  REQUIRE(taped.same_shape(eager));
  for (std::size_t i = 0; i < eager.numel(); ++i) CHECK(taped[i] == eager[i]);
}

TEST_CASE("non-trainable staging yields a constant network") {
  am::Rng rng(6);
  const Mlp net = am::make_mlp({3, 4, 2}, rng);
  Graph g;
  const am::MlpVars vars = am::stage_mlp(g, net, /*trainable=*/false);
  Tensor x({2, 3});
  for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
  const Var y = am::sum_all(am::mlp_forward(g, vars, g.constant(x)));
  CHECK_THROWS_AS(g.backward(y), am::Error);
}

TEST_CASE("weight gradients agree with finite differences") {
  am::Rng rng(9);
  const Mlp net = am::make_mlp({3, 6, 2}, rng);
  Tensor x({4, 3});
  for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
  Tensor w({4, 2});
  for (double& v : w.values()) v = rng.uniform(0.5, 1.5);

  // Analytic gradients for every parameter tensor in one backward.
  Graph g;
  const am::MlpVars vars = am::stage_mlp(g, net, /*trainable=*/true);
  g.backward(am::sum_all(am::mul(am::mlp_forward(g, vars, g.constant(x)), g.constant(w))));

  // FD probe per parameter tensor: perturb a copy of the network.
  const auto loss_with = [&](const Mlp& probe) {
    const Tensor y = am::mlp_forward(probe, x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += y[i] * w[i];
    return s;
  };
  for (std::size_t l = 0; l < net.layers(); ++l) {
    for (int which = 0; which < 2; ++which) {
      Mlp probe = net;
      Tensor& target = which == 0 ? probe.weights[l] : probe.biases[l];
      const Tensor analytic =
          which == 0 ? g.grad(vars.weights[l].id) : g.grad(vars.biases[l].id);
      const auto f = [&](const Tensor& t) {
        target = t;
        return loss_with(probe);
      };
      const auto r = amtest::compare_gradients(f, target, analytic);
      INFO("layer ", l, (which == 0 ? " weights" : " biases"), " worst ", r.worst);
      CHECK(r.worst <= 1e-6);
    }
  }
}

namespace {

// Straight transcription of bias-corrected Adam, kept deliberately separate
// from the library implementation.
struct RefAdam {
  std::vector<double> m, v;
  long long t = 0;
  void step(std::vector<double>& x, const std::vector<double>& g, double lr, double b1,
            double b2, double eps) {
    if (m.empty()) {
      m.assign(x.size(), 0.0);
      v.assign(x.size(), 0.0);
    }
    ++t;
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / (1.0 - std::pow(b1, static_cast<double>(t)));
      const double vhat = v[i] / (1.0 - std::pow(b2, static_cast<double>(t)));
      x[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
};

}  // namespace

TEST_CASE("adam_step tracks an independent reference trace") {
  // Two parameter tensors of different shapes, driven by the gradient of
  // f(x) = 0.5 * sum((x - target)^2), i.e. grad = x - target.
  Tensor a({2, 2}, {1.0, -2.0, 3.0, 0.5});
  Tensor b({3}, {-1.0, 4.0, 0.0});
  const std::vector<double> ta = {0.2, 0.4, -0.6, 1.0};
  const std::vector<double> tb = {1.5, -0.5, 0.25};

  std::vector<double> ra = a.values(), rb = b.values();
  RefAdam ref_a, ref_b;

  am::AdamState st = am::make_adam_state({&a, &b});
  am::AdamConfig cfg;
  cfg.lr = 0.05;

  for (int it = 0; it < 25; ++it) {
    Tensor ga({2, 2}), gb({3});
    std::vector<double> rga(4), rgb(3);
    for (std::size_t i = 0; i < 4; ++i) rga[i] = ga[i] = a[i] - ta[i];
    for (std::size_t i = 0; i < 3; ++i) rgb[i] = gb[i] = b[i] - tb[i];
    am::adam_step({&a, &b}, {&ga, &gb}, st, cfg);
    // reference uses its own copies
    for (std::size_t i = 0; i < 4; ++i) rga[i] = ra[i] - ta[i];
    for (std::size_t i = 0; i < 3; ++i) rgb[i] = rb[i] - tb[i];
    ref_a.step(ra, rga, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    ref_b.step(rb, rgb, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(ra[i]).epsilon(1e-12));
  for (std::size_t i = 0; i < 3; ++i) CHECK(b[i] == doctest::Approx(rb[i]).epsilon(1e-12));
  CHECK(st.t == 25);

  // And it actually optimizes. Adam moves each coordinate by at most ~lr per
  // step, so 25 steps can close at most ~1.25 per coordinate of the initial
  // distance of 7.3.
  double d = 0.0;
  for (std::size_t i = 0; i < 4; ++i) d += std::abs(a[i] - ta[i]);
  CHECK(d < 4.5);
}

TEST_CASE("first adam step is -lr * g / (|g| + eps)") {
  Tensor x({2}, {1.0, -3.0});
  Tensor g({2}, {0.5, -2.0});
  am::AdamState st = am::make_adam_state({&x});
  am::AdamConfig cfg;
  am::adam_step({&x}, {&g}, st, cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    const double expect =
        (i == 0 ? 1.0 : -3.0) - cfg.lr * g[i] / (std::abs(g[i]) + cfg.eps);
    CHECK(x[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("adam_step rejects non-finite gradients") {
  Tensor x({2}, {1.0, 2.0});
  Tensor g({2}, {0.1, std::nan("")});
  am::AdamState st = am::make_adam_state({&x});
  am::AdamConfig cfg;
  CHECK_THROWS_AS(am::adam_step({&x}, {&g}, st, cfg), am::NumericError);
}
