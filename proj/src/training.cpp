#include "auctionmatch/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>

#include "auctionmatch/errors.hpp"
#include "auctionmatch/graph.hpp"
#include "parallel.hpp"

namespace am {

namespace {

// (B, m) view of bidder i's own row across a (B, n, m) batch.
Tensor bidder_rows(const Tensor& profiles, std::size_t bidder) {
  const std::size_t batch = profiles.dim(0), n = profiles.dim(1), m = profiles.dim(2);
  Tensor out({batch, m});
  for (std::size_t b = 0; b < batch; ++b)
    std::memcpy(out.data() + b * m, profiles.data() + (b * n + bidder) * m,
                m * sizeof(double));
  return out;
}

void clip_unit(Tensor& t) {
  for (double& x : t.values()) x = std::min(1.0, std::max(0.0, x));
}

}  // namespace

Tensor sample_valuations(std::size_t count, std::size_t n, std::size_t m, Rng& rng) {
  Tensor out({count, n, m});
  for (double& v : out.values()) v = rng.uniform();
  return out;
}

NeuralTarget::NeuralTarget(const MechanismParams* params, int threads)
    : params_(params), threads_(threads) {}

std::size_t NeuralTarget::agents() const { return params_->demand.n; }
std::size_t NeuralTarget::items() const { return params_->demand.m; }

void NeuralTarget::utilities(const Tensor& truth, std::size_t bidder, const Tensor& reports,
                             std::vector<double>& u_out, Tensor* grad_out) const {
  const std::size_t batch = truth.dim(0), n = params_->demand.n, m = params_->demand.m;
  if (truth.rank() != 3 || truth.dim(1) != n || truth.dim(2) != m)
    throw ShapeError("utilities: truth must be (B, agents, items), got " + truth.shape_str());
  if (reports.rank() != 2 || reports.dim(0) != batch || reports.dim(1) != m)
    throw ShapeError("utilities: reports must be (B, items), got " + reports.shape_str());
  if (bidder >= n) throw ShapeError("utilities: bidder index out of range");

  u_out.assign(batch, 0.0);
  if (grad_out) *grad_out = Tensor({batch, m});

  parallel_chunks(batch, kChunkRows, threads_, [&](std::size_t, std::size_t lo, std::size_t hi) {
    const std::size_t rows = hi - lo;
    const Tensor truth_c = slice_front(truth, lo, hi);
    const Tensor reports_c = slice_front(reports, lo, hi);
    if (!grad_out) {
      const MechanismOutput fwd =
          mechanism_forward(*params_, splice_row(truth_c, reports_c, bidder));
      // Same kernel composition as the taped branch below so both evaluation
      // modes agree bitwise (a hand-rolled dot product may contract to FMA).
      const Tensor spend = sum_last(mul(block_last2(fwd.allocation, bidder, 0, 1, m),
                                        block_last2(truth_c, bidder, 0, 1, m)));
      for (std::size_t b = 0; b < rows; ++b)
        u_out[lo + b] = spend[b] - fwd.payments[b * n + bidder];
      return;
    }
    Graph g;
    const MechanismVars mv = stage_mechanism(g, *params_, /*trainable=*/false);
    const Var truth_v = g.constant(truth_c);
    const Var reports_v = g.input(reports_c);
    const MechanismOutputVars fwd =
        mechanism_forward(g, mv, *params_, splice_row(truth_v, reports_v, bidder));
    const Var spend =
        sum_last(mul(block_last2(fwd.allocation, bidder, 0, 1, m),
                     block_last2(truth_v, bidder, 0, 1, m)));           // (rows, 1)
    const Var u = sub(spend, block_last2(fwd.payments, 0, bidder, rows, 1));
    g.backward(sum_all(u));
    const Tensor& uv = u.value();
    for (std::size_t b = 0; b < rows; ++b) u_out[lo + b] = uv[b];
    const Tensor& gv = g.grad(reports_v.id);
    std::memcpy(grad_out->data() + lo * m, gv.data(), rows * m * sizeof(double));
  });
}

AscentResult misreport_ascent(const MisreportTarget& target, const Tensor& truth,
                              int steps, double lr, const std::vector<Tensor>* init,
                              const Tensor* truthful_u) {
  const std::size_t n = target.agents(), m = target.items();
  if (truth.rank() != 3 || truth.dim(1) != n || truth.dim(2) != m)
    throw ShapeError("misreport_ascent: truth must be (B, agents, items), got " +
                     truth.shape_str());
  if (init && init->size() != n)
    throw ShapeError("misreport_ascent: init needs one report tensor per bidder");
  const std::size_t batch = truth.dim(0);

  AscentResult res;
  res.best_u = Tensor::full({batch, n}, -std::numeric_limits<double>::infinity());
  res.truthful_u = Tensor({batch, n});
  res.regrets = Tensor({batch, n});
  res.best_reports.reserve(n);

  std::vector<double> u;
  Tensor grad;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor reports = init ? (*init)[i] : bidder_rows(truth, i);
    Tensor best = reports;
    double* best_u = res.best_u.data();
    auto credit = [&](const std::vector<double>& vals) {
      for (std::size_t b = 0; b < batch; ++b)
        if (vals[b] > best_u[b * n + i]) {
          best_u[b * n + i] = vals[b];
          std::memcpy(best.data() + b * m, reports.data() + b * m, m * sizeof(double));
        }
    };
    for (int step = 0; step < steps; ++step) {
      target.utilities(truth, i, reports, u, &grad);
      if (step == 0 && !init && !truthful_u)
        for (std::size_t b = 0; b < batch; ++b) res.truthful_u[b * n + i] = u[b];
      credit(u);
      for (std::size_t x = 0; x < batch * m; ++x) reports[x] += lr * grad[x];
      clip_unit(reports);
    }
    target.utilities(truth, i, reports, u, nullptr);
    credit(u);
    if (truthful_u) {
      for (std::size_t b = 0; b < batch; ++b)
        res.truthful_u[b * n + i] = (*truthful_u)[b * n + i];
    } else if (init || steps == 0) {
      target.utilities(truth, i, bidder_rows(truth, i), u, nullptr);
      for (std::size_t b = 0; b < batch; ++b) res.truthful_u[b * n + i] = u[b];
    }
    for (std::size_t b = 0; b < batch; ++b)
      res.regrets[b * n + i] =
          std::max(0.0, res.best_u[b * n + i] - res.truthful_u[b * n + i]);
    res.best_reports.push_back(std::move(best));
  }
  return res;
}

double lagrangian_loss(const Tensor& payments, const Tensor& regrets,
                       const std::vector<double>& lambda, double rho) {
  if (payments.rank() != 2 || regrets.rank() != 2 || payments.dim(0) != regrets.dim(0) ||
      payments.dim(1) != regrets.dim(1))
    throw ShapeError("lagrangian_loss: payments and regrets must both be (B, agents)");
  const std::size_t batch = payments.dim(0), n = payments.dim(1);
  if (lambda.size() != n)
    throw ShapeError("lagrangian_loss: one multiplier per bidder required");
  double loss = 0.0;
  for (std::size_t x = 0; x < batch * n; ++x) loss -= payments[x];
  loss /= static_cast<double>(batch);
  for (std::size_t i = 0; i < n; ++i) {
    double rbar = 0.0;
    for (std::size_t b = 0; b < batch; ++b) rbar += regrets[b * n + i];
    rbar /= static_cast<double>(batch);
    loss += lambda[i] * rbar + 0.5 * rho * rbar * rbar;
  }
  return loss;
}

TrainState train(MechanismParams& params, const TrainConfig& cfg,
                 const EpochCallback& callback) {
  const std::size_t n = params.demand.n, m = params.demand.m;
  if (cfg.batch_size == 0 || cfg.epochs == 0)
    throw ConfigError("train: batch_size and epochs must be positive");
  if (cfg.train_size < cfg.batch_size || cfg.train_size % cfg.batch_size != 0)
    throw ConfigError("train: train_size must be a positive multiple of batch_size");
  if (cfg.misreport_steps < 0 || cfg.lr <= 0.0 || cfg.misreport_lr <= 0.0)
    throw ConfigError("train: learning rates must be positive, steps nonnegative");
  if (cfg.rho_period == 0 || cfg.lambda_period == 0)
    throw ConfigError("train: schedule periods must be positive");

  Rng data_rng = substream(cfg.seed, rng_stream::train_data);
  const Tensor data = sample_valuations(cfg.train_size, n, m, data_rng);
  const std::size_t nbatches = cfg.train_size / cfg.batch_size;
  const std::size_t batch = cfg.batch_size;
  const std::size_t nchunks = (batch + kChunkRows - 1) / kChunkRows;

  TrainState st;
  st.lambda.assign(n, cfg.lambda_init);
  st.rho = cfg.rho_init;
  st.adam = make_adam_state(param_refs(params));

  const NeuralTarget target(&params, cfg.threads);
  const std::vector<Tensor*> prefs = param_refs(params);
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;

  std::vector<std::vector<Tensor>> chunk_grads(nchunks);
  std::vector<double> chunk_rev(nchunks);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double rev_sum = 0.0, rgt_sum = 0.0;
    for (std::size_t bi = 0; bi < nbatches; ++bi) {
      const Tensor truth = slice_front(data, bi * batch, (bi + 1) * batch);
      const AscentResult asc =
          misreport_ascent(target, truth, cfg.misreport_steps, cfg.misreport_lr);

      // Per-bidder batch-mean regret; fixed for the rest of the batch so the
      // chunked gradient matches the full-batch mean-then-square objective.
      std::vector<double> rbar(n, 0.0), coeff(n);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < n; ++i) rbar[i] += asc.regrets[b * n + i];
      for (std::size_t i = 0; i < n; ++i) {
        rbar[i] /= static_cast<double>(batch);
        coeff[i] = st.lambda[i] + st.rho * rbar[i];
      }

      parallel_chunks(batch, kChunkRows, cfg.threads,
                      [&](std::size_t c, std::size_t lo, std::size_t hi) {
        const std::size_t rows = hi - lo;
        Graph g;
        const MechanismVars mv = stage_mechanism(g, params, /*trainable=*/true);
        const Var truth_v = g.constant(slice_front(truth, lo, hi));
        const MechanismOutputVars fwd = mechanism_forward(g, mv, params, truth_v);
        const Var u_truth = sub(sum_last(mul(fwd.allocation, truth_v)), fwd.payments);
        const Var pay_sum = sum_all(fwd.payments);
        Var loss = scale(pay_sum, -1.0 / static_cast<double>(batch));
        for (std::size_t i = 0; i < n; ++i) {
          const Var rep = g.constant(slice_front(asc.best_reports[i], lo, hi));
          const MechanismOutputVars dev =
              mechanism_forward(g, mv, params, splice_row(truth_v, rep, i));
          const Var u_dev = sub(sum_last(mul(block_last2(dev.allocation, i, 0, 1, m),
                                             block_last2(truth_v, i, 0, 1, m))),
                                block_last2(dev.payments, 0, i, rows, 1));
          const Var gap = sub(u_dev, block_last2(u_truth, 0, i, rows, 1));
          const Var rgt = maximum(gap, g.constant(Tensor({rows, 1})));
          loss = add(loss, scale(sum_all(rgt), coeff[i] / static_cast<double>(batch)));
        }
        g.backward(loss);
        chunk_rev[c] = pay_sum.value()[0];
        const std::vector<Var> vr = var_refs(mv);
        chunk_grads[c].clear();
        chunk_grads[c].reserve(vr.size());
        for (const Var& v : vr) chunk_grads[c].push_back(g.grad(v.id));
      });

      std::vector<Tensor> grads = std::move(chunk_grads[0]);
      double batch_rev = chunk_rev[0];
      for (std::size_t c = 1; c < nchunks; ++c) {
        batch_rev += chunk_rev[c];
        for (std::size_t p = 0; p < grads.size(); ++p) {
          double* acc = grads[p].data();
          const Tensor& add_g = chunk_grads[c][p];
          for (std::size_t x = 0; x < add_g.numel(); ++x) acc[x] += add_g[x];
        }
      }
      std::vector<const Tensor*> grefs;
      grefs.reserve(grads.size());
      for (const Tensor& t : grads) grefs.push_back(&t);
      adam_step(prefs, grefs, st.adam, adam_cfg);

      ++st.batches_done;
      if (st.batches_done % cfg.rho_period == 0) st.rho += cfg.rho_increment;
      if (st.batches_done % cfg.lambda_period == 0)
        for (std::size_t i = 0; i < n; ++i) st.lambda[i] += st.rho * rbar[i];

      rev_sum += batch_rev / static_cast<double>(batch);
      double rmean = 0.0;
      for (std::size_t i = 0; i < n; ++i) rmean += rbar[i];
      rgt_sum += rmean / static_cast<double>(n);
    }

    if (callback) {
      EpochMetrics em;
      em.epoch = epoch;
      em.revenue_mean = rev_sum / static_cast<double>(nbatches);
      em.regret_mean = rgt_sum / static_cast<double>(nbatches);
      em.rho = st.rho;
      double lmean = 0.0;
      for (double l : st.lambda) lmean += l;
      em.lambda_mean = lmean / static_cast<double>(n);
      em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      callback(em, params, st);
    }
  }
  return st;
}

}  // namespace am
