#ifndef AUCTIONMATCH_TRAINING_HPP
#define AUCTIONMATCH_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "auctionmatch/mechanism.hpp"
#include "auctionmatch/nn.hpp"
#include "auctionmatch/rng.hpp"
#include "auctionmatch/tensor.hpp"

namespace am {

// (count, n, m) profiles with every valuation drawn i.i.d. uniform on [0,1).
Tensor sample_valuations(std::size_t count, std::size_t n, std::size_t m, Rng& rng);

// Anything a bidder can probe for the utility of a deviating report. truth is
// (B, n, m); reports is (B, m) of bidder's claimed values while everyone else
// stays truthful. Fills u_out (size B) and, when grad_out is non-null, the
// (B, m) gradient of utility w.r.t. the report entries.
class MisreportTarget {
 public:
  virtual ~MisreportTarget() = default;
  virtual std::size_t agents() const = 0;
  virtual std::size_t items() const = 0;
  virtual void utilities(const Tensor& truth, std::size_t bidder, const Tensor& reports,
                         std::vector<double>& u_out, Tensor* grad_out) const = 0;
};

// Learned mechanism as an ascent target. Batches are processed in fixed
// kChunkRows chunks so results do not depend on the thread count.
class NeuralTarget : public MisreportTarget {
 public:
  NeuralTarget(const MechanismParams* params, int threads = 1);
  std::size_t agents() const override;
  std::size_t items() const override;
  void utilities(const Tensor& truth, std::size_t bidder, const Tensor& reports,
                 std::vector<double>& u_out, Tensor* grad_out) const override;

 private:
  const MechanismParams* params_;
  int threads_;
};

struct AscentResult {
  std::vector<Tensor> best_reports;  // per bidder, (B, m)
  Tensor best_u;                     // (B, n) utility of the best deviation found
  Tensor truthful_u;                 // (B, n)
  Tensor regrets;                    // (B, n) = max(0, best_u - truthful_u)
};

// Projected gradient ascent on each bidder's report, one bidder at a time.
// Starts from `init` when given (per-bidder (B, m) tensors), otherwise from
// the truthful report. Tracks the best utility over all iterates, clips
// reports to [0,1] after each step. Pass truthful_u to skip recomputing it.
AscentResult misreport_ascent(const MisreportTarget& target, const Tensor& truth,
                              int steps, double lr,
                              const std::vector<Tensor>* init = nullptr,
                              const Tensor* truthful_u = nullptr);

// Sample value of the augmented Lagrangian
//   -mean(payments) + sum_i lambda_i * rbar_i + (rho/2) * sum_i rbar_i^2
// where rbar_i is bidder i's regret averaged over the batch. payments and
// regrets are (B, n).
double lagrangian_loss(const Tensor& payments, const Tensor& regrets,
                       const std::vector<double>& lambda, double rho);

struct TrainConfig {
  std::size_t train_size = 1u << 19;
  std::size_t batch_size = 4096;
  std::size_t epochs = 100;
  double lr = 1e-3;
  int misreport_steps = 25;
  double misreport_lr = 0.1;
  double lambda_init = 5.0;
  double rho_init = 1.0;
  double rho_increment = 1.0;
  std::size_t rho_period = 2;      // batches between rho increments
  std::size_t lambda_period = 100; // batches between lambda updates
  std::uint64_t seed = 0;
  int threads = 1;
};

struct TrainState {
  std::vector<double> lambda;  // one multiplier per bidder
  double rho = 0.0;
  std::size_t batches_done = 0;
  AdamState adam;
};

struct EpochMetrics {
  std::size_t epoch = 0;        // 1-based
  double revenue_mean = 0.0;    // mean over the epoch's batches
  double regret_mean = 0.0;     // mean over batches of mean_i rbar_i
  double rho = 0.0;
  double lambda_mean = 0.0;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochMetrics&, const MechanismParams&,
                                         const TrainState&)>;

// Gradient-based training against the sampled valuation distribution.
// Mutates params in place; returns the final optimizer/multiplier state.
// The callback (optional) fires after every epoch.
TrainState train(MechanismParams& params, const TrainConfig& cfg,
                 const EpochCallback& callback = nullptr);

}  // namespace am

#endif
