#include "auctionmatch/runner.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "auctionmatch/errors.hpp"
#include "auctionmatch/evaluation.hpp"

namespace am {

namespace {

nlohmann::json setting_json(const Config& cfg) {
  return nlohmann::json{{"agents", cfg.agents},
                        {"items", cfg.items},
                        {"demand", cfg.demand},
                        {"k", cfg.k}};
}

nlohmann::json finite_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

}  // namespace

TrainState run_training(MechanismParams& params, const Config& cfg,
                        const std::string& metrics_path,
                        const std::string& checkpoint_path) {
  std::ofstream metrics;
  if (!metrics_path.empty()) {
    metrics.open(metrics_path, std::ios::trunc);
    if (!metrics) throw IoError("train: cannot write metrics to " + metrics_path);
    metrics << "epoch,revenue,regret,rho,lambda,seconds\n" << std::setprecision(10);
  }

  const EpochCallback cb = [&](const EpochMetrics& em, const MechanismParams& p,
                               const TrainState& st) {
    if (metrics.is_open()) {
      metrics << em.epoch << ',' << em.revenue_mean << ',' << em.regret_mean << ','
              << em.rho << ',' << em.lambda_mean << ',' << em.seconds << '\n';
      metrics.flush();
    }
    if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, cfg, p, st);
  };
  return train(params, train_config(cfg), cb);
}

std::string eval_report_json(const MechanismParams& params, const Config& cfg) {
  const EvalReport rep = evaluate(params, eval_config(cfg));
  nlohmann::json j;
  j["setting"] = {{"agents", rep.agents},
                  {"items", rep.items},
                  {"demand", rep.demand},
                  {"k", rep.k}};
  j["test_size"] = rep.test_size;
  j["seed"] = cfg.seed;
  j["revenue"] = {{"mean", rep.revenue_mean}, {"std", rep.revenue_std}};
  j["regret"] = {{"mean", rep.regret_mean},
                 {"std", rep.regret_std},
                 {"max", rep.regret_max},
                 {"per_agent", rep.regret_per_agent}};
  j["ir_violation_max"] = rep.ir_violation_max;
  j["demand_violation_max"] = rep.demand_violation_max;
  j["supply_violation_max"] = rep.supply_violation_max;
  j["sinkhorn_iterations"] = rep.sinkhorn_iterations;
  j["baselines"] = {{"vcg_revenue", finite_or_null(rep.vcg_revenue)},
                    {"analytic_revenue", finite_or_null(rep.analytic_revenue)}};
  j["misreport"] = {{"iters", cfg.eval_misreport_iters},
                    {"restarts", cfg.eval_misreport_restarts},
                    {"lr", cfg.eval_misreport_lr}};
  return j.dump(2) + "\n";
}

std::string baseline_json(const Config& cfg) {
  const DemandSpec demand = demand_spec(cfg);
  const std::size_t n = demand.n, m = demand.m;
  const std::size_t samples = cfg.test_size;
  if (samples == 0) throw ConfigError("baseline: eval.size must be positive");

  Rng rng = substream(cfg.seed, rng_stream::test_data);
  const Tensor truth = sample_valuations(samples, n, m, rng);

  nlohmann::json j;
  j["setting"] = setting_json(cfg);
  j["samples"] = samples;
  j["seed"] = cfg.seed;

  if (demand.k == 1) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t b = 0; b < samples; ++b) {
      const Tensor profile = reshape(slice_front(truth, b, b + 1), {n, m});
      const VcgOutcome v = demand.kind == DemandKind::exactly_k ? vcg_exactly_one(profile)
                                                                : vcg_unit_demand(profile);
      double r = 0.0;
      for (double p : v.payments) r += p;
      sum += r;
      sq += r * r;
    }
    const double mean = sum / static_cast<double>(samples);
    j["vcg"] = {{"revenue_mean", mean},
                {"revenue_std",
                 std::sqrt(std::max(0.0, sq / static_cast<double>(samples) - mean * mean))}};
  } else {
    j["vcg"] = nullptr;
  }

  if (n == 1 && m == 2 && demand.k == 1) {
    double sum = 0.0, sq = 0.0;
    Tensor alloc;
    double pay = 0.0;
    for (std::size_t b = 0; b < samples; ++b) {
      const Tensor profile = reshape(slice_front(truth, b, b + 1), {2});
      if (demand.kind == DemandKind::exactly_k)
        analytic_exactly_one_optimal(profile, alloc, pay);
      else
        analytic_unit_demand_optimal(profile, alloc, pay);
      sum += pay;
      sq += pay * pay;
    }
    const double mean = sum / static_cast<double>(samples);
    j["analytic"] = {{"revenue_mean", mean},
                     {"revenue_std",
                      std::sqrt(std::max(0.0, sq / static_cast<double>(samples) - mean * mean))}};
  } else {
    j["analytic"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string heatmap_csv(const MechanismParams& params, const Config& cfg,
                        std::size_t resolution, double eps) {
  SinkhornOptions opts = params.sinkhorn;
  if (eps > 0.0) {
    opts = sinkhorn_options(cfg);
    opts.schedule = make_schedule(cfg.eps_start, eps, cfg.eps_steps,
                                  cfg.schedule == "arithmetic" ? ScheduleKind::arithmetic
                                                               : ScheduleKind::geometric);
  }
  const HeatmapGrid grid = heatmap_grid(params, resolution, eps > 0.0 ? &opts : nullptr);

  std::ostringstream out;
  out << std::setprecision(10);
  {
    std::istringstream echo(serialize_config(cfg));
    std::string line;
    while (std::getline(echo, line)) out << "# " << line << "\n";
  }
  out << "# eps_used = " << (eps > 0.0 ? eps : params.sinkhorn.schedule.back()) << "\n";
  out << "v1,v2,alloc1,alloc2,payment\n";
  const std::size_t res = grid.resolution;
  for (std::size_t i1 = 0; i1 < res; ++i1)
    for (std::size_t i2 = 0; i2 < res; ++i2) {
      const std::size_t cell = i1 * res + i2;
      out << grid.coords[i1] << ',' << grid.coords[i2] << ',' << grid.alloc[cell * 2]
          << ',' << grid.alloc[cell * 2 + 1] << ',' << grid.payment[cell] << "\n";
    }
  return out.str();
}

}  // namespace am
