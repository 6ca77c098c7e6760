#include "auctionmatch/auctionmatch.h"

#include <cstring>
#include <new>
#include <string>

#include "auctionmatch/checkpoint.hpp"
#include "auctionmatch/config.hpp"
#include "auctionmatch/errors.hpp"
#include "auctionmatch/mechanism.hpp"
#include "auctionmatch/runner.hpp"
#include "auctionmatch/version.hpp"

struct am_config {
  am::Config cfg;
};

struct am_mechanism {
  am::Config cfg;
  am::MechanismParams params;
  am::TrainState state;
};

namespace {

thread_local std::string t_error;

template <class Fn>
am_status guard(Fn&& fn) {
  try {
    fn();
    return AM_OK;
  } catch (const am::ConfigError& e) {
    t_error = e.what();
    return AM_ERR_CONFIG;
  } catch (const am::CheckpointError& e) {
    t_error = e.what();
    return AM_ERR_CONFIG;
  } catch (const am::InfeasibleSpecError& e) {
    t_error = e.what();
    return AM_ERR_INFEASIBLE;
  } catch (const am::NumericError& e) {
    t_error = e.what();
    return AM_ERR_NUMERIC;
  } catch (const am::IoError& e) {
    t_error = e.what();
    return AM_ERR_IO;
  } catch (const std::exception& e) {
    t_error = e.what();
    return AM_ERR_INVALID;
  }
}

am_status invalid(const char* what) {
  t_error = what;
  return AM_ERR_INVALID;
}

char* copy_string(const std::string& s) {
  char* out = new (std::nothrow) char[s.size() + 1];
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

am::TrainState fresh_state(const am::Config& cfg, const am::MechanismParams& params) {
  am::TrainState st;
  st.lambda.assign(params.demand.n, cfg.lambda_init);
  st.rho = cfg.rho_init;
  return st;
}

}  // namespace

extern "C" {

const char* am_version(void) { return am::kVersion; }

const char* am_last_error(void) { return t_error.c_str(); }

am_status am_config_create(am_config** out) {
  if (!out) return invalid("am_config_create: out is NULL");
  return guard([&] { *out = new am_config{}; });
}

am_status am_config_load(const char* path, am_config** out) {
  if (!path || !out) return invalid("am_config_load: NULL argument");
  return guard([&] { *out = new am_config{am::load_config_file(path)}; });
}

am_status am_config_set(am_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return invalid("am_config_set: NULL argument");
  return guard([&] { am::apply_override(cfg->cfg, key, value); });
}

am_status am_config_get(const am_config* cfg, const char* key, char* buf, size_t buflen) {
  if (!cfg || !key || !buf) return invalid("am_config_get: NULL argument");
  return guard([&] {
    const std::string text = am::serialize_config(cfg->cfg);
    const std::string needle = std::string(key) + " = ";
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      const std::string line = text.substr(pos, end - pos);
      if (line.compare(0, needle.size(), needle) == 0) {
        const std::string value = line.substr(needle.size());
        if (value.size() + 1 > buflen)
          throw am::ConfigError("am_config_get: buffer too small for value of " +
                                std::string(key));
        std::memcpy(buf, value.c_str(), value.size() + 1);
        return;
      }
      pos = end + 1;
    }
    throw am::ConfigError("config: unknown key '" + std::string(key) + "'");
  });
}

void am_config_free(am_config* cfg) { delete cfg; }

am_status am_mechanism_create(const am_config* cfg, am_mechanism** out) {
  if (!cfg || !out) return invalid("am_mechanism_create: NULL argument");
  return guard([&] {
    const am::Config& c = cfg->cfg;
    am::MechanismParams params = am::make_mechanism(
        am::demand_spec(c), am::sinkhorn_options(c), c.hidden, c.seed);
    *out = new am_mechanism{c, std::move(params), {}};
    (*out)->state = fresh_state(c, (*out)->params);
  });
}

am_status am_mechanism_load(const char* path, am_mechanism** out) {
  if (!path || !out) return invalid("am_mechanism_load: NULL argument");
  return guard([&] {
    am::Checkpoint ck = am::load_checkpoint(path);
    *out = new am_mechanism{std::move(ck.config), std::move(ck.params),
                            std::move(ck.state)};
  });
}

am_status am_mechanism_save(const am_mechanism* mech, const char* path) {
  if (!mech || !path) return invalid("am_mechanism_save: NULL argument");
  return guard([&] { am::save_checkpoint(path, mech->cfg, mech->params, mech->state); });
}

am_status am_mechanism_set(am_mechanism* mech, const char* key, const char* value) {
  if (!mech || !key || !value) return invalid("am_mechanism_set: NULL argument");
  const std::string k = key;
  if (k.rfind("auction.", 0) == 0 || k == "net.hidden") {
    t_error = "am_mechanism_set: '" + k + "' is fixed by the trained mechanism";
    return AM_ERR_CONFIG;
  }
  return guard([&] {
    am::apply_override(mech->cfg, key, value);
    // Temperature knobs feed the live transport layer, not just the config.
    mech->params.sinkhorn = am::sinkhorn_options(mech->cfg);
  });
}

void am_mechanism_free(am_mechanism* mech) { delete mech; }

am_status am_train(am_mechanism* mech, const char* metrics_csv_path,
                   const char* checkpoint_path) {
  if (!mech) return invalid("am_train: mech is NULL");
  return guard([&] {
    mech->state = am::run_training(mech->params, mech->cfg,
                                   metrics_csv_path ? metrics_csv_path : "",
                                   checkpoint_path ? checkpoint_path : "");
  });
}

am_status am_evaluate(const am_mechanism* mech, char** json_out) {
  if (!mech || !json_out) return invalid("am_evaluate: NULL argument");
  return guard([&] {
    *json_out = copy_string(am::eval_report_json(mech->params, mech->cfg));
    if (!*json_out) throw std::bad_alloc();
  });
}

am_status am_baseline(const am_config* cfg, char** json_out) {
  if (!cfg || !json_out) return invalid("am_baseline: NULL argument");
  return guard([&] {
    *json_out = copy_string(am::baseline_json(cfg->cfg));
    if (!*json_out) throw std::bad_alloc();
  });
}

am_status am_heatmap(const am_mechanism* mech, size_t resolution, double eps,
                     char** csv_out) {
  if (!mech || !csv_out) return invalid("am_heatmap: NULL argument");
  return guard([&] {
    const std::size_t res = resolution ? resolution : mech->cfg.heatmap_resolution;
    const double e = eps > 0.0 ? eps : mech->cfg.heatmap_eps;
    *csv_out = copy_string(am::heatmap_csv(mech->params, mech->cfg, res, e));
    if (!*csv_out) throw std::bad_alloc();
  });
}

void am_string_free(char* s) { delete[] s; }

am_status am_mechanism_run(const am_mechanism* mech, const double* bids,
                           double* alloc_out, double* pay_out) {
  if (!mech || !bids || !alloc_out || !pay_out)
    return invalid("am_mechanism_run: NULL argument");
  return guard([&] {
    const std::size_t n = mech->params.demand.n, m = mech->params.demand.m;
    am::Tensor b({1, n, m});
    std::memcpy(b.data(), bids, n * m * sizeof(double));
    const am::MechanismOutput out = am::mechanism_forward(mech->params, b);
    std::memcpy(alloc_out, out.allocation.data(), n * m * sizeof(double));
    std::memcpy(pay_out, out.payments.data(), n * sizeof(double));
  });
}

}  // extern "C"
