// Command line front end. Talks to the library exclusively through the C API
// so it doubles as a smoke test of the shared-library surface.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "auctionmatch/auctionmatch.h"

namespace {

int status_to_exit(am_status s) {
  switch (s) {
    case AM_OK:
      return 0;
    case AM_ERR_INFEASIBLE:
      return 3;
    case AM_ERR_NUMERIC:
      return 4;
    default:
      return 2;  // config, io, and usage problems
  }
}

int fail(am_status s) {
  std::fprintf(stderr, "error: %s\n", am_last_error());
  return status_to_exit(s);
}

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string seed;
  std::string threads;
};

void add_common(CLI::App* sub, Common& c, bool with_config) {
  if (with_config)
    sub->add_option("--config", c.config_path, "config file (key = value lines)");
  sub->add_option("--set", c.sets, "override one key, e.g. --set train.epochs=5")
      ->take_all();
  sub->add_option("--seed", c.seed, "experiment seed (overrides config)");
  sub->add_option("--threads", c.threads, "worker threads (overrides config)");
}

// Splits a --set argument at its first '='.
am_status apply_set(am_config* cfg, const std::string& kv) {
  const std::size_t eq = kv.find('=');
  if (eq == std::string::npos) {
    std::fprintf(stderr, "error: --set needs key=value, got '%s'\n", kv.c_str());
    return AM_ERR_CONFIG;
  }
  return am_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
}

am_status build_config(const Common& c, am_config** out) {
  am_status s = c.config_path.empty() ? am_config_create(out)
                                      : am_config_load(c.config_path.c_str(), out);
  if (s != AM_OK) return s;
  for (const std::string& kv : c.sets)
    if ((s = apply_set(*out, kv)) != AM_OK) return s;
  if (!c.seed.empty() && (s = am_config_set(*out, "seed", c.seed.c_str())) != AM_OK)
    return s;
  if (!c.threads.empty() && (s = am_config_set(*out, "threads", c.threads.c_str())) != AM_OK)
    return s;
  return AM_OK;
}

am_status apply_mechanism_overrides(am_mechanism* mech, const Common& c) {
  am_status s = AM_OK;
  for (const std::string& kv : c.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set needs key=value, got '%s'\n", kv.c_str());
      return AM_ERR_CONFIG;
    }
    s = am_mechanism_set(mech, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != AM_OK) return s;
  }
  if (!c.seed.empty() && (s = am_mechanism_set(mech, "seed", c.seed.c_str())) != AM_OK)
    return s;
  if (!c.threads.empty() &&
      (s = am_mechanism_set(mech, "threads", c.threads.c_str())) != AM_OK)
    return s;
  return AM_OK;
}

int emit(const char* text, const std::string& out_path) {
  if (out_path.empty()) {
    std::fputs(text, stdout);
    return 0;
  }
  std::FILE* f = std::fopen(out_path.c_str(), "wb");
  if (!f || std::fputs(text, f) == EOF || std::fclose(f) != 0) {
    if (f) std::fclose(f);
    std::fprintf(stderr, "error: cannot write %s\n", out_path.c_str());
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradient-trained matching auctions (Sinkhorn allocation layer)"};
  app.set_version_flag("--version", am_version());
  app.require_subcommand(1);

  Common ct, ce, cb, ch;
  std::string train_out = ".";
  std::string ckpt_path, out_path;
  std::size_t resolution = 0;
  double eps = 0.0;

  CLI::App* train = app.add_subcommand("train", "train a mechanism, writing metrics.csv and model.ckpt");
  add_common(train, ct, true);
  train->add_option("--out", train_out, "output directory (created if missing)");

  CLI::App* eval = app.add_subcommand("evaluate", "test-set report for a trained checkpoint (JSON)");
  add_common(eval, ce, false);
  eval->add_option("--checkpoint", ckpt_path, "trained model path")->required();
  eval->add_option("--out", out_path, "write the report here instead of stdout");

  CLI::App* base = app.add_subcommand("baseline", "VCG / analytic Monte Carlo baselines (JSON)");
  add_common(base, cb, true);
  base->add_option("--out", out_path, "write the report here instead of stdout");

  CLI::App* heat = app.add_subcommand("heatmap", "allocation grid of a 1-bidder 2-item mechanism (CSV)");
  add_common(heat, ch, false);
  heat->add_option("--checkpoint", ckpt_path, "trained model path")->required();
  heat->add_option("--resolution", resolution, "grid points per axis (default: config)");
  heat->add_option("--eps", eps, "probe at this final epsilon (default: config)");
  heat->add_option("--out", out_path, "write the grid here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (app.got_subcommand(train)) {
    am_config* cfg = nullptr;
    am_status s = build_config(ct, &cfg);
    if (s != AM_OK) return fail(s);
    am_mechanism* mech = nullptr;
    s = am_mechanism_create(cfg, &mech);
    am_config_free(cfg);
    if (s != AM_OK) return fail(s);

    std::error_code ec;
    std::filesystem::create_directories(train_out, ec);
    if (ec) {
      std::fprintf(stderr, "error: cannot create %s\n", train_out.c_str());
      am_mechanism_free(mech);
      return 2;
    }
    const std::string metrics = train_out + "/metrics.csv";
    const std::string ckpt = train_out + "/model.ckpt";
    s = am_train(mech, metrics.c_str(), ckpt.c_str());
    am_mechanism_free(mech);
    if (s != AM_OK) return fail(s);
    std::printf("trained; metrics at %s, checkpoint at %s\n", metrics.c_str(), ckpt.c_str());
    return 0;
  }

  if (app.got_subcommand(eval)) {
    am_mechanism* mech = nullptr;
    am_status s = am_mechanism_load(ckpt_path.c_str(), &mech);
    if (s != AM_OK) return fail(s);
    if ((s = apply_mechanism_overrides(mech, ce)) != AM_OK) {
      am_mechanism_free(mech);
      return fail(s);
    }
    char* json = nullptr;
    s = am_evaluate(mech, &json);
    am_mechanism_free(mech);
    if (s != AM_OK) return fail(s);
    const int rc = emit(json, out_path);
    am_string_free(json);
    return rc;
  }

  if (app.got_subcommand(base)) {
    am_config* cfg = nullptr;
    am_status s = build_config(cb, &cfg);
    if (s != AM_OK) return fail(s);
    char* json = nullptr;
    s = am_baseline(cfg, &json);
    am_config_free(cfg);
    if (s != AM_OK) return fail(s);
    const int rc = emit(json, out_path);
    am_string_free(json);
    return rc;
  }

  // heatmap
  am_mechanism* mech = nullptr;
  am_status s = am_mechanism_load(ckpt_path.c_str(), &mech);
  if (s != AM_OK) return fail(s);
  if ((s = apply_mechanism_overrides(mech, ch)) != AM_OK) {
    am_mechanism_free(mech);
    return fail(s);
  }
  char* csv = nullptr;
  s = am_heatmap(mech, resolution, eps, &csv);
  am_mechanism_free(mech);
  if (s != AM_OK) return fail(s);
  const int rc = emit(csv, out_path);
  am_string_free(csv);
  return rc;
}
