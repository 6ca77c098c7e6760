#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "auctionmatch/auctionmatch.h"
#include "auctionmatch/checkpoint.hpp"
#include "auctionmatch/config.hpp"
#include "auctionmatch/errors.hpp"
#include "auctionmatch/mechanism.hpp"
#include "auctionmatch/version.hpp"

namespace fs = std::filesystem;
using am::Config;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "auctionmatch_io_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  REQUIRE(f.good());
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Tiny but complete experiment; fast enough for process-level tests.
const char* kTinyConfig =
    "# desk-size experiment\n"
    "auction.agents = 1\n"
    "auction.items = 2\n"
    "auction.demand = k_demand\n"
    "auction.k = 1\n"
    "net.hidden = 4\n"
    "sinkhorn.eps_start = 1.0\n"
    "sinkhorn.eps_final = 0.3\n"
    "sinkhorn.eps_steps = 3\n"
    "train.size = 64\n"
    "train.batch = 32\n"
    "train.epochs = 1\n"
    "train.misreport_steps = 2\n"
    "eval.size = 8\n"
    "eval.misreport_iters = 2\n"
    "eval.misreport_restarts = 1\n"
    "heatmap.resolution = 4\n"
    "seed = 11\n";

int run_cli(const std::string& args, const fs::path& stdout_to = {}) {
  std::string cmd = std::string(AM_CLI_PATH) + " " + args;
  cmd += stdout_to.empty() ? " >/dev/null 2>&1" : " >" + stdout_to.string() + " 2>/dev/null";
  const int raw = std::system(cmd.c_str());
  REQUIRE(raw != -1);
  REQUIRE(WIFEXITED(raw));
  return WEXITSTATUS(raw);
}

}  // namespace

TEST_CASE("config text parsing, overrides, and canonical serialization") {
  const Config cfg = am::parse_config_text(kTinyConfig);
  CHECK(cfg.agents == 1);
  CHECK(cfg.items == 2);
  CHECK(cfg.demand == "k_demand");
  CHECK(cfg.hidden == std::vector<std::size_t>{4});
  CHECK(cfg.eps_final == 0.3);
  CHECK(cfg.eps_steps == 3);
  CHECK(cfg.train_size == 64);
  CHECK(cfg.epochs == 1);
  CHECK(cfg.test_size == 8);
  CHECK(cfg.heatmap_resolution == 4);
  CHECK(cfg.seed == 11);
  // untouched keys keep their defaults
  CHECK(cfg.lr == 1e-3);
  CHECK(cfg.lambda_init == 5.0);

  // canonical form round-trips exactly
  const std::string s1 = am::serialize_config(cfg);
  const std::string s2 = am::serialize_config(am::parse_config_text(s1));
  CHECK(s1 == s2);

  Config o = cfg;
  am::apply_override(o, "net.hidden", "64,32");
  CHECK(o.hidden == std::vector<std::size_t>{64, 32});
  am::apply_override(o, "auction.demand", "exactly_k");
  CHECK(o.demand == "exactly_k");
  am::apply_override(o, "train.lr", "0.005");
  CHECK(o.lr == 0.005);

  CHECK_THROWS_AS(am::apply_override(o, "auction.demands", "exactly_k"), am::ConfigError);
  CHECK_THROWS_AS(am::apply_override(o, "auction.items", "two"), am::ConfigError);
  CHECK_THROWS_AS(am::apply_override(o, "auction.demand", "both"), am::ConfigError);
  CHECK_THROWS_AS(am::parse_config_text("auction.items 3\n"), am::ConfigError);
  CHECK_THROWS_AS(am::parse_config_text("auction.items = 3\nwhat = ever\n"),
                  am::ConfigError);
  CHECK_THROWS_AS(am::load_config_file((scratch_dir() / "missing.cfg").string()),
                  am::IoError);
}

TEST_CASE("typed views of the flat config") {
  Config cfg = am::parse_config_text(kTinyConfig);
  const am::DemandSpec d = am::demand_spec(cfg);
  CHECK(d.kind == am::DemandKind::k_demand);
  CHECK(d.n == 1);
  CHECK(d.m == 2);
  CHECK(d.k == 1);

  const am::SinkhornOptions s = am::sinkhorn_options(cfg);
  REQUIRE(s.schedule.size() == 3);
  CHECK(s.schedule.front() == 1.0);
  CHECK(s.schedule.back() == 0.3);
  CHECK(s.tol == cfg.tol);
  CHECK(s.max_iter == cfg.max_iter);

  const am::TrainConfig t = am::train_config(cfg);
  CHECK(t.train_size == 64);
  CHECK(t.batch_size == 32);
  CHECK(t.epochs == 1);
  CHECK(t.misreport_steps == 2);
  CHECK(t.seed == 11);

  const am::EvalConfig e = am::eval_config(cfg);
  CHECK(e.test_size == 8);
  CHECK(e.misreport_iters == 2);
  CHECK(e.misreport_restarts == 1);
  CHECK(e.seed == 11);

  cfg.schedule = "arithmetic";
  const am::SinkhornOptions s2 = am::sinkhorn_options(cfg);
  CHECK(s2.schedule[1] == doctest::Approx(0.65).epsilon(1e-12));
  cfg.schedule = "melodic";
  CHECK_THROWS_AS(am::sinkhorn_options(cfg), am::ConfigError);
}

TEST_CASE("checkpoints round-trip weights and optimizer-free state exactly") {
  const Config cfg = am::parse_config_text(kTinyConfig);
  am::MechanismParams params = am::make_mechanism(
      am::demand_spec(cfg), am::sinkhorn_options(cfg), cfg.hidden, cfg.seed);
  am::TrainState state;
  state.lambda = {3.25};
  state.rho = 7.5;
  state.batches_done = 42;

  const fs::path path = scratch_dir() / "round_trip.ckpt";
  am::save_checkpoint(path.string(), cfg, params, state);
  const am::Checkpoint loaded = am::load_checkpoint(path.string());

  CHECK(am::serialize_config(loaded.config) == am::serialize_config(cfg));
  CHECK(loaded.state.lambda == state.lambda);
  CHECK(loaded.state.rho == state.rho);
  CHECK(loaded.state.batches_done == 42);
  const auto a = am::param_refs(params);
  const auto b = am::param_refs(loaded.params);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i]->same_shape(*b[i]));
    for (std::size_t j = 0; j < a[i]->numel(); ++j) CHECK((*a[i])[j] == (*b[i])[j]);
  }
  // demand and solver options survive through the embedded config
  CHECK(loaded.params.demand.m == 2);
  CHECK(loaded.params.sinkhorn.schedule == params.sinkhorn.schedule);
}

TEST_CASE("checkpoint corruption is classified") {
  const Config cfg = am::parse_config_text(kTinyConfig);
  am::MechanismParams params = am::make_mechanism(
      am::demand_spec(cfg), am::sinkhorn_options(cfg), cfg.hidden, cfg.seed);
  am::TrainState state;
  state.lambda = {5.0};
  state.rho = 1.0;

  const fs::path good = scratch_dir() / "good.ckpt";
  am::save_checkpoint(good.string(), cfg, params, state);
  const std::string bytes = read_file(good);

  const auto expect_kind = [&](const std::string& data, am::CheckpointError::Kind kind) {
    const fs::path p = scratch_dir() / "tampered.ckpt";
    write_file(p, data);
    try {
      am::load_checkpoint(p.string());
      FAIL("expected CheckpointError");
    } catch (const am::CheckpointError& e) {
      CHECK(e.kind() == kind);
    }
  };

  // foreign magic
  std::string wrong_magic = bytes;
  wrong_magic[0] = 'x';
  expect_kind(wrong_magic, am::CheckpointError::Kind::version_mismatch);

  // short payload
  expect_kind(bytes.substr(0, bytes.size() - 5), am::CheckpointError::Kind::truncated);

  // trailing garbage
  expect_kind(bytes + std::string(8, '\0'), am::CheckpointError::Kind::shape_mismatch);

  // config disagrees with the stored payload size
  std::string resized = bytes;
  const std::size_t at = resized.find("auction.items = 2");
  REQUIRE(at != std::string::npos);
  resized.replace(at, 17, "auction.items = 3");
  expect_kind(resized, am::CheckpointError::Kind::shape_mismatch);

  // file ends right after the magic line
  expect_kind(bytes.substr(0, bytes.find('\n') + 1),
              am::CheckpointError::Kind::truncated);

  // header line that parses as neither name nor count
  std::string mangled = bytes;
  mangled.replace(mangled.find("batches-done"), 12, "batchesdone!");
  expect_kind(mangled, am::CheckpointError::Kind::version_mismatch);

  CHECK_THROWS_AS(am::load_checkpoint((scratch_dir() / "nope.ckpt").string()), am::IoError);
}

TEST_CASE("C API: config handles") {
  CHECK(std::string(am_version()) == am::kVersion);

  am_config* cfg = nullptr;
  REQUIRE(am_config_create(&cfg) == AM_OK);
  CHECK(am_config_set(cfg, "auction.items", "3") == AM_OK);
  char buf[64];
  CHECK(am_config_get(cfg, "auction.items", buf, sizeof buf) == AM_OK);
  CHECK(std::string(buf) == "3");
  CHECK(am_config_get(cfg, "auction.demand", buf, sizeof buf) == AM_OK);
  CHECK(std::string(buf) == "k_demand");

  CHECK(am_config_set(cfg, "auction.items", "three") == AM_ERR_CONFIG);
  CHECK(std::string(am_last_error()).find("auction.items") != std::string::npos);
  CHECK(am_config_set(cfg, "no.such.key", "1") == AM_ERR_CONFIG);
  CHECK(am_config_get(cfg, "no.such.key", buf, sizeof buf) == AM_ERR_CONFIG);
  char tiny[2];
  CHECK(am_config_get(cfg, "auction.demand", tiny, sizeof tiny) == AM_ERR_CONFIG);
  CHECK(am_config_set(nullptr, "seed", "1") == AM_ERR_INVALID);
  am_config_free(cfg);

  CHECK(am_config_load("/definitely/not/here.cfg", &cfg) == AM_ERR_IO);

  const fs::path cfg_path = scratch_dir() / "tiny.cfg";
  write_file(cfg_path, kTinyConfig);
  REQUIRE(am_config_load(cfg_path.string().c_str(), &cfg) == AM_OK);
  CHECK(am_config_get(cfg, "train.batch", buf, sizeof buf) == AM_OK);
  CHECK(std::string(buf) == "32");
  am_config_free(cfg);
}

TEST_CASE("C API: mechanism lifecycle, run, save, load") {
  const fs::path cfg_path = scratch_dir() / "tiny.cfg";
  write_file(cfg_path, kTinyConfig);
  am_config* cfg = nullptr;
  REQUIRE(am_config_load(cfg_path.string().c_str(), &cfg) == AM_OK);

  am_mechanism* mech = nullptr;
  REQUIRE(am_mechanism_create(cfg, &mech) == AM_OK);

  const double bids[2] = {0.8, 0.4};
  double alloc[2] = {-1, -1}, pay[1] = {-1};
  REQUIRE(am_mechanism_run(mech, bids, alloc, pay) == AM_OK);
  CHECK(alloc[0] >= 0.0);
  CHECK(alloc[1] >= 0.0);
  CHECK(alloc[0] + alloc[1] <= 1.0 + 0.02);
  CHECK(pay[0] >= 0.0);

  // identical to the C++ construction path with the same config and seed
  const Config ccfg = am::parse_config_text(kTinyConfig);
  const am::MechanismParams ref = am::make_mechanism(
      am::demand_spec(ccfg), am::sinkhorn_options(ccfg), ccfg.hidden, ccfg.seed);
  const am::Tensor ref_alloc = am::allocate(ref, am::Tensor({1, 2}, {0.8, 0.4}));
  const std::vector<double> ref_pay = am::payments(ref, am::Tensor({1, 2}, {0.8, 0.4}));
  CHECK(alloc[0] == ref_alloc[0]);
  CHECK(alloc[1] == ref_alloc[1]);
  CHECK(pay[0] == ref_pay[0]);

  const fs::path saved = scratch_dir() / "capi.ckpt";
  REQUIRE(am_mechanism_save(mech, saved.string().c_str()) == AM_OK);
  am_mechanism_free(mech);

  am_mechanism* back = nullptr;
  REQUIRE(am_mechanism_load(saved.string().c_str(), &back) == AM_OK);
  double alloc2[2], pay2[1];
  REQUIRE(am_mechanism_run(back, bids, alloc2, pay2) == AM_OK);
  CHECK(alloc2[0] == alloc[0]);
  CHECK(alloc2[1] == alloc[1]);
  CHECK(pay2[0] == pay[0]);

  // tuning knobs may change, the trained shape may not
  CHECK(am_mechanism_set(back, "eval.size", "16") == AM_OK);
  CHECK(am_mechanism_set(back, "sinkhorn.tol", "0.005") == AM_OK);
  CHECK(am_mechanism_set(back, "auction.agents", "2") == AM_ERR_CONFIG);
  CHECK(am_mechanism_set(back, "net.hidden", "8") == AM_ERR_CONFIG);
  am_mechanism_free(back);

  CHECK(am_mechanism_load("/no/such.ckpt", &back) == AM_ERR_IO);
  const fs::path junk = scratch_dir() / "junk.ckpt";
  write_file(junk, "not a checkpoint at all\n");
  CHECK(am_mechanism_load(junk.string().c_str(), &back) == AM_ERR_CONFIG);

  // infeasible demand surfaces through the dedicated status
  am_config* bad = nullptr;
  REQUIRE(am_config_create(&bad) == AM_OK);
  REQUIRE(am_config_set(bad, "auction.agents", "2") == AM_OK);
  REQUIRE(am_config_set(bad, "auction.items", "3") == AM_OK);
  REQUIRE(am_config_set(bad, "auction.k", "2") == AM_OK);
  REQUIRE(am_config_set(bad, "auction.demand", "exactly_k") == AM_OK);
  am_mechanism* nope = nullptr;
  CHECK(am_mechanism_create(bad, &nope) == AM_ERR_INFEASIBLE);
  am_config_free(bad);
  am_config_free(cfg);
}

TEST_CASE("C API: train, evaluate, baseline, heatmap") {
  const fs::path cfg_path = scratch_dir() / "tiny.cfg";
  write_file(cfg_path, kTinyConfig);
  am_config* cfg = nullptr;
  REQUIRE(am_config_load(cfg_path.string().c_str(), &cfg) == AM_OK);
  am_mechanism* mech = nullptr;
  REQUIRE(am_mechanism_create(cfg, &mech) == AM_OK);

  const fs::path metrics = scratch_dir() / "metrics.csv";
  const fs::path ckpt = scratch_dir() / "trained.ckpt";
  REQUIRE(am_train(mech, metrics.string().c_str(), ckpt.string().c_str()) == AM_OK);

  const std::string csv = read_file(metrics);
  CHECK(csv.rfind("epoch,revenue,regret,rho,lambda,seconds\n", 0) == 0);
  CHECK(csv.find("\n1,") != std::string::npos);
  CHECK(fs::exists(ckpt));

  char* json = nullptr;
  REQUIRE(am_evaluate(mech, &json) == AM_OK);
  const nlohmann::json rep = nlohmann::json::parse(json);
  am_string_free(json);
  CHECK(rep["setting"]["agents"] == 1);
  CHECK(rep["setting"]["items"] == 2);
  CHECK(rep["test_size"] == 8);
  CHECK(rep["revenue"]["mean"].is_number());
  CHECK(rep["regret"]["max"].is_number());
  CHECK(rep["regret"]["per_agent"].size() == 1);
  CHECK(rep["baselines"]["vcg_revenue"].is_number());
  CHECK(rep["baselines"]["analytic_revenue"].is_number());
  CHECK(rep["misreport"]["restarts"] == 1);

  char* bjson = nullptr;
  REQUIRE(am_baseline(cfg, &bjson) == AM_OK);
  const nlohmann::json base = nlohmann::json::parse(bjson);
  am_string_free(bjson);
  CHECK(base["samples"] == 8);
  CHECK(base["vcg"]["revenue_mean"].is_number());
  CHECK(base["analytic"]["revenue_mean"].is_number());

  char* grid = nullptr;
  REQUIRE(am_heatmap(mech, 4, 0.25, &grid) == AM_OK);
  const std::string gcsv(grid);
  am_string_free(grid);
  CHECK(gcsv.find("v1,v2,alloc1,alloc2,payment") != std::string::npos);
  CHECK(gcsv.find("# eps_used = 0.25") != std::string::npos);
  // header comments plus 16 data rows
  CHECK(std::count(gcsv.begin(), gcsv.end(), '\n') >= 17);

  CHECK(am_train(nullptr, nullptr, nullptr) == AM_ERR_INVALID);
  am_mechanism_free(mech);
  am_config_free(cfg);
}

TEST_CASE("command line: usage, training pipeline, reports") {
  const fs::path dir = scratch_dir() / "cli";
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "exp.cfg";
  write_file(cfg_path, kTinyConfig);

  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("--definitely-not-a-flag") == 2);
  CHECK(run_cli("evaluate") == 2);  // missing required --checkpoint
  CHECK(run_cli("evaluate --checkpoint " + (dir / "absent.ckpt").string()) == 2);

  const fs::path out = dir / "run1";
  CHECK(run_cli("train --config " + cfg_path.string() + " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "metrics.csv"));
  CHECK(fs::exists(out / "model.ckpt"));

  const fs::path report = dir / "report.json";
  CHECK(run_cli("evaluate --checkpoint " + (out / "model.ckpt").string() +
                " --set eval.size=8 --out " + report.string()) == 0);
  const nlohmann::json rep = nlohmann::json::parse(read_file(report));
  CHECK(rep["test_size"] == 8);

  const fs::path base = dir / "base.json";
  CHECK(run_cli("baseline --config " + cfg_path.string() + " --out " + base.string()) == 0);
  const nlohmann::json bj = nlohmann::json::parse(read_file(base));
  CHECK(bj["setting"]["items"] == 2);

  const fs::path heat = dir / "heat.csv";
  CHECK(run_cli("heatmap --checkpoint " + (out / "model.ckpt").string() +
                " --resolution 4 --out " + heat.string()) == 0);
  CHECK(read_file(heat).find("v1,v2,alloc1,alloc2,payment") != std::string::npos);

  // overriding a structural key on a trained model is refused
  CHECK(run_cli("evaluate --checkpoint " + (out / "model.ckpt").string() +
                " --set auction.items=5") == 2);
  // infeasible spec from the command line surfaces as exit 3
  CHECK(run_cli("train --config " + cfg_path.string() +
                " --set auction.demand=exactly_k --set auction.agents=2"
                " --set auction.k=2 --out " +
                (dir / "run2").string()) == 3);
}
