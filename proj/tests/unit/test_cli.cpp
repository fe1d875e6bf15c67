#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "eit/cli/config.hpp"
#include "eit/cli/io.hpp"
#include "eit/cli/runner.hpp"
#include "eit/errors.hpp"
#include "json.hpp"

using namespace eit;
using namespace eit::cli;

namespace {

std::string small_config(const std::string& out_dir, const std::string& extra = "") {
  return R"({
    "domain": {"r0": 0.75, "D": 2},
    "mesh": {"target_h": 0.2},
    "electrodes": {"M": 16, "coverage": 1.0},
    "model": {"gamma_min": 0.5, "gamma_max": 4.0, "theta0": [2.0, 1.5]},
    "mcmc": {"iters": 600, "burnin": 200, "thin": 2},
    "experiment": {"N": 200, "N_grid": [100, 200, 400], "replicates": 3, "alpha": 0.1},
    "seed": 7)" + extra + R"(,
    "out_dir": ")" + out_dir + R"("
  })";
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("eit_cli_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config round trip and hash") {
  const ExperimentConfig cfg = parse_config_text(small_config("out"));
  CHECK(cfg.domain.regions == 2);
  CHECK(cfg.mesh.target_h == 0.2);
  CHECK(cfg.model.theta0 == std::vector<double>{2.0, 1.5});
  CHECK(cfg.experiment.n_grid == std::vector<std::size_t>{100, 200, 400});
  const ExperimentConfig again = parse_config_text(to_json(cfg));
  CHECK(to_json(again) == to_json(cfg));
  CHECK(config_hash(again) == config_hash(cfg));
  ExperimentConfig other = cfg;
  other.seed = 8;
  CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("config errors name the offending key") {
  auto message = [](const std::string& text) -> std::string {
    try {
      parse_config_text(text);
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message(small_config("o", R"(, "bogus": 1)")).find("unknown key bogus") != std::string::npos);
  std::string bad = small_config("o");
  bad.replace(bad.find("\"gamma_min\": 0.5"), 16, "\"gamma_min\": -1");
  CHECK(message(bad).find("gamma_min must be > 0") != std::string::npos);
  bad = small_config("o");
  bad.replace(bad.find("[2.0, 1.5]"), 10, "[5.0, 1.5]");
  CHECK(message(bad).find("model.theta0[0] = 5 exceeds gamma_max 4") != std::string::npos);
  bad = small_config("o");
  bad.replace(bad.find("\"thin\": 2"), 9, "\"thin\": 2, \"foo\": 1");
  CHECK(message(bad).find("unknown key mcmc.foo") != std::string::npos);
  bad = small_config("o");
  bad.replace(bad.find(", \"theta0\": [2.0, 1.5]"), 22, "");
  CHECK(message(bad).find("model.theta0") != std::string::npos);
  CHECK(!message("{ not json").empty());
  CHECK_THROWS_AS(parse_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("io round trips") {
  const auto dir = scratch("io");
  std::filesystem::create_directories(dir);
  Eigen::MatrixXd m(2, 3);
  m << 1.0 / 3.0, -2.5e-17, 7.0, 0.1, 0.2, 1e300;
  write_matrix_csv(dir / "m.csv", m);
  CHECK(read_matrix_csv(dir / "m.csv") == m);

  Dataset data;
  data.y = m;
  data.x = {2, 0};
  write_dataset_csv(dir / "z.csv", data);
  const Dataset back = read_dataset_csv(dir / "z.csv");
  CHECK(back.y == data.y);
  CHECK(back.x == data.x);
  CHECK(read_file(dir / "z.csv").rfind("i,x,y_1,y_2,y_3\n", 0) == 0);
  CHECK(format_double(0.1) == "0.10000000000000001");
  std::filesystem::remove_all(dir);
}

TEST_CASE("forward is deterministic and writes a manifest") {
  const auto dir = scratch("forward");
  const ExperimentConfig cfg = parse_config_text(small_config(dir.string()));
  RunFlags flags;
  flags.check = true;
  std::ostringstream out, err;
  REQUIRE(run("forward", cfg, flags, out, err) == kSuccess);
  const std::string first = read_file(dir / "g.csv");
  REQUIRE(run("forward", cfg, flags, out, err) == kSuccess);
  CHECK(read_file(dir / "g.csv") == first);
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  CHECK(manifest["config_hash"] == config_hash(cfg));
  CHECK(manifest["subcommand"] == "forward");
  CHECK(manifest["mesh"]["id"].get<std::string>().rfind("disk:", 0) == 0);

  RunFlags ones;
  ones.theta = std::vector<double>{1.0, 1.0};
  ones.out = (dir / "g1.csv").string();
  ones.sensitivity = (dir / "s.csv").string();
  ones.dump_stiffness = (dir / "k.txt").string();
  ones.check = true;
  REQUIRE(run("forward", cfg, ones, out, err) == kSuccess);
  CHECK(read_matrix_csv(dir / "g1.csv").cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(read_file(dir / "s.csv").rfind("i,j,k,value\n", 0) == 0);
  CHECK(std::filesystem::file_size(dir / "k.txt") > 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  const ExperimentConfig cfg = parse_config_text(small_config(dir.string()));
  std::ostringstream out, err;
  RunFlags outside;
  outside.theta = std::vector<double>{9.0, 1.0};
  CHECK(run("forward", cfg, outside, out, err) == kConfigError);
  CHECK(err.str().find("\"exit_code\":2") != std::string::npos);
  CHECK(run("nonsense", cfg, RunFlags{}, out, err) == kConfigError);
  RunFlags no_data;
  CHECK(run("mcmc", cfg, no_data, out, err) == kConfigError);
  ExperimentConfig broken = cfg;
  broken.model.gamma_min = -1.0;
  CHECK(run("forward", broken, RunFlags{}, out, err) == kConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("simulate then mcmc through the runner") {
  const auto dir = scratch("pipeline");
  const ExperimentConfig cfg = parse_config_text(small_config(dir.string()));
  std::ostringstream out, err;
  RunFlags sim;
  sim.n = 300;
  REQUIRE(run("simulate", cfg, sim, out, err) == kSuccess);
  const Dataset data = read_dataset_csv(dir / "z.csv");
  CHECK(data.size() == 300);
  RunFlags mc;
  mc.data = (dir / "z.csv").string();
  REQUIRE(run("mcmc", cfg, mc, out, err) == kSuccess);
  const std::string chain = read_file(dir / "chain.csv");
  CHECK(chain.rfind("iter,theta_1,theta_2,log_post\n", 0) == 0);
  REQUIRE(run("mcmc", cfg, mc, out, err) == kSuccess);
  CHECK(read_file(dir / "chain.csv") == chain);
  const auto summary = nlohmann::json::parse(read_file(dir / "mcmc.json"));
  CHECK(summary["samples"] == 200);
  std::filesystem::remove_all(dir);
}

TEST_CASE("delta and stability through the runner") {
  const auto dir = scratch("delta");
  const ExperimentConfig cfg = parse_config_text(small_config(dir.string()));
  std::ostringstream out, err;
  REQUIRE(run("delta", cfg, RunFlags{}, out, err) == kSuccess);
  CHECK(out.str().rfind("0.3901806440322", 0) == 0);
  RunFlags pairs;
  pairs.pairs = 5;
  pairs.check = true;
  std::ostringstream sout;
  CHECK(run("stability", cfg, pairs, sout, err) == kSuccess);
  const auto report = nlohmann::json::parse(read_file(dir / "stability.json"));
  CHECK(report["injectivity_flags"] == 0);
  REQUIRE(run("mesh", cfg, RunFlags{}, out, err) == kSuccess);
  CHECK(std::filesystem::exists(dir / "mesh" / "vertices.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("jobs resolution") {
  CHECK(resolve_jobs(3) == 3);
  CHECK(resolve_jobs(0) >= 1);
}
