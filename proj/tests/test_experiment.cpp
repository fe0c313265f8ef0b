#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bsfilter/errors.hpp"
#include "bsfilter/experiment.hpp"

using namespace bsfilter;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kCatalogConfig = R"({
  "model": {
    "f": {"kind": "tanh", "params": [1.0, 1.0]},
    "h": {"kind": "sine", "params": [1.0, 1.0]},
    "g": {"kind": "tanh", "params": [1.0, 2.0]},
    "x0": 0.0, "y0": 0.0, "T": 1.0
  },
  "grids": {"n_time": 256, "m_space": 161, "half_width": 9.0},
  "seeds": {"master": 7, "n_paths": 2},
  "methods": ["spde", "particle"],
  "particle": {"n": 2000}
})";

ExperimentConfig catalog_config() { return ExperimentConfig::parse(json::parse(kCatalogConfig)); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path test_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "bsfilter_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing accepts the catalog experiment") {
  const ExperimentConfig cfg = catalog_config();
  CHECK(cfg.model.f.kind() == CoefficientKind::Tanh);
  CHECK(cfg.grids.n_time == 256);
  CHECK(cfg.grids.half_width.has_value());
  CHECK(cfg.master_seed == 7);
  CHECK(cfg.n_paths == 2);
  CHECK(cfg.has_method(Method::BackwardSpde));
  CHECK(cfg.has_method(Method::ParticleKs));
  CHECK_FALSE(cfg.has_method(Method::KalmanBucy));
  CHECK(cfg.particle_n == 2000);
}

TEST_CASE("schema violations carry the offending field") {
  json j = json::parse(kCatalogConfig);
  j["grids"]["typo_key"] = 1;
  CHECK_THROWS_WITH_AS((void)ExperimentConfig::parse(j),
                       doctest::Contains("grids: unknown key 'typo_key'"), ConfigError);

  json j2 = json::parse(kCatalogConfig);
  j2["model"]["f"]["kind"] = "cubic";
  CHECK_THROWS_WITH_AS((void)ExperimentConfig::parse(j2), doctest::Contains("model.f"),
                       ConfigError);

  json j3 = json::parse(kCatalogConfig);
  j3["model"].erase("T");
  CHECK_THROWS_WITH_AS((void)ExperimentConfig::parse(j3), doctest::Contains("missing required"),
                       ConfigError);

  json j4 = json::parse(kCatalogConfig);
  j4["grids"]["m_space"] = 3;
  CHECK_THROWS_AS((void)ExperimentConfig::parse(j4), ConfigError);

  json j5 = json::parse(kCatalogConfig);
  j5["methods"] = json::array();
  CHECK_THROWS_AS((void)ExperimentConfig::parse(j5), ConfigError);

  json j6 = json::parse(kCatalogConfig);
  j6["model"]["g"] = json{{"kind", "linear"}, {"params", {1.0}}};
  CHECK_THROWS_WITH_AS((void)ExperimentConfig::parse(j6), doctest::Contains("allow_unbounded"),
                       ConfigError);
}

TEST_CASE("kalman method demands the linear-Gaussian test model") {
  json j = json::parse(kCatalogConfig);
  j["methods"] = {"kalman"};
  CHECK_THROWS_WITH_AS((void)ExperimentConfig::parse(j), doctest::Contains("kalman"), ConfigError);

  json lin = json::parse(R"({
    "model": {
      "f": {"kind": "linear", "params": [-0.5]},
      "h": {"kind": "linear", "params": [1.0]},
      "g": {"kind": "linear", "params": [1.0]},
      "x0": 1.0, "y0": 0.0, "T": 1.0,
      "allow_unbounded": true
    },
    "grids": {"n_time": 64, "m_space": 61, "half_width": 10.0},
    "methods": ["kalman"]
  })");
  const ExperimentConfig cfg = ExperimentConfig::parse(lin);
  CHECK(cfg.has_method(Method::KalmanBucy));
  CHECK(cfg.model.assumption_violation());
}

TEST_CASE("digest ignores formatting but tracks semantic changes") {
  const ExperimentConfig a = catalog_config();

  // same content, different key order and whitespace
  json shuffled = json::parse(R"({
    "seeds": {"n_paths": 2, "master": 7},
    "particle": {"n": 2000},
    "methods": ["spde", "particle"],
    "grids": {"half_width": 9.0, "m_space": 161, "n_time": 256},
    "model": {
      "T": 1.0, "y0": 0.0, "x0": 0.0,
      "g": {"params": [1.0, 2.0], "kind": "tanh"},
      "h": {"params": [1.0, 1.0], "kind": "sine"},
      "f": {"params": [1.0, 1.0], "kind": "tanh"}
    }
  })");
  CHECK(ExperimentConfig::parse(shuffled).digest() == a.digest());

  ExperimentConfig changed = catalog_config();
  changed.grids.n_time = 512;
  CHECK(changed.digest() != a.digest());

  ExperimentConfig reseeded = catalog_config();
  reseeded.master_seed = 8;
  CHECK(reseeded.digest() != a.digest());

  ExperimentConfig threaded = catalog_config();
  threaded.threads = 4;
  CHECK(threaded.digest() == a.digest());  // execution detail, not semantics
}

TEST_CASE("auto half-width is rejected for unbounded drift") {
  json lin = json::parse(R"({
    "model": {
      "f": {"kind": "linear", "params": [-0.5]},
      "h": {"kind": "linear", "params": [1.0]},
      "g": {"kind": "linear", "params": [1.0]},
      "x0": 1.0, "y0": 0.0, "T": 1.0,
      "allow_unbounded": true
    },
    "grids": {"n_time": 64, "m_space": 61}
  })");
  const ExperimentConfig cfg = ExperimentConfig::parse(lin);
  CHECK_THROWS_AS((void)cfg.resolve_half_width(), ConfigError);
}

TEST_CASE("unit readout: every record normalizes to one") {
  json j = json::parse(kCatalogConfig);
  j["model"]["g"] = json{{"kind", "constant"}, {"params", {1.0}}};
  j["methods"] = {"spde"};
  j["grids"]["n_time"] = 64;
  ExperimentConfig cfg = ExperimentConfig::parse(j);
  cfg.n_paths = 3;
  const auto records = run_filter_experiment(cfg);
  CHECK(records.size() == 3);
  for (const auto& r : records) {
    REQUIRE_FALSE(r.failed);
    REQUIRE(r.estimates.size() == 1);
    CHECK(std::abs(r.estimates[0].m_t - 1.0) <= 1e-10);
    CHECK(r.digest == cfg.digest());
    CHECK(r.truth == 1.0);
  }
}

TEST_CASE("reruns are byte-identical, independent of the thread count") {
  ExperimentConfig cfg = catalog_config();
  const fs::path dir = test_dir("determinism");

  cfg.threads = 1;
  const auto r1 = run_filter_experiment(cfg);
  write_records_jsonl(r1, (dir / "a.jsonl").string());
  write_summary_csv(r1, (dir / "a.csv").string());

  cfg.threads = 3;
  const auto r2 = run_filter_experiment(cfg);
  write_records_jsonl(r2, (dir / "b.jsonl").string());
  write_summary_csv(r2, (dir / "b.csv").string());

  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(!slurp(dir / "a.jsonl").empty());
}

TEST_CASE("a failing path is recorded and isolated") {
  // Constant observation slope this extreme overflows the weight exponent on
  // some realizations only.
  json j = json::parse(R"({
    "model": {
      "f": {"kind": "constant", "params": [0.0]},
      "h": {"kind": "constant", "params": [37.0]},
      "g": {"kind": "gauss", "params": [1.0, 0.0, 1.0]},
      "x0": 0.0, "y0": 0.0, "T": 1.0
    },
    "grids": {"n_time": 64, "m_space": 51, "half_width": 4.0},
    "seeds": {"master": 3, "n_paths": 8},
    "methods": ["spde"]
  })");
  const ExperimentConfig cfg = ExperimentConfig::parse(j);
  const auto records = run_filter_experiment(cfg);
  REQUIRE(records.size() == 8);
  int failed = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].path_index == static_cast<int>(i));
    if (records[i].failed) {
      ++failed;
      CHECK(records[i].error.find("non-finite") != std::string::npos);
    } else {
      CHECK(records[i].estimates.size() == 1);
      CHECK(std::isfinite(records[i].estimates[0].m_t));
    }
  }
  CHECK(failed >= 1);
  CHECK(failed <= 7);
}

TEST_CASE("convergence ladder: validation") {
  ExperimentConfig cfg = catalog_config();
  CHECK_THROWS_WITH_AS((void)run_convergence_study(cfg), doctest::Contains("ladder"), ConfigError);

  cfg.ladder = LadderSpec{{{64, 51}}, LadderReference::Particle, 0};
  CHECK_THROWS_WITH_AS((void)run_convergence_study(cfg), doctest::Contains("3 levels"),
                       ConfigError);

  cfg.ladder = LadderSpec{{{64, 51}, {96, 51}, {128, 51}}, LadderReference::Particle, 0};
  CHECK_THROWS_WITH_AS((void)run_convergence_study(cfg), doctest::Contains("divide"), ConfigError);
}

TEST_CASE("convergence ladder: heat case approaches the closed-form moment") {
  json j = json::parse(R"({
    "model": {
      "f": {"kind": "constant", "params": [0.0]},
      "h": {"kind": "constant", "params": [0.0]},
      "g": {"kind": "gauss", "params": [1.0, 0.0, 1.0]},
      "x0": 0.0, "y0": 0.0, "T": 1.0
    },
    "grids": {"n_time": 1024, "m_space": 201, "half_width": 8.0},
    "seeds": {"master": 5, "n_paths": 1},
    "methods": ["spde"],
    "ladder": {
      "levels": [
        {"n_time": 16, "m_space": 26},
        {"n_time": 128, "m_space": 76},
        {"n_time": 1024, "m_space": 226}
      ],
      "reference": "heat-moment"
    }
  })");
  const ExperimentConfig cfg = ExperimentConfig::parse(j);
  const auto rows = run_convergence_study(cfg);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].est_error < rows[0].est_error);
  CHECK(rows[2].est_error < rows[1].est_error);
  const double reference = 1.0 / std::sqrt(2.0);  // gauss(1,0,1) smoothed over T=1
  CHECK(rows[2].est_error <= 0.02 * reference);
}

TEST_CASE("convergence ladder: quadratic readout hits the x0^2 + T moment") {
  json j = json::parse(R"({
    "model": {
      "f": {"kind": "constant", "params": [0.0]},
      "h": {"kind": "constant", "params": [0.0]},
      "g": {"kind": "quadratic", "params": [1.0]},
      "x0": 0.5, "y0": 0.0, "T": 1.0,
      "allow_unbounded": true
    },
    "grids": {"n_time": 2048, "m_space": 201, "half_width": 8.0},
    "seeds": {"master": 5, "n_paths": 1},
    "methods": ["spde"],
    "ladder": {
      "levels": [
        {"n_time": 128, "m_space": 101},
        {"n_time": 512, "m_space": 201},
        {"n_time": 2048, "m_space": 401}
      ],
      "reference": "heat-moment"
    }
  })");
  const ExperimentConfig cfg = ExperimentConfig::parse(j);
  const auto rows = run_convergence_study(cfg);
  const double reference = 0.25 + 1.0;
  for (const auto& row : rows) CHECK(row.est_error <= 0.02 * reference);
}

TEST_CASE("convergence ladder: flow residual column decays") {
  json j = json::parse(R"({
    "model": {
      "f": {"kind": "tanh", "params": [1.0, 1.0]},
      "h": {"kind": "constant", "params": [0.0]},
      "g": {"kind": "gauss", "params": [1.0, 0.0, 1.0]},
      "x0": 0.0, "y0": 0.0, "T": 1.0
    },
    "grids": {"n_time": 256, "m_space": 101, "half_width": 9.0},
    "seeds": {"master": 6, "n_paths": 1},
    "methods": ["spde", "particle"],
    "particle": {"n": 500},
    "ladder": {
      "levels": [
        {"n_time": 64, "m_space": 51},
        {"n_time": 256, "m_space": 51},
        {"n_time": 1024, "m_space": 51}
      ],
      "reference": "particle",
      "flow_residual_seeds": 20
    }
  })");
  const ExperimentConfig cfg = ExperimentConfig::parse(j);
  const auto rows = run_convergence_study(cfg);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].flow_residual_rms > 0.0);
  CHECK(rows[1].flow_residual_rms < rows[0].flow_residual_rms);
  CHECK(rows[2].flow_residual_rms < rows[1].flow_residual_rms);

  const fs::path dir = test_dir("converge");
  write_convergence_csv(rows, (dir / "converge.csv").string());
  const std::string csv = slurp(dir / "converge.csv");
  CHECK(csv.rfind("level,n_time,m_space,est_error,flow_residual_rms\n", 0) == 0);
}

TEST_CASE("flow validation rows") {
  ExperimentConfig cfg = catalog_config();
  cfg.ladder = LadderSpec{{{64, 51}, {256, 51}, {512, 51}}, LadderReference::Particle, 5};
  const auto rows = run_flow_validation(cfg);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].check == "evolution_residual");
  CHECK(rows[0].value <= 1e-12);
  CHECK(rows[3].value < rows[1].value);
}

TEST_CASE("summary CSV shape") {
  ExperimentConfig cfg = catalog_config();
  cfg.n_paths = 2;
  const auto records = run_filter_experiment(cfg);
  const fs::path dir = test_dir("summary");
  write_summary_csv(records, (dir / "summary.csv").string());
  std::ifstream in(dir / "summary.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "path,master_seed,truth,m_spde,m_particle,m_kalman,stderr_particle,ess,failed");
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 2);
}

TEST_CASE("plot emission: scatter, heatmap and convergence pass-through") {
  const fs::path dir = test_dir("plots");

  // empty record set -> header-only outputs
  {
    std::ofstream(dir / "records.jsonl").close();
    emit_plot_data((dir / "records.jsonl").string(), (dir / "converge.csv").string(),
                   dir.string());
    CHECK(slurp(dir / "scatter.csv") == "path,method,m_t,truth\n");
    CHECK(slurp(dir / "heatmap.csv") == "t,x,value\n");
    CHECK(slurp(dir / "convergence_curves.csv") == "level,n_time,m_space,est_error,flow_residual_rms\n");
  }

  // one stored field: heatmap has (N+1)*M data rows
  {
    json j = json::parse(kCatalogConfig);
    j["grids"] = json{{"n_time", 8}, {"m_space", 21}, {"half_width", 6.0}};
    j["methods"] = {"spde"};
    j["seeds"] = json{{"master", 4}, {"n_paths", 2}};
    j["output"] = json{{"store_field", true}};
    const ExperimentConfig cfg = ExperimentConfig::parse(j);
    const auto records = run_filter_experiment(cfg);
    write_records_jsonl(records, (dir / "records.jsonl").string());
    emit_plot_data((dir / "records.jsonl").string(), (dir / "converge.csv").string(),
                   dir.string());

    std::istringstream scatter(slurp(dir / "scatter.csv"));
    std::string line;
    int scatter_rows = -1;  // discount header
    while (std::getline(scatter, line)) {
      if (!line.empty()) ++scatter_rows;
    }
    CHECK(scatter_rows == 2);  // one method per path

    std::istringstream heat(slurp(dir / "heatmap.csv"));
    int heat_rows = -1;
    while (std::getline(heat, line)) {
      if (!line.empty()) ++heat_rows;
    }
    CHECK(heat_rows == 9 * 21);
  }

  CHECK_THROWS_AS(emit_plot_data((dir / "missing.jsonl").string(), "", dir.string()),
                  ConfigError);
}
