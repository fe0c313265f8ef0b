#include "bsfilter/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bsfilter/errors.hpp"
#include "bsfilter/sde.hpp"
#include "bsfilter/spde.hpp"

namespace bsfilter {

namespace {

using nlohmann::json;

// Stream-id layout: high word = path index, low word = role.
// Roles 0/1 drive the system noises, 2+k drives particle k. The all-ones
// path index is reserved for flow-validation noise.
constexpr std::uint64_t kRoleW1 = 0;
constexpr std::uint64_t kRoleW2 = 1;
constexpr std::uint64_t kRoleParticleBase = 2;
constexpr std::uint64_t kFlowValidationPath = 0xFFFFFFFFull << 32;

std::uint64_t path_stream(int path, std::uint64_t role) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(path)) << 32) | role;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError("config " + where + ": " + what);
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; })) {
      fail(where, "unknown key '" + it.key() + "'");
    }
  }
}

const json& need(const json& j, const std::string& where, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing required key '") + key + "'");
  return *it;
}

double need_number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

long long need_integer(const json& j, const std::string& where) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) fail(where, "expected an integer");
  return j.get<long long>();
}

bool need_bool(const json& j, const std::string& where) {
  if (!j.is_boolean()) fail(where, "expected a boolean");
  return j.get<bool>();
}

std::string need_string(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

const char* kind_name(CoefficientKind k) {
  switch (k) {
    case CoefficientKind::Constant:
      return "constant";
    case CoefficientKind::Linear:
      return "linear";
    case CoefficientKind::Quadratic:
      return "quadratic";
    case CoefficientKind::Tanh:
      return "tanh";
    case CoefficientKind::SineBounded:
      return "sine";
    case CoefficientKind::GaussianBump:
      return "gauss";
  }
  return "?";
}

CoefficientFn parse_coefficient(const json& j, const std::string& where) {
  check_keys(j, where, {"kind", "params"});
  const std::string kind = need_string(need(j, where, "kind"), where + ".kind");
  const json& pj = need(j, where, "params");
  if (!pj.is_array()) fail(where + ".params", "expected an array of numbers");
  std::vector<double> params;
  for (const auto& v : pj) params.push_back(need_number(v, where + ".params"));

  try {
    if (kind == "constant" && params.size() == 1) return CoefficientFn::constant(params[0]);
    if (kind == "linear" && params.size() == 1) return CoefficientFn::linear(params[0]);
    if (kind == "quadratic" && params.size() == 1) return CoefficientFn::quadratic(params[0]);
    if (kind == "tanh" && params.size() == 2) return CoefficientFn::tanh(params[0], params[1]);
    if (kind == "sine" && params.size() == 2) return CoefficientFn::sine(params[0], params[1]);
    if (kind == "gauss" && params.size() == 3) {
      return CoefficientFn::gaussian_bump(params[0], params[1], params[2]);
    }
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
  fail(where, "unknown kind '" + kind + "' or wrong parameter count "
                  "(constant/linear/quadratic take 1, tanh/sine 2, gauss 3)");
}

json coefficient_to_json(const CoefficientFn& fn) {
  return json{{"kind", kind_name(fn.kind())}, {"params", fn.params()}};
}

Method parse_method(const std::string& name, const std::string& where) {
  if (name == "spde") return Method::BackwardSpde;
  if (name == "particle") return Method::ParticleKs;
  if (name == "kalman") return Method::KalmanBucy;
  fail(where, "unknown method '" + name + "' (expected spde, particle or kalman)");
}

json report_to_json(const SolverReport& r) {
  return json{{"scheme", r.scheme},
              {"boundary", r.boundary},
              {"m", r.m},
              {"n", r.n},
              {"dx", r.dx},
              {"half_width", r.half_width},
              {"cfl_ratio", r.cfl_ratio},
              {"cfl_warning", r.cfl_warning},
              {"field_min", r.field_min},
              {"center_min", r.center_min},
              {"mass_initial", r.mass_initial},
              {"mass_final", r.mass_final},
              {"mass_change_rel", r.mass_change_rel},
              {"assumption_violation", r.assumption_violation}};
}

json estimate_to_json(const FilterEstimate& e) {
  json j{{"m_t", e.m_t}, {"assumption_violation", e.assumption_violation}};
  switch (e.method) {
    case Method::BackwardSpde:
      j["numerator"] = e.numerator;
      j["denominator"] = e.denominator;
      if (e.report_numerator) j["report_numerator"] = report_to_json(*e.report_numerator);
      if (e.report_denominator) j["report_denominator"] = report_to_json(*e.report_denominator);
      break;
    case Method::ParticleKs:
      j["n"] = e.n_particles;
      j["ess"] = e.ess;
      j["stderr"] = e.stderr_est;
      j["ess_warning"] = e.ess_warning;
      break;
    case Method::KalmanBucy:
      j["p_t"] = e.p_t;
      break;
  }
  return j;
}

// E[g(x0 + W_T)] for the kinds with a closed heat-semigroup moment.
double heat_moment_reference(const SystemModel& model) {
  if (!model.f.is_zero() || !model.h.is_zero()) {
    throw ConfigError("ladder.reference heat-moment requires f == 0 and h == 0");
  }
  const auto& g = model.g;
  const auto& p = g.params();
  const double x0 = model.x0;
  const double T = model.T;
  switch (g.kind()) {
    case CoefficientKind::Constant:
      return p[0];
    case CoefficientKind::Linear:
      return p[0] * x0;
    case CoefficientKind::Quadratic:
      return p[0] * (x0 * x0 + T);
    case CoefficientKind::SineBounded:
      return p[0] * std::sin(p[1] * x0) * std::exp(-0.5 * p[1] * p[1] * T);
    case CoefficientKind::GaussianBump: {
      const double s2 = p[2] * p[2];
      const double d = x0 - p[1];
      return p[0] * p[2] / std::sqrt(s2 + T) * std::exp(-0.5 * d * d / (s2 + T));
    }
    case CoefficientKind::Tanh:
      throw ConfigError("ladder.reference heat-moment: no closed form for tanh readouts");
  }
  throw ConfigError("ladder.reference heat-moment: unsupported readout");
}

void require_linear_for_kalman(const ExperimentConfig& cfg) {
  if (cfg.model.f.kind() != CoefficientKind::Linear ||
      cfg.model.h.kind() != CoefficientKind::Linear) {
    throw ConfigError("method kalman requires f and h of kind linear");
  }
  if (cfg.model.g.kind() != CoefficientKind::Linear || cfg.model.g.params()[0] != 1.0) {
    throw ConfigError("method kalman requires the identity readout g = linear(1)");
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void append_csv_number(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  line += buf;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

bool ExperimentConfig::has_method(Method m) const {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

double ExperimentConfig::resolve_half_width() const {
  if (grids.half_width) return *grids.half_width;
  return auto_half_width(model);
}

json ExperimentConfig::canonical() const {
  json c;
  c["model"] = json{{"f", coefficient_to_json(model.f)},
                    {"h", coefficient_to_json(model.h)},
                    {"g", coefficient_to_json(model.g)},
                    {"x0", model.x0},
                    {"y0", model.y0},
                    {"T", model.T},
                    {"allow_unbounded", allow_unbounded}};
  c["grids"] = json{{"n_time", grids.n_time}, {"m_space", grids.m_space}};
  if (grids.half_width) {
    c["grids"]["half_width"] = *grids.half_width;
  } else {
    c["grids"]["half_width"] = "auto";
  }
  c["seeds"] = json{{"master", master_seed}, {"n_paths", n_paths}};
  json methods_j = json::array();
  for (Method m : {Method::BackwardSpde, Method::ParticleKs, Method::KalmanBucy}) {
    if (has_method(m)) methods_j.push_back(method_name(m));
  }
  c["methods"] = methods_j;
  if (has_method(Method::ParticleKs)) c["particle"] = json{{"n", particle_n}};
  if (has_method(Method::KalmanBucy)) c["kalman"] = json{{"p0", kalman_p0}};
  if (ladder) {
    json levels = json::array();
    for (const auto& l : ladder->levels) {
      levels.push_back(json{{"n_time", l.n_time}, {"m_space", l.m_space}});
    }
    const char* ref = ladder->reference == LadderReference::Particle  ? "particle"
                      : ladder->reference == LadderReference::Kalman ? "kalman"
                                                                      : "heat-moment";
    c["ladder"] =
        json{{"levels", levels}, {"reference", ref}, {"flow_residual_seeds", ladder->flow_residual_seeds}};
  }
  c["output"] = json{{"store_field", store_field}};
  return c;
}

std::string ExperimentConfig::digest() const { return hex64(fnv1a64(canonical().dump())); }

ExperimentConfig ExperimentConfig::parse(const json& j) {
  check_keys(j, "(top level)",
             {"model", "grids", "seeds", "methods", "particle", "kalman", "ladder", "output",
              "threads"});

  const json& mj = need(j, "(top level)", "model");
  check_keys(mj, "model", {"f", "h", "g", "x0", "y0", "T", "allow_unbounded"});
  const bool allow_unbounded =
      mj.contains("allow_unbounded") ? need_bool(mj["allow_unbounded"], "model.allow_unbounded")
                                     : false;
  CoefficientFn f = parse_coefficient(need(mj, "model", "f"), "model.f");
  CoefficientFn h = parse_coefficient(need(mj, "model", "h"), "model.h");
  CoefficientFn g = parse_coefficient(need(mj, "model", "g"), "model.g");
  const double x0 = need_number(need(mj, "model", "x0"), "model.x0");
  const double y0 = need_number(need(mj, "model", "y0"), "model.y0");
  const double T = need_number(need(mj, "model", "T"), "model.T");

  ExperimentConfig cfg;
  cfg.model = make_system_model(std::move(f), std::move(h), std::move(g), x0, y0, T,
                                allow_unbounded);
  cfg.allow_unbounded = allow_unbounded;

  const json& gj = need(j, "(top level)", "grids");
  check_keys(gj, "grids", {"n_time", "m_space", "half_width"});
  cfg.grids.n_time = static_cast<int>(need_integer(need(gj, "grids", "n_time"), "grids.n_time"));
  cfg.grids.m_space =
      static_cast<int>(need_integer(need(gj, "grids", "m_space"), "grids.m_space"));
  if (cfg.grids.n_time < 1) fail("grids.n_time", "must be >= 1");
  if (cfg.grids.m_space < 5) fail("grids.m_space", "must be >= 5");
  if (gj.contains("half_width")) {
    const json& hw = gj["half_width"];
    if (hw.is_string()) {
      if (hw.get<std::string>() != "auto") fail("grids.half_width", "expected a number or \"auto\"");
    } else {
      const double v = need_number(hw, "grids.half_width");
      if (!(v > 0.0)) fail("grids.half_width", "must be positive");
      cfg.grids.half_width = v;
    }
  }

  if (j.contains("seeds")) {
    const json& sj = j["seeds"];
    check_keys(sj, "seeds", {"master", "n_paths"});
    if (sj.contains("master")) {
      const long long m = need_integer(sj["master"], "seeds.master");
      if (m < 0) fail("seeds.master", "must be nonnegative");
      cfg.master_seed = static_cast<std::uint64_t>(m);
    }
    if (sj.contains("n_paths")) {
      cfg.n_paths = static_cast<int>(need_integer(sj["n_paths"], "seeds.n_paths"));
      if (cfg.n_paths < 1) fail("seeds.n_paths", "must be >= 1");
    }
  }

  if (j.contains("methods")) {
    const json& mm = j["methods"];
    if (!mm.is_array() || mm.empty()) fail("methods", "expected a nonempty array");
    cfg.methods.clear();
    for (const auto& v : mm) {
      const Method m = parse_method(need_string(v, "methods"), "methods");
      if (!cfg.has_method(m)) cfg.methods.push_back(m);
    }
  }

  if (j.contains("particle")) {
    const json& pj = j["particle"];
    check_keys(pj, "particle", {"n"});
    cfg.particle_n = need_integer(need(pj, "particle", "n"), "particle.n");
    if (cfg.particle_n < 100) fail("particle.n", "must be >= 100");
  }

  if (j.contains("kalman")) {
    const json& kj = j["kalman"];
    check_keys(kj, "kalman", {"p0"});
    cfg.kalman_p0 = need_number(need(kj, "kalman", "p0"), "kalman.p0");
    if (cfg.kalman_p0 < 0.0) fail("kalman.p0", "must be nonnegative");
  }

  if (j.contains("ladder")) {
    const json& lj = j["ladder"];
    check_keys(lj, "ladder", {"levels", "reference", "flow_residual_seeds"});
    LadderSpec ladder;
    const json& levels = need(lj, "ladder", "levels");
    if (!levels.is_array()) fail("ladder.levels", "expected an array");
    for (const auto& lvl : levels) {
      check_keys(lvl, "ladder.levels[]", {"n_time", "m_space"});
      LadderLevel level;
      level.n_time =
          static_cast<int>(need_integer(need(lvl, "ladder.levels[]", "n_time"), "ladder.levels[].n_time"));
      level.m_space = static_cast<int>(
          need_integer(need(lvl, "ladder.levels[]", "m_space"), "ladder.levels[].m_space"));
      if (level.n_time < 1) fail("ladder.levels[].n_time", "must be >= 1");
      if (level.m_space < 5) fail("ladder.levels[].m_space", "must be >= 5");
      ladder.levels.push_back(level);
    }
    const std::string ref = need_string(need(lj, "ladder", "reference"), "ladder.reference");
    if (ref == "particle") {
      ladder.reference = LadderReference::Particle;
    } else if (ref == "kalman") {
      ladder.reference = LadderReference::Kalman;
    } else if (ref == "heat-moment") {
      ladder.reference = LadderReference::HeatMoment;
    } else {
      fail("ladder.reference", "expected particle, kalman or heat-moment");
    }
    if (lj.contains("flow_residual_seeds")) {
      ladder.flow_residual_seeds =
          static_cast<int>(need_integer(lj["flow_residual_seeds"], "ladder.flow_residual_seeds"));
      if (ladder.flow_residual_seeds < 0) fail("ladder.flow_residual_seeds", "must be >= 0");
    }
    cfg.ladder = std::move(ladder);
  }

  if (j.contains("output")) {
    const json& oj = j["output"];
    check_keys(oj, "output", {"store_field"});
    if (oj.contains("store_field")) {
      cfg.store_field = need_bool(oj["store_field"], "output.store_field");
    }
  }

  if (j.contains("threads")) {
    cfg.threads = static_cast<int>(need_integer(j["threads"], "threads"));
    if (cfg.threads < 0) fail("threads", "must be >= 0");
  }

  if (cfg.has_method(Method::KalmanBucy)) require_linear_for_kalman(cfg);
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse(j);
}

std::vector<PathRecord> run_filter_experiment(const ExperimentConfig& cfg) {
  if (cfg.methods.empty()) throw ConfigError("methods: nothing to run");

  const TimeGrid tgrid = TimeGrid::uniform(cfg.model.T, cfg.grids.n_time);
  SpatialGrid sgrid{};
  if (cfg.has_method(Method::BackwardSpde)) {
    sgrid = make_centered_grid(cfg.model.x0, cfg.resolve_half_width(), cfg.grids.m_space);
  }
  const std::string digest = cfg.digest();

  std::vector<PathRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.n_paths));
  for (int p = 0; p < cfg.n_paths; ++p) {
    PathRecord record;
    record.path_index = p;
    record.master_seed = cfg.master_seed;
    record.digest = digest;

    const SystemPaths sys = simulate_system(cfg.model, tgrid, cfg.master_seed,
                                            path_stream(p, kRoleW1), path_stream(p, kRoleW2));
    record.truth = cfg.model.g.eval(sys.x.values.back());

    try {
      for (Method m : {Method::BackwardSpde, Method::ParticleKs, Method::KalmanBucy}) {
        if (!cfg.has_method(m)) continue;
        switch (m) {
          case Method::BackwardSpde: {
            record.estimates.push_back(filter_estimate_spde(cfg.model, sgrid, tgrid, sys.y));
            if (cfg.store_field) {
              record.field =
                  solve_backward(cfg.model, sgrid, tgrid, sys.y, TerminalData::TestFunctionG)
                      .first;
            }
            break;
          }
          case Method::ParticleKs:
            record.estimates.push_back(particle_ks_estimate(
                cfg.model, sys.y, tgrid, cfg.particle_n, cfg.master_seed,
                path_stream(p, kRoleParticleBase), cfg.threads));
            break;
          case Method::KalmanBucy:
            record.estimates.push_back(kalman_bucy_oracle(cfg.model.f.params()[0],
                                                          cfg.model.h.params()[0], cfg.model.x0,
                                                          cfg.kalman_p0, sys.y, tgrid));
            break;
        }
      }
    } catch (const NumericError& e) {
      record.failed = true;
      record.error = e.what();
    }
    records.push_back(std::move(record));
  }
  return records;
}

json record_to_json(const PathRecord& record) {
  json estimates = json::object();
  for (const auto& e : record.estimates) estimates[method_name(e.method)] = estimate_to_json(e);
  json j{{"path", record.path_index},
         {"master_seed", record.master_seed},
         {"digest", record.digest},
         {"truth", record.truth},
         {"failed", record.failed},
         {"estimates", estimates}};
  if (record.failed) j["error"] = record.error;
  if (record.field) {
    const ScalarField& f = *record.field;
    json values = json::array();
    for (int i = 0; i < f.tgrid.size(); ++i) {
      json row = json::array();
      for (int jx = 0; jx < f.sgrid.m; ++jx) row.push_back(f.at(i, jx));
      values.push_back(std::move(row));
    }
    j["field"] = json{{"x_min", f.sgrid.x_min},
                      {"x_max", f.sgrid.x_max},
                      {"m", f.sgrid.m},
                      {"t", f.tgrid.points()},
                      {"values", std::move(values)}};
  }
  return j;
}

void write_records_jsonl(const std::vector<PathRecord>& records, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file);
  for (const auto& r : records) out << record_to_json(r).dump() << "\n";
}

void write_summary_csv(const std::vector<PathRecord>& records, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file);
  out << "path,master_seed,truth,m_spde,m_particle,m_kalman,stderr_particle,ess,failed\n";
  for (const auto& r : records) {
    std::string line = std::to_string(r.path_index) + "," + std::to_string(r.master_seed) + ",";
    append_csv_number(line, r.truth);
    const FilterEstimate* by_method[3] = {nullptr, nullptr, nullptr};
    for (const auto& e : r.estimates) by_method[static_cast<int>(e.method)] = &e;
    for (int m = 0; m < 3; ++m) {
      line += ",";
      if (by_method[m] != nullptr) append_csv_number(line, by_method[m]->m_t);
    }
    line += ",";
    if (by_method[1] != nullptr) append_csv_number(line, by_method[1]->stderr_est);
    line += ",";
    if (by_method[1] != nullptr) append_csv_number(line, by_method[1]->ess);
    line += ",";
    line += r.failed ? "1" : "0";
    out << line << "\n";
  }
}

std::vector<ConvergenceRow> run_convergence_study(const ExperimentConfig& cfg) {
  if (!cfg.ladder) throw ConfigError("converge: config has no ladder section");
  const LadderSpec& ladder = *cfg.ladder;
  if (ladder.levels.size() < 3) throw ConfigError("ladder: need at least 3 levels");
  for (std::size_t k = 0; k + 1 < ladder.levels.size(); ++k) {
    if (ladder.levels[k].n_time >= ladder.levels[k + 1].n_time) {
      throw ConfigError("ladder: levels must be strictly refining in n_time");
    }
  }
  const int n_fine = ladder.levels.back().n_time;
  for (const auto& level : ladder.levels) {
    if (n_fine % level.n_time != 0) {
      throw ConfigError("ladder: every n_time must divide the finest level");
    }
  }
  if (ladder.reference == LadderReference::Kalman) require_linear_for_kalman(cfg);

  const double half_width = cfg.resolve_half_width();
  const TimeGrid fine_grid = TimeGrid::uniform(cfg.model.T, n_fine);

  std::vector<ConvergenceRow> rows;
  rows.reserve(ladder.levels.size());
  for (std::size_t k = 0; k < ladder.levels.size(); ++k) {
    rows.push_back(ConvergenceRow{static_cast<int>(k), ladder.levels[k].n_time,
                                  ladder.levels[k].m_space, 0.0, 0.0});
  }

  // Filtering error column: one fine system path per experiment path, each
  // level filters the restriction of the same recorded observations.
  for (int p = 0; p < cfg.n_paths; ++p) {
    const SystemPaths sys =
        simulate_system(cfg.model, fine_grid, cfg.master_seed, path_stream(p, kRoleW1),
                        path_stream(p, kRoleW2));
    for (std::size_t k = 0; k < ladder.levels.size(); ++k) {
      const LadderLevel& level = ladder.levels[k];
      const int factor = n_fine / level.n_time;
      const SampledProcess y_level = factor == 1 ? sys.y : coarsen(sys.y, factor);
      const TimeGrid& grid_level = y_level.grid;
      const SpatialGrid sgrid = make_centered_grid(cfg.model.x0, half_width, level.m_space);

      const FilterEstimate spde = filter_estimate_spde(cfg.model, sgrid, grid_level, y_level);
      double reference = 0.0;
      switch (ladder.reference) {
        case LadderReference::Particle:
          reference = particle_ks_estimate(cfg.model, y_level, grid_level, cfg.particle_n,
                                           cfg.master_seed, path_stream(p, kRoleParticleBase),
                                           cfg.threads)
                          .m_t;
          break;
        case LadderReference::Kalman:
          reference = kalman_bucy_oracle(cfg.model.f.params()[0], cfg.model.h.params()[0],
                                         cfg.model.x0, cfg.kalman_p0, y_level, grid_level)
                          .m_t;
          break;
        case LadderReference::HeatMoment:
          reference = heat_moment_reference(cfg.model);
          break;
      }
      rows[k].est_error += std::abs(spde.m_t - reference) / cfg.n_paths;
    }
  }

  // Flow integral-form residual column, same coarsening discipline.
  if (ladder.flow_residual_seeds > 0) {
    const FlowModel flow = scalar_flow(cfg.model.f, CoefficientFn::constant(1.0), cfg.model.T);
    for (int s = 0; s < ladder.flow_residual_seeds; ++s) {
      const BrownianPath w_fine =
          sample_brownian(fine_grid, cfg.master_seed, kFlowValidationPath | static_cast<std::uint64_t>(s));
      for (std::size_t k = 0; k < ladder.levels.size(); ++k) {
        const int factor = n_fine / ladder.levels[k].n_time;
        const BrownianPath w_level = factor == 1 ? w_fine : coarsen(w_fine, factor);
        const double r = flow_integral_residual(flow, w_level.grid, cfg.model.x0, w_level);
        rows[k].flow_residual_rms += r * r / ladder.flow_residual_seeds;
      }
    }
    for (auto& row : rows) row.flow_residual_rms = std::sqrt(row.flow_residual_rms);
  }
  return rows;
}

void write_convergence_csv(const std::vector<ConvergenceRow>& rows, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file);
  out << "level,n_time,m_space,est_error,flow_residual_rms\n";
  for (const auto& r : rows) {
    std::string line =
        std::to_string(r.level) + "," + std::to_string(r.n_time) + "," + std::to_string(r.m_space) + ",";
    append_csv_number(line, r.est_error);
    line += ",";
    append_csv_number(line, r.flow_residual_rms);
    out << line << "\n";
  }
}

std::vector<FlowValidationRow> run_flow_validation(const ExperimentConfig& cfg) {
  const FlowModel flow = scalar_flow(cfg.model.f, CoefficientFn::constant(1.0), cfg.model.T);

  std::vector<int> level_n;
  if (cfg.ladder) {
    for (const auto& l : cfg.ladder->levels) level_n.push_back(l.n_time);
  } else {
    level_n = {64, 256, 1024};
  }
  const int seeds = cfg.ladder && cfg.ladder->flow_residual_seeds > 0 ? cfg.ladder->flow_residual_seeds : 20;
  const int n_fine = level_n.back();
  for (int n : level_n) {
    if (n_fine % n != 0) throw ConfigError("validate-flow: level step counts must nest");
  }

  std::vector<FlowValidationRow> rows;

  // Pathwise restart identity on a small common-noise lattice.
  {
    const TimeGrid grid = TimeGrid::uniform(cfg.model.T, level_n.back());
    const BrownianPath w = sample_brownian(grid, cfg.master_seed, kFlowValidationPath);
    std::vector<std::vector<double>> lattice;
    for (int i = -2; i <= 2; ++i) lattice.push_back({cfg.model.x0 + 0.5 * i});
    const double residual = check_evolution_identity(flow, grid, lattice, grid.n_steps() / 2,
                                                     std::span<const BrownianPath>(&w, 1));
    rows.push_back(FlowValidationRow{"evolution_residual", 0, grid.n_steps(), residual});
  }

  const TimeGrid fine_grid = TimeGrid::uniform(cfg.model.T, n_fine);
  std::vector<double> rms(level_n.size(), 0.0);
  for (int s = 0; s < seeds; ++s) {
    const BrownianPath w_fine = sample_brownian(
        fine_grid, cfg.master_seed, kFlowValidationPath | static_cast<std::uint64_t>(s + 1));
    for (std::size_t k = 0; k < level_n.size(); ++k) {
      const int factor = n_fine / level_n[k];
      const BrownianPath w_level = factor == 1 ? w_fine : coarsen(w_fine, factor);
      const double r = flow_integral_residual(flow, w_level.grid, cfg.model.x0, w_level);
      rms[k] += r * r / seeds;
    }
  }
  for (std::size_t k = 0; k < level_n.size(); ++k) {
    rows.push_back(
        FlowValidationRow{"flow_residual_rms", static_cast<int>(k), level_n[k], std::sqrt(rms[k])});
  }
  return rows;
}

void write_flow_validation_csv(const std::vector<FlowValidationRow>& rows,
                               const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file);
  out << "check,level,n_time,value\n";
  for (const auto& r : rows) {
    std::string line = r.check + "," + std::to_string(r.level) + "," + std::to_string(r.n_time) + ",";
    append_csv_number(line, r.value);
    out << line << "\n";
  }
}

void emit_plot_data(const std::string& records_file, const std::string& converge_file,
                    const std::string& out_dir) {
  std::ifstream in(records_file);
  if (!in) throw ConfigError("emit-plots: cannot open records file: " + records_file);
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::ofstream scatter(fs::path(out_dir) / "scatter.csv", std::ios::binary);
  std::ofstream heatmap(fs::path(out_dir) / "heatmap.csv", std::ios::binary);
  scatter << "path,method,m_t,truth\n";
  heatmap << "t,x,value\n";

  bool heatmap_written = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("emit-plots: malformed records line: ") + e.what());
    }
    const int path = j.value("path", 0);
    const double truth = j.value("truth", 0.0);
    if (j.contains("estimates")) {
      for (const auto& [name, est] : j["estimates"].items()) {
        std::string row = std::to_string(path) + "," + name + ",";
        append_csv_number(row, est.value("m_t", 0.0));
        row += ",";
        append_csv_number(row, truth);
        scatter << row << "\n";
      }
    }
    if (!heatmap_written && j.contains("field")) {
      const json& f = j["field"];
      const double x_min = f["x_min"].get<double>();
      const double x_max = f["x_max"].get<double>();
      const int m = f["m"].get<int>();
      const auto& t = f["t"];
      const auto& values = f["values"];
      const double dx = (x_max - x_min) / (m - 1);
      for (std::size_t i = 0; i < values.size(); ++i) {
        for (int jx = 0; jx < m; ++jx) {
          std::string row;
          append_csv_number(row, t[i].get<double>());
          row += ",";
          append_csv_number(row, x_min + jx * dx);
          row += ",";
          append_csv_number(row, values[i][jx].get<double>());
          heatmap << row << "\n";
        }
      }
      heatmap_written = true;
    }
  }

  std::ofstream curves(fs::path(out_dir) / "convergence_curves.csv", std::ios::binary);
  std::ifstream conv(converge_file);
  if (conv) {
    std::string row;
    bool first = true;
    while (std::getline(conv, row)) {
      if (row.empty()) continue;
      curves << row << "\n";
      first = false;
    }
    if (first) curves << "level,n_time,m_space,est_error,flow_residual_rms\n";
  } else {
    curves << "level,n_time,m_space,est_error,flow_residual_rms\n";
  }
}

}  // namespace bsfilter
