#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsfilter/filtering.hpp"

namespace bsfilter {

struct GridSpec {
  int n_time = 256;
  int m_space = 201;
  std::optional<double> half_width;  // nullopt = auto truncation rule
};

struct LadderLevel {
  int n_time = 0;
  int m_space = 0;
};

enum class LadderReference { Particle, Kalman, HeatMoment };

struct LadderSpec {
  std::vector<LadderLevel> levels;
  LadderReference reference = LadderReference::Particle;
  int flow_residual_seeds = 0;  // 0 disables the flow-residual column
};

// Parsed, schema-checked experiment configuration. The digest is a stable
// hash of the canonical form: reordering keys or whitespace in the file does
// not change it, any semantically meaningful field does.
struct ExperimentConfig {
  SystemModel model;
  bool allow_unbounded = false;
  GridSpec grids;
  std::uint64_t master_seed = 1;
  int n_paths = 1;
  std::vector<Method> methods{Method::BackwardSpde};
  long long particle_n = 10000;
  double kalman_p0 = 0.0;
  std::optional<LadderSpec> ladder;
  bool store_field = false;
  int threads = 0;  // not semantic: excluded from the digest

  bool has_method(Method m) const;
  double resolve_half_width() const;
  nlohmann::json canonical() const;
  std::string digest() const;

  static ExperimentConfig parse(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
};

// Per-path result. A failed solve marks the record and never disturbs the
// other paths.
struct PathRecord {
  int path_index = 0;
  std::uint64_t master_seed = 0;
  std::string digest;
  double truth = 0.0;  // g(X_T) along the recorded path
  bool failed = false;
  std::string error;
  std::vector<FilterEstimate> estimates;
  std::optional<ScalarField> field;  // v^g field when store_field is set
};

std::vector<PathRecord> run_filter_experiment(const ExperimentConfig& cfg);

nlohmann::json record_to_json(const PathRecord& record);
void write_records_jsonl(const std::vector<PathRecord>& records, const std::string& file);
void write_summary_csv(const std::vector<PathRecord>& records, const std::string& file);

struct ConvergenceRow {
  int level = 0;
  int n_time = 0;
  int m_space = 0;
  double est_error = 0.0;   // mean |m_spde - m_reference| over paths
  double flow_residual_rms = 0.0;  // 0 when disabled
};

// Refinement study. All levels consume restrictions of one fine Brownian
// path per seed, so the table isolates discretization error.
std::vector<ConvergenceRow> run_convergence_study(const ExperimentConfig& cfg);
void write_convergence_csv(const std::vector<ConvergenceRow>& rows, const std::string& file);

struct FlowValidationRow {
  std::string check;
  int level = 0;
  int n_time = 0;
  double value = 0.0;
};

// Evolution-identity residual plus the flow integral-form residual ladder for
// the scalar flow with drift f and unit diffusion.
std::vector<FlowValidationRow> run_flow_validation(const ExperimentConfig& cfg);
void write_flow_validation_csv(const std::vector<FlowValidationRow>& rows,
                               const std::string& file);

// Tidy plot CSVs from a records file: m_T scatter, v(t,x) heatmap (first
// record with a stored field), convergence curves (pass-through when the
// study table exists). Empty inputs produce header-only files.
void emit_plot_data(const std::string& records_file, const std::string& converge_file,
                    const std::string& out_dir);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace bsfilter
