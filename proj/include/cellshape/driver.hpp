#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellshape/descent.hpp"
#include "cellshape/fem.hpp"
#include "cellshape/mesh.hpp"
#include "cellshape/mgsolve.hpp"

namespace cellshape {

struct OptimConfig {
  ObjectiveWeights weights{};
  PenaltyConfig penalty{};
  double step_size = 1.0;
  int max_steps = 100;
  int refinements = 2;

  int rows = 8;
  int cols = 8;
  double cell_radius_fraction = 0.3;
  std::string mesh_file;  ///< optional coarse mesh; overrides the generator

  MaterialParams materials{};
  double traction = 0.1;

  KrylovConfig elasticity{KrylovMethod::BiCGStab, 1e-10, 1e-10, 2000};
  NewtonConfig newton{};
  MGConfig multigrid{};

  std::vector<int> snapshot_steps{0, 25, 50, 75, 100};
  std::string output_dir = "cellshape_out";
  bool write_files = true;

  void validate() const;

  /// Sets one `key = value` entry; throws ConfigError on unknown keys or
  /// malformed values.
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_key_values() const;
};

/// Flat `key = value` text, `#` comments.
OptimConfig parse_config(std::istream& is, OptimConfig base = {});
OptimConfig load_config(const std::filesystem::path& path, OptimConfig base = {});

enum class Termination { Completed, ElementInversion, NonConvergence };
const char* to_string(Termination t);

struct StepRecord {
  int step = 0;
  ObjectiveBreakdown objective;
  int newton_iterations = 0;
  double avg_linear_iterations = 0.0;
  int elasticity_iterations = 0;
  double quality_max = 0.0;
  double quality_median = 0.0;
  Termination status = Termination::Completed;
  std::string message;
  int failed_element = -1;
};

struct RunResult {
  std::vector<StepRecord> records;
  int completed_steps = 0;
  Termination termination = Termination::Completed;
  /// State after the last completed step.
  std::optional<ObjectiveBreakdown> final_objective;
  double final_quality_max = 0.0;
  double final_quality_median = 0.0;
  MeshHierarchy final_hierarchy;

  /// Quality of state k (0 = initial mesh) if it was reached.
  std::optional<std::pair<double, double>> quality_at(int k) const;
  std::optional<ObjectiveBreakdown> objective_at(int k) const;
};

using StepObserver = std::function<void(const StepRecord&)>;

MeshHierarchy build_initial_hierarchy(const OptimConfig& cfg);
MaterialTable build_materials(const OptimConfig& cfg, const Mesh& mesh);

struct StateSolution {
  NodalField u;
  int iterations = 0;
};

/// Elasticity solve on the finest level with BiCGStab + multigrid.
StateSolution solve_state(const MeshHierarchy& hierarchy, const TransferOperators& transfer,
                          const MaterialTable& mat, const OptimConfig& cfg);

/// Runs the gradient-penalized optimization loop. Writes artifacts into
/// cfg.output_dir when cfg.write_files is set.
RunResult run_optimization(const OptimConfig& cfg, const StepObserver& observer = {});

struct SweepSummary {
  double bound = 0.0;
  int completed_steps = 0;
  Termination termination = Termination::Completed;
  double final_quality_max = 0.0;
  double final_quality_median = 0.0;
  std::optional<double> quality_max_at_10;
};

std::vector<SweepSummary> b_sweep(const OptimConfig& cfg, const std::vector<double>& b_values,
                                  const StepObserver& observer = {});

inline constexpr const char* kHistoryHeader =
    "step,J_elast,J_vol,J_peri,J_total,newton_iters,avg_lin_iters,elast_iters,quality_max,"
    "quality_median";

void write_history_csv(std::ostream& os, const std::vector<StepRecord>& records);
void write_outputs(const std::filesystem::path& dir, const RunResult& result);

}  // namespace cellshape
