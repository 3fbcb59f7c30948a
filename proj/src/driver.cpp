#include "cellshape/driver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cellshape/io.hpp"
#include "cellshape/shapegrad.hpp"

namespace cellshape {

namespace {

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size())
    throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size())
    throw ConfigError("'" + key + "' expects an integer, got '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("'" + key + "' expects true/false, got '" + value + "'");
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

KrylovMethod parse_method(const std::string& value) {
  if (value == "bicgstab") return KrylovMethod::BiCGStab;
  if (value == "cg") return KrylovMethod::CG;
  throw ConfigError("krylov must be 'bicgstab' or 'cg', got '" + value + "'");
}

struct Field {
  std::function<void(OptimConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const OptimConfig&)> get;
};

template <typename Member>
Field real_field(Member member) {
  return {[member](OptimConfig& c, const std::string& k, const std::string& v) {
            member(c) = parse_double(k, v);
          },
          [member](const OptimConfig& c) {
            return format_double(member(const_cast<OptimConfig&>(c)));
          }};
}

template <typename Member>
Field int_field(Member member) {
  return {[member](OptimConfig& c, const std::string& k, const std::string& v) {
            member(c) = parse_int(k, v);
          },
          [member](const OptimConfig& c) {
            return std::to_string(member(const_cast<OptimConfig&>(c)));
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["nu_elast"] = real_field([](OptimConfig& c) -> double& { return c.weights.elast; });
    t["nu_vol"] = real_field([](OptimConfig& c) -> double& { return c.weights.vol; });
    t["nu_peri"] = real_field([](OptimConfig& c) -> double& { return c.weights.peri; });
    t["nu_penalty"] = real_field([](OptimConfig& c) -> double& { return c.penalty.nu_penalty; });
    t["b"] = real_field([](OptimConfig& c) -> double& { return c.penalty.bound; });
    t["metric_lambda"] = real_field([](OptimConfig& c) -> double& { return c.penalty.metric.lambda; });
    t["metric_mu"] = real_field([](OptimConfig& c) -> double& { return c.penalty.metric.mu; });
    t["step_size"] = real_field([](OptimConfig& c) -> double& { return c.step_size; });
    t["max_steps"] = int_field([](OptimConfig& c) -> int& { return c.max_steps; });
    t["refinements"] = int_field([](OptimConfig& c) -> int& { return c.refinements; });
    t["rows"] = int_field([](OptimConfig& c) -> int& { return c.rows; });
    t["cols"] = int_field([](OptimConfig& c) -> int& { return c.cols; });
    t["cell_radius_fraction"] =
        real_field([](OptimConfig& c) -> double& { return c.cell_radius_fraction; });
    t["lambda_out"] = real_field([](OptimConfig& c) -> double& { return c.materials.outer.lambda; });
    t["mu_out"] = real_field([](OptimConfig& c) -> double& { return c.materials.outer.mu; });
    t["lambda_top"] = real_field([](OptimConfig& c) -> double& { return c.materials.top.lambda; });
    t["mu_top"] = real_field([](OptimConfig& c) -> double& { return c.materials.top.mu; });
    t["lambda_bottom"] =
        real_field([](OptimConfig& c) -> double& { return c.materials.bottom.lambda; });
    t["mu_bottom"] = real_field([](OptimConfig& c) -> double& { return c.materials.bottom.mu; });
    t["traction"] = real_field([](OptimConfig& c) -> double& { return c.traction; });
    t["elast_rel_tol"] = real_field([](OptimConfig& c) -> double& { return c.elasticity.rel_tol; });
    t["elast_abs_tol"] = real_field([](OptimConfig& c) -> double& { return c.elasticity.abs_tol; });
    t["elast_max_iter"] = int_field([](OptimConfig& c) -> int& { return c.elasticity.max_iter; });
    t["newton_max_steps"] = int_field([](OptimConfig& c) -> int& { return c.newton.max_steps; });
    t["newton_rel_tol"] = real_field([](OptimConfig& c) -> double& { return c.newton.rel_tol; });
    t["newton_abs_tol"] = real_field([](OptimConfig& c) -> double& { return c.newton.abs_tol; });
    t["inner_rel_tol"] = real_field([](OptimConfig& c) -> double& { return c.newton.inner.rel_tol; });
    t["inner_max_iter"] = int_field([](OptimConfig& c) -> int& { return c.newton.inner.max_iter; });
    t["pre_smooth"] = int_field([](OptimConfig& c) -> int& { return c.multigrid.pre_smooth; });
    t["post_smooth"] = int_field([](OptimConfig& c) -> int& { return c.multigrid.post_smooth; });
    t["jacobi_damping"] = real_field([](OptimConfig& c) -> double& { return c.multigrid.damping; });
    t["krylov"] = {[](OptimConfig& c, const std::string&, const std::string& v) {
                     c.elasticity.method = parse_method(v);
                     c.newton.inner.method = c.elasticity.method;
                   },
                   [](const OptimConfig& c) {
                     return std::string(c.elasticity.method == KrylovMethod::CG ? "cg" : "bicgstab");
                   }};
    t["mesh_file"] = {[](OptimConfig& c, const std::string&, const std::string& v) { c.mesh_file = v; },
                      [](const OptimConfig& c) { return c.mesh_file; }};
    t["output_dir"] = {
        [](OptimConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
        [](const OptimConfig& c) { return c.output_dir; }};
    t["write_files"] = {[](OptimConfig& c, const std::string& k,
                           const std::string& v) { c.write_files = parse_bool(k, v); },
                        [](const OptimConfig& c) {
                          return std::string(c.write_files ? "true" : "false");
                        }};
    t["snapshot_steps"] = {[](OptimConfig& c, const std::string& k, const std::string& v) {
                             c.snapshot_steps.clear();
                             std::istringstream is(v);
                             std::string item;
                             while (std::getline(is, item, ','))
                               if (!trim(item).empty()) c.snapshot_steps.push_back(parse_int(k, trim(item)));
                           },
                           [](const OptimConfig& c) {
                             std::string out;
                             for (std::size_t i = 0; i < c.snapshot_steps.size(); ++i)
                               out += (i ? "," : "") + std::to_string(c.snapshot_steps[i]);
                             return out;
                           }};
    t["t"] = t["step_size"];
    return t;
  }();
  return table;
}

}  // namespace

void OptimConfig::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("step size t must be > 0");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (refinements < 0) throw ConfigError("refinements must be >= 0");
  if (!(weights.elast > 0.0) || weights.vol < 0.0 || weights.peri < 0.0)
    throw ConfigError("weights need nu_elast > 0 and nu_vol, nu_peri >= 0");
  if (mesh_file.empty() && (rows < 1 || cols < 1)) throw ConfigError("rows and cols must be >= 1");
  if (!std::isfinite(traction)) throw ConfigError("traction must be finite");
  penalty.validate();
  elasticity.validate();
  newton.validate();
  multigrid.validate();
}

void OptimConfig::set(const std::string& key, const std::string& value) {
  const auto& table = fields();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second.set(*this, key, value);
}

std::map<std::string, std::string> OptimConfig::to_key_values() const {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields())
    if (key != "t") out[key] = field.get(*this);
  return out;
}

OptimConfig parse_config(std::istream& is, OptimConfig base) {
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

OptimConfig load_config(const std::filesystem::path& path, OptimConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  return parse_config(is, std::move(base));
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::ElementInversion: return "element_inversion";
    case Termination::NonConvergence: return "non_convergence";
  }
  return "?";
}

std::optional<std::pair<double, double>> RunResult::quality_at(int k) const {
  if (k >= 0 && k < static_cast<int>(records.size()))
    return std::make_pair(records[k].quality_max, records[k].quality_median);
  if (k == completed_steps) return std::make_pair(final_quality_max, final_quality_median);
  return std::nullopt;
}

std::optional<ObjectiveBreakdown> RunResult::objective_at(int k) const {
  if (k >= 0 && k < static_cast<int>(records.size()) &&
      !(records[k].status == Termination::NonConvergence && records[k].elasticity_iterations < 0))
    return records[k].objective;
  if (k == completed_steps) return final_objective;
  return std::nullopt;
}

MeshHierarchy build_initial_hierarchy(const OptimConfig& cfg) {
  if (!cfg.mesh_file.empty()) return build_hierarchy(load_mesh(cfg.mesh_file), cfg.refinements);
  return generate_composite_domain(cfg.rows, cfg.cols, cfg.cell_radius_fraction, cfg.refinements);
}

MaterialTable build_materials(const OptimConfig& cfg, const Mesh& mesh) {
  const int rows = cfg.mesh_file.empty() ? cfg.rows : std::max(1, mesh.max_subdomain());
  return make_layered_materials(rows, cfg.materials);
}

StateSolution solve_state(const MeshHierarchy& hierarchy, const TransferOperators& transfer,
                          const MaterialTable& mat, const OptimConfig& cfg) {
  auto system = build_elasticity_multigrid(hierarchy, mat, cfg.traction, transfer, cfg.multigrid);
  const KrylovResult solve = solve_with_multigrid(system.mg, system.fine.rhs, cfg.elasticity);
  return {NodalField(solve.solution), solve.iterations};
}

namespace {

std::string snapshot_name(int state) {
  std::ostringstream os;
  os << "snapshot_" << std::setw(4) << std::setfill('0') << state << ".vtk";
  return os.str();
}

}  // namespace

RunResult run_optimization(const OptimConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  MeshHierarchy hierarchy = build_initial_hierarchy(cfg);
  const TransferOperators transfer = TransferOperators::from_hierarchy(hierarchy);
  const MaterialTable mat = build_materials(cfg, hierarchy.finest());
  NewtonConfig newton = cfg.newton;
  newton.mg = cfg.multigrid;

  const std::filesystem::path dir(cfg.output_dir);
  if (cfg.write_files) {
    std::filesystem::create_directories(dir);
    save_mesh(dir / "initial_mesh.txt", hierarchy.finest());
  }
  const std::set<int> cadence(cfg.snapshot_steps.begin(), cfg.snapshot_steps.end());
  std::set<int> written;
  auto snapshot = [&](int state, const Mesh& mesh, const NodalField* u, const NodalField* v) {
    if (!cfg.write_files || written.count(state)) return;
    std::vector<NamedField> point_fields;
    if (u) point_fields.emplace_back("u", u);
    if (v) point_fields.emplace_back("v", v);
    save_vtk(dir / snapshot_name(state), mesh, point_fields,
             "cellshape state " + std::to_string(state));
    written.insert(state);
  };

  RunResult result;
  for (int k = 0; k < cfg.max_steps; ++k) {
    const Mesh& mesh = hierarchy.finest();
    StepRecord rec;
    rec.step = k;
    const QualityReport quality = mesh_quality(mesh);
    rec.quality_max = quality.max;
    rec.quality_median = quality.median;

    StateSolution state;
    try {
      state = solve_state(hierarchy, transfer, mat, cfg);
    } catch (const SolverError& e) {
      rec.status = Termination::NonConvergence;
      rec.elasticity_iterations = -1;
      rec.message = std::string("state solve: ") + e.what();
      if (const auto* nc = dynamic_cast<const NonConvergence*>(&e))
        rec.elasticity_iterations = nc->iterations();
      result.records.push_back(rec);
      if (observer) observer(rec);
      break;
    }
    rec.elasticity_iterations = state.iterations;
    rec.objective = evaluate_objective(mesh, mat, state.u, cfg.weights);

    const ShapeGradient dJ =
        combine_and_reset(mesh, assemble_shape_derivative_parts(mesh, mat, state.u), cfg.weights);

    DescentResult descent;
    try {
      descent = solve_descent(hierarchy, transfer, dJ, cfg.penalty, newton);
    } catch (const NewtonNonConvergence& e) {
      rec.status = Termination::NonConvergence;
      rec.newton_iterations = e.report().iterations;
      rec.avg_linear_iterations = e.report().mean_linear_iterations();
      rec.message = e.what();
    } catch (const SolverError& e) {
      rec.status = Termination::NonConvergence;
      rec.message = std::string("descent solve: ") + e.what();
    }
    if (rec.status != Termination::Completed) {
      snapshot(k, mesh, &state.u, nullptr);
      result.records.push_back(rec);
      if (observer) observer(rec);
      break;
    }
    rec.newton_iterations = descent.report.iterations;
    rec.avg_linear_iterations = descent.report.mean_linear_iterations();
    if (cadence.count(k)) snapshot(k, mesh, &state.u, &descent.direction);

    // Move against the gradient representative: x <- x - t v.
    const NodalField step(Eigen::VectorXd(-descent.direction.values));
    try {
      Mesh moved = deform(mesh, step, cfg.step_size);
      hierarchy.replace_finest(std::move(moved));
    } catch (const ElementInversion& e) {
      rec.status = Termination::ElementInversion;
      rec.failed_element = e.element();
      rec.message = e.what();
      snapshot(k, mesh, &state.u, &descent.direction);
      result.records.push_back(rec);
      if (observer) observer(rec);
      break;
    }
    result.records.push_back(rec);
    ++result.completed_steps;
    if (observer) observer(rec);
  }

  if (!result.records.empty() && result.records.back().status != Termination::Completed)
    result.termination = result.records.back().status;

  const Mesh& final_mesh = hierarchy.finest();
  const QualityReport final_quality = mesh_quality(final_mesh);
  result.final_quality_max = final_quality.max;
  result.final_quality_median = final_quality.median;
  if (result.termination == Termination::Completed) {
    try {
      const StateSolution state = solve_state(hierarchy, transfer, mat, cfg);
      result.final_objective = evaluate_objective(final_mesh, mat, state.u, cfg.weights);
      snapshot(result.completed_steps, final_mesh, &state.u, nullptr);
    } catch (const SolverError&) {
      snapshot(result.completed_steps, final_mesh, nullptr, nullptr);
    }
  } else {
    const auto& last = result.records.back();
    if (last.elasticity_iterations >= 0 && last.message.rfind("state solve", 0) != 0)
      result.final_objective = last.objective;
    snapshot(result.completed_steps, final_mesh, nullptr, nullptr);
  }
  result.final_hierarchy = std::move(hierarchy);

  if (cfg.write_files) {
    write_outputs(dir, result);
    save_mesh(dir / "final_mesh.txt", result.final_hierarchy.finest());
    std::ofstream cfg_out(dir / "config.txt");
    for (const auto& [key, value] : cfg.to_key_values()) cfg_out << key << " = " << value << '\n';
  }
  return result;
}

std::vector<SweepSummary> b_sweep(const OptimConfig& cfg, const std::vector<double>& b_values,
                                  const StepObserver& observer) {
  if (b_values.empty()) throw ConfigError("b sweep needs at least one value");
  std::vector<SweepSummary> out;
  for (double b : b_values) {
    OptimConfig run_cfg = cfg;
    run_cfg.penalty.bound = b;
    std::ostringstream name;
    name << "b_" << b;
    run_cfg.output_dir = (std::filesystem::path(cfg.output_dir) / name.str()).string();
    const RunResult r = run_optimization(run_cfg, observer);
    SweepSummary s;
    s.bound = b;
    s.completed_steps = r.completed_steps;
    s.termination = r.termination;
    s.final_quality_max = r.final_quality_max;
    s.final_quality_median = r.final_quality_median;
    if (auto q = r.quality_at(10)) s.quality_max_at_10 = q->first;
    out.push_back(s);
  }
  if (cfg.write_files) {
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream os(std::filesystem::path(cfg.output_dir) / "sweep.csv");
    os << "b,completed_steps,termination,quality_max_final,quality_median_final,quality_max_step10\n";
    os << std::setprecision(17);
    for (const auto& s : out) {
      os << s.bound << ',' << s.completed_steps << ',' << to_string(s.termination) << ','
         << s.final_quality_max << ',' << s.final_quality_median << ',';
      if (s.quality_max_at_10) os << *s.quality_max_at_10;
      os << '\n';
    }
  }
  return out;
}

void write_history_csv(std::ostream& os, const std::vector<StepRecord>& records) {
  os << kHistoryHeader << '\n' << std::setprecision(17);
  for (const auto& r : records) {
    if (r.status != Termination::Completed) continue;
    os << r.step << ',' << r.objective.elast << ',' << r.objective.vol << ',' << r.objective.peri
       << ',' << r.objective.total << ',' << r.newton_iterations << ',' << r.avg_linear_iterations
       << ',' << r.elasticity_iterations << ',' << r.quality_max << ',' << r.quality_median << '\n';
  }
}

void write_outputs(const std::filesystem::path& dir, const RunResult& result) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "history.csv");
    if (!os) throw std::runtime_error("cannot write " + (dir / "history.csv").string());
    write_history_csv(os, result.records);
  }
  nlohmann::json summary;
  summary["termination"] = to_string(result.termination);
  summary["completed_steps"] = result.completed_steps;
  if (result.termination != Termination::Completed) {
    const auto& last = result.records.back();
    summary["failure"] = {{"step", last.step},
                          {"message", last.message},
                          {"element", last.failed_element}};
  }
  if (result.final_objective) {
    summary["final_objective"] = {{"J_elast", result.final_objective->elast},
                                  {"J_vol", result.final_objective->vol},
                                  {"J_peri", result.final_objective->peri},
                                  {"J_total", result.final_objective->total}};
  }
  summary["final_quality"] = {{"max", result.final_quality_max},
                              {"median", result.final_quality_median}};
  std::ofstream os(dir / "summary.json");
  if (!os) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
  os << summary.dump(2) << '\n';
}

}  // namespace cellshape
