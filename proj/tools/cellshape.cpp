#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cellshape/check.hpp"
#include "cellshape/driver.hpp"
#include "cellshape/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitEarly = 2;

cellshape::OptimConfig make_config(const std::string& file, const std::vector<std::string>& overrides) {
  cellshape::OptimConfig cfg;
  if (!file.empty()) cfg = cellshape::load_config(file);
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw cellshape::ConfigError("--set expects key=value, got '" + item + "'");
    cfg.set(item.substr(0, eq), item.substr(eq + 1));
  }
  if (const char* out = std::getenv("CELLSHAPE_OUT"); out && *out) cfg.output_dir = out;
  cfg.validate();
  return cfg;
}

void print_step(const cellshape::StepRecord& r) {
  std::printf("step %4d  J=%.10e  newton=%3d  lin=%6.2f  elast=%3d  q_max=%.4f  q_med=%.4f  %s\n",
              r.step, r.objective.total, r.newton_iterations, r.avg_linear_iterations,
              r.elasticity_iterations, r.quality_max, r.quality_median,
              cellshape::to_string(r.status));
  std::fflush(stdout);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw cellshape::ConfigError("malformed number '" + item + "' in --b");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-penalized shape optimization of elastic composites"};
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> overrides;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "run one optimization");
  run->add_option("config", config_file, "key = value configuration file");
  run->add_option("--set", overrides, "override a configuration entry (key=value)");
  run->add_flag("-q,--quiet", quiet, "suppress per-step output");

  std::string b_list = "0.001,0.1,1.0";
  auto* sweep = app.add_subcommand("sweep", "run one optimization per gradient bound b");
  sweep->add_option("config", config_file, "key = value configuration file");
  sweep->add_option("--set", overrides, "override a configuration entry (key=value)");
  sweep->add_option("--b", b_list, "comma separated bounds")->capture_default_str();
  sweep->add_flag("-q,--quiet", quiet, "suppress per-step output");

  cellshape::GradientCheckOptions check_opts;
  auto* check = app.add_subcommand("check", "finite-difference check of the shape derivative");
  check->add_option("--fields", check_opts.fields, "number of random fields")->capture_default_str();
  check->add_option("--refinements", check_opts.refinements, "uniform refinements")
      ->capture_default_str();
  check->add_option("--seed", check_opts.seed, "random seed")->capture_default_str();
  check->add_option("--scale", check_opts.field_scale, "scale of the normalized test fields")
      ->capture_default_str();
  double check_tol = 1e-4;
  check->add_option("--tol", check_tol, "relative error tolerance")->capture_default_str();

  std::string mesh_out;
  int gen_rows = 8, gen_cols = 8, gen_ref = 0;
  double gen_frac = 0.3;
  auto* generate = app.add_subcommand("generate", "write a generated composite mesh");
  generate->add_option("output", mesh_out, "output file (.txt mesh text or .vtk)")->required();
  generate->add_option("--rows", gen_rows)->capture_default_str();
  generate->add_option("--cols", gen_cols)->capture_default_str();
  generate->add_option("--radius", gen_frac, "cell radius / pitch")->capture_default_str();
  generate->add_option("--refinements", gen_ref)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto cfg = make_config(config_file, overrides);
      const auto result = cellshape::run_optimization(
          cfg, quiet ? cellshape::StepObserver{} : cellshape::StepObserver{print_step});
      std::printf("termination: %s after %d completed steps\n",
                  cellshape::to_string(result.termination), result.completed_steps);
      if (result.termination != cellshape::Termination::Completed)
        std::printf("reason: %s\n", result.records.back().message.c_str());
      return result.termination == cellshape::Termination::Completed ? kExitOk : kExitEarly;
    }
    if (sweep->parsed()) {
      const auto cfg = make_config(config_file, overrides);
      const auto summaries = cellshape::b_sweep(
          cfg, parse_list(b_list), quiet ? cellshape::StepObserver{} : cellshape::StepObserver{print_step});
      bool all_completed = true;
      for (const auto& s : summaries) {
        std::printf("b=%-8g completed=%4d termination=%-17s q_max=%.4f q_med=%.4f\n", s.bound,
                    s.completed_steps, cellshape::to_string(s.termination), s.final_quality_max,
                    s.final_quality_median);
        all_completed = all_completed && s.termination == cellshape::Termination::Completed;
      }
      return all_completed ? kExitOk : kExitEarly;
    }
    if (check->parsed()) {
      const auto report = cellshape::run_gradient_check(check_opts);
      std::printf("dofs: %d\n", report.dofs);
      for (std::size_t f = 0; f < report.fields.size(); ++f) {
        const auto& field = report.fields[f];
        std::printf("field %2zu  dJ[v]=% .12e", f, field.analytic);
        for (std::size_t s = 0; s < report.steps.size(); ++s)
          std::printf("  t=%.0e rel=%.3e", report.steps[s], field.relative_error[s]);
        std::printf("\n");
      }
      bool ok = true;
      for (std::size_t s = 0; s < report.steps.size(); ++s)
        ok = ok && report.worst_relative_error(s) <= check_tol;
      std::printf("%s\n", ok ? "gradient check passed" : "gradient check FAILED");
      return ok ? kExitOk : kExitEarly;
    }
    if (generate->parsed()) {
      const auto h = cellshape::generate_composite_domain(gen_rows, gen_cols, gen_frac, gen_ref);
      if (mesh_out.size() > 4 && mesh_out.substr(mesh_out.size() - 4) == ".vtk")
        cellshape::save_vtk(mesh_out, h.finest(), {});
      else
        cellshape::save_mesh(mesh_out, h.finest());
      return kExitOk;
    }
  } catch (const cellshape::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cellshape::MeshError& e) {
    std::cerr << "mesh error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
