#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cellshape/check.hpp"
#include "cellshape/driver.hpp"
#include "cellshape/io.hpp"

namespace py = pybind11;
using namespace cellshape;

namespace {

Eigen::MatrixXd vertex_array(const Mesh& m) {
  Eigen::MatrixXd out(m.num_vertices(), 2);
  for (int i = 0; i < m.num_vertices(); ++i) out.row(i) = m.vertex(i).transpose();
  return out;
}

Eigen::MatrixXi triangle_array(const Mesh& m) {
  Eigen::MatrixXi out(m.num_triangles(), 3);
  for (int t = 0; t < m.num_triangles(); ++t)
    for (int k = 0; k < 3; ++k) out(t, k) = m.triangle(t)[k];
  return out;
}

py::dict objective_dict(const ObjectiveBreakdown& o) {
  py::dict d;
  d["J_elast"] = o.elast;
  d["J_vol"] = o.vol;
  d["J_peri"] = o.peri;
  d["J_total"] = o.total;
  return d;
}

OptimConfig make_config(const py::kwargs& kwargs) {
  OptimConfig cfg;
  for (const auto& item : kwargs)
    cfg.set(py::str(item.first), py::str(item.second));
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_cellshape, m) {
  m.doc() = "Gradient-penalized shape optimization of elastic composites";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<MeshError>(m, "MeshError", PyExc_RuntimeError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<Mesh>(m, "Mesh")
      .def_property_readonly("num_vertices", &Mesh::num_vertices)
      .def_property_readonly("num_triangles", &Mesh::num_triangles)
      .def_property_readonly("vertices", &vertex_array)
      .def_property_readonly("triangles", &triangle_array)
      .def_property_readonly("subdomain", &Mesh::subdomain)
      .def_property_readonly("num_interface_edges",
                             [](const Mesh& mesh) { return mesh.interface_edges().size(); })
      .def("quality",
           [](const Mesh& mesh) {
             const auto q = mesh_quality(mesh);
             return py::make_tuple(q.max, q.median);
           },
           "(max, median) circumradius / inradius ratio")
      .def("volume", &compute_volume_objective)
      .def("perimeter", &compute_perimeter_objective);

  m.def("generate_mesh",
        [](int rows, int cols, double fraction, int refinements) {
          return generate_composite_domain(rows, cols, fraction, refinements).finest();
        },
        py::arg("rows") = 8, py::arg("cols") = 8, py::arg("cell_radius_fraction") = 0.3,
        py::arg("refinements") = 0);
  m.def("load_mesh", &load_mesh, py::arg("path"));
  m.def("save_mesh", &save_mesh, py::arg("path"), py::arg("mesh"));
  m.def("save_vtk", [](const std::filesystem::path& p, const Mesh& mesh) { save_vtk(p, mesh, {}); },
        py::arg("path"), py::arg("mesh"));

  py::class_<OptimConfig>(m, "Config")
      .def(py::init(&make_config), "Defaults, overridden by keyword arguments (same keys as the text format)")
      .def("set", [](OptimConfig& c, const std::string& k, py::object v) { c.set(k, py::str(v)); })
      .def("validate", &OptimConfig::validate)
      .def("to_dict", &OptimConfig::to_key_values);
  m.def("load_config", [](const std::filesystem::path& p) { return load_config(p); });

  py::class_<StepRecord>(m, "StepRecord")
      .def_readonly("step", &StepRecord::step)
      .def_property_readonly("objective", [](const StepRecord& r) { return objective_dict(r.objective); })
      .def_readonly("newton_iterations", &StepRecord::newton_iterations)
      .def_readonly("avg_linear_iterations", &StepRecord::avg_linear_iterations)
      .def_readonly("elasticity_iterations", &StepRecord::elasticity_iterations)
      .def_readonly("quality_max", &StepRecord::quality_max)
      .def_readonly("quality_median", &StepRecord::quality_median)
      .def_property_readonly("status", [](const StepRecord& r) { return to_string(r.status); })
      .def_readonly("message", &StepRecord::message);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("records", &RunResult::records)
      .def_readonly("completed_steps", &RunResult::completed_steps)
      .def_property_readonly("termination", [](const RunResult& r) { return to_string(r.termination); })
      .def_property_readonly("final_objective",
                             [](const RunResult& r) -> py::object {
                               if (!r.final_objective) return py::none();
                               return objective_dict(*r.final_objective);
                             })
      .def_property_readonly("final_mesh", [](const RunResult& r) { return r.final_hierarchy.finest(); });

  m.def("run_optimization",
        [](const OptimConfig& cfg, std::function<void(const StepRecord&)> observer) {
          py::gil_scoped_release release;
          StepObserver obs;
          if (observer)
            obs = [&observer](const StepRecord& r) {
              py::gil_scoped_acquire acquire;
              observer(r);
            };
          return run_optimization(cfg, obs);
        },
        py::arg("config"), py::arg("observer") = nullptr);

  m.def("gradient_check",
        [](int fields, int refinements, std::uint64_t seed) {
          GradientCheckOptions opts;
          opts.fields = fields;
          opts.refinements = refinements;
          opts.seed = seed;
          const auto r = run_gradient_check(opts);
          py::list out;
          for (const auto& f : r.fields) {
            py::dict d;
            d["analytic"] = f.analytic;
            d["finite_difference"] = f.finite_difference;
            d["relative_error"] = f.relative_error;
            out.append(d);
          }
          py::dict result;
          result["dofs"] = r.dofs;
          result["steps"] = r.steps;
          result["fields"] = out;
          return result;
        },
        py::arg("fields") = 10, py::arg("refinements") = 3, py::arg("seed") = 20240611);
}
