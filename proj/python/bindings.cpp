#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "obsfront/front1d.hpp"
#include "obsfront/geometry.hpp"
#include "obsfront/lotka.hpp"
#include "obsfront/scenario.hpp"
#include "obsfront/system.hpp"

namespace py = pybind11;
using namespace obsfront;

namespace {

// pybind11 holders cannot be const-qualified.
using MutObstacle = std::shared_ptr<Obstacle>;
MutObstacle mut(ObstaclePtr p) { return std::const_pointer_cast<Obstacle>(p); }

py::array_t<double> to_numpy(const Vec& v) {
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::object witness(const GeoVerdict& g) {
  if (!g.witness) return py::none();
  return py::make_tuple(g.witness->x, g.witness->y);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bistable fronts around obstacles: systems, planar fronts, geometry and pipelines";
  m.attr("__version__") = kVersion;

  static py::exception<Error> exc(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(exc, e.what());
    }
  });

  py::class_<SystemDef>(m, "SystemDef")
      .def_property_readonly("name", &SystemDef::name)
      .def_property_readonly("m", &SystemDef::m)
      .def_property_readonly("diffusion", &SystemDef::D);

  m.def("cubic_pair", [](double a, int comps) { return cubic_pair(a, comps); }, py::arg("a"), py::arg("m") = 2);
  m.def("lv_system", [](double k1, double k2, double r, double d) { return lv_system({k1, k2, r, d}); },
        py::arg("k1"), py::arg("k2"), py::arg("r"), py::arg("d"));
  m.def("eval_field", [](const SystemDef& s, const Vec& u) { return eval_field(s, u); });

  py::class_<FrontProfile>(m, "FrontProfile")
      .def_property_readonly("c", &FrontProfile::c)
      .def_property_readonly("h", &FrontProfile::h)
      .def_property_readonly("m", &FrontProfile::m)
      .def_readonly("residual", &FrontProfile::residual)
      .def_readonly("strictly_increasing", &FrontProfile::strictly_increasing)
      .def_property_readonly("xi",
                             [](const FrontProfile& f) {
                               Vec x(static_cast<std::size_t>(f.size()));
                               for (int j = 0; j < f.size(); ++j) x[j] = f.xi(j);
                               return to_numpy(x);
                             })
      .def("values", [](const FrontProfile& f, int i) { return to_numpy(f.values(i)); })
      .def("__call__", [](const FrontProfile& f, int i, double xi) { return f.value(i, xi); });

  m.def(
      "solve_planar_front",
      [](const SystemDef& s, double h, double half_width) {
        FrontOptions o;
        o.h = h;
        o.half_width = half_width;
        py::gil_scoped_release nogil;
        return solve_planar_front(s, o);
      },
      py::arg("system"), py::arg("h") = 0.05, py::arg("half_width") = 0.0);

  py::class_<LVSpeedConditions>(m, "LVConditions")
      .def_readonly("P1", &LVSpeedConditions::P1)
      .def_readonly("P2", &LVSpeedConditions::P2)
      .def_readonly("P3", &LVSpeedConditions::P3)
      .def_readonly("P4", &LVSpeedConditions::P4)
      .def_property_readonly("any", &LVSpeedConditions::any);
  m.def("lv_speed_conditions",
        [](double k1, double k2, double r, double d) { return lv_speed_conditions({k1, k2, r, d}); });
  m.def("lv_transform", [](std::array<double, 2> u) { return lv_transform(u); });

  py::class_<Obstacle, MutObstacle>(m, "Obstacle")
      .def("phi", [](const Obstacle& o, double x, double y) { return o.phi({x, y}); })
      .def_property_readonly("bound_radius", &Obstacle::bound_radius)
      .def_property_readonly("label", &Obstacle::label);
  m.def("make_disk", [](double r) { return mut(make_disk(r)); });
  m.def("make_ellipse", [](double a, double b) { return mut(make_ellipse(a, b)); });
  m.def("make_rectangle", [](double w, double h) { return mut(make_rectangle(w, h)); });
  m.def("make_annulus_channel", [](double a, double b, double s) { return mut(make_annulus_channel(a, b, s)); }, py::arg("r_in"), py::arg("r_out"), py::arg("slit"));

  m.def(
      "is_star_shaped",
      [](MutObstacle o, double cx, double cy) {
        const auto g = is_star_shaped(*o, {cx, cy});
        return py::make_tuple(std::string(to_string(g.verdict)), witness(g));
      },
      py::arg("obstacle"), py::arg("cx") = 0.0, py::arg("cy") = 0.0);
  m.def(
      "is_directionally_convex",
      [](MutObstacle o, double ex, double ey, double l) {
        const auto g = is_directionally_convex(*o, {ex, ey}, l);
        return py::make_tuple(std::string(to_string(g.verdict)), witness(g));
      },
      py::arg("obstacle"), py::arg("ex") = 1.0, py::arg("ey") = 0.0, py::arg("l") = 0.0);

  m.def(
      "mask_summary",
      [](MutObstacle o, double half, double h) {
        const auto g = make_mask(o, {-half, half, -half, half}, h);
        py::dict d;
        d["nx"] = g.nx;
        d["ny"] = g.ny;
        d["fluid"] = g.fluid_count;
        d["ghost"] = static_cast<int>(g.ghosts.size());
        return d;
      },
      py::arg("obstacle"), py::arg("half"), py::arg("h"));

  m.def(
      "build_zeta",
      [](MutObstacle o, double half, double h, double eta, double dbar) {
        const auto g = make_mask(o, {-half, half, -half, half}, h);
        const auto z = build_zeta(g, eta, dbar);
        py::dict d;
        d["chat"] = z.chat;
        d["min"] = z.min_value;
        d["sup"] = z.sup_value;
        d["normal_min"] = z.normal_deriv_min;
        d["normal_max"] = z.normal_deriv_max;
        d["ratio_analytic"] = z.max_ratio_analytic;
        d["ratio_grid"] = z.max_ratio_grid;
        return d;
      },
      py::arg("obstacle"), py::arg("half"), py::arg("h"), py::arg("eta"), py::arg("dbar") = 1.0);

  m.def("run_pipeline", [](const std::string& config, const std::string& pipeline,
                           const std::vector<std::string>& overrides, const std::string& out, bool assert_verdicts) {
    PipelineResult r;
    {
      py::gil_scoped_release nogil;
      r = run_pipeline_file(config, pipeline, overrides, out, assert_verdicts);
    }
    return py::make_tuple(r.exit_code, r.summary.dump());
  });
}
