#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>

#include "luxsched/oracle.hpp"
#include "luxsched/sim.hpp"

namespace py = pybind11;
using namespace luxsched;

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

LinearImage to_image(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw DimensionMismatchError("expected an H x W x 3 array");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  return LinearImage(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

ScalarMap to_map(const Array& a) {
  if (a.ndim() != 2) throw DimensionMismatchError("expected an H x W array");
  return ScalarMap(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
                   std::vector<double>(a.data(), a.data() + a.size()));
}

template <int C>
Array to_array(const Raster<C>& r) {
  std::vector<py::ssize_t> shape{r.height(), r.width()};
  if (C > 1) shape.push_back(C);
  Array out(shape);
  std::copy(r.data().begin(), r.data().end(), out.mutable_data());
  return out;
}

Decomposition to_decomposition(const Array& ambient, const Array& light_map, std::array<double, 3> color) {
  Decomposition d;
  d.ambient = to_image(ambient);
  d.light_map = to_map(light_map);
  d.light_color = color;
  return d;
}

IntensityGrid grid_or_default(const std::optional<std::vector<double>>& levels, std::size_t count) {
  if (levels) return IntensityGrid(*levels);
  if (count == 11) return IntensityGrid{};
  if (count == 1) return IntensityGrid({0.0});
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = static_cast<double>(i) / static_cast<double>(count - 1);
  return IntensityGrid(v);
}

CostTensors to_costs(const Array& unary, const Array& pairwise, const std::optional<std::vector<double>>& grid) {
  if (unary.ndim() != 2) throw DimensionMismatchError("unary must be T x K");
  const auto frames = static_cast<std::size_t>(unary.shape(0));
  const auto levels = static_cast<std::size_t>(unary.shape(1));
  if (pairwise.ndim() != 3 || static_cast<std::size_t>(pairwise.shape(0)) + 1 != frames ||
      static_cast<std::size_t>(pairwise.shape(1)) != levels || static_cast<std::size_t>(pairwise.shape(2)) != levels) {
    throw DimensionMismatchError("pairwise must be (T-1) x K x K");
  }
  return CostTensors(grid_or_default(grid, levels), frames,
                     std::vector<double>(unary.data(), unary.data() + unary.size()),
                     std::vector<double>(pairwise.data(), pairwise.data() + pairwise.size()));
}

py::dict schedule_dict(const Schedule& s) {
  py::dict d;
  d["assignment"] = s.assignment;
  d["total_energy"] = s.total_energy;
  d["mean_intensity"] = s.mean_intensity;
  d["mean_power"] = s.mean_power;
  return d;
}

Eigen::MatrixXd to_points(const Array& a) {
  if (a.ndim() != 2) throw DimensionMismatchError("positions must be N x d");
  Eigen::MatrixXd m(a.shape(1), a.shape(0));
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j) m(j, i) = a.at(i, j);
  return m;
}

EnergyModel make_model(double lambda_d, double lambda_p, double lambda_m, double lambda_s,
                       const std::optional<std::vector<double>>& grid) {
  EnergyModel m;
  m.lambda_d = lambda_d;
  m.lambda_p = lambda_p;
  m.lambda_m = lambda_m;
  m.lambda_s = lambda_s;
  if (grid) m.grid = IntensityGrid(*grid);
  m.validate();
  return m;
}

}  // namespace

PYBIND11_MODULE(_luxsched, m) {
  m.doc() = "Relighting, optimal light schedules and trajectory metrics";

  auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  (void)validation;

  m.def(
      "relight",
      [](const Array& ambient, const Array& light_map, std::array<double, 3> color, double k) {
        return to_array(relight(to_decomposition(ambient, light_map, color), k));
      },
      py::arg("ambient"), py::arg("light_map"), py::arg("light_color"), py::arg("k"),
      "Pre-clip radiance A + k * (S x C).");
  m.def(
      "clip_sensor", [](const Array& img) { return to_array(clip_sensor(to_image(img))); }, py::arg("image"));
  m.def(
      "decompose_paired",
      [](const Array& i1, double k1, const Array& i2, double k2, double saturation_level) {
        DecomposeOptions opt;
        opt.saturation_level = saturation_level;
        const Decomposition d = decompose_paired(to_image(i1), k1, to_image(i2), k2, opt);
        return py::make_tuple(to_array(d.ambient), to_array(d.light_map), d.light_color);
      },
      py::arg("i1"), py::arg("k1"), py::arg("i2"), py::arg("k2"), py::arg("saturation_level") = 1.0,
      "Returns (ambient, light_map, light_color).");
  m.def(
      "psnr", [](const Array& a, const Array& b) { return psnr(to_image(a), to_image(b)); }, py::arg("a"),
      py::arg("b"));
  m.def(
      "ssim", [](const Array& a, const Array& b) { return ssim(to_image(a), to_image(b)); }, py::arg("a"),
      py::arg("b"));
  m.def(
      "luminance_stats",
      [](const Array& img) {
        const LuminanceStats s = luminance_stats(to_image(img));
        py::dict d;
        d["mean_luminance"] = s.mean_luminance;
        d["saturated_fraction"] = s.saturated_fraction;
        d["dark_fraction"] = s.dark_fraction;
        d["gradient_energy"] = s.gradient_energy;
        return d;
      },
      py::arg("image"));
  m.def(
      "matching_score", [](const Array& a, const Array& b) { return matching_score(to_image(a), to_image(b)); },
      py::arg("a"), py::arg("b"));
  m.def(
      "power", [](double k) { return PowerModel{}(k); }, py::arg("k"), "Lamp power in watts at fraction k.");

  m.def(
      "build_cost_tensors",
      [](const Array& frames, double lambda_d, double lambda_p, double lambda_m, double lambda_s,
         const std::optional<std::vector<double>>& grid) {
        if (frames.ndim() != 5 || frames.shape(4) != 3) throw DimensionMismatchError("frames must be T x K x H x W x 3");
        const EnergyModel model = make_model(lambda_d, lambda_p, lambda_m, lambda_s, grid);
        if (static_cast<std::size_t>(frames.shape(1)) != model.grid.size()) {
          throw DimensionMismatchError("frames must hold one image per grid level");
        }
        const auto h = static_cast<int>(frames.shape(2));
        const auto w = static_cast<int>(frames.shape(3));
        const std::size_t per_image = static_cast<std::size_t>(w) * h * 3;
        const double* base = frames.data();
        const std::size_t levels = model.grid.size();
        FrameSource source = [&](std::size_t t, std::size_t k) {
          const double* p = base + (t * levels + k) * per_image;
          return LinearImage(w, h, std::vector<double>(p, p + per_image));
        };
        CostTensors c;
        {
          py::gil_scoped_release release;
          c = build_cost_tensors(model, static_cast<std::size_t>(frames.shape(0)), source);
        }
        const auto t = static_cast<py::ssize_t>(c.frames());
        const auto k = static_cast<py::ssize_t>(c.levels());
        Array unary({t, k});
        Array pairwise({std::max<py::ssize_t>(t - 1, 0), k, k});
        std::copy(c.unary_values().begin(), c.unary_values().end(), unary.mutable_data());
        std::copy(c.pairwise_values().begin(), c.pairwise_values().end(), pairwise.mutable_data());
        return py::make_tuple(unary, pairwise);
      },
      py::arg("frames"), py::arg("lambda_d") = 1.0, py::arg("lambda_p") = 0.02, py::arg("lambda_m") = 1.0,
      py::arg("lambda_s") = 0.1, py::arg("grid") = py::none(), "Returns (unary, pairwise) cost arrays.");

  m.def(
      "solve_ois",
      [](const Array& unary, const Array& pairwise, const std::optional<std::vector<double>>& grid) {
        return schedule_dict(solve_ois(to_costs(unary, pairwise, grid)));
      },
      py::arg("unary"), py::arg("pairwise"), py::arg("grid") = py::none());
  m.def(
      "brute_force_ois",
      [](const Array& unary, const Array& pairwise, const std::optional<std::vector<double>>& grid) {
        return schedule_dict(brute_force_ois(to_costs(unary, pairwise, grid)));
      },
      py::arg("unary"), py::arg("pairwise"), py::arg("grid") = py::none());
  m.def(
      "evaluate_schedule",
      [](const Array& unary, const Array& pairwise, const std::vector<std::size_t>& assignment) {
        return evaluate_schedule(to_costs(unary, pairwise, std::nullopt), assignment);
      },
      py::arg("unary"), py::arg("pairwise"), py::arg("assignment"));

  m.def(
      "ate_rmse", [](const Array& gt, const Array& pred, bool align) { return ate_rmse(to_points(gt), to_points(pred), align); },
      py::arg("gt"), py::arg("pred"), py::arg("align") = true);
  m.def("trajectory_ratio", &trajectory_ratio, py::arg("pred_length"), py::arg("gt_length"));
  m.def("weighted_rmse", &weighted_rmse, py::arg("ate"), py::arg("ratio"));

  py::class_<Sequence>(m, "Sequence", "A generated synthetic sequence.")
      .def_static(
          "harsh", [](std::uint64_t seed) { return generate_sequence(harsh_scene(seed)); }, py::arg("seed") = 1,
          "The reference scene with a dark stretch and a specular patch.")
      .def_property_readonly("length", &Sequence::length)
      .def_property_readonly("poses",
                             [](const Sequence& s) {
                               Array out({static_cast<py::ssize_t>(s.poses.size()), py::ssize_t{3}});
                               auto v = out.mutable_unchecked<2>();
                               for (std::size_t i = 0; i < s.poses.size(); ++i) {
                                 const auto r = static_cast<py::ssize_t>(i);
                                 v(r, 0) = s.poses[i].x;
                                 v(r, 1) = s.poses[i].y;
                                 v(r, 2) = s.poses[i].theta;
                               }
                               return out;
                             })
      .def(
          "render", [](const Sequence& s, std::size_t t, double k) { return to_array(render_observation(s, t, k)); },
          py::arg("t"), py::arg("k"), "Camera output at frame t and light fraction k.")
      .def(
          "compare",
          [](const Sequence& s) {
            const Comparison cmp = compare_controllers(s, EnergyModel{}, nullptr);
            py::dict out;
            for (const auto& mr : cmp.methods) {
              py::dict d;
              d["C"] = mr.score.trajectory.trajectory_ratio;
              d["wrmse"] = mr.score.trajectory.wrmse;
              d["ate"] = mr.score.trajectory.ate_rmse;
              d["energy"] = mr.energy;
              d["power_w"] = mr.score.mean_power;
              d["executed"] = mr.executed;
              out[py::str(mr.name)] = d;
            }
            return out;
          },
          "Fixed 0%, fixed 100% and oracle replay through the tracking proxy.");
}
