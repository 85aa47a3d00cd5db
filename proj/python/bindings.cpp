#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "crossadapt/commands.hpp"
#include "crossadapt/config.hpp"
#include "crossadapt/error.hpp"
#include "crossadapt/metrics.hpp"
#include "crossadapt/modes.hpp"
#include "crossadapt/projection.hpp"
#include "crossadapt/shift.hpp"

namespace py = pybind11;
using namespace crossadapt;
using nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

linalg::Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::Shape, "expected a 2-D array");
  return linalg::Matrix(a.shape(0), a.shape(1), to_vector(a));
}

Array from_matrix(const linalg::Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

config::RunConfig parse(const std::string& config_json, const std::vector<std::string>& overrides) {
  return config::parse_config(json::parse(config_json), std::nullopt, overrides);
}

std::string run_modes(const std::string& config_json, const std::vector<std::string>& overrides) {
  py::gil_scoped_release release;
  const auto cfg = parse(config_json, overrides);
  json runs = json::array();
  for (auto seed : cfg.seeds) {
    auto seeded = cfg;
    if (seeded.data.synthetic) seeded.data.synthetic->seed = seed;
    const auto loaded = commands::load_data(seeded);
    const auto teacher = modes::train_teacher(loaded.splits, loaded.pre.schema, cfg.pipeline, seed);
    const auto teacher_report = metrics::evaluate(teacher.teacher, loaded.splits.test());
    for (auto mode : cfg.modes) {
      auto summary = modes::run_mode(mode, loaded.splits, teacher.teacher, cfg.pipeline, seed).summary();
      summary["seed"] = seed;
      summary["teacher_test"] = teacher_report.to_json();
      runs.push_back(std::move(summary));
    }
  }
  return runs.dump();
}

std::string shift_report(const std::string& config_json, const std::vector<std::string>& overrides) {
  py::gil_scoped_release release;
  const auto cfg = parse(config_json, overrides);
  const auto loaded = commands::load_data(cfg);
  return shift::compute_shift(loaded.splits.train(), loaded.pre.schema, cfg.pipeline.shift).to_json().dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "CrossAdapt core bindings";

  static py::handle error_type = PyErr_NewException("crossadapt._core.CrossAdaptError", PyExc_RuntimeError, nullptr);
  m.attr("CrossAdaptError") = error_type;
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("kind") = to_string(e.kind());
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("auc", [](const Array& p, const Array& y) { return metrics::auc(to_vector(p), to_vector(y)); },
        py::arg("preds"), py::arg("labels"));
  m.def("logloss", [](const Array& p, const Array& y) { return metrics::logloss(to_vector(p), to_vector(y)); },
        py::arg("preds"), py::arg("labels"));
  m.def(
      "spearman",
      [](const Array& x, const Array& y, bool pearson) {
        return metrics::spearman(to_vector(x), to_vector(y),
                                 pearson ? metrics::SpearmanMethod::PearsonOnRanks
                                         : metrics::SpearmanMethod::RankDifference);
      },
      py::arg("xs"), py::arg("ys"), py::arg("pearson_on_ranks") = false);
  m.def(
      "ndcg_at_k",
      [](const Array& pred, const Array& ideal, std::size_t k) {
        return metrics::ndcg_at_k(to_vector(pred), to_vector(ideal), k);
      },
      py::arg("predicted"), py::arg("ideal"), py::arg("k"));
  m.def(
      "pcvr_bias",
      [](const Array& pred, const Array& actual) {
        const auto b = metrics::pcvr_bias(to_vector(pred), to_vector(actual));
        return py::make_tuple(b.value, b.items, b.excluded_items);
      },
      py::arg("predicted_rates"), py::arg("actual_rates"));

  m.def(
      "divergence",
      [](const Array& p, const Array& q, const std::string& metric, double bin_width) {
        return shift::divergence(to_vector(p), to_vector(q), shift::parse_metric(metric), bin_width);
      },
      py::arg("p"), py::arg("q"), py::arg("metric") = "js", py::arg("bin_width") = 1.0);
  m.def("enhancement_ratio", &shift::enhancement_ratio, py::arg("delta"), py::arg("theta_low") = 0.01,
        py::arg("theta_high") = 0.05, py::arg("k") = 0.1);

  m.def(
      "build_plan",
      [](const Array& table, std::size_t d_s, std::uint64_t seed) {
        return projection::build_plan(to_matrix(table), d_s, seed).to_json().dump();
      },
      py::arg("table"), py::arg("d_s"), py::arg("seed") = 0);
  m.def(
      "apply_plan",
      [](const Array& table, const std::string& plan) {
        return from_matrix(projection::apply_plan(to_matrix(table), projection::ProjectionPlan::from_json(json::parse(plan))));
      },
      py::arg("table"), py::arg("plan"));
  m.def(
      "gram_error",
      [](const Array& table, const std::string& plan) {
        const auto e = projection::gram_error(to_matrix(table), projection::ProjectionPlan::from_json(json::parse(plan)));
        return py::make_tuple(e.measured, e.predicted);
      },
      py::arg("table"), py::arg("plan"));
  m.def(
      "random_projection_baseline",
      [](const Array& table, std::size_t d_s, std::size_t trials, std::uint64_t seed) {
        return projection::random_projection_baseline(to_matrix(table), d_s, trials, seed);
      },
      py::arg("table"), py::arg("d_s"), py::arg("trials"), py::arg("seed") = 0);

  m.def(
      "default_config",
      [](const std::string& profile) { return config::default_config_json(config::parse_profile(profile)).dump(); },
      py::arg("profile") = "desk");
  m.def("resolve_config",
        [](const std::string& cfg, const std::vector<std::string>& overrides) {
          return parse(cfg, overrides).to_json().dump();
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{});
  m.def("run_modes", &run_modes, py::arg("config"), py::arg("overrides") = std::vector<std::string>{});
  m.def("shift_report", &shift_report, py::arg("config"), py::arg("overrides") = std::vector<std::string>{});
}
