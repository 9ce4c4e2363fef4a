// SPDX-License-Identifier: Apache-2.0
// Python bindings. Structured results cross the boundary as canonical JSON
// text and are decoded on the Python side.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "uvtranse/cli.hpp"
#include "uvtranse/errors.hpp"
#include "uvtranse/evaluation.hpp"
#include "uvtranse/geometry.hpp"
#include "uvtranse/language_model.hpp"
#include "uvtranse/visual_model.hpp"

namespace py = pybind11;
using namespace uvt;

namespace {

using BoxTuple = std::tuple<double, double, double, double>;

Box to_box(const BoxTuple& t) { return {std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t)}; }

RunConfig config_from(const std::string& config_json) {
  RunConfig cfg;
  const Json j = Json::parse(config_json);
  if (j.contains("profile")) cfg.apply_profile(j.at("profile").get<std::string>());
  cfg.merge_json(j);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "UVTransE visual relationship detection core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<IndexError>(m, "IndexError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());

  m.def("iou", [](const BoxTuple& a, const BoxTuple& b) { return iou(to_box(a), to_box(b)); });
  m.def("union_box", [](const BoxTuple& a, const BoxTuple& b) {
    const Box u = union_box(to_box(a), to_box(b));
    return BoxTuple{u.x, u.y, u.w, u.h};
  });
  m.def("box_location_feature", [](const BoxTuple& b, double w, double h) {
    return box_location_feature(to_box(b), {w, h});
  });
  m.def("pair_location_feature", [](const BoxTuple& s, const BoxTuple& o, double w, double h) {
    return pair_location_feature(to_box(s), to_box(o), {w, h});
  });
  m.def("triplet_location_vector", [](const BoxTuple& s, const BoxTuple& o, double w, double h) {
    return triplet_location_vector(to_box(s), to_box(o), {w, h});
  });

  m.def("triplet_score", [](double zs, double zo, double zp, const std::string& mode) {
    return triplet_score(zs, zo, zp, parse_score_mode(mode));
  }, py::arg("z_s"), py::arg("z_o"), py::arg("z_p"), py::arg("mode") = "sum");
  m.def("combined_score", [](double zs, double zo, double zp, double zl, double alpha, const std::string& mode) {
    return combined_score(zs, zo, zp, zl, alpha, parse_score_mode(mode));
  }, py::arg("z_s"), py::arg("z_o"), py::arg("z_p"), py::arg("z_l"), py::arg("alpha"), py::arg("mode") = "sum");
  m.def("attribute_score", &attribute_score);
  m.def("open_images_score", &open_images_score);
  m.def("average_precision", &average_precision);

  m.def("_train", [](const std::string& cfg, const std::string& out) {
    return canonical_dump(cmd_train(config_from(cfg), out));
  });
  m.def("_evaluate", [](const std::string& cfg, const std::string& checkpoint) {
    auto c = config_from(cfg);
    c.checkpoint = checkpoint;
    return canonical_dump(cmd_eval(c));
  });
  m.def("_predict", [](const std::string& cfg, const std::string& checkpoint) {
    auto c = config_from(cfg);
    c.checkpoint = checkpoint;
    return canonical_dump(cmd_predict(c));
  });
  m.def("_synth", [](const std::string& cfg, const std::string& out_dir) {
    return canonical_dump(cmd_synth(config_from(cfg), out_dir));
  });
  m.def("_gradcheck", [](const std::string& cfg) { return canonical_dump(cmd_gradcheck(config_from(cfg))); });
  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv{"uvtranse"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, "Run the command-line interface in-process; returns (exit_code, stdout, stderr).");
}
