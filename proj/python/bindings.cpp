// SPDX-License-Identifier: Apache-2.0
//
// Python bindings: numpy in, numpy out.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kprune/io.hpp"
#include "kprune/koopman.hpp"
#include "kprune/pruning.hpp"
#include "kprune/runner.hpp"

#include <sstream>

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
using namespace kprune;

namespace {

PruneMask mask_from_array(const std::vector<std::uint8_t>& m) {
  PruneMask p;
  p.m = m;
  p.layer_map = LayerMap::single(m.size());
  return p;
}

Compression compression(double c) { return Compression(c); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Koopman mode decomposition of training trajectories and Koopman-based pruning";

  py::register_exception<Error>(m, "KpruneError", PyExc_RuntimeError);

  m.def(
      "reduced_svd",
      [](const Eigen::MatrixXd& x, double sv_floor) {
        const SvdResult s = reduced_svd(DenseMatrix(x), sv_floor);
        return py::make_tuple(s.Q.eigen(), s.sigma, s.V.eigen());
      },
      py::arg("x"), py::arg("sv_floor") = kDefaultSvFloor,
      "Reduced SVD (Q, sigma, V) by the method of snapshots.");

  m.def(
      "pseudoinverse",
      [](const Eigen::MatrixXd& x, double sv_floor) {
        return pseudoinverse(DenseMatrix(x), sv_floor).eigen();
      },
      py::arg("x"), py::arg("sv_floor") = kDefaultSvFloor);

  py::class_<KoopmanTriplet>(m, "KoopmanTriplet")
      .def_readonly("eigenvalue", &KoopmanTriplet::lambda)
      .def_readonly("amplitude", &KoopmanTriplet::amplitude)
      .def_readonly("mode", &KoopmanTriplet::mode)
      .def_readonly("scaled_mode", &KoopmanTriplet::scaled_mode)
      .def_readonly("norm", &KoopmanTriplet::norm);

  py::class_<KoopmanDecomposition>(m, "KoopmanDecomposition")
      .def_readonly("triplets", &KoopmanDecomposition::triplets)
      .def_readonly("rank", &KoopmanDecomposition::rank)
      .def_readonly("consistency_residual", &KoopmanDecomposition::consistency_residual)
      .def_readonly("amplitude_residual", &KoopmanDecomposition::amplitude_residual)
      .def_property_readonly("eigenvalues", [](const KoopmanDecomposition& d) {
        std::vector<cdouble> out;
        for (const auto& t : d.triplets) out.push_back(t.lambda);
        return out;
      });

  m.def(
      "decompose",
      [](const Eigen::MatrixXd& snapshots, double sv_floor, bool projected) {
        DmdOptions opts;
        opts.sv_floor = sv_floor;
        opts.modes = projected ? ModeKind::Projected : ModeKind::Exact;
        return decompose(SnapshotMatrix(DenseMatrix(snapshots)), opts);
      },
      py::arg("snapshots"), py::arg("sv_floor") = kDefaultSvFloor, py::arg("projected") = false,
      "Exact DMD of a snapshot matrix whose columns are theta(0) .. theta(tau).");

  m.def(
      "fixed_point",
      [](const KoopmanDecomposition& d, double lambda_tol) {
        return predicted_fixed_point(d, lambda_tol).theta;
      },
      py::arg("decomposition"), py::arg("lambda_tol") = kDefaultLambdaTol);

  m.def("decaying_modes", &decaying_modes, py::arg("decomposition"),
        py::arg("norm_floor") = kDefaultNormFloor, py::arg("lambda_tol") = kDefaultLambdaTol);
  m.def("extrapolate", &extrapolate, py::arg("decomposition"), py::arg("t"));

  m.def(
      "global_mask",
      [](const Eigen::VectorXd& scores, double c) {
        return global_mask(ScoreVector(scores, Strategy::Gmp), compression(c),
                           LayerMap::single(static_cast<std::size_t>(scores.size())))
            .m;
      },
      py::arg("scores"), py::arg("c"), "Keep the ceil(N/c) highest scores; returns a 0/1 list.");

  m.def(
      "kgp_scores",
      [](const KoopmanDecomposition& d, std::size_t top_k, double norm_floor, double lambda_tol) {
        return score_kgp(decaying_modes(d, norm_floor, lambda_tol), KgpOptions{top_k}).scores;
      },
      py::arg("decomposition"), py::arg("top_k") = 1, py::arg("norm_floor") = kDefaultNormFloor,
      py::arg("lambda_tol") = kDefaultLambdaTol);

  m.def(
      "mask_overlap",
      [](const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
        return mask_overlap(mask_from_array(a), mask_from_array(b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "run_experiment",
      [](const std::string& config_text, const std::string& out_dir) {
        std::istringstream in(config_text);
        ExperimentConfig cfg = parse_config(in);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        ExperimentResult res;
        {
          py::gil_scoped_release release;
          res = run_experiment(cfg);
          write_outputs(res, cfg, cfg.out_dir);
        }
        py::list rows;
        for (const RunRecord& r : res.records) {
          py::dict d;
          d["seed"] = r.seed;
          d["epoch"] = r.epoch;
          d["strategy"] = to_string(r.strategy);
          d["c"] = r.compression;
          d["status"] = r.status;
          d["kept"] = r.kept;
          d["accuracy_unpruned"] = r.accuracy_unpruned;
          d["accuracy_pruned"] = r.accuracy_pruned;
          d["accuracy_refined"] = r.accuracy_refined;
          rows.append(d);
        }
        return rows;
      },
      py::arg("config_text"), py::arg("out_dir") = "",
      "Run a config given as text; writes the CSV outputs and returns the records.");

  m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
}
