// Python surface of the laboratory: graph builders, kernel operators,
// loss functions, the training flow, and the linear probe.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ssllab/dynamics.hpp"
#include "ssllab/errors.hpp"
#include "ssllab/graph.hpp"
#include "ssllab/kernel.hpp"
#include "ssllab/losses.hpp"
#include "ssllab/probe.hpp"
#include "ssllab/types.hpp"

namespace py = pybind11;
using namespace ssllab;

PYBIND11_MODULE(_ssllab, m) {
  m.doc() = "augmentation-graph laboratory core";
  m.attr("__version__") = kVersion;

  py::register_exception<validation_error>(m, "ValidationError",
                                           PyExc_ValueError);
  py::register_exception<numeric_error>(m, "NumericError",
                                        PyExc_ArithmeticError);

  py::class_<AugmentationGraph>(m, "AugmentationGraph")
      .def(py::init<>())
      .def_readwrite("cond", &AugmentationGraph::cond)
      .def_readwrite("image_prior", &AugmentationGraph::image_prior)
      .def_readwrite("labels", &AugmentationGraph::labels)
      .def_readwrite("groups", &AugmentationGraph::groups)
      .def_property_readonly("n_images", &AugmentationGraph::n_images)
      .def_property_readonly("n_views", &AugmentationGraph::n_views)
      .def("validate", &AugmentationGraph::validate);

  py::class_<KernelMatrix>(m, "KernelMatrix")
      .def_readwrite("w", &KernelMatrix::w)
      .def_readwrite("marginal", &KernelMatrix::marginal)
      .def_readwrite("normalized", &KernelMatrix::normalized);

  py::class_<KernelOperator>(m, "KernelOperator")
      .def_readonly("matrix", &KernelOperator::matrix)
      .def_readonly("in_measure", &KernelOperator::in_measure)
      .def_readonly("out_measure", &KernelOperator::out_measure)
      .def("adjoint", &KernelOperator::adjoint)
      .def("compose", &KernelOperator::compose);

  py::class_<SpectralDecomposition>(m, "SpectralDecomposition")
      .def_readonly("eigenvalues", &SpectralDecomposition::eigenvalues)
      .def_readonly("eigenvectors", &SpectralDecomposition::eigenvectors)
      .def_readonly("measure", &SpectralDecomposition::measure);

  py::class_<FeatureMap>(m, "FeatureMap")
      .def(py::init([](Matrix w) { return FeatureMap{std::move(w)}; }))
      .def_readwrite("weights", &FeatureMap::weights);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("times", &Trajectory::times)
      .def_readonly("steps", &Trajectory::steps)
      .def_readonly("weights", &Trajectory::weights)
      .def_readonly("modes", &Trajectory::modes)
      .def_readonly("loss_values", &Trajectory::loss_values)
      .def_readonly("mode_eigenvalues", &Trajectory::mode_eigenvalues);

  py::class_<CollapseResult>(m, "CollapseResult")
      .def_readonly("trajectory", &CollapseResult::trajectory)
      .def_readonly("effective_rank", &CollapseResult::effective_rank)
      .def_readonly("alignment", &CollapseResult::alignment);

  py::class_<ProbeResult>(m, "ProbeResult")
      .def_readonly("accuracy", &ProbeResult::accuracy)
      .def_readonly("weights", &ProbeResult::weights);

  py::enum_<WeightMode>(m, "WeightMode")
      .value("penalty", WeightMode::penalty)
      .value("projection", WeightMode::projection);

  // graph builders and statistics
  m.def("build_toy_graph", &build_toy_graph, py::arg("rho"), py::arg("mu"),
        py::arg("nu"), py::arg("delta"));
  m.def("toy_eigenvalues", &toy_eigenvalues, py::arg("rho"), py::arg("mu"),
        py::arg("nu"), py::arg("delta"));
  m.def("build_block_graph", &build_block_graph, py::arg("n_classes"),
        py::arg("groups_per_class"), py::arg("views_per_image"),
        py::arg("within_image"), py::arg("within_class"),
        py::arg("within_group"), py::arg("background"), py::arg("seed"),
        py::arg("jitter") = 0.0);
  m.def("random_graph", &random_graph, py::arg("n_images"), py::arg("n_views"),
        py::arg("seed"));
  m.def("random_symmetric_graph", &random_symmetric_graph, py::arg("n"),
        py::arg("seed"));
  m.def("vertex_marginals", &vertex_marginals);
  m.def("joint_matrix", &joint_matrix);
  m.def("adjacency", &adjacency);
  m.def("normalize", &normalize);
  m.def("empirical_joint_matrix", &empirical_joint_matrix, py::arg("g"),
        py::arg("m"), py::arg("seed"));
  m.def("empirical_adjacency", &empirical_adjacency, py::arg("g"), py::arg("m"),
        py::arg("seed"));

  // kernel operators
  m.def("forward_operator", &forward_operator);
  m.def("backward_kernel", &backward_kernel);
  m.def("kernel_operator", &kernel_operator);
  m.def("invariance_form", &invariance_form);
  m.def("spectral_decompose",
        py::overload_cast<const KernelOperator&>(&spectral_decompose));
  m.def("spectral_decompose",
        py::overload_cast<const KernelMatrix&>(&spectral_decompose));
  m.def("mercer_features", &mercer_features, py::arg("s"), py::arg("d"));
  m.def("subspace_alignment", &subspace_alignment, py::arg("f"), py::arg("g"));

  // losses
  py::enum_<PenaltyTarget>(m, "PenaltyTarget")
      .value("averaged", PenaltyTarget::averaged)
      .value("per_view", PenaltyTarget::per_view);

  py::class_<MultiViewParts>(m, "MultiViewParts")
      .def_readonly("invariance", &MultiViewParts::invariance)
      .def_readonly("penalty", &MultiViewParts::penalty)
      .def_readonly("distance_evaluations", &MultiViewParts::distance_evaluations)
      .def("total", &MultiViewParts::total);

  py::class_<SpectralContrastiveParts>(m, "SpectralContrastiveParts")
      .def_readonly("total", &SpectralContrastiveParts::total)
      .def_readonly("covariance", &SpectralContrastiveParts::covariance)
      .def_readonly("variance", &SpectralContrastiveParts::variance)
      .def_readonly("alignment", &SpectralContrastiveParts::alignment)
      .def_readonly("kappa", &SpectralContrastiveParts::kappa);

  m.def("idealized_loss", &idealized_loss, py::arg("f"), py::arg("k"));
  m.def("operator_invariance_loss", &operator_invariance_loss, py::arg("f"),
        py::arg("t"), py::arg("beta"));
  m.def("multi_aug_parts", &multi_aug_parts, py::arg("views"), py::arg("beta"),
        py::arg("target") = PenaltyTarget::averaged);
  m.def("multi_aug_loss", &multi_aug_loss, py::arg("views"), py::arg("beta"),
        py::arg("target") = PenaltyTarget::averaged);
  m.def("pairwise_parts", &pairwise_parts, py::arg("views"), py::arg("beta"),
        py::arg("target") = PenaltyTarget::averaged);
  m.def("pairwise_loss", &pairwise_loss, py::arg("views"), py::arg("beta"),
        py::arg("target") = PenaltyTarget::averaged);
  m.def("cross_covariance", &cross_covariance, py::arg("z1"), py::arg("z2"));
  m.def("barlow_twins_loss", &barlow_twins_loss, py::arg("z1"), py::arg("z2"),
        py::arg("beta"));
  m.def("vicreg_loss", &vicreg_loss, py::arg("z1"), py::arg("z2"),
        py::arg("mu"));
  m.def("spectral_contrastive_decomposition", &spectral_contrastive_decomposition,
        py::arg("z"), py::arg("w_bar"));

  // dynamics
  m.def("bt_gradient", &bt_gradient, py::arg("w"), py::arg("t"),
        py::arg("beta"));
  m.def("bt_matrix_loss", &bt_matrix_loss, py::arg("w"), py::arg("t"),
        py::arg("beta"));
  m.def("integrate", &integrate, py::arg("w0"), py::arg("t"), py::arg("eta"),
        py::arg("beta"), py::arg("steps"), py::arg("record_every"),
        py::arg("mode") = WeightMode::penalty);
  m.def("effective_rank", &effective_rank);
  m.def("collapse_experiment", &collapse_experiment, py::arg("g"), py::arg("d"),
        py::arg("beta"), py::arg("init_scale"), py::arg("seed"),
        py::arg("steps"), py::arg("mode") = WeightMode::penalty,
        py::arg("record_every") = 10, py::arg("eta") = 0.0);

  // evaluation
  m.def("linear_probe", &linear_probe, py::arg("features"), py::arg("labels"),
        py::arg("train_frac"), py::arg("seed"));
}
