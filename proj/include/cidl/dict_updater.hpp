#pragma once

#include <cidl/core_model.hpp>

#include <optional>
#include <vector>

namespace cidl {

struct DictUpdateOptions {
  int max_iters = 200;
  double rel_tol = 1e-9;
  /// Backtracking factor applied to the step when the majorization check fails.
  double shrink = 0.5;
  /// Uniform step override; by default each column gets its own step from a
  /// diagonal majorizer of the Hessian.
  std::optional<double> initial_step;

  void validate() const;
  bool operator==(const DictUpdateOptions&) const = default;
};

struct DictUpdateResult {
  Dictionary dictionary;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
};

/// ||Y - Phi A||_F^2 + kappa penalties, with A used as the K x P matrix.
double dict_objective(const Eigen::Ref<const MatrixXd>& phi, const DataCube& y,
                      const CoefficientMaps& a, const Eigen::Ref<const MatrixXd>& phi_prev,
                      const Kappas& kappas);

/// Gradient of dict_objective with respect to Phi:
///   2 (Phi A - Y) A^T + 2 k1 Phi + 2 k2 (Phi - Phi_prev) + k3 Phi (J - I).
MatrixXd dict_gradient(const Eigen::Ref<const MatrixXd>& phi, const DataCube& y,
                       const CoefficientMaps& a, const Eigen::Ref<const MatrixXd>& phi_prev,
                       const Kappas& kappas);

/// Minimizes dict_objective over Phi >= 0, starting from phi_prev.
/// `objective_trace`, when given, receives the objective after every iteration.
DictUpdateResult update_dictionary(const DataCube& y, const CoefficientMaps& a,
                                   const Dictionary& phi_prev, const ModelParams& params,
                                   const DictUpdateOptions& opts = {},
                                   std::vector<double>* objective_trace = nullptr);

} // namespace cidl
