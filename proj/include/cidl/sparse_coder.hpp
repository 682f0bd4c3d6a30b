#pragma once

#include <cidl/core_model.hpp>

#include <cstddef>
#include <optional>
#include <vector>

namespace cidl {

enum class StepRule { fixed_lipschitz, backtracking };

struct LassoSolverOptions {
  int max_iters = 500;
  /// Stop once a step taken without momentum lowers the objective by less than rel_tol * |F|.
  double rel_tol = 1e-8;
  /// Stop once the worst KKT violation drops below this (gradient units).
  double kkt_tol = 1e-6;
  StepRule step_rule = StepRule::fixed_lipschitz;

  void validate() const;
  bool operator==(const LassoSolverOptions&) const = default;
};

struct LassoResult {
  VectorXd coefficients;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
  double kkt_residual = 0.0;
};

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
double power_iteration(const MatrixXd& spd, int max_iters = 500, double tol = 1e-12);

/*
  Weighted non-negative lasso for a fixed dictionary

      min_{a >= 0}  1/(2 s) ||y - Phi a||^2 + lam^T a,      s = sigma_y^2

  in Gram form: 1/2 a^T G a - b^T a + c with G = Phi^T Phi / s,
  b = Phi^T y / s and c = ||y||^2 / (2 s). The Gram matrix and its Lipschitz
  constant are shared by every pixel of a sweep.

  The solver is monotone accelerated proximal gradient: a momentum step whose
  candidate is only accepted when it does not raise the objective, with a
  momentum restart otherwise. The prox of lam^T a + indicator(a >= 0) is
  max(0, v - step * lam).
*/
class LassoSystem {
public:
  LassoSystem(const Dictionary& phi, double sigma_y_sq);

  Index atoms() const { return gram_.rows(); }
  const MatrixXd& gram() const { return gram_; }
  double lipschitz() const { return lipschitz_; }
  double sigma_y_sq() const { return sigma_y_sq_; }

  /// `correlation` is Phi^T y / sigma_y^2 and `offset` is ||y||^2 / (2 sigma_y^2).
  LassoResult solve(const Eigen::Ref<const VectorXd>& correlation, double offset,
                    const Eigen::Ref<const VectorXd>& lam, const LassoSolverOptions& opts,
                    const VectorXd* warm_start = nullptr,
                    std::vector<double>* objective_trace = nullptr) const;

  double objective(const Eigen::Ref<const VectorXd>& correlation, double offset,
                   const Eigen::Ref<const VectorXd>& lam,
                   const Eigen::Ref<const VectorXd>& a) const;
  double kkt_residual(const Eigen::Ref<const VectorXd>& correlation,
                      const Eigen::Ref<const VectorXd>& lam,
                      const Eigen::Ref<const VectorXd>& a) const;

private:
  MatrixXd gram_;
  double lipschitz_ = 1.0;
  double sigma_y_sq_ = 1.0;
};

/// Single-pixel convenience wrapper around LassoSystem.
LassoResult solve_weighted_nn_lasso(const Eigen::Ref<const VectorXd>& y, const Dictionary& phi,
                                    const Eigen::Ref<const VectorXd>& lam, double sigma_y_sq,
                                    const LassoSolverOptions& opts = {},
                                    const std::optional<VectorXd>& warm_start = std::nullopt,
                                    std::vector<double>* objective_trace = nullptr);

/// Same-size 2D convolution, zero padding outside the field of view.
MatrixXd convolve2d_same(const MatrixXd& map, const SpatialKernel& kernel);

/// lam_{i,j,k} = xi / (beta + a_{i,j,k} + [W * A_k]_{i,j}).
WeightMaps update_weights(const CoefficientMaps& a, const SpatialKernel& kernel, double xi,
                          double beta);

struct SweepResult {
  CoefficientMaps coefficients;
  WeightMaps weights;
  std::size_t unconverged_solves = 0;
  long long solver_iterations = 0;
};

/*
  One reweighted-l1 spatial-filtering pass over the whole field of view.

  All weights start at 1. Each of the params.n_reweight rounds solves every
  pixel with the current weights (warm-started from the previous round) and
  then recomputes every weight from the complete new coefficient maps, so the
  result does not depend on pixel order or on `workers`.
*/
SweepResult rwl1_sf_sweep(const DataCube& y, const Dictionary& phi, const SpatialKernel& kernel,
                          const ModelParams& params, const LassoSolverOptions& opts = {},
                          std::size_t workers = 1);

} // namespace cidl
