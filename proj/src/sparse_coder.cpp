#include <cidl/errors.hpp>
#include <cidl/parallel.hpp>
#include <cidl/sparse_coder.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cidl {

void LassoSolverOptions::validate() const {
  if (max_iters < 1)
    throw ValidationError("lasso max_iters must be >= 1");
  if (!(rel_tol > 0.0))
    throw ValidationError("lasso rel_tol must be positive");
  if (!(kkt_tol > 0.0))
    throw ValidationError("lasso kkt_tol must be positive");
}

double power_iteration(const MatrixXd& spd, int max_iters, double tol) {
  const Index n = spd.rows();
  if (n == 0)
    return 0.0;
  VectorXd v = VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double estimate = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    VectorXd w = spd * v;
    const double norm = w.norm();
    if (norm == 0.0) {
      // v landed in the null space; a nonzero diagonal still bounds the spectrum.
      return spd.diagonal().maxCoeff();
    }
    const double next = v.dot(w);
    v = w / norm;
    if (std::abs(next - estimate) <= tol * std::abs(next)) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return std::max(estimate, 0.0);
}

LassoSystem::LassoSystem(const Dictionary& phi, double sigma_y_sq) : sigma_y_sq_(sigma_y_sq) {
  if (!(sigma_y_sq > 0.0) || !std::isfinite(sigma_y_sq))
    throw ValidationError("sigma_y_sq must be positive and finite");
  gram_ = phi.traces().transpose() * phi.traces() / sigma_y_sq;
  // Power iteration approaches the top eigenvalue from below.
  const double top = power_iteration(gram_);
  lipschitz_ = top > 0.0 ? top * 1.01 : 1.0;
}

double LassoSystem::objective(const Eigen::Ref<const VectorXd>& correlation, double offset,
                              const Eigen::Ref<const VectorXd>& lam,
                              const Eigen::Ref<const VectorXd>& a) const {
  return 0.5 * a.dot(gram_ * a) - correlation.dot(a) + offset + lam.dot(a);
}

double LassoSystem::kkt_residual(const Eigen::Ref<const VectorXd>& correlation,
                                 const Eigen::Ref<const VectorXd>& lam,
                                 const Eigen::Ref<const VectorXd>& a) const {
  const VectorXd g = gram_ * a - correlation + lam;
  double worst = 0.0;
  for (Index k = 0; k < a.size(); ++k) {
    const double v = a(k) > 0.0 ? std::abs(g(k)) : std::max(0.0, -g(k));
    worst = std::max(worst, v);
  }
  return worst;
}

LassoResult LassoSystem::solve(const Eigen::Ref<const VectorXd>& correlation, double offset,
                               const Eigen::Ref<const VectorXd>& lam,
                               const LassoSolverOptions& opts, const VectorXd* warm_start,
                               std::vector<double>* objective_trace) const {
  const Index k = atoms();
  if (correlation.size() != k || lam.size() != k)
    throw DimensionError("lasso: correlation/weight vectors must have K entries");
  if (lam.minCoeff() <= 0.0)
    throw ValidationError("lasso: weights must be strictly positive");

  LassoResult out;
  VectorXd x = VectorXd::Zero(k);
  if (warm_start) {
    if (warm_start->size() != k)
      throw DimensionError("lasso: warm start must have K entries");
    if (warm_start->minCoeff() < 0.0)
      throw ValidationError("lasso: warm start must be non-negative");
    x = *warm_start;
  }

  // Products with the Gram matrix are carried along with every iterate, so
  // each iteration costs one matrix-vector product.
  VectorXd gx = gram_ * x;
  auto kkt = [&](const VectorXd& a, const VectorXd& ga) {
    double worst = 0.0;
    for (Index i = 0; i < k; ++i) {
      const double g = ga(i) - correlation(i) + lam(i);
      worst = std::max(worst, a(i) > 0.0 ? std::abs(g) : std::max(0.0, -g));
    }
    return worst;
  };

  double fx = 0.5 * x.dot(gx) - correlation.dot(x) + offset + lam.dot(x);
  if (objective_trace)
    objective_trace->push_back(fx);
  out.kkt_residual = kkt(x, gx);
  if (out.kkt_residual <= opts.kkt_tol) {
    out.coefficients = std::move(x);
    out.objective = fx;
    out.converged = true;
    return out;
  }

  VectorXd yv = x;
  VectorXd gy = gx;
  VectorXd z(k), gz(k), d(k);
  double t = 1.0;
  // True while yv == x, i.e. the next step is a plain proximal-gradient step.
  bool plain = true;
  double lip = opts.step_rule == StepRule::fixed_lipschitz
                   ? lipschitz_
                   : std::max(gram_.trace() / static_cast<double>(k), 1e-12);

  for (int it = 1; it <= opts.max_iters; ++it) {
    out.iterations = it;
    const VectorXd step_dir = gy - correlation + lam;

    if (opts.step_rule == StepRule::fixed_lipschitz) {
      z = (yv - step_dir / lip).cwiseMax(0.0);
      gz.noalias() = gram_ * z;
    } else {
      // f is quadratic, so the sufficient-decrease test is exact: d^T G d <= L |d|^2.
      for (int guard = 0; guard < 64; ++guard) {
        z = (yv - step_dir / lip).cwiseMax(0.0);
        gz.noalias() = gram_ * z;
        d = z - yv;
        if (d.dot(gz - gy) <= lip * d.squaredNorm() * (1.0 + 1e-12))
          break;
        lip *= 2.0;
      }
    }

    // F(z) - F(x) from the quadratic form, exact up to rounding of the difference.
    d = z - x;
    const double change = d.dot(0.5 * (gx + gz) - correlation + lam);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const bool accepted = change <= 0.0;
    const bool stalled = accepted && plain &&
                         -change <= opts.rel_tol * std::max(std::abs(fx + change),
                                                            std::numeric_limits<double>::min());
    if (accepted) {
      // Adaptive restart when the momentum direction opposes the prox step.
      if ((yv - z).dot(d) > 0.0) {
        yv = z;
        gy = gz;
        t = 1.0;
        plain = true;
      } else {
        const double m = (t - 1.0) / t_next;
        yv = z + m * d;
        gy = gz + m * (gz - gx);
        t = t_next;
        plain = m == 0.0;
      }
      x.swap(z);
      gx.swap(gz);
      fx += change;
    } else {
      yv = x;
      gy = gx;
      t = 1.0;
      plain = true;
    }
    if (objective_trace)
      objective_trace->push_back(fx);

    out.kkt_residual = kkt(x, gx);
    // A tiny decrease only signals stationarity for a step taken without momentum.
    if (out.kkt_residual <= opts.kkt_tol || stalled) {
      out.converged = true;
      break;
    }
  }
  out.objective = objective(correlation, offset, lam, x);
  out.coefficients = std::move(x);
  return out;
}

LassoResult solve_weighted_nn_lasso(const Eigen::Ref<const VectorXd>& y, const Dictionary& phi,
                                    const Eigen::Ref<const VectorXd>& lam, double sigma_y_sq,
                                    const LassoSolverOptions& opts,
                                    const std::optional<VectorXd>& warm_start,
                                    std::vector<double>* objective_trace) {
  opts.validate();
  if (y.size() != phi.frames())
    throw DimensionError("lasso: y must have T entries");
  if (!y.allFinite() || !lam.allFinite())
    throw ValidationError("lasso: non-finite input");
  const LassoSystem system(phi, sigma_y_sq);
  const VectorXd correlation = phi.traces().transpose() * y / sigma_y_sq;
  const double offset = y.squaredNorm() / (2.0 * sigma_y_sq);
  return system.solve(correlation, offset, lam, opts, warm_start ? &*warm_start : nullptr,
                      objective_trace);
}

MatrixXd convolve2d_same(const MatrixXd& map, const SpatialKernel& kernel) {
  const MatrixXd& w = kernel.taps();
  const Index rows = map.rows();
  const Index cols = map.cols();
  const Index cr = w.rows() / 2;
  const Index cc = w.cols() / 2;
  MatrixXd out = MatrixXd::Zero(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (Index u = 0; u < w.rows(); ++u) {
        const Index si = i - (u - cr);
        if (si < 0 || si >= rows)
          continue;
        for (Index v = 0; v < w.cols(); ++v) {
          const Index sj = j - (v - cc);
          if (sj < 0 || sj >= cols)
            continue;
          acc += w(u, v) * map(si, sj);
        }
      }
      out(i, j) = acc;
    }
  }
  return out;
}

WeightMaps update_weights(const CoefficientMaps& a, const SpatialKernel& kernel, double xi,
                          double beta) {
  if (!(xi > 0.0) || !(beta > 0.0) || !std::isfinite(xi) || !std::isfinite(beta))
    throw ValidationError("update_weights: xi and beta must be positive");
  const Index nx = a.nx();
  const Index ny = a.ny();
  MatrixXd lam(a.atoms(), a.pixels());
  for (Index k = 0; k < a.atoms(); ++k) {
    const MatrixXd spread = convolve2d_same(a.slice(k), kernel);
    for (Index i = 0; i < nx; ++i)
      for (Index j = 0; j < ny; ++j) {
        const Index p = i * ny + j;
        lam(k, p) = xi / (beta + a.matrix()(k, p) + spread(i, j));
      }
  }
  return WeightMaps(std::move(lam), nx, ny);
}

SweepResult rwl1_sf_sweep(const DataCube& y, const Dictionary& phi, const SpatialKernel& kernel,
                          const ModelParams& params, const LassoSolverOptions& opts,
                          std::size_t workers) {
  params.validate();
  opts.validate();
  require_same_frames(y, phi);

  const Index atoms = phi.atoms();
  const Index pixels = y.pixels();
  const LassoSystem system(phi, params.sigma_y_sq);
  const MatrixXd correlation = phi.traces().transpose() * y.samples() / params.sigma_y_sq;
  const VectorXd offset =
      y.samples().colwise().squaredNorm().transpose() / (2.0 * params.sigma_y_sq);

  MatrixXd coefficients = MatrixXd::Zero(atoms, pixels);
  MatrixXd weights = MatrixXd::Ones(atoms, pixels);
  std::vector<char> converged(static_cast<std::size_t>(pixels), 1);
  std::vector<long long> iterations(static_cast<std::size_t>(pixels), 0);

  SweepResult result{CoefficientMaps(y.nx(), y.ny(), atoms),
                     WeightMaps(y.nx(), y.ny(), atoms, 1.0), 0, 0};

  for (int round = 0; round < params.n_reweight; ++round) {
    parallel_for(static_cast<std::size_t>(pixels), workers, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t p = lo; p < hi; ++p) {
        const Index col = static_cast<Index>(p);
        const VectorXd warm = coefficients.col(col);
        LassoResult r = system.solve(correlation.col(col), offset(col), weights.col(col), opts,
                                     &warm);
        coefficients.col(col) = r.coefficients;
        if (!r.converged)
          converged[p] = 0;
        iterations[p] += r.iterations;
      }
    });
    result.coefficients = CoefficientMaps(coefficients, y.nx(), y.ny());
    result.weights = update_weights(result.coefficients, kernel, params.xi, params.beta);
    weights = result.weights.matrix();
  }

  for (std::size_t p = 0; p < converged.size(); ++p) {
    result.unconverged_solves += converged[p] ? 0 : 1;
    result.solver_iterations += iterations[p];
  }
  return result;
}

} // namespace cidl
