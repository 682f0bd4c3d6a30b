#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>

namespace cidl {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/*
  Storage conventions

  Pixels are flattened row-major over the field of view: pixel p = i*ny + j
  for row i in [0, nx) and column j in [0, ny).

  DataCube      T x P matrix, column p is the time vector y_{i,j}.
  Dictionary    T x K matrix, column k is the trace phi_k.
  Coefficient / weight maps are K x P matrices: column p is the contiguous
  K-vector of pixel p, so a per-pixel solve touches one column. The same
  matrix is the K x (Nx*Ny) factor in the reconstruction Phi * A.
*/

/// Fluorescence movie of T frames over an nx x ny field of view.
class DataCube {
public:
  DataCube(Index frames, Index nx, Index ny);
  /// `samples` is T x (nx*ny). Every value must be finite.
  DataCube(MatrixXd samples, Index nx, Index ny,
           std::optional<double> frame_rate_hz = std::nullopt);

  Index frames() const { return samples_.rows(); }
  Index nx() const { return nx_; }
  Index ny() const { return ny_; }
  Index pixels() const { return nx_ * ny_; }
  const MatrixXd& samples() const { return samples_; }
  auto pixel(Index p) const { return samples_.col(p); }
  double operator()(Index t, Index i, Index j) const { return samples_(t, i * ny_ + j); }
  std::optional<double> frame_rate_hz() const { return frame_rate_hz_; }

private:
  MatrixXd samples_;
  Index nx_ = 0;
  Index ny_ = 0;
  std::optional<double> frame_rate_hz_;
};

/// Non-negative T x K matrix of temporal traces.
class Dictionary {
public:
  explicit Dictionary(MatrixXd traces);

  Index frames() const { return traces_.rows(); }
  Index atoms() const { return traces_.cols(); }
  const MatrixXd& traces() const { return traces_; }
  auto trace(Index k) const { return traces_.col(k); }

private:
  MatrixXd traces_;
};

/// Per-pixel non-negative presence coefficients, K x P pixel-major.
class CoefficientMaps {
public:
  CoefficientMaps(Index nx, Index ny, Index atoms);
  CoefficientMaps(MatrixXd coefficients, Index nx, Index ny);

  Index nx() const { return nx_; }
  Index ny() const { return ny_; }
  Index pixels() const { return nx_ * ny_; }
  Index atoms() const { return coefficients_.rows(); }
  const MatrixXd& matrix() const { return coefficients_; }
  auto pixel(Index p) const { return coefficients_.col(p); }
  double operator()(Index i, Index j, Index k) const { return coefficients_(k, i * ny_ + j); }
  /// The nx x ny map A_k of one atom.
  MatrixXd slice(Index k) const;

private:
  MatrixXd coefficients_;
  Index nx_ = 0;
  Index ny_ = 0;
};

/// Strictly positive reweighted-l1 penalties, laid out like CoefficientMaps.
class WeightMaps {
public:
  /// Every weight equal to `value`.
  WeightMaps(Index nx, Index ny, Index atoms, double value);
  WeightMaps(MatrixXd weights, Index nx, Index ny);

  Index nx() const { return nx_; }
  Index ny() const { return ny_; }
  Index pixels() const { return nx_ * ny_; }
  Index atoms() const { return weights_.rows(); }
  const MatrixXd& matrix() const { return weights_; }
  auto pixel(Index p) const { return weights_.col(p); }
  double operator()(Index i, Index j, Index k) const { return weights_(k, i * ny_ + j); }

private:
  MatrixXd weights_;
  Index nx_ = 0;
  Index ny_ = 0;
};

/// Odd-sized, non-negative 2D filter W used to share weights across pixels.
class SpatialKernel {
public:
  explicit SpatialKernel(MatrixXd taps);

  const MatrixXd& taps() const { return taps_; }
  Index rows() const { return taps_.rows(); }
  Index cols() const { return taps_.cols(); }
  static SpatialKernel delta() { return SpatialKernel(MatrixXd::Ones(1, 1)); }

private:
  MatrixXd taps_;
};

struct Kappas {
  double frobenius = 0.3;    // kappa1
  double continuation = 0.4; // kappa2
  double correlation = 0.2;  // kappa3

  bool operator==(const Kappas&) const = default;
};

struct ModelParams {
  double sigma_y_sq = 0.5;
  double xi = 2.0;
  double beta = 0.1;
  Kappas kappas;
  int n_reweight = 3;
  double outer_tol = 1e-5;
  int max_outer_iters = 100;

  /// Throws ValidationError naming the first offending field.
  void validate() const;
  bool operator==(const ModelParams&) const = default;
};

/// (1/(2 sigma_y^2)) ||y - Phi a||^2 + sum_k lam_k a_k for one pixel.
double pixel_objective(const Eigen::Ref<const VectorXd>& y, const Dictionary& phi,
                       const Eigen::Ref<const VectorXd>& a,
                       const Eigen::Ref<const VectorXd>& lam, double sigma_y_sq);

/// kappa1 ||Phi||^2 + kappa2 ||Phi - Phi_prev||^2 + kappa3 sum_{i<k} phi_i^T phi_k.
/// Accepts any real matrix so that it can be probed off the feasible set.
double dictionary_penalty(const Eigen::Ref<const MatrixXd>& phi,
                          const Eigen::Ref<const MatrixXd>& phi_prev, const Kappas& kappas);

/// Sum over pixels of pixel_objective plus the dictionary penalties.
double full_objective(const DataCube& y, const Dictionary& phi, const CoefficientMaps& a,
                      const Dictionary& phi_prev, const ModelParams& params,
                      const WeightMaps& lam);

/// Y - Phi A, pixel by pixel.
DataCube residual(const DataCube& y, const Dictionary& phi, const CoefficientMaps& a);

/// Phi A as a T x P matrix.
MatrixXd reconstruction(const Dictionary& phi, const CoefficientMaps& a);

// Shape checks shared by the solvers; throw DimensionError.
void require_same_frames(const DataCube& y, const Dictionary& phi);
void require_same_grid(const DataCube& y, const CoefficientMaps& a);
void require_same_atoms(const Dictionary& phi, const CoefficientMaps& a);

} // namespace cidl
