#include <cidl/core_model.hpp>
#include <cidl/errors.hpp>

#include <cmath>
#include <string>

namespace cidl {

namespace {

void require_finite(const MatrixXd& m, const char* what) {
  if (!m.allFinite())
    throw ValidationError(std::string(what) + " contains non-finite values");
}

void require_nonnegative(const MatrixXd& m, const char* what) {
  require_finite(m, what);
  if (m.size() > 0 && m.minCoeff() < 0.0)
    throw ValidationError(std::string(what) + " contains negative entries");
}

void require_grid(Index nx, Index ny, Index cols, const char* what) {
  if (nx < 1 || ny < 1)
    throw ValidationError(std::string(what) + ": field of view must be at least 1x1");
  if (cols != nx * ny)
    throw DimensionError(std::string(what) + ": expected " + std::to_string(nx * ny) +
                         " pixel columns, got " + std::to_string(cols));
}

} // namespace

DataCube::DataCube(Index frames, Index nx, Index ny)
    : DataCube(MatrixXd::Zero(frames, nx * ny), nx, ny) {}

DataCube::DataCube(MatrixXd samples, Index nx, Index ny, std::optional<double> frame_rate_hz)
    : samples_(std::move(samples)), nx_(nx), ny_(ny), frame_rate_hz_(frame_rate_hz) {
  if (samples_.rows() < 1)
    throw ValidationError("DataCube: at least one frame is required");
  require_grid(nx_, ny_, samples_.cols(), "DataCube");
  require_finite(samples_, "DataCube");
  if (frame_rate_hz_ && !(*frame_rate_hz_ > 0.0 && std::isfinite(*frame_rate_hz_)))
    throw ValidationError("DataCube: frame_rate_hz must be positive");
}

Dictionary::Dictionary(MatrixXd traces) : traces_(std::move(traces)) {
  if (traces_.rows() < 1 || traces_.cols() < 1)
    throw ValidationError("Dictionary: need T >= 1 and K >= 1");
  require_nonnegative(traces_, "Dictionary");
}

CoefficientMaps::CoefficientMaps(Index nx, Index ny, Index atoms)
    : CoefficientMaps(MatrixXd::Zero(atoms, nx * ny), nx, ny) {}

CoefficientMaps::CoefficientMaps(MatrixXd coefficients, Index nx, Index ny)
    : coefficients_(std::move(coefficients)), nx_(nx), ny_(ny) {
  if (coefficients_.rows() < 1)
    throw ValidationError("CoefficientMaps: K >= 1 is required");
  require_grid(nx_, ny_, coefficients_.cols(), "CoefficientMaps");
  require_nonnegative(coefficients_, "CoefficientMaps");
}

MatrixXd CoefficientMaps::slice(Index k) const {
  if (k < 0 || k >= atoms())
    throw DimensionError("CoefficientMaps::slice: atom index out of range");
  MatrixXd out(nx_, ny_);
  for (Index i = 0; i < nx_; ++i)
    for (Index j = 0; j < ny_; ++j)
      out(i, j) = coefficients_(k, i * ny_ + j);
  return out;
}

WeightMaps::WeightMaps(Index nx, Index ny, Index atoms, double value)
    : WeightMaps(MatrixXd::Constant(atoms, nx * ny, value), nx, ny) {}

WeightMaps::WeightMaps(MatrixXd weights, Index nx, Index ny)
    : weights_(std::move(weights)), nx_(nx), ny_(ny) {
  if (weights_.rows() < 1)
    throw ValidationError("WeightMaps: K >= 1 is required");
  require_grid(nx_, ny_, weights_.cols(), "WeightMaps");
  require_finite(weights_, "WeightMaps");
  if (weights_.minCoeff() <= 0.0)
    throw ValidationError("WeightMaps: weights must be strictly positive");
}

SpatialKernel::SpatialKernel(MatrixXd taps) : taps_(std::move(taps)) {
  if (taps_.rows() < 1 || taps_.cols() < 1 || taps_.rows() % 2 == 0 || taps_.cols() % 2 == 0)
    throw ValidationError("SpatialKernel: side lengths must be odd");
  require_nonnegative(taps_, "SpatialKernel");
  if (taps_.maxCoeff() <= 0.0)
    throw ValidationError("SpatialKernel: at least one tap must be nonzero");
}

void ModelParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError(std::string(name) + " must be positive and finite");
  };
  auto nonnegative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError(std::string(name) + " must be non-negative and finite");
  };
  positive(sigma_y_sq, "sigma_y_sq");
  positive(xi, "xi");
  positive(beta, "beta");
  nonnegative(kappas.frobenius, "kappa1");
  nonnegative(kappas.continuation, "kappa2");
  nonnegative(kappas.correlation, "kappa3");
  if (n_reweight < 1)
    throw ValidationError("n_reweight must be a positive integer");
  positive(outer_tol, "outer_tol");
  if (max_outer_iters < 1)
    throw ValidationError("max_outer_iters must be a positive integer");
}

void require_same_frames(const DataCube& y, const Dictionary& phi) {
  if (y.frames() != phi.frames())
    throw DimensionError("movie has " + std::to_string(y.frames()) +
                         " frames but dictionary traces have " + std::to_string(phi.frames()));
}

void require_same_grid(const DataCube& y, const CoefficientMaps& a) {
  if (y.nx() != a.nx() || y.ny() != a.ny())
    throw DimensionError("movie and coefficient maps cover different fields of view");
}

void require_same_atoms(const Dictionary& phi, const CoefficientMaps& a) {
  if (phi.atoms() != a.atoms())
    throw DimensionError("dictionary has " + std::to_string(phi.atoms()) +
                         " atoms but coefficient maps have " + std::to_string(a.atoms()));
}

double pixel_objective(const Eigen::Ref<const VectorXd>& y, const Dictionary& phi,
                       const Eigen::Ref<const VectorXd>& a,
                       const Eigen::Ref<const VectorXd>& lam, double sigma_y_sq) {
  if (y.size() != phi.frames() || a.size() != phi.atoms() || lam.size() != phi.atoms())
    throw DimensionError("pixel_objective: shape mismatch");
  if (!y.allFinite() || !a.allFinite() || !lam.allFinite() || !std::isfinite(sigma_y_sq))
    throw ValidationError("pixel_objective: non-finite input");
  if (!(sigma_y_sq > 0.0))
    throw ValidationError("pixel_objective: sigma_y_sq must be positive");
  if (a.size() > 0 && a.minCoeff() < 0.0)
    throw ValidationError("pixel_objective: coefficients must be non-negative");
  if (lam.size() > 0 && lam.minCoeff() <= 0.0)
    throw ValidationError("pixel_objective: weights must be positive");
  const double fit = (y - phi.traces() * a).squaredNorm();
  return fit / (2.0 * sigma_y_sq) + lam.dot(a);
}

double dictionary_penalty(const Eigen::Ref<const MatrixXd>& phi,
                          const Eigen::Ref<const MatrixXd>& phi_prev, const Kappas& kappas) {
  if (phi.rows() != phi_prev.rows() || phi.cols() != phi_prev.cols())
    throw DimensionError("dictionary_penalty: previous dictionary has a different shape");
  double value = kappas.frobenius * phi.squaredNorm() +
                 kappas.continuation * (phi - phi_prev).squaredNorm();
  if (kappas.correlation != 0.0 && phi.cols() > 1) {
    const MatrixXd gram = phi.transpose() * phi;
    double off = 0.0;
    for (Index k = 1; k < gram.cols(); ++k)
      for (Index i = 0; i < k; ++i)
        off += gram(i, k);
    value += kappas.correlation * off;
  }
  return value;
}

double full_objective(const DataCube& y, const Dictionary& phi, const CoefficientMaps& a,
                      const Dictionary& phi_prev, const ModelParams& params,
                      const WeightMaps& lam) {
  require_same_frames(y, phi);
  require_same_grid(y, a);
  require_same_atoms(phi, a);
  if (lam.nx() != a.nx() || lam.ny() != a.ny() || lam.atoms() != a.atoms())
    throw DimensionError("full_objective: weight maps do not match coefficient maps");
  if (!(params.sigma_y_sq > 0.0))
    throw ValidationError("full_objective: sigma_y_sq must be positive");
  const MatrixXd r = y.samples() - phi.traces() * a.matrix();
  const double data = r.squaredNorm() / (2.0 * params.sigma_y_sq);
  const double sparsity = lam.matrix().cwiseProduct(a.matrix()).sum();
  return data + sparsity + dictionary_penalty(phi.traces(), phi_prev.traces(), params.kappas);
}

MatrixXd reconstruction(const Dictionary& phi, const CoefficientMaps& a) {
  require_same_atoms(phi, a);
  return phi.traces() * a.matrix();
}

DataCube residual(const DataCube& y, const Dictionary& phi, const CoefficientMaps& a) {
  require_same_frames(y, phi);
  require_same_grid(y, a);
  return DataCube(y.samples() - reconstruction(phi, a), y.nx(), y.ny(), y.frame_rate_hz());
}

} // namespace cidl
