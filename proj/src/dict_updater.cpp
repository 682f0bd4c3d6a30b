#include <cidl/dict_updater.hpp>
#include <cidl/errors.hpp>

#include <cmath>
#include <limits>

namespace cidl {

namespace {

void check_shapes(const Eigen::Ref<const MatrixXd>& phi, const DataCube& y,
                  const CoefficientMaps& a, const Eigen::Ref<const MatrixXd>& phi_prev) {
  if (phi.rows() != y.frames())
    throw DimensionError("dictionary update: Phi rows must equal the number of frames");
  if (phi.cols() != a.atoms())
    throw DimensionError("dictionary update: Phi columns must equal the number of atoms");
  if (y.nx() != a.nx() || y.ny() != a.ny())
    throw DimensionError("dictionary update: movie and maps cover different fields of view");
  if (phi_prev.rows() != phi.rows() || phi_prev.cols() != phi.cols())
    throw DimensionError("dictionary update: previous dictionary has a different shape");
}

// Phi -> Phi * H, the Hessian action of dict_objective.
MatrixXd hessian_matrix(const MatrixXd& aat, const Kappas& kappas) {
  const Index k = aat.rows();
  MatrixXd h = 2.0 * aat;
  h.diagonal().array() += 2.0 * (kappas.frobenius + kappas.continuation);
  if (kappas.correlation != 0.0) {
    MatrixXd off = MatrixXd::Constant(k, k, kappas.correlation);
    off.diagonal().setZero();
    h += off;
  }
  return h;
}

} // namespace

void DictUpdateOptions::validate() const {
  if (max_iters < 1)
    throw ValidationError("dict max_iters must be >= 1");
  if (!(rel_tol > 0.0))
    throw ValidationError("dict rel_tol must be positive");
  if (!(shrink > 0.0 && shrink < 1.0))
    throw ValidationError("dict shrink must lie in (0, 1)");
  if (initial_step && !(*initial_step > 0.0))
    throw ValidationError("dict initial_step must be positive");
}

double dict_objective(const Eigen::Ref<const MatrixXd>& phi, const DataCube& y,
                      const CoefficientMaps& a, const Eigen::Ref<const MatrixXd>& phi_prev,
                      const Kappas& kappas) {
  check_shapes(phi, y, a, phi_prev);
  const double fit = (y.samples() - phi * a.matrix()).squaredNorm();
  return fit + dictionary_penalty(phi, phi_prev, kappas);
}

MatrixXd dict_gradient(const Eigen::Ref<const MatrixXd>& phi, const DataCube& y,
                       const CoefficientMaps& a, const Eigen::Ref<const MatrixXd>& phi_prev,
                       const Kappas& kappas) {
  check_shapes(phi, y, a, phi_prev);
  const MatrixXd& am = a.matrix();
  MatrixXd g = 2.0 * (phi * am - y.samples()) * am.transpose();
  g += 2.0 * kappas.frobenius * phi + 2.0 * kappas.continuation * (phi - phi_prev);
  if (kappas.correlation != 0.0) {
    // Phi (J - I): each column receives the sum of the others.
    const VectorXd total = phi.rowwise().sum();
    g += kappas.correlation * (total.replicate(1, phi.cols()) - phi);
  }
  return g;
}

/*
  Accelerated projected gradient in a diagonal metric.

  The objective is quadratic, f(Phi) = c + 1/2 <Phi, Phi H> - <Phi, R>, with
  H = 2 AA^T + 2(k1+k2) I + k3 (J - I) and R = 2 Y A^T + 2 k2 Phi_prev.
  Column k moves with step 1/d_k where d_k is the k-th absolute row sum of H,
  which majorizes H. Objective differences are evaluated exactly from the
  quadratic form so that the monotone acceptance test does not suffer from
  cancellation against ||Y||^2.
*/
DictUpdateResult update_dictionary(const DataCube& y, const CoefficientMaps& a,
                                   const Dictionary& phi_prev, const ModelParams& params,
                                   const DictUpdateOptions& opts,
                                   std::vector<double>* objective_trace) {
  params.validate();
  opts.validate();
  check_shapes(phi_prev.traces(), y, a, phi_prev.traces());

  const Kappas& kappas = params.kappas;
  const MatrixXd& am = a.matrix();
  const MatrixXd& prev = phi_prev.traces();
  const Index atoms = prev.cols();

  const MatrixXd h = hessian_matrix(am * am.transpose(), kappas);
  const MatrixXd linear = 2.0 * (y.samples() * am.transpose()) + 2.0 * kappas.continuation * prev;

  VectorXd metric(atoms);
  for (Index k = 0; k < atoms; ++k) {
    if (opts.initial_step)
      metric(k) = 1.0 / *opts.initial_step;
    else
      metric(k) = h.row(k).cwiseAbs().sum();
    if (!(metric(k) > 0.0))
      metric(k) = 1.0;
  }

  auto gradient = [&](const MatrixXd& phi) -> MatrixXd { return phi * h - linear; };
  auto quad = [&](const MatrixXd& d) { return 0.5 * (d.cwiseProduct(d * h)).sum(); };
  auto metric_norm = [&](const MatrixXd& d) {
    return 0.5 * (d.colwise().squaredNorm().transpose().cwiseProduct(metric)).sum();
  };

  DictUpdateResult out{phi_prev, false, 0, 0.0};
  MatrixXd x = prev;
  double fx = dict_objective(x, y, a, prev, kappas);
  if (objective_trace)
    objective_trace->push_back(fx);

  MatrixXd yv = x;
  MatrixXd z(x.rows(), x.cols());
  double t = 1.0;
  for (int it = 1; it <= opts.max_iters; ++it) {
    out.iterations = it;
    const MatrixXd g = gradient(yv);
    for (int guard = 0; guard < 64; ++guard) {
      z = (yv - g * metric.cwiseInverse().asDiagonal()).cwiseMax(0.0);
      const MatrixXd d = z - yv;
      if (quad(d) <= metric_norm(d) * (1.0 + 1e-12))
        break;
      metric /= opts.shrink;
    }

    const MatrixXd step = z - x;
    const double delta = (gradient(x).cwiseProduct(step)).sum() + quad(step);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const bool accepted = delta <= 0.0;
    if (accepted) {
      if ((yv - z).cwiseProduct(step).sum() > 0.0) {
        yv = z;
        t = 1.0;
      } else {
        yv = z + ((t - 1.0) / t_next) * step;
        t = t_next;
      }
      x = z;
      fx += delta;
    } else {
      yv = x;
      t = 1.0;
    }
    if (objective_trace)
      objective_trace->push_back(fx);
    if (accepted &&
        -delta <= opts.rel_tol * std::max(std::abs(fx), std::numeric_limits<double>::min())) {
      out.converged = true;
      break;
    }
  }

  out.dictionary = Dictionary(std::move(x));
  out.objective = dict_objective(out.dictionary.traces(), y, a, prev, kappas);
  return out;
}

} // namespace cidl
