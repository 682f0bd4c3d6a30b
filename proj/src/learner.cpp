#include <cidl/errors.hpp>
#include <cidl/learner.hpp>
#include <cidl/metrics.hpp>

#include <algorithm>
#include <chrono>
#include <random>

namespace cidl {

std::vector<double> LearnDiagnostics::relative_changes() const {
  std::vector<double> out;
  out.reserve(iterations.size());
  for (const auto& row : iterations)
    out.push_back(row.relative_change);
  return out;
}

Dictionary init_dictionary(Index frames, Index atoms, std::uint64_t seed) {
  if (frames < 1 || atoms < 1)
    throw ValidationError("init_dictionary: T and K must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MatrixXd phi(frames, atoms);
  // Column by column so that a given column does not depend on K.
  for (Index k = 0; k < atoms; ++k)
    for (Index t = 0; t < frames; ++t)
      phi(t, k) = 1.0 - unit(rng);
  return Dictionary(std::move(phi));
}

LearnResult learn(const DataCube& y, const SpatialKernel& kernel, const ModelParams& params,
                  Index atoms, std::uint64_t seed, const LearnOptions& opts) {
  if (atoms < 1)
    throw ValidationError("learn: K must be >= 1");
  return learn(y, kernel, params, init_dictionary(y.frames(), atoms, seed), opts);
}

LearnResult learn(const DataCube& y, const SpatialKernel& kernel, const ModelParams& params,
                  const Dictionary& initial, const LearnOptions& opts) {
  params.validate();
  opts.lasso.validate();
  opts.dict.validate();
  require_same_frames(y, initial);

  using clock = std::chrono::steady_clock;
  const Index atoms = initial.atoms();
  const double initial_energy = initial.traces().squaredNorm();

  LearnResult result{initial, CoefficientMaps(y.nx(), y.ny(), atoms),
                     WeightMaps(y.nx(), y.ny(), atoms, 1.0), {}, false,
                     StopReason::iteration_limit};

  for (int it = 1; it <= params.max_outer_iters; ++it) {
    const auto start = clock::now();
    const Dictionary& previous = result.dictionary;

    SweepResult sweep = rwl1_sf_sweep(y, previous, kernel, params, opts.lasso, opts.workers);
    DictUpdateResult update = update_dictionary(y, sweep.coefficients, previous, params, opts.dict);

    IterationRecord row;
    row.iteration = it;
    row.objective = full_objective(y, update.dictionary, sweep.coefficients, previous, params,
                                   sweep.weights);
    const MatrixXd diff = update.dictionary.traces() - previous.traces();
    const double norm_sq = update.dictionary.traces().squaredNorm();
    const double diff_sq = diff.squaredNorm();
    row.relative_change = norm_sq > 0.0 ? diff_sq / norm_sq : (diff_sq > 0.0 ? 1.0 : 0.0);
    for (Index k = 0; k < atoms; ++k) {
      row.column_norms.push_back(update.dictionary.trace(k).norm());
      row.column_changes.push_back(diff.col(k).squaredNorm());
    }
    row.active_coefficients = (sweep.coefficients.matrix().array() > 0.0).count();
    row.unconverged_lasso = sweep.unconverged_solves;
    row.dict_iterations = update.iterations;
    row.dict_converged = update.converged;
    row.seconds = std::chrono::duration<double>(clock::now() - start).count();

    result.dictionary = std::move(update.dictionary);
    result.coefficients = std::move(sweep.coefficients);
    result.weights = std::move(sweep.weights);
    result.diagnostics.iterations.push_back(row);
    if (opts.progress)
      opts.progress(it, row);

    const bool settled = row.relative_change <= params.outer_tol;
    const bool decayed = row.active_coefficients == 0 &&
                         norm_sq <= params.outer_tol * initial_energy;
    if (settled || decayed) {
      result.converged = true;
      result.stop_reason = settled ? StopReason::settled : StopReason::decayed;
      break;
    }
  }
  return result;
}

std::vector<PruneEntry> prune_report(const Dictionary& phi, const CoefficientMaps& a,
                                     double threshold) {
  if (!(threshold >= 0.0))
    throw ValidationError("prune_report: threshold must be non-negative");
  require_same_atoms(phi, a);
  std::vector<PruneEntry> out;
  for (Index k = 0; k < phi.atoms(); ++k) {
    const double trace_norm = phi.trace(k).norm();
    const double spatial = a.matrix().row(k).norm();
    if (trace_norm * spatial < threshold)
      out.push_back({k, trace_norm, spatial});
  }
  return out;
}

double default_prune_threshold(const Dictionary& phi, const CoefficientMaps& a) {
  return 0.01 * median_component_energy(phi, a);
}

} // namespace cidl
