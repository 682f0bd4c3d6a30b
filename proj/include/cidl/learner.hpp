#pragma once

#include <cidl/core_model.hpp>
#include <cidl/dict_updater.hpp>
#include <cidl/sparse_coder.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace cidl {

/// One row per completed outer iteration.
struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  /// ||Phi_new - Phi_old||_F^2 / ||Phi_new||_F^2
  double relative_change = 0.0;
  std::vector<double> column_norms;
  /// Per-column ||phi_new_k - phi_old_k||^2, for inspecting slow atoms.
  std::vector<double> column_changes;
  long long active_coefficients = 0;
  double seconds = 0.0;
  std::size_t unconverged_lasso = 0;
  int dict_iterations = 0;
  bool dict_converged = false;
};

struct LearnDiagnostics {
  std::vector<IterationRecord> iterations;

  std::vector<double> relative_changes() const;
};

enum class StopReason {
  /// Relative dictionary change reached outer_tol.
  settled,
  /// No active coefficients and ||Phi||_F^2 shrank below outer_tol of its start.
  decayed,
  iteration_limit,
};

struct LearnResult {
  Dictionary dictionary;
  CoefficientMaps coefficients;
  WeightMaps weights;
  LearnDiagnostics diagnostics;
  bool converged = false;
  StopReason stop_reason = StopReason::iteration_limit;
};

using ProgressCallback = std::function<void(int iteration, const IterationRecord&)>;

struct LearnOptions {
  LassoSolverOptions lasso;
  DictUpdateOptions dict;
  std::size_t workers = 1;
  ProgressCallback progress;
};

/// T x K dictionary with entries i.i.d. uniform on (0, 1].
Dictionary init_dictionary(Index frames, Index atoms, std::uint64_t seed);

/*
  Alternates rwl1_sf_sweep and update_dictionary until the squared relative
  dictionary change falls to params.outer_tol, or max_outer_iters is hit.

  A sweep that leaves every coefficient at zero (an empty movie, or a
  dictionary that explains nothing) only shrinks Phi toward 0; in that case
  the run also stops once ||Phi||_F^2 has fallen below outer_tol times its
  initial value.
*/
LearnResult learn(const DataCube& y, const SpatialKernel& kernel, const ModelParams& params,
                  Index atoms, std::uint64_t seed, const LearnOptions& opts = {});

/// Same loop from an explicit starting dictionary.
LearnResult learn(const DataCube& y, const SpatialKernel& kernel, const ModelParams& params,
                  const Dictionary& initial, const LearnOptions& opts = {});

struct PruneEntry {
  Index column = 0;
  double trace_norm = 0.0;
  double spatial_energy = 0.0;
};

/// Columns with ||phi_k|| * ||A_k||_F strictly below `threshold`. Advisory only.
std::vector<PruneEntry> prune_report(const Dictionary& phi, const CoefficientMaps& a,
                                     double threshold);

/// 1% of the median ||phi_k|| * ||A_k||_F over all columns.
double default_prune_threshold(const Dictionary& phi, const CoefficientMaps& a);

} // namespace cidl
