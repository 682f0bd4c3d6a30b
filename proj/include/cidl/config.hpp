#pragma once

#include <cidl/core_model.hpp>
#include <cidl/dict_updater.hpp>
#include <cidl/simulator.hpp>
#include <cidl/sparse_coder.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace cidl {

struct KernelConfig {
  int size = 7;
  /// sigma^2 in pixel^2.
  double variance = 3.0;

  bool operator==(const KernelConfig&) const = default;
};

/*
  Run configuration, read from an INI-style text file:

    # comment
    [model]
    kappa1 = 0.3

  Sections and keys:
    [model]   kappa1 kappa2 kappa3 xi beta sigma_y_sq n_reweight outer_tol
              max_outer_iters K
    [kernel]  size variance
    [solver]  lasso_max_iters lasso_rel_tol lasso_kkt_tol lasso_step_rule
              dict_max_iters dict_rel_tol dict_shrink dict_initial_step
    [sim]     frames nx ny n_components spike_rate amp_low amp_high ar_pole
              gp_length_scale window_sigma window_truncation_radius neuropil
              noise_sigma min_map_peak seed

  Unknown sections or keys, repeated keys and malformed values are errors.
  Missing keys keep their defaults.
*/
struct RunConfig {
  ModelParams model;
  Index atoms = 16;
  KernelConfig kernel;
  LassoSolverOptions lasso;
  DictUpdateOptions dict;
  SimConfig sim;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& cfg);

/// Normalized taps proportional to exp(-(dx^2 + dy^2) / (2 variance)).
SpatialKernel make_gaussian_kernel(int size, double variance);

} // namespace cidl
