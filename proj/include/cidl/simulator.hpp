#pragma once

#include <cidl/core_model.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace cidl {

using Rng = std::mt19937_64;

struct SimConfig {
  Index frames = 500;
  Index nx = 30;
  Index ny = 30;
  int n_components = 14;
  /// Probability of an event in each frame, per component.
  double spike_rate = 0.01;
  double amp_low = 0.5;
  double amp_high = 1.5;
  double ar_pole = 0.7;
  double gp_length_scale = 3.0;
  double window_sigma = 3.0;
  double window_truncation_radius = 6.0;
  /// Leave the last component unwindowed (diffuse background).
  bool neuropil = true;
  double noise_sigma = 0.1;
  /// Windowed maps whose peak falls below this are redrawn.
  double min_map_peak = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SimConfig&) const = default;
};

struct SpikeEvent {
  Index frame = 0;
  double amplitude = 0.0;
};

struct GroundTruth {
  Dictionary true_dictionary;
  CoefficientMaps true_maps;
  std::vector<std::vector<SpikeEvent>> spike_trains;
  double noise_sigma = 0.0;
  std::optional<Index> neuropil_component;
  /// Noise actually added before clipping, T x P.
  MatrixXd noise;
};

struct Simulation {
  DataCube movie;
  GroundTruth truth;
};

/// Independent stream for (seed, component, purpose).
Rng derived_rng(std::uint64_t seed, std::uint64_t component, std::uint64_t purpose);

/// Each frame carries an event with probability `rate`, amplitude uniform in [low, high].
std::vector<SpikeEvent> gen_spike_train(Index frames, double rate, double amp_low,
                                        double amp_high, Rng& rng);

/// x_t = pole * x_{t-1} + s_t with x_{-1} = 0.
VectorXd ar_filter(const std::vector<SpikeEvent>& events, Index frames, double pole);

/*
  Zero-mean Gaussian process on an nx x ny pixel grid with unit-variance
  squared-exponential covariance exp(-d^2 / (2 l^2)).

  The covariance of a separable kernel on a grid is Kx (x) Ky, so a draw is
  Sx Z Sy^T with Z white noise and Sx Sx^T = Kx, Sy Sy^T = Ky. The square
  roots come from symmetric eigendecompositions, which stay exact where a
  Cholesky factorization of the ill-conditioned kernel would need jitter.
*/
class GaussianProcessSampler {
public:
  GaussianProcessSampler(Index nx, Index ny, double length_scale);
  MatrixXd sample(Rng& rng) const;

private:
  MatrixXd root_x_;
  MatrixXd root_y_;
};

/// Rectified GP draw, optionally multiplied by a Gaussian bump around `center`
/// (row, col) and cut to zero beyond `truncation_radius`.
MatrixXd gen_spatial_map(const GaussianProcessSampler& gp, const Eigen::Vector2d& center,
                         double window_sigma, double truncation_radius, Rng& rng,
                         bool windowed);
MatrixXd gen_spatial_map(Index nx, Index ny, double length_scale, const Eigen::Vector2d& center,
                         double window_sigma, double truncation_radius, Rng& rng,
                         bool windowed);

/// Y = sum_k phi_k (x) A_k + N(0, noise_sigma^2), clipped at 0.
Simulation simulate_movie(const SimConfig& cfg);

} // namespace cidl
