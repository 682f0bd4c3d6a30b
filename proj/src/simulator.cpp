#include <cidl/errors.hpp>
#include <cidl/simulator.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace cidl {

namespace {

constexpr std::uint64_t kTraceStream = 1;
constexpr std::uint64_t kMapStream = 2;
constexpr std::uint64_t kNoiseStream = 3;
constexpr int kMaxMapDraws = 100;

MatrixXd kernel_root(Index n, double length_scale) {
  MatrixXd cov(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) {
      const double d = static_cast<double>(a - b);
      cov(a, b) = std::exp(-d * d / (2.0 * length_scale * length_scale));
    }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  const VectorXd scale = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * scale.asDiagonal();
}

} // namespace

void SimConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError(std::string(name) + " must be positive and finite");
  };
  if (frames < 1 || nx < 1 || ny < 1)
    throw ValidationError("sim frames, nx and ny must be >= 1");
  if (n_components < 1)
    throw ValidationError("n_components must be >= 1");
  if (!(spike_rate >= 0.0 && spike_rate <= 1.0))
    throw ValidationError("spike_rate must lie in [0, 1]");
  positive(amp_low, "amp_low");
  positive(amp_high, "amp_high");
  if (amp_high < amp_low)
    throw ValidationError("amp_high must be >= amp_low");
  if (!(std::abs(ar_pole) < 1.0))
    throw ValidationError("ar_pole must satisfy |ar_pole| < 1");
  positive(gp_length_scale, "gp_length_scale");
  positive(window_sigma, "window_sigma");
  positive(window_truncation_radius, "window_truncation_radius");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ValidationError("noise_sigma must be non-negative and finite");
  if (!(min_map_peak >= 0.0) || !std::isfinite(min_map_peak))
    throw ValidationError("min_map_peak must be non-negative");
}

Rng derived_rng(std::uint64_t seed, std::uint64_t component, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(component),
                    static_cast<std::uint32_t>(component >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

std::vector<SpikeEvent> gen_spike_train(Index frames, double rate, double amp_low,
                                        double amp_high, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw ValidationError("gen_spike_train: rate must lie in [0, 1]");
  if (!(amp_low > 0.0) || amp_high < amp_low)
    throw ValidationError("gen_spike_train: need 0 < amp_low <= amp_high");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> amplitude(amp_low, amp_high);
  std::vector<SpikeEvent> events;
  for (Index t = 0; t < frames; ++t) {
    // Both draws happen every frame so later frames do not depend on earlier outcomes.
    const double u = unit(rng);
    const double amp = amplitude(rng);
    if (u < rate)
      events.push_back({t, amp});
  }
  return events;
}

VectorXd ar_filter(const std::vector<SpikeEvent>& events, Index frames, double pole) {
  if (!(std::abs(pole) < 1.0))
    throw ValidationError("ar_filter: |pole| must be < 1");
  VectorXd drive = VectorXd::Zero(frames);
  for (const auto& e : events) {
    if (e.frame < 0 || e.frame >= frames)
      throw ValidationError("ar_filter: event outside the trace");
    drive(e.frame) += e.amplitude;
  }
  VectorXd x(frames);
  double prev = 0.0;
  for (Index t = 0; t < frames; ++t) {
    prev = pole * prev + drive(t);
    x(t) = prev;
  }
  return x;
}

GaussianProcessSampler::GaussianProcessSampler(Index nx, Index ny, double length_scale) {
  if (nx < 1 || ny < 1 || !(length_scale > 0.0))
    throw ValidationError("GaussianProcessSampler: invalid grid or length scale");
  root_x_ = kernel_root(nx, length_scale);
  root_y_ = nx == ny ? root_x_ : kernel_root(ny, length_scale);
}

MatrixXd GaussianProcessSampler::sample(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd white(root_x_.cols(), root_y_.cols());
  for (Index i = 0; i < white.rows(); ++i)
    for (Index j = 0; j < white.cols(); ++j)
      white(i, j) = normal(rng);
  return root_x_ * white * root_y_.transpose();
}

MatrixXd gen_spatial_map(const GaussianProcessSampler& gp, const Eigen::Vector2d& center,
                         double window_sigma, double truncation_radius, Rng& rng,
                         bool windowed) {
  MatrixXd map = gp.sample(rng).cwiseMax(0.0);
  if (!windowed)
    return map;
  if (!(window_sigma > 0.0) || !(truncation_radius > 0.0))
    throw ValidationError("gen_spatial_map: window scales must be positive");
  for (Index i = 0; i < map.rows(); ++i)
    for (Index j = 0; j < map.cols(); ++j) {
      const double di = static_cast<double>(i) - center(0);
      const double dj = static_cast<double>(j) - center(1);
      const double r2 = di * di + dj * dj;
      map(i, j) = r2 > truncation_radius * truncation_radius
                      ? 0.0
                      : map(i, j) * std::exp(-r2 / (2.0 * window_sigma * window_sigma));
    }
  return map;
}

MatrixXd gen_spatial_map(Index nx, Index ny, double length_scale, const Eigen::Vector2d& center,
                         double window_sigma, double truncation_radius, Rng& rng,
                         bool windowed) {
  const GaussianProcessSampler gp(nx, ny, length_scale);
  return gen_spatial_map(gp, center, window_sigma, truncation_radius, rng, windowed);
}

Simulation simulate_movie(const SimConfig& cfg) {
  cfg.validate();
  const Index frames = cfg.frames;
  const Index nx = cfg.nx;
  const Index ny = cfg.ny;
  const Index pixels = nx * ny;
  const Index comps = cfg.n_components;

  const GaussianProcessSampler gp(nx, ny, cfg.gp_length_scale);
  MatrixXd traces(frames, comps);
  MatrixXd maps(comps, pixels);
  std::vector<std::vector<SpikeEvent>> spikes(static_cast<std::size_t>(comps));
  std::optional<Index> neuropil;
  if (cfg.neuropil)
    neuropil = comps - 1;

  for (Index c = 0; c < comps; ++c) {
    Rng trace_rng = derived_rng(cfg.seed, static_cast<std::uint64_t>(c), kTraceStream);
    auto events = gen_spike_train(frames, cfg.spike_rate, cfg.amp_low, cfg.amp_high, trace_rng);
    VectorXd trace = ar_filter(events, frames, cfg.ar_pole);
    // A negative pole rings; the model only admits non-negative traces.
    traces.col(c) = trace.cwiseMax(0.0);
    spikes[static_cast<std::size_t>(c)] = std::move(events);

    Rng map_rng = derived_rng(cfg.seed, static_cast<std::uint64_t>(c), kMapStream);
    const bool windowed = !(neuropil && *neuropil == c);
    const double margin_x = std::min(cfg.window_sigma, 0.5 * static_cast<double>(nx - 1));
    const double margin_y = std::min(cfg.window_sigma, 0.5 * static_cast<double>(ny - 1));
    std::uniform_real_distribution<double> cx(margin_x, static_cast<double>(nx - 1) - margin_x);
    std::uniform_real_distribution<double> cy(margin_y, static_cast<double>(ny - 1) - margin_y);
    MatrixXd map;
    for (int draw = 0; draw < kMaxMapDraws; ++draw) {
      const Eigen::Vector2d center(cx(map_rng), cy(map_rng));
      map = gen_spatial_map(gp, center, cfg.window_sigma, cfg.window_truncation_radius, map_rng,
                            windowed);
      if (!windowed || map.maxCoeff() >= cfg.min_map_peak)
        break;
    }
    for (Index i = 0; i < nx; ++i)
      for (Index j = 0; j < ny; ++j)
        maps(c, i * ny + j) = map(i, j);
  }

  MatrixXd clean = traces * maps;
  Rng noise_rng = derived_rng(cfg.seed, 0, kNoiseStream);
  MatrixXd noise = MatrixXd::Zero(frames, pixels);
  if (cfg.noise_sigma > 0.0) {
    std::normal_distribution<double> normal(0.0, cfg.noise_sigma);
    for (Index p = 0; p < pixels; ++p)
      for (Index t = 0; t < frames; ++t)
        noise(t, p) = normal(noise_rng);
  }
  MatrixXd samples = (clean + noise).cwiseMax(0.0);

  return Simulation{
      DataCube(std::move(samples), nx, ny),
      GroundTruth{Dictionary(std::move(traces)), CoefficientMaps(std::move(maps), nx, ny),
                  std::move(spikes), cfg.noise_sigma, neuropil, std::move(noise)}};
}

} // namespace cidl
