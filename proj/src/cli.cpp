#include <cidl/cli.hpp>
#include <cidl/config.hpp>
#include <cidl/errors.hpp>
#include <cidl/learner.hpp>
#include <cidl/metrics.hpp>
#include <cidl/simulator.hpp>
#include <cidl/tensor_io.hpp>

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

namespace cidl {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

RunConfig config_from(const std::string& path) {
  return path.empty() ? RunConfig{} : load_config(path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create directory " + dir.string());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f)
    throw IoError("cannot open " + path.string() + " for writing");
  return f;
}

std::size_t resolve_workers(const std::optional<std::size_t>& flag) {
  if (flag) {
    if (*flag < 1)
      throw ValidationError("--threads must be >= 1");
    return *flag;
  }
  if (const char* env = std::getenv("CIDL_THREADS"); env && *env) {
    std::size_t n = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc() || ptr != s.data() + s.size() || n < 1)
      throw ValidationError("CIDL_THREADS must be a positive integer");
    return n;
  }
  return 1;
}

struct RunFiles {
  Dictionary dictionary;
  CoefficientMaps coefficients;
};

RunFiles read_run(const fs::path& dir) {
  return {dictionary_from_tensor(read_tensor(dir / kDictionaryFile)),
          coefficients_from_tensor(read_tensor(dir / kCoefficientsFile))};
}

int run_simulate(const std::string& config_path, const fs::path& movie_path,
                 const fs::path& truth_dir, std::optional<std::uint64_t> seed, std::ostream& out) {
  RunConfig cfg = config_from(config_path);
  if (seed)
    cfg.sim.seed = *seed;
  const Simulation sim = simulate_movie(cfg.sim);

  if (movie_path.has_parent_path())
    ensure_dir(movie_path.parent_path());
  ensure_dir(truth_dir);
  write_tensor(movie_path, to_tensor(sim.movie));
  write_tensor(truth_dir / kDictionaryFile, to_tensor(sim.truth.true_dictionary));
  write_tensor(truth_dir / kCoefficientsFile, to_tensor(sim.truth.true_maps));

  auto spikes = open_out(truth_dir / kSpikesFile);
  spikes << "component,frame,amplitude\n";
  for (std::size_t c = 0; c < sim.truth.spike_trains.size(); ++c)
    for (const auto& e : sim.truth.spike_trains[c])
      spikes << c << ',' << e.frame << ',' << num(e.amplitude) << '\n';

  auto info = open_out(truth_dir / kTruthInfoFile);
  info << "noise_sigma = " << num(sim.truth.noise_sigma) << '\n';
  info << "neuropil_component = "
       << (sim.truth.neuropil_component ? std::to_string(*sim.truth.neuropil_component)
                                        : std::string("none"))
       << '\n';

  out << "simulated " << cfg.sim.frames << " frames of " << cfg.sim.nx << "x" << cfg.sim.ny
      << " pixels with " << cfg.sim.n_components << " components (seed " << cfg.sim.seed
      << ")\n";
  return kExitOk;
}

int run_learn(const std::string& config_path, const fs::path& movie_path, const fs::path& out_dir,
              std::uint64_t seed, std::size_t workers, std::ostream& out) {
  const RunConfig cfg = config_from(config_path);
  const DataCube movie = datacube_from_tensor(read_tensor(movie_path));
  const SpatialKernel kernel = make_gaussian_kernel(cfg.kernel.size, cfg.kernel.variance);

  LearnOptions opts;
  opts.lasso = cfg.lasso;
  opts.dict = cfg.dict;
  opts.workers = workers;
  opts.progress = [&out](int it, const IterationRecord& row) {
    out << "iter " << it << "  objective " << row.objective << "  rel_change "
        << row.relative_change << "  active " << row.active_coefficients << '\n';
  };
  const LearnResult result = learn(movie, kernel, cfg.model, cfg.atoms, seed, opts);

  ensure_dir(out_dir);
  write_tensor(out_dir / kDictionaryFile, to_tensor(result.dictionary));
  write_tensor(out_dir / kCoefficientsFile, to_tensor(result.coefficients));
  write_tensor(out_dir / kWeightsFile, to_tensor(result.weights));

  auto diag = open_out(out_dir / kDiagnosticsFile);
  diag << "iteration,objective,relative_change,active_coefficients,unconverged_lasso,"
          "dict_iterations,seconds";
  for (Index k = 0; k < cfg.atoms; ++k)
    diag << ",norm_" << k;
  diag << '\n';
  for (const auto& row : result.diagnostics.iterations) {
    diag << row.iteration << ',' << num(row.objective) << ',' << num(row.relative_change) << ','
         << row.active_coefficients << ',' << row.unconverged_lasso << ','
         << row.dict_iterations << ',' << num(row.seconds);
    for (double n : row.column_norms)
      diag << ',' << num(n);
    diag << '\n';
  }

  out << (result.converged ? "converged" : "stopped without converging") << " after "
      << result.diagnostics.iterations.size() << " iterations\n";
  const auto pruned = prune_report(result.dictionary, result.coefficients,
                                   default_prune_threshold(result.dictionary, result.coefficients));
  for (const auto& p : pruned)
    out << "negligible component " << p.column << " (trace norm " << p.trace_norm
        << ", spatial energy " << p.spatial_energy << ")\n";
  return kExitOk;
}

int run_evaluate(const fs::path& learned_dir, const fs::path& truth_dir, const fs::path& report,
                 double threshold, std::ostream& out) {
  const RunFiles learned = read_run(learned_dir);
  const RunFiles truth = read_run(truth_dir);
  const MatchReport m = match_components(learned.dictionary, learned.coefficients,
                                         truth.dictionary, truth.coefficients, threshold);

  if (report.has_parent_path())
    ensure_dir(report.parent_path());
  auto csv = open_out(report);
  csv << "learned_index,true_index,trace_correlation,spatial_cosine\n";
  for (const auto& p : m.assignment)
    csv << p.learned << ',' << p.truth << ',' << num(p.trace_correlation) << ','
        << num(p.spatial_cosine.value_or(0.0)) << '\n';

  out << "recovered " << m.n_recovered << " of " << truth.dictionary.atoms()
      << " components at correlation >= " << threshold << '\n';
  for (const auto& u : m.unmatched)
    out << "unmatched learned component " << u.learned << " energy ratio "
        << u.energy_ratio.value_or(0.0) << '\n';
  return kExitOk;
}

int run_export(const fs::path& learned_dir, const fs::path& out_dir, const std::string& format,
               std::ostream& out) {
  if (format != "csv")
    throw ValidationError("unsupported export format '" + format + "' (only csv)");
  const RunFiles run = read_run(learned_dir);
  ensure_dir(out_dir);

  const MatrixXd& phi = run.dictionary.traces();
  auto traces = open_out(out_dir / "traces.csv");
  for (Index t = 0; t < phi.rows(); ++t) {
    for (Index k = 0; k < phi.cols(); ++k)
      traces << (k ? "," : "") << num(phi(t, k));
    traces << '\n';
  }
  for (Index k = 0; k < run.coefficients.atoms(); ++k) {
    const MatrixXd map = run.coefficients.slice(k);
    auto f = open_out(out_dir / ("map_" + std::to_string(k) + ".csv"));
    for (Index i = 0; i < map.rows(); ++i) {
      for (Index j = 0; j < map.cols(); ++j)
        f << (j ? "," : "") << num(map(i, j));
      f << '\n';
    }
  }
  out << "exported " << phi.cols() << " components to " << out_dir.string() << '\n';
  return kExitOk;
}

} // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal dictionary learning for fluorescence movies", "cidl"};
  app.require_subcommand(1);

  std::string config_path;
  std::string movie_path;
  std::string truth_dir;
  std::string learned_dir;
  std::string out_path;
  std::string format = "csv";
  std::optional<std::uint64_t> sim_seed;
  std::uint64_t learn_seed = 0;
  std::optional<std::size_t> threads;
  double threshold = 0.9;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic movie with ground truth");
  sim->add_option("--config", config_path, "Run configuration file");
  sim->add_option("--out-movie", movie_path, "Output movie tensor")->required();
  sim->add_option("--out-truth", truth_dir, "Output ground-truth directory")->required();
  sim->add_option("--seed", sim_seed, "Simulation seed (overrides [sim] seed)");

  auto* lrn = app.add_subcommand("learn", "Learn a temporal dictionary from a movie");
  lrn->add_option("--config", config_path, "Run configuration file");
  lrn->add_option("--movie", movie_path, "Input movie tensor")->required();
  lrn->add_option("--out", out_path, "Output run directory")->required();
  lrn->add_option("--seed", learn_seed, "Dictionary initialization seed");
  lrn->add_option("--threads", threads, "Worker threads (default: CIDL_THREADS or 1)");

  auto* eval = app.add_subcommand("evaluate", "Match a learned run against ground truth");
  eval->add_option("--learned", learned_dir, "Learned run directory")->required();
  eval->add_option("--truth", truth_dir, "Ground-truth directory")->required();
  eval->add_option("--out", out_path, "Report CSV")->required();
  eval->add_option("--threshold", threshold, "Correlation counted as recovered");

  auto* exp = app.add_subcommand("export", "Export a learned run as CSV");
  exp->add_option("--learned", learned_dir, "Learned run directory")->required();
  exp->add_option("--out-dir", out_path, "Output directory")->required();
  exp->add_option("--format", format, "Output format (csv)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (sim->parsed())
      return run_simulate(config_path, movie_path, truth_dir, sim_seed, out);
    if (lrn->parsed())
      return run_learn(config_path, movie_path, out_path, learn_seed, resolve_workers(threads), out);
    if (eval->parsed())
      return run_evaluate(learned_dir, truth_dir, out_path, threshold, out);
    if (exp->parsed())
      return run_export(learned_dir, out_path, format, out);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

} // namespace cidl
