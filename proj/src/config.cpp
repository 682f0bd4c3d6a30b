#include <cidl/config.hpp>
#include <cidl/errors.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace cidl {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(std::size_t line, const std::string& message) {
  throw ValidationError("config line " + std::to_string(line) + ": " + message);
}

double to_double(std::string_view v, std::size_t line, const std::string& key) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    fail(line, "invalid number '" + std::string(v) + "' for " + key);
  return out;
}

template <class Int>
Int to_integer(std::string_view v, std::size_t line, const std::string& key) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    fail(line, "invalid integer '" + std::string(v) + "' for " + key);
  return out;
}

bool to_bool(std::string_view v, std::size_t line, const std::string& key) {
  if (v == "true")
    return true;
  if (v == "false")
    return false;
  fail(line, "expected true or false for " + key);
}

using Setter = std::function<void(std::string_view, std::size_t)>;
using SectionTable = std::map<std::string, std::map<std::string, Setter>, std::less<>>;

SectionTable setters(RunConfig& c) {
  auto real = [](double& field, const char* key) -> Setter {
    return [&field, key](std::string_view v, std::size_t line) { field = to_double(v, line, key); };
  };
  auto integer = [](int& field, const char* key) -> Setter {
    return [&field, key](std::string_view v, std::size_t line) {
      field = to_integer<int>(v, line, key);
    };
  };
  auto index = [](Index& field, const char* key) -> Setter {
    return [&field, key](std::string_view v, std::size_t line) {
      field = to_integer<Index>(v, line, key);
    };
  };

  SectionTable t;
  t["model"] = {
      {"kappa1", real(c.model.kappas.frobenius, "kappa1")},
      {"kappa2", real(c.model.kappas.continuation, "kappa2")},
      {"kappa3", real(c.model.kappas.correlation, "kappa3")},
      {"xi", real(c.model.xi, "xi")},
      {"beta", real(c.model.beta, "beta")},
      {"sigma_y_sq", real(c.model.sigma_y_sq, "sigma_y_sq")},
      {"n_reweight", integer(c.model.n_reweight, "n_reweight")},
      {"outer_tol", real(c.model.outer_tol, "outer_tol")},
      {"max_outer_iters", integer(c.model.max_outer_iters, "max_outer_iters")},
      {"K", index(c.atoms, "K")},
  };
  t["kernel"] = {
      {"size", integer(c.kernel.size, "size")},
      {"variance", real(c.kernel.variance, "variance")},
  };
  t["solver"] = {
      {"lasso_max_iters", integer(c.lasso.max_iters, "lasso_max_iters")},
      {"lasso_rel_tol", real(c.lasso.rel_tol, "lasso_rel_tol")},
      {"lasso_kkt_tol", real(c.lasso.kkt_tol, "lasso_kkt_tol")},
      {"lasso_step_rule",
       [&c](std::string_view v, std::size_t line) {
         if (v == "fixed")
           c.lasso.step_rule = StepRule::fixed_lipschitz;
         else if (v == "backtracking")
           c.lasso.step_rule = StepRule::backtracking;
         else
           fail(line, "lasso_step_rule must be 'fixed' or 'backtracking'");
       }},
      {"dict_max_iters", integer(c.dict.max_iters, "dict_max_iters")},
      {"dict_rel_tol", real(c.dict.rel_tol, "dict_rel_tol")},
      {"dict_shrink", real(c.dict.shrink, "dict_shrink")},
      {"dict_initial_step",
       [&c](std::string_view v, std::size_t line) {
         if (v == "auto")
           c.dict.initial_step.reset();
         else
           c.dict.initial_step = to_double(v, line, "dict_initial_step");
       }},
  };
  t["sim"] = {
      {"frames", index(c.sim.frames, "frames")},
      {"nx", index(c.sim.nx, "nx")},
      {"ny", index(c.sim.ny, "ny")},
      {"n_components", integer(c.sim.n_components, "n_components")},
      {"spike_rate", real(c.sim.spike_rate, "spike_rate")},
      {"amp_low", real(c.sim.amp_low, "amp_low")},
      {"amp_high", real(c.sim.amp_high, "amp_high")},
      {"ar_pole", real(c.sim.ar_pole, "ar_pole")},
      {"gp_length_scale", real(c.sim.gp_length_scale, "gp_length_scale")},
      {"window_sigma", real(c.sim.window_sigma, "window_sigma")},
      {"window_truncation_radius", real(c.sim.window_truncation_radius, "window_truncation_radius")},
      {"neuropil",
       [&c](std::string_view v, std::size_t line) { c.sim.neuropil = to_bool(v, line, "neuropil"); }},
      {"noise_sigma", real(c.sim.noise_sigma, "noise_sigma")},
      {"min_map_peak", real(c.sim.min_map_peak, "min_map_peak")},
      {"seed",
       [&c](std::string_view v, std::size_t line) {
         c.sim.seed = to_integer<std::uint64_t>(v, line, "seed");
       }},
  };
  return t;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

} // namespace

void RunConfig::validate() const {
  model.validate();
  if (atoms < 1)
    throw ValidationError("K must be >= 1");
  if (kernel.size < 1 || kernel.size % 2 == 0)
    throw ValidationError("kernel size must be a positive odd integer");
  if (!(kernel.variance > 0.0))
    throw ValidationError("kernel variance must be positive");
  lasso.validate();
  dict.validate();
  sim.validate();
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  const SectionTable table = setters(cfg);
  const std::map<std::string, Setter>* section = nullptr;
  std::string section_name;
  std::set<std::string> seen;

  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF"))
      line = trim(line.substr(3));
    if (line.empty() || line.front() == '#' || line.front() == ';')
      continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        fail(line_no, "unterminated section header");
      section_name = std::string(trim(line.substr(1, line.size() - 2)));
      const auto it = table.find(section_name);
      if (it == table.end())
        fail(line_no, "unknown section [" + section_name + "]");
      section = &it->second;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!section)
      fail(line_no, "key '" + key + "' appears before any [section]");
    const auto setter = section->find(key);
    if (setter == section->end())
      fail(line_no, "unknown key '" + key + "' in [" + section_name + "]");
    if (!seen.insert(section_name + "." + key).second)
      fail(line_no, "duplicate key '" + key + "' in [" + section_name + "]");
    if (value.empty())
      fail(line_no, "missing value for " + key);
    setter->second(value, line_no);
  }

  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "[model]\n"
      << "kappa1 = " << fmt(c.model.kappas.frobenius) << '\n'
      << "kappa2 = " << fmt(c.model.kappas.continuation) << '\n'
      << "kappa3 = " << fmt(c.model.kappas.correlation) << '\n'
      << "xi = " << fmt(c.model.xi) << '\n'
      << "beta = " << fmt(c.model.beta) << '\n'
      << "sigma_y_sq = " << fmt(c.model.sigma_y_sq) << '\n'
      << "n_reweight = " << c.model.n_reweight << '\n'
      << "outer_tol = " << fmt(c.model.outer_tol) << '\n'
      << "max_outer_iters = " << c.model.max_outer_iters << '\n'
      << "K = " << c.atoms << "\n\n"
      << "[kernel]\n"
      << "size = " << c.kernel.size << '\n'
      << "variance = " << fmt(c.kernel.variance) << "\n\n"
      << "[solver]\n"
      << "lasso_max_iters = " << c.lasso.max_iters << '\n'
      << "lasso_rel_tol = " << fmt(c.lasso.rel_tol) << '\n'
      << "lasso_kkt_tol = " << fmt(c.lasso.kkt_tol) << '\n'
      << "lasso_step_rule = "
      << (c.lasso.step_rule == StepRule::fixed_lipschitz ? "fixed" : "backtracking") << '\n'
      << "dict_max_iters = " << c.dict.max_iters << '\n'
      << "dict_rel_tol = " << fmt(c.dict.rel_tol) << '\n'
      << "dict_shrink = " << fmt(c.dict.shrink) << '\n'
      << "dict_initial_step = "
      << (c.dict.initial_step ? fmt(*c.dict.initial_step) : std::string("auto")) << "\n\n"
      << "[sim]\n"
      << "frames = " << c.sim.frames << '\n'
      << "nx = " << c.sim.nx << '\n'
      << "ny = " << c.sim.ny << '\n'
      << "n_components = " << c.sim.n_components << '\n'
      << "spike_rate = " << fmt(c.sim.spike_rate) << '\n'
      << "amp_low = " << fmt(c.sim.amp_low) << '\n'
      << "amp_high = " << fmt(c.sim.amp_high) << '\n'
      << "ar_pole = " << fmt(c.sim.ar_pole) << '\n'
      << "gp_length_scale = " << fmt(c.sim.gp_length_scale) << '\n'
      << "window_sigma = " << fmt(c.sim.window_sigma) << '\n'
      << "window_truncation_radius = " << fmt(c.sim.window_truncation_radius) << '\n'
      << "neuropil = " << (c.sim.neuropil ? "true" : "false") << '\n'
      << "noise_sigma = " << fmt(c.sim.noise_sigma) << '\n'
      << "min_map_peak = " << fmt(c.sim.min_map_peak) << '\n'
      << "seed = " << c.sim.seed << '\n';
  return out.str();
}

SpatialKernel make_gaussian_kernel(int size, double variance) {
  if (size < 1 || size % 2 == 0)
    throw ValidationError("kernel size must be a positive odd integer");
  if (!(variance > 0.0) || !std::isfinite(variance))
    throw ValidationError("kernel variance must be positive");
  const int half = size / 2;
  MatrixXd taps(size, size);
  for (int u = 0; u < size; ++u)
    for (int v = 0; v < size; ++v) {
      const double dx = u - half;
      const double dy = v - half;
      taps(u, v) = std::exp(-(dx * dx + dy * dy) / (2.0 * variance));
    }
  taps /= taps.sum();
  return SpatialKernel(std::move(taps));
}

} // namespace cidl
