#include <cidl/errors.hpp>
#include <cidl/metrics.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cidl {

double pearson(const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& y) {
  if (x.size() != y.size())
    throw DimensionError("pearson: vectors differ in length");
  if (x.size() == 0)
    return 0.0;
  const VectorXd xc = x.array() - x.mean();
  const VectorXd yc = y.array() - y.mean();
  const double nx = xc.norm();
  const double ny = yc.norm();
  if (nx == 0.0 || ny == 0.0)
    return 0.0;
  return std::clamp(xc.dot(yc) / (nx * ny), -1.0, 1.0);
}

double cosine_similarity(const Eigen::Ref<const VectorXd>& x,
                         const Eigen::Ref<const VectorXd>& y) {
  if (x.size() != y.size())
    throw DimensionError("cosine_similarity: vectors differ in length");
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0)
    return 0.0;
  return std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
}

// Shortest augmenting path with row/column potentials, O(n^2 m) for n <= m.
std::vector<Index> solve_assignment(const MatrixXd& cost) {
  const Index n = cost.rows();
  const Index m = cost.cols();
  if (n == 0 || m == 0)
    return std::vector<Index>(static_cast<std::size_t>(n), -1);
  if (n > m) {
    const std::vector<Index> cols = solve_assignment(cost.transpose());
    std::vector<Index> rows(static_cast<std::size_t>(n), -1);
    for (Index c = 0; c < m; ++c)
      rows[static_cast<std::size_t>(cols[static_cast<std::size_t>(c)])] = c;
    return rows;
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<Index> owner(m + 1, 0), way(m + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    owner[0] = i;
    Index j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = owner[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= m; ++j) {
        if (used[j])
          continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const Index j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Index> rows(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= m; ++j)
    if (owner[j] != 0)
      rows[static_cast<std::size_t>(owner[j] - 1)] = j - 1;
  return rows;
}

namespace {

MatchReport match_impl(const Dictionary& learned, const CoefficientMaps* learned_maps,
                       const Dictionary& truth, const CoefficientMaps* truth_maps,
                       double threshold) {
  if (learned.frames() != truth.frames())
    throw DimensionError("match_components: traces differ in length");
  const Index nl = learned.atoms();
  const Index nt = truth.atoms();

  MatrixXd corr(nl, nt);
  for (Index i = 0; i < nl; ++i)
    for (Index j = 0; j < nt; ++j)
      corr(i, j) = pearson(learned.trace(i), truth.trace(j));

  const std::vector<Index> rows = solve_assignment(-corr);

  MatchReport report;
  report.threshold = threshold;
  std::vector<Index> truth_owner(static_cast<std::size_t>(nt), -1);
  for (Index i = 0; i < nl; ++i)
    if (rows[static_cast<std::size_t>(i)] >= 0)
      truth_owner[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])] = i;

  for (Index j = 0; j < nt; ++j) {
    const Index i = truth_owner[static_cast<std::size_t>(j)];
    if (i < 0)
      continue;
    MatchedPair pair{i, j, corr(i, j), std::nullopt};
    if (learned_maps && truth_maps)
      pair.spatial_cosine =
          cosine_similarity(learned_maps->matrix().row(i).transpose(),
                            truth_maps->matrix().row(j).transpose());
    report.total_correlation += pair.trace_correlation;
    if (pair.trace_correlation >= threshold)
      ++report.n_recovered;
    report.assignment.push_back(pair);
  }
  for (Index i = 0; i < nl; ++i) {
    if (rows[static_cast<std::size_t>(i)] >= 0)
      continue;
    UnmatchedComponent u{i, std::nullopt};
    if (learned_maps)
      u.energy_ratio = energy_ratio(*learned_maps, learned, i);
    report.unmatched.push_back(u);
  }
  return report;
}

} // namespace

MatchReport match_components(const Dictionary& learned, const Dictionary& truth,
                             double threshold) {
  return match_impl(learned, nullptr, truth, nullptr, threshold);
}

MatchReport match_components(const Dictionary& learned, const CoefficientMaps& learned_maps,
                             const Dictionary& truth, const CoefficientMaps& truth_maps,
                             double threshold) {
  require_same_atoms(learned, learned_maps);
  require_same_atoms(truth, truth_maps);
  if (learned_maps.nx() != truth_maps.nx() || learned_maps.ny() != truth_maps.ny())
    throw DimensionError("match_components: maps cover different fields of view");
  return match_impl(learned, &learned_maps, truth, &truth_maps, threshold);
}

VectorXd component_energies(const Dictionary& phi, const CoefficientMaps& a) {
  require_same_atoms(phi, a);
  VectorXd e(phi.atoms());
  for (Index k = 0; k < phi.atoms(); ++k)
    e(k) = phi.trace(k).norm() * a.matrix().row(k).norm();
  return e;
}

double median_component_energy(const Dictionary& phi, const CoefficientMaps& a) {
  VectorXd e = component_energies(phi, a);
  std::sort(e.begin(), e.end());
  const Index n = e.size();
  return n % 2 == 1 ? e(n / 2) : 0.5 * (e(n / 2 - 1) + e(n / 2));
}

double energy_ratio(const CoefficientMaps& a, const Dictionary& phi, Index k) {
  require_same_atoms(phi, a);
  if (k < 0 || k >= phi.atoms())
    throw DimensionError("energy_ratio: column index out of range");
  const double own = phi.trace(k).norm() * a.matrix().row(k).norm();
  if (own == 0.0)
    return 0.0;
  const double median = median_component_energy(phi, a);
  return median > 0.0 ? own / median : std::numeric_limits<double>::infinity();
}

} // namespace cidl
