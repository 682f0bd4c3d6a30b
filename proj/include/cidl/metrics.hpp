#pragma once

#include <cidl/core_model.hpp>

#include <optional>
#include <vector>

namespace cidl {

/// Pearson correlation of two equal-length vectors; 0 if either is constant.
double pearson(const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& y);

/// Cosine similarity; 0 if either vector is zero.
double cosine_similarity(const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& y);

/// Minimum-cost assignment for an n x m cost matrix. Returns, for each row,
/// the assigned column, or -1 when n > m leaves the row unassigned.
std::vector<Index> solve_assignment(const MatrixXd& cost);

struct MatchedPair {
  Index learned = 0;
  Index truth = 0;
  double trace_correlation = 0.0;
  /// Cosine similarity of the two spatial maps, when maps were supplied.
  std::optional<double> spatial_cosine;
};

struct UnmatchedComponent {
  Index learned = 0;
  std::optional<double> energy_ratio;
};

struct MatchReport {
  std::vector<MatchedPair> assignment;
  std::vector<UnmatchedComponent> unmatched;
  double threshold = 0.9;
  std::size_t n_recovered = 0;
  double total_correlation = 0.0;
};

/// Optimal one-to-one matching of learned and true traces maximizing the
/// summed Pearson correlation. Pairs are listed in increasing truth order.
MatchReport match_components(const Dictionary& learned, const Dictionary& truth,
                             double threshold = 0.9);

/// As above, also scoring spatial cosine similarity and the energy ratio of
/// every unmatched learned component.
MatchReport match_components(const Dictionary& learned, const CoefficientMaps& learned_maps,
                             const Dictionary& truth, const CoefficientMaps& truth_maps,
                             double threshold = 0.9);

/// ||phi_k|| * ||A_k||_F for every column.
VectorXd component_energies(const Dictionary& phi, const CoefficientMaps& a);

double median_component_energy(const Dictionary& phi, const CoefficientMaps& a);

/// Energy of column k relative to the median over all columns. A zero column
/// scores 0; a nonzero column against a zero median scores +infinity.
double energy_ratio(const CoefficientMaps& a, const Dictionary& phi, Index k);

} // namespace cidl
