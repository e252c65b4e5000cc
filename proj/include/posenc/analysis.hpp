#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "posenc/encoding.hpp"

namespace posenc {

// A correlation is degenerate when either input is constant (relative spread
// below kConstantTolerance); rho is then reported as 0.
struct Correlation {
  double rho = 0.0;
  bool degenerate = false;
};

inline constexpr double kConstantTolerance = 1e-12;

Correlation pearson(std::span<const double> a, std::span<const double> b);
// Pearson of fractional ranks; ties share the mean of their ranks.
Correlation spearman(std::span<const double> a, std::span<const double> b);
std::vector<double> fractional_ranks(std::span<const double> v);

// Tables analyzed together (one per model layer). All share grid and width;
// metrics read each table at its bin centers, i.e. its value rows.
class EmbeddingSample {
 public:
  explicit EmbeddingSample(std::vector<EmbeddingTable> tables);

  const std::vector<EmbeddingTable>& tables() const { return tables_; }
  std::size_t layers() const { return tables_.size(); }
  std::size_t dim() const { return tables_.front().dim(); }
  const BinGrid& grid() const { return tables_.front().grid(); }
  std::vector<double> sample_xs() const { return grid().centers(); }
  // Dimension j of table i across the bin centers.
  std::vector<double> column(std::size_t table, std::size_t j) const;

 private:
  std::vector<EmbeddingTable> tables_;
};

// 1 - mean over tables and dims of rho_pearson(h_ij, x)^2
double non_linearity(const EmbeddingSample& sample);
// 1 - mean over tables and dims of rho_spearman(h_ij, x)^2
double non_monotonicity(const EmbeddingSample& sample);
// 1 - mean over tables and unordered dim pairs of rho_pearson(h_ij, h_ik)^2.
// Throws UnsupportedOperation for s = 1.
double diversity(const EmbeddingSample& sample);

struct SmoothnessMetric {
  double raw = 0.0;       // 1 - mean smoothness loss; negative for very rough tables
  double reported = 0.0;  // raw clamped to [0, 1]
};
SmoothnessMetric smoothness_metric(const EmbeddingSample& sample);

// Mean over tables of sum_{j,k} rho_pearson(a_ij, b_ik)^2 / s^2. Throws
// std::invalid_argument unless both samples have the same layer count, width and grid.
double task_similarity(const EmbeddingSample& a, const EmbeddingSample& b);

struct MetricsReport {
  double non_linearity = 0.0;
  double non_monotonicity = 0.0;
  std::optional<double> diversity;  // absent for s = 1
  double smoothness = 0.0;
  double smoothness_raw = 0.0;
};
MetricsReport compute_metrics(const EmbeddingSample& sample);

// |dh/dx| / std(dh/dx) per dimension at `resolution` evenly spaced points from
// x_min to x_max. Dimensions with std below kProfileStdGuard read as zero.
struct DerivativeProfile {
  std::vector<double> x_hat;
  Matrix normalized;  // resolution x s
};
inline constexpr double kProfileStdGuard = 1e-12;
DerivativeProfile derivative_profile(const EmbeddingTable& table, std::size_t resolution);

// Value rows projected onto the top two principal components (power iteration
// with deflation). Each component's first non-negligible loading is positive.
struct PcaResult {
  std::vector<double> x_hat;        // per bin, in bin order
  Matrix scores;                    // n_bin x 2
  Matrix components;                // 2 x s
  std::array<double, 2> variance{};  // eigenvalues of the sample covariance
  bool degenerate = false;          // zero total variance; scores are zero
};
inline constexpr double kPcaTolerance = 1e-10;
PcaResult pca2(const EmbeddingTable& table);

}  // namespace posenc
