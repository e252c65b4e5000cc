#include "posenc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "posenc/errors.hpp"
#include "posenc/regularization.hpp"

namespace posenc {

namespace {

bool is_constant(std::span<const double> v, double sum_sq_dev) {
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return true;
  const double tol = kConstantTolerance * scale;
  return sum_sq_dev <= static_cast<double>(v.size()) * tol * tol;
}

double squared(double x) { return x * x; }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  for (double& x : v) x /= n;
}

void fix_sign(std::vector<double>& v) {
  for (double x : v) {
    if (std::abs(x) > 1e-12) {
      if (x < 0.0)
        for (double& y : v) y = -y;
      return;
    }
  }
}

std::vector<double> mat_vec(const Matrix& m, std::span<const double> v) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = dot(m.row(r), v);
  return out;
}

double trace(const Matrix& m) {
  double t = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i);
  return t;
}

// Dominant eigenpair of a symmetric positive semi-definite matrix.
std::pair<double, std::vector<double>> power_iteration(const Matrix& cov) {
  const std::size_t s = cov.rows();
  std::size_t start = 0;
  for (std::size_t i = 1; i < s; ++i)
    if (cov(i, i) > cov(start, start)) start = i;
  std::vector<double> v(cov.row(start).begin(), cov.row(start).end());
  if (dot(v, v) == 0.0) v.assign(s, 1.0);
  normalize(v);
  fix_sign(v);

  constexpr int kMaxIterations = 200000;
  for (int it = 0; it < kMaxIterations; ++it) {
    std::vector<double> w = mat_vec(cov, v);
    const double len = std::sqrt(dot(w, w));
    if (len == 0.0) return {0.0, v};
    for (double& x : w) x /= len;
    fix_sign(w);
    double change = 0.0;
    for (std::size_t i = 0; i < s; ++i) change = std::max(change, std::abs(w[i] - v[i]));
    v.swap(w);
    if (change < kPcaTolerance) break;
  }
  return {dot(v, mat_vec(cov, v)), v};
}

// Unit vector orthogonal to `u`, from the standard basis vector least aligned with it.
std::vector<double> orthogonal_to(const std::vector<double>& u) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < u.size(); ++i)
    if (std::abs(u[i]) < std::abs(u[k])) k = i;
  std::vector<double> e(u.size(), 0.0);
  e[k] = 1.0;
  const double p = u[k];
  for (std::size_t i = 0; i < e.size(); ++i) e[i] -= p * u[i];
  normalize(e);
  fix_sign(e);
  return e;
}

}  // namespace

Correlation pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (is_constant(a, saa) || is_constant(b, sbb)) return {0.0, true};
  return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), false};
}

std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // mean of 1-based ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: length mismatch");
  const auto ra = fractional_ranks(a);
  const auto rb = fractional_ranks(b);
  return pearson(ra, rb);
}

EmbeddingSample::EmbeddingSample(std::vector<EmbeddingTable> tables) : tables_(std::move(tables)) {
  if (tables_.empty()) throw std::invalid_argument("EmbeddingSample: need at least one table");
  for (const auto& t : tables_)
    if (!(t.grid() == tables_.front().grid()) || t.dim() != tables_.front().dim())
      throw std::invalid_argument("EmbeddingSample: tables must share grid and embedding size");
}

std::vector<double> EmbeddingSample::column(std::size_t table, std::size_t j) const {
  const Matrix& h = tables_.at(table).values();
  std::vector<double> out(h.rows());
  for (std::size_t i = 0; i < h.rows(); ++i) out[i] = h(i, j);
  return out;
}

namespace {

template <typename Corr>
double one_minus_mean_sq_vs_x(const EmbeddingSample& sample, Corr corr) {
  const auto xs = sample.sample_xs();
  double total = 0.0;
  for (std::size_t i = 0; i < sample.layers(); ++i)
    for (std::size_t j = 0; j < sample.dim(); ++j) total += squared(corr(sample.column(i, j), xs).rho);
  return 1.0 - total / static_cast<double>(sample.layers() * sample.dim());
}

}  // namespace

double non_linearity(const EmbeddingSample& sample) {
  return one_minus_mean_sq_vs_x(sample, [](const auto& a, const auto& b) { return pearson(a, b); });
}

double non_monotonicity(const EmbeddingSample& sample) {
  return one_minus_mean_sq_vs_x(sample, [](const auto& a, const auto& b) { return spearman(a, b); });
}

double diversity(const EmbeddingSample& sample) {
  const std::size_t s = sample.dim();
  if (s < 2) throw UnsupportedOperation("diversity: needs an embedding size of at least 2");
  double total = 0.0;
  for (std::size_t i = 0; i < sample.layers(); ++i) {
    std::vector<std::vector<double>> cols(s);
    for (std::size_t j = 0; j < s; ++j) cols[j] = sample.column(i, j);
    for (std::size_t j = 0; j < s; ++j)
      for (std::size_t k = j + 1; k < s; ++k) total += squared(pearson(cols[j], cols[k]).rho);
  }
  const double pairs = static_cast<double>(sample.layers() * s * (s - 1)) / 2.0;
  return 1.0 - total / pairs;
}

SmoothnessMetric smoothness_metric(const EmbeddingSample& sample) {
  double total = 0.0;
  for (const auto& t : sample.tables()) total += smoothness_loss(t).loss;
  SmoothnessMetric m;
  m.raw = 1.0 - total / static_cast<double>(sample.layers());
  m.reported = std::clamp(m.raw, 0.0, 1.0);
  return m;
}

double task_similarity(const EmbeddingSample& a, const EmbeddingSample& b) {
  if (a.layers() != b.layers()) throw std::invalid_argument("task_similarity: layer counts differ");
  if (a.dim() != b.dim()) throw std::invalid_argument("task_similarity: embedding sizes differ");
  if (!(a.grid() == b.grid())) throw std::invalid_argument("task_similarity: grids differ");
  const std::size_t s = a.dim();
  double total = 0.0;
  for (std::size_t i = 0; i < a.layers(); ++i) {
    std::vector<std::vector<double>> bc(s);
    for (std::size_t k = 0; k < s; ++k) bc[k] = b.column(i, k);
    for (std::size_t j = 0; j < s; ++j) {
      const auto aj = a.column(i, j);
      for (std::size_t k = 0; k < s; ++k) total += squared(pearson(aj, bc[k]).rho);
    }
  }
  return total / static_cast<double>(a.layers() * s * s);
}

MetricsReport compute_metrics(const EmbeddingSample& sample) {
  MetricsReport r;
  r.non_linearity = non_linearity(sample);
  r.non_monotonicity = non_monotonicity(sample);
  if (sample.dim() >= 2) r.diversity = diversity(sample);
  const auto sm = smoothness_metric(sample);
  r.smoothness = sm.reported;
  r.smoothness_raw = sm.raw;
  return r;
}

DerivativeProfile derivative_profile(const EmbeddingTable& table, std::size_t resolution) {
  if (table.mode() != Interpolation::CubicHermite)
    throw UnsupportedOperation("derivative_profile: linear tables have no continuous derivative");
  if (resolution < 2) throw std::invalid_argument("derivative_profile: resolution must be >= 2");
  const std::size_t s = table.dim();
  const BinGrid& grid = table.grid();
  DerivativeProfile p{std::vector<double>(resolution), Matrix(resolution, s)};
  Matrix raw(resolution, s);
  for (std::size_t k = 0; k < resolution; ++k) {
    const double xh = static_cast<double>(k) / static_cast<double>(resolution - 1);
    p.x_hat[k] = xh;
    const double x = k + 1 == resolution ? grid.x_max() : grid.x_min() + xh * (grid.x_max() - grid.x_min());
    encode_derivative_into(table, x, raw.row(k));
  }
  for (std::size_t j = 0; j < s; ++j) {
    double mean = 0.0;
    for (std::size_t k = 0; k < resolution; ++k) mean += raw(k, j);
    mean /= static_cast<double>(resolution);
    double var = 0.0;
    for (std::size_t k = 0; k < resolution; ++k) var += squared(raw(k, j) - mean);
    const double sd = std::sqrt(var / static_cast<double>(resolution));
    for (std::size_t k = 0; k < resolution; ++k)
      p.normalized(k, j) = sd < kProfileStdGuard ? 0.0 : std::abs(raw(k, j)) / sd;
  }
  return p;
}

PcaResult pca2(const EmbeddingTable& table) {
  const std::size_t n = table.n_bin();
  const std::size_t s = table.dim();
  if (s < 2) throw std::invalid_argument("pca2: needs an embedding size of at least 2");
  if (n < 3) throw std::invalid_argument("pca2: needs at least 3 bins");
  const Matrix& h = table.values();

  std::vector<double> mean(s, 0.0);
  for (std::size_t i = 0; i < n; ++i) axpy(1.0, h.row(i), mean);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix centered(n, s);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < s; ++j) centered(i, j) = h(i, j) - mean[j];
  Matrix cov(s, s);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t b = 0; b < s; ++b) cov(a, b) += centered(i, a) * centered(i, b);
  for (double& c : cov.flat()) c /= static_cast<double>(n - 1);

  PcaResult r;
  r.x_hat.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.x_hat[i] = table.grid().normalize(table.grid().center(i));
  r.scores = Matrix(n, 2);
  r.components = Matrix(2, s);
  const double total = trace(cov);
  if (!(total > 0.0)) {
    r.degenerate = true;
    return r;
  }

  auto [l1, v1] = power_iteration(cov);
  Matrix deflated = cov;
  for (std::size_t a = 0; a < s; ++a)
    for (std::size_t b = 0; b < s; ++b) deflated(a, b) -= l1 * v1[a] * v1[b];
  double l2 = 0.0;
  std::vector<double> v2;
  if (trace(deflated) <= 1e-14 * total) {
    v2 = orthogonal_to(v1);
  } else {
    std::tie(l2, v2) = power_iteration(deflated);
    l2 = std::max(l2, 0.0);
  }
  r.variance = {l1, l2};
  for (std::size_t j = 0; j < s; ++j) {
    r.components(0, j) = v1[j];
    r.components(1, j) = v2[j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    r.scores(i, 0) = dot(centered.row(i), v1);
    r.scores(i, 1) = dot(centered.row(i), v2);
  }
  return r;
}

}  // namespace posenc
