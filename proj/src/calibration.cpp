#include "drvar/montecarlo.hpp"

#include <cmath>
#include <numbers>

namespace drvar {

namespace {

// Dynamics of the eight indexes: modulus and cycle length (quarters) of the
// complex root pair, and innovation variance. The first index carries the
// business cycle and dominates the autocovariance spectrum.
struct IndexDesign {
  double modulus;
  double period;
  double variance;
};

// The weaker indexes share a slowly drifting medium-frequency cycle.
constexpr IndexDesign kDesign[] = {
    {0.96376, 20.0, 2.8433}, {0.8695, 33.13, 1.0}, {0.8608, 34.93, 1.0}, {0.8521, 36.72, 1.0},
    {0.8434, 38.52, 1.0},    {0.8347, 40.32, 1.0}, {0.8261, 42.11, 1.0}, {0.8174, 43.91, 1.0},
};

// Loading clusters: size, leakage of each weak index outside its cluster,
// and the relative static noise level on clustered series.
constexpr Index kClusterSize = 12;
constexpr double kLeakage = 0.05;
constexpr double kClusterNoise = 1.5;

/// Gamma_0 of a VAR(2) with the given lag blocks and innovation covariance.
Matrix stationary_variance(const MatrixList& alphas, const Matrix& sigma) {
  const Index r = sigma.rows();
  Matrix f = Matrix::Zero(2 * r, 2 * r);
  f.topLeftCorner(r, r) = alphas[0];
  f.topRightCorner(r, r) = alphas[1];
  f.bottomLeftCorner(r, r).setIdentity();
  Matrix q = Matrix::Zero(2 * r, 2 * r);
  q.topLeftCorner(r, r) = sigma;
  // doubling: G <- G + F G F', F <- F F
  Matrix g = q;
  for (int it = 0; it < 60; ++it) {
    g += f * g * f.transpose();
    f = f * f;
    if (f.norm() < 1e-18) break;
  }
  return g.topLeftCorner(r, r);
}

struct Moments {
  double r2_predictable = 0;
  double r2_common = 0;
};

Moments population_fit(const Matrix& a, const Matrix& a_perp, const Matrix& gamma0,
                       const Matrix& sigma_xi, const Matrix& g_mat, const Vector& noise,
                       double g, double s) {
  const Index n = a.rows();
  const Matrix pred = a * (gamma0 - sigma_xi);
  const Matrix dyn = a * gamma0;
  const Matrix b_g = a_perp * g_mat;  // n x r
  const Matrix cross = a * sigma_xi;
  Moments out;
  for (Index i = 0; i < n; ++i) {
    const double p = pred.row(i).dot(a.row(i));
    const double b2 = noise[i];
    const double var = dyn.row(i).dot(a.row(i)) + 2.0 * g * cross.row(i).dot(b_g.row(i)) +
                       g * g * (b_g.row(i) * sigma_xi).dot(b_g.row(i)) + s * s * b2;
    out.r2_predictable += p / var;
    out.r2_common += 1.0 - s * s * b2 / var;
  }
  out.r2_predictable /= static_cast<double>(n);
  out.r2_common /= static_cast<double>(n);
  return out;
}

template <typename F>
double bisect(F f, double lo, double hi) {
  // f(lo) > 0 > f(hi)
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace

DRVARModel calibrated_empirical_model(const CalibrationTargets& targets) {
  const Index n = targets.n;
  const Index r = targets.r;
  if (r != static_cast<Index>(std::size(kDesign)))
    throw ArgumentError("calibrated model is designed for r = 8 indexes");
  if (n < (r - 1) * kClusterSize + r)
    throw ArgumentError("calibrated model needs n >= " + std::to_string((r - 1) * kClusterSize + r) + " series");
  if (!(targets.r2_predictable > 0 && targets.r2_predictable < targets.r2_common &&
        targets.r2_common < 1))
    throw ArgumentError("calibration targets must satisfy 0 < R2_Y,Z < R2_Y,Xi < 1");

  std::mt19937_64 rng(targets.seed);
  // the leading index loads on every series, the others on disjoint clusters
  Matrix raw = standard_normal(n, r, rng);
  const Index cluster = kClusterSize;
  const double outside = kLeakage;
  for (Index q = 1; q < r; ++q)
    for (Index i = 0; i < n; ++i)
      if (i < (q - 1) * cluster || i >= q * cluster) raw(i, q) *= outside;
  Matrix a = raw.householderQr().householderQ() * Matrix::Identity(n, r);
  normalize_column_signs(a);
  const Matrix a_perp = orthogonal_complement(a);
  const Matrix g_mat = standard_normal(n - r, r, rng);
  Vector h = Vector::Ones(n);
  h.head((r - 1) * cluster).setConstant(kClusterNoise);
  const Matrix noise_inner = a_perp.transpose() * h.asDiagonal() * a_perp;
  const Vector noise = (a_perp * noise_inner * a_perp.transpose()).diagonal();

  Vector d1(r), d2(r), v(r);
  for (Index q = 0; q < r; ++q) {
    const IndexDesign& d = kDesign[q];
    d1[q] = 2.0 * d.modulus * std::cos(2.0 * std::numbers::pi / d.period);
    d2[q] = -d.modulus * d.modulus;
    v[q] = d.variance;
  }
  const MatrixList alphas{d1.asDiagonal(), d2.asDiagonal()};
  const Matrix sigma_xi = v.asDiagonal();
  const Matrix gamma0 = stationary_variance(alphas, sigma_xi);

  auto noise_for = [&](double g) {
    auto f = [&](double s) {
      return population_fit(a, a_perp, gamma0, sigma_xi, g_mat, noise, g, s).r2_common - targets.r2_common;
    };
    double hi = 1.0;
    while (f(hi) > 0) hi *= 2.0;
    return bisect(f, 0.0, hi);
  };
  auto predictable_gap = [&](double g) {
    return population_fit(a, a_perp, gamma0, sigma_xi, g_mat, noise, g, noise_for(g)).r2_predictable -
           targets.r2_predictable;
  };
  if (predictable_gap(0.0) <= 0)
    throw NumericalError("calibration: the index dynamics cannot reach the predictable-R2 target");
  double g_hi = 0.1;
  while (predictable_gap(g_hi) > 0) g_hi *= 2.0;
  const double g = bisect(predictable_gap, 0.0, g_hi);
  const double s = noise_for(g);

  Matrix basis(n, n);
  basis << a, a_perp;
  Matrix inner = Matrix::Zero(n, n);
  inner.topLeftCorner(r, r) = sigma_xi;
  inner.topRightCorner(r, n - r) = g * sigma_xi * g_mat.transpose();
  inner.bottomLeftCorner(n - r, r) = g * g_mat * sigma_xi;
  inner.bottomRightCorner(n - r, n - r) =
      g * g * g_mat * sigma_xi * g_mat.transpose() + s * s * noise_inner;

  DRVARModel model;
  model.A = a;
  model.alphas = alphas;
  model.sigma_u = basis * inner * basis.transpose();
  model.sigma_u = 0.5 * (model.sigma_u + model.sigma_u.transpose());
  model.delta_u = model.sigma_u.diagonal();
  model.meta.n = n;
  model.meta.r = r;
  model.meta.p = 2;
  model.meta.companion_radius = companion_spectral_radius(model.alphas);
  for (Index i = 0; i < n; ++i) {
    std::string name = std::to_string(i + 1);
    model.names.push_back("S" + std::string(3 - std::min<std::size_t>(3, name.size()), '0') + name);
  }
  return model;
}

} // namespace drvar
