#include "drvar/structural.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace drvar {

namespace {

using Complex = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> grid(double omega0, double omega1, int points) {
  if (points < 2) throw ArgumentError("frequency grid needs at least two points");
  if (!(omega0 < omega1)) throw ArgumentError("frequency band must satisfy lower < upper");
  std::vector<double> out(static_cast<std::size_t>(points));
  const double step = (omega1 - omega0) / (points - 1);
  for (int k = 0; k < points; ++k) out[static_cast<std::size_t>(k)] = omega0 + k * step;
  return out;
}

double trapezoid_weight(int k, int points, double step) {
  return (k == 0 || k == points - 1) ? 0.5 * step : step;
}

Matrix real_spectrum(const ComplexMatrix& c, const Matrix& sigma_xi) {
  const Matrix cr = c.real();
  const Matrix ci = c.imag();
  return (cr * sigma_xi * cr.transpose() + ci * sigma_xi * ci.transpose()) / kTwoPi;
}

void finish_decomposition(StructuralDecomposition& dec, const MatrixList& alphas, int H) {
  dec.H = H;
  dec.gamma = wold_coefficients(alphas, H);
  dec.C.clear();
  dec.C.reserve(static_cast<std::size_t>(H) + 1);
  double largest = 0;
  for (int h = 0; h <= H; ++h) {
    Matrix c = dec.A * dec.gamma[static_cast<std::size_t>(h)];
    if (h == 0) c += dec.rho;
    largest = std::max(largest, c.norm());
    dec.C.push_back(std::move(c));
  }
  dec.tail_mass = largest > 0 ? dec.C.back().norm() / largest : 0.0;
}

Matrix projection_rho(const Matrix& a, const Matrix& sigma_u, Matrix& sigma_xi) {
  const Matrix sa = sigma_u * a;
  sigma_xi = a.transpose() * sa;
  sigma_xi = 0.5 * (sigma_xi + sigma_xi.transpose());
  Eigen::LLT<Matrix> llt(sigma_xi);
  if (llt.info() != Eigen::Success)
    throw NumericalError("A' Sigma_u A is not positive definite; the dynamic errors are degenerate");
  const Matrix resid = sa - a * sigma_xi;
  return llt.solve(resid.transpose()).transpose();
}

Vector impact_vector(const ShockIdentification& ident, int shock) {
  const Index r = ident.D.rows();
  if (shock < 0 || shock >= r) throw ArgumentError("shock index out of range");
  return ident.D.partialPivLu().solve(ident.C_chol.col(shock));
}

} // namespace

Band Band::from_periods(double short_period, double long_period) {
  if (!(short_period >= 2.0) || !(long_period > short_period))
    throw ArgumentError("band periods must satisfy 2 <= short < long");
  Band b;
  b.lower = kTwoPi / long_period;
  b.upper = kTwoPi / short_period;
  return b;
}

StructuralDecomposition common_component_ma(const DRVARModel& model, int H) {
  if (!model.has_sample())
    throw ArgumentError("structural decomposition needs residuals; attach the sample first");
  StructuralDecomposition dec;
  dec.A = model.A;
  dec.rho = projection_rho(model.A, model.sigma_u, dec.sigma_xi);
  finish_decomposition(dec, model.alphas, H);
  const Matrix& c0 = dec.C.front();
  dec.xi = model.xi;
  dec.nu = model.residuals - model.xi * c0.transpose();
  dec.chi = model.fitted + model.xi * c0.transpose();
  dec.sigma_nu = dec.nu.transpose() * dec.nu / static_cast<double>(dec.nu.rows());
  return dec;
}

StructuralDecomposition common_component_ma(const Matrix& loading, const MatrixList& alphas,
                                            const Matrix& sigma_u, int H) {
  if (sigma_u.rows() != loading.rows() || sigma_u.cols() != loading.rows())
    throw ArgumentError("common_component_ma: covariance has the wrong shape");
  StructuralDecomposition dec;
  dec.A = loading;
  dec.rho = projection_rho(loading, sigma_u, dec.sigma_xi);
  finish_decomposition(dec, alphas, H);
  const Matrix& c0 = dec.C.front();
  dec.sigma_nu = sigma_u - c0 * dec.sigma_xi * c0.transpose();
  dec.sigma_nu = 0.5 * (dec.sigma_nu + dec.sigma_nu.transpose());
  return dec;
}

ComplexMatrix ma_polynomial(const StructuralDecomposition& dec, double omega) {
  const Index r = dec.r();
  ComplexMatrix g = ComplexMatrix::Zero(r, r);
  for (int h = 0; h <= dec.H; ++h)
    g += std::polar(1.0, -omega * h) * dec.gamma[static_cast<std::size_t>(h)].cast<Complex>();
  ComplexMatrix out = dec.A.cast<Complex>() * g;
  out += dec.rho.cast<Complex>();
  return out;
}

ComplexMatrix spectral_density_common(const StructuralDecomposition& dec, double omega) {
  const ComplexMatrix c = ma_polynomial(dec, omega);
  return c.conjugate() * dec.sigma_xi.cast<Complex>() * c.transpose() / kTwoPi;
}

Matrix band_covolatility(const StructuralDecomposition& dec, double omega0, double omega1,
                         int grid_points) {
  const auto points = grid(omega0, omega1, grid_points);
  const double step = points[1] - points[0];
  Matrix theta = Matrix::Zero(dec.n(), dec.n());
  for (int k = 0; k < grid_points; ++k)
    theta += trapezoid_weight(k, grid_points, step) *
             real_spectrum(ma_polynomial(dec, points[static_cast<std::size_t>(k)]), dec.sigma_xi);
  return 0.5 * (theta + theta.transpose());
}

Matrix ShockIdentification::shocks(const Matrix& xi) const {
  const Matrix dx = xi * D.transpose();
  return C_chol.triangularView<Eigen::Lower>().solve(dx.transpose()).transpose();
}

Matrix ShockIdentification::impact(const StructuralDecomposition& dec, int h) const {
  if (h < 0 || h > dec.H) throw ArgumentError("impact horizon outside the truncation range");
  return dec.C[static_cast<std::size_t>(h)] * D.partialPivLu().solve(C_chol);
}

namespace {

Matrix cholesky_factor(const Matrix& d, const Matrix& sigma_xi) {
  Matrix m = d * sigma_xi * d.transpose();
  m = 0.5 * (m + m.transpose());
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalError("D Sigma_xi D' is not positive definite; D is singular");
  return llt.matrixL();
}

} // namespace

ShockIdentification recursive_identification(const StructuralDecomposition& dec) {
  const Index r = dec.r();
  if (dec.n() < r) throw ArgumentError("recursive identification needs n >= r");
  ShockIdentification ident;
  ident.scheme = Scheme::recursive;
  ident.D = dec.C.front().topRows(r);
  ident.C_chol = cholesky_factor(ident.D, dec.sigma_xi);
  return ident;
}

ShockIdentification mbccs_identification(const StructuralDecomposition& dec, const Band& band,
                                         int grid_points) {
  const Index r = dec.r();
  const Matrix theta = band_covolatility(dec, band.lower, band.upper, grid_points);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(theta);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of Theta failed");
  ShockIdentification ident;
  ident.scheme = Scheme::mbccs;
  ident.band = band;
  ident.theta_eigenvalues = eig.eigenvalues().reverse();
  const double total = ident.theta_eigenvalues.sum();
  if (!(total > 0)) throw NumericalError("band covolatility matrix is zero");
  ident.shares = ident.theta_eigenvalues / total;
  if (ident.theta_eigenvalues.size() > 1)
    ident.leading_tie = ident.theta_eigenvalues[0] - ident.theta_eigenvalues[1] <=
                        1e-10 * std::abs(ident.theta_eigenvalues[0]);
  ident.Q = eig.eigenvectors().rowwise().reverse().leftCols(r);
  normalize_column_signs(ident.Q);
  ident.D = ident.Q.transpose() * dec.C.front();
  ident.C_chol = cholesky_factor(ident.D, dec.sigma_xi);
  return ident;
}

Matrix irf(const ShockIdentification& ident, const StructuralDecomposition& dec, int shock,
           int horizons, bool cumulate) {
  if (horizons < 1 || horizons > dec.H + 1)
    throw ArgumentError("irf horizons must lie in [1, H + 1]");
  const Vector v = impact_vector(ident, shock);
  Matrix out(horizons, dec.n());
  for (int h = 0; h < horizons; ++h) {
    out.row(h) = (dec.C[static_cast<std::size_t>(h)] * v).transpose();
    if (cumulate && h > 0) out.row(h) += out.row(h - 1);
  }
  return out;
}

VarianceContributions variance_contributions(const ShockIdentification& ident,
                                             const StructuralDecomposition& dec,
                                             const Band& band, int shock, int grid_points) {
  const Vector v = impact_vector(ident, shock);
  const Index n = dec.n();
  const ComplexMatrix vc = v.cast<Complex>();
  const auto points = grid(band.lower, band.upper, grid_points);
  const double step = points[1] - points[0];
  const Vector nu_var = dec.sigma_nu.diagonal();

  auto pieces = [&](double omega, Vector& shock_part, Vector& total) {
    const ComplexMatrix c = ma_polynomial(dec, omega);
    shock_part = (c * vc).cwiseAbs2();
    total = kTwoPi * real_spectrum(c, dec.sigma_xi).diagonal() + nu_var;
  };

  Vector num = Vector::Zero(n);
  Vector den = Vector::Zero(n);
  Vector s, t;
  for (int k = 0; k < grid_points; ++k) {
    pieces(points[static_cast<std::size_t>(k)], s, t);
    const double w = trapezoid_weight(k, grid_points, step);
    num += w * s;
    den += w * t;
  }
  VarianceContributions out;
  out.band.resize(n);
  out.zero.resize(n);
  out.clipped.assign(static_cast<std::size_t>(n), false);
  pieces(0.0, s, t);
  for (Index i = 0; i < n; ++i) {
    double b = den[i] > 0 ? num[i] / den[i] : 0.0;
    double z = t[i] > 0 ? s[i] / t[i] : 0.0;
    if (b > 1.0 || z > 1.0) out.clipped[static_cast<std::size_t>(i)] = true;
    out.band[i] = std::min(b, 1.0);
    out.zero[i] = std::min(z, 1.0);
  }
  return out;
}

Vector ignorable_share(const StructuralDecomposition& dec, const Band& band, int grid_points) {
  const auto points = grid(band.lower, band.upper, grid_points);
  const double step = points[1] - points[0];
  const Vector nu_var = dec.sigma_nu.diagonal();
  Vector den = Vector::Zero(dec.n());
  double width = 0;
  for (int k = 0; k < grid_points; ++k) {
    const double w = trapezoid_weight(k, grid_points, step);
    const ComplexMatrix c = ma_polynomial(dec, points[static_cast<std::size_t>(k)]);
    den += w * (kTwoPi * real_spectrum(c, dec.sigma_xi).diagonal() + nu_var);
    width += w;
  }
  return (width * nu_var).cwiseQuotient(den);
}

Vector ignorable_share_zero(const StructuralDecomposition& dec) {
  const Vector nu_var = dec.sigma_nu.diagonal();
  const ComplexMatrix c = ma_polynomial(dec, 0.0);
  const Vector den = kTwoPi * real_spectrum(c, dec.sigma_xi).diagonal() + nu_var;
  return nu_var.cwiseQuotient(den);
}

Vector mbccc_series(const ShockIdentification& ident, const StructuralDecomposition& dec) {
  if (ident.scheme != Scheme::mbccs) throw ArgumentError("MBCCC needs the mbccs identification");
  if (dec.chi.rows() == 0) throw ArgumentError("decomposition carries no common component series");
  return dec.chi * ident.Q.col(0);
}

std::string to_string(Scheme scheme) { return scheme == Scheme::recursive ? "recursive" : "mbccs"; }

Scheme parse_scheme(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "recursive" || t == "cholesky") return Scheme::recursive;
  if (t == "mbccs" || t == "band") return Scheme::mbccs;
  throw ArgumentError("unknown identification scheme '" + text + "' (expected recursive or mbccs)",
                      "E_USAGE");
}

} // namespace drvar
