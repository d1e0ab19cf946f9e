#ifndef DRVAR_TESTS_SUPPORT_HPP
#define DRVAR_TESTS_SUPPORT_HPP

// Helpers shared by the unit and acceptance tests. Everything here is coded
// independently of the library so it can serve as an oracle.

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixList = std::vector<Eigen::MatrixXd>;

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = z(rng);
  return out;
}

inline Matrix random_orthonormal(Eigen::Index n, Eigen::Index r, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(n, r, rng));
  return qr.householderQ() * Matrix::Identity(n, r);
}

inline Matrix random_pd(Eigen::Index n, std::mt19937_64& rng, double ridge = 0.5) {
  const Matrix g = gaussian(n, n, rng);
  return g * g.transpose() / static_cast<double>(n) + ridge * Matrix::Identity(n, n);
}

/// Companion matrix of a VAR with coefficient blocks `phi` (each k x k).
inline Matrix companion(const MatrixList& phi) {
  const Eigen::Index k = phi.front().rows();
  const Eigen::Index p = static_cast<Eigen::Index>(phi.size());
  Matrix f = Matrix::Zero(k * p, k * p);
  for (Eigen::Index j = 0; j < p; ++j) f.block(0, j * k, k, k) = phi[j];
  if (p > 1) f.bottomLeftCorner(k * (p - 1), k * (p - 1)).setIdentity();
  return f;
}

inline double spectral_radius(const Matrix& m) {
  return Eigen::EigenSolver<Matrix>(m, false).eigenvalues().cwiseAbs().maxCoeff();
}

/// Random r x r lag blocks rescaled so the companion radius equals `radius`.
inline MatrixList random_stable_alphas(Eigen::Index r, int p, std::mt19937_64& rng, double radius = 0.8) {
  MatrixList alphas;
  for (int j = 0; j < p; ++j) alphas.push_back(gaussian(r, r, rng) / std::sqrt(static_cast<double>(r * p)));
  const double rho = spectral_radius(companion(alphas));
  // scaling block j by c^j scales every companion eigenvalue by c
  const double c = radius / rho;
  double cj = 1.0;
  for (auto& a : alphas) {
    cj *= c;
    a *= cj;
  }
  return alphas;
}

/// Simulates Y_t = sum_j Phi_j Y_{t-j} + u_t with u ~ N(0, sigma) from zero
/// initial values, discarding `burn` observations.
inline Matrix simulate_var(const MatrixList& phi, const Matrix& sigma, Eigen::Index T, std::mt19937_64& rng,
                           Eigen::Index burn = 200) {
  const Eigen::Index n = phi.front().rows();
  const int p = static_cast<int>(phi.size());
  const Matrix l = sigma.llt().matrixL();
  Matrix y = Matrix::Zero(T + burn, n);
  std::normal_distribution<double> z;
  for (Eigen::Index t = 0; t < T + burn; ++t) {
    Vector e(n);
    for (auto& v : e) v = z(rng);
    Vector next = l * e;
    for (int j = 1; j <= p && t - j >= 0; ++j) next += phi[j - 1] * y.row(t - j).transpose();
    y.row(t) = next.transpose();
  }
  return y.bottomRows(T);
}

inline MatrixList full_phi(const Matrix& a, const MatrixList& alphas) {
  MatrixList phi;
  for (const auto& al : alphas) phi.push_back(a * al * a.transpose());
  return phi;
}

/// Least-squares solve of a generic stacked regression y = X b.
inline Vector least_squares(const Matrix& x, const Vector& y) {
  return x.colPivHouseholderQr().solve(y);
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Sample covariance with divisor T.
inline Matrix covariance(const Matrix& x) {
  const Matrix c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows());
}

/// Per-column variance with divisor T.
inline Vector column_variance(const Matrix& x) { return covariance(x).diagonal(); }

/// Empty directory under the system temp path, recreated on every call.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("drvar-tests-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

} // namespace testing

#endif // DRVAR_TESTS_SUPPORT_HPP
