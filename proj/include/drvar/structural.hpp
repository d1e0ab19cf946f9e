#ifndef DRVAR_STRUCTURAL_HPP
#define DRVAR_STRUCTURAL_HPP

#include "drvar/common.hpp"
#include "drvar/estimation.hpp"

#include <complex>
#include <numbers>
#include <string>
#include <vector>

namespace drvar {

/// Business-cycle band [2pi/32, 2pi/6] for quarterly data.
struct Band {
  double lower = 2.0 * std::numbers::pi / 32.0;
  double upper = 2.0 * std::numbers::pi / 6.0;

  static Band from_periods(double short_period, double long_period);
};

/// Common-component moving average chi_t = C(L) xi_t, truncated at H.
struct StructuralDecomposition {
  MatrixList C;      // H+1 blocks, n x r: C_0 = A + rho, C_j = A gamma_j
  MatrixList gamma;  // H+1 blocks, r x r
  Matrix A;
  Matrix rho;        // n x r
  Matrix sigma_xi;   // r x r
  Matrix sigma_nu;   // n x n
  Matrix nu;         // (T-p) x n, empty for population decompositions
  Matrix chi;        // (T-p) x n
  Matrix xi;         // (T-p) x r
  int H = 0;
  double tail_mass = 0;  // ||C_H|| / max_j ||C_j||

  Index n() const { return A.rows(); }
  Index r() const { return A.cols(); }
};

/// gamma_0 = I, gamma_h = sum_{j=1..min(h,p)} alpha_j gamma_{h-j}.
template <typename Scalar = double>
std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>
wold_coefficients(const std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>& alphas,
                  int H) {
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (alphas.empty()) throw ArgumentError("wold_coefficients: no lag matrices");
  if (H < static_cast<int>(alphas.size()))
    throw ArgumentError("wold_coefficients: H must be at least p");
  const Index r = alphas.front().rows();
  std::vector<M> gamma;
  gamma.reserve(H + 1);
  gamma.push_back(M::Identity(r, r));
  for (int h = 1; h <= H; ++h) {
    M g = M::Zero(r, r);
    const int top = std::min<int>(h, static_cast<int>(alphas.size()));
    for (int j = 1; j <= top; ++j) g.noalias() += alphas[j - 1] * gamma[h - j];
    gamma.push_back(std::move(g));
  }
  return gamma;
}

/// Builds the decomposition from a fitted model; the full residual covariance
/// only enters through A'S A and rho = (I - AA') S A (A'S A)^{-1}.
StructuralDecomposition common_component_ma(const DRVARModel& model, int H = 199);

/// Same decomposition from known parameters (population sigma_nu, no series).
StructuralDecomposition common_component_ma(const Matrix& loading, const MatrixList& alphas,
                                            const Matrix& sigma_u, int H = 199);

/// C(z) = sum_h C_h z^h at z = exp(-i omega).
ComplexMatrix ma_polynomial(const StructuralDecomposition& dec, double omega);

/// F_chi(omega) = (2 pi)^{-1} C(z^{-1}) Sigma_xi C(z)', z = exp(-i omega).
ComplexMatrix spectral_density_common(const StructuralDecomposition& dec, double omega);

/// Trapezoid rule on evenly spaced points (endpoints included) of Re F_chi.
Matrix band_covolatility(const StructuralDecomposition& dec, double omega0, double omega1,
                         int grid_points = 100);

enum class Scheme { recursive, mbccs };

struct ShockIdentification {
  Scheme scheme = Scheme::recursive;
  Matrix Q;        // n x r eigenvectors of Theta (mbccs only)
  Matrix D;        // r x r
  Matrix C_chol;   // r x r lower triangular, C C' = D Sigma_xi D'
  Band band;
  Vector theta_eigenvalues;  // descending (mbccs only)
  Vector shares;             // eigenvalue shares (mbccs only)
  bool leading_tie = false;

  /// Rows of structural shocks u_t = C^{-1} D xi_t.
  Matrix shocks(const Matrix& xi) const;
  /// Psi_h = C_h D^{-1} C.
  Matrix impact(const StructuralDecomposition& dec, int h) const;
};

ShockIdentification recursive_identification(const StructuralDecomposition& dec);
ShockIdentification mbccs_identification(const StructuralDecomposition& dec, const Band& band,
                                         int grid_points = 100);

/// Rows h = 0..horizons-1 of column `shock` of Psi_h, optionally cumulated.
Matrix irf(const ShockIdentification& ident, const StructuralDecomposition& dec, int shock,
           int horizons, bool cumulate = false);

struct VarianceContributions {
  Vector band;        // per series
  Vector zero;        // per series
  std::vector<bool> clipped;
};

/// Share of the band (and zero-frequency) spectrum of Y_i due to one shock.
VarianceContributions variance_contributions(const ShockIdentification& ident,
                                             const StructuralDecomposition& dec,
                                             const Band& band, int shock = 0,
                                             int grid_points = 100);

/// Per-series fraction of the band spectrum of Y due to the ignorable errors.
Vector ignorable_share(const StructuralDecomposition& dec, const Band& band,
                       int grid_points = 100);
Vector ignorable_share_zero(const StructuralDecomposition& dec);

/// Q_{.1}' chi_t.
Vector mbccc_series(const ShockIdentification& ident, const StructuralDecomposition& dec);

struct BootstrapTargets {
  Scheme scheme = Scheme::mbccs;
  Band band;
  int shock = 0;
  int irf_horizons = 20;
  bool cumulate = false;
  int H = 199;
  int grid_points = 100;
};

struct BootstrapResult {
  Matrix irf_se, irf_lower, irf_upper;  // horizons x n
  Vector band_se, band_lower, band_upper;
  Vector zero_se, zero_lower, zero_upper;
  int replicates = 0;
  int failures = 0;
};

/// Residual bootstrap: resample rows of u, rebuild Y through Phi with the
/// first p observations as initial values, refit with fixed (r, p), rerun
/// the structural pipeline; 16/84 percentile bands.
BootstrapResult bootstrap_se(const DRVARModel& model, const Matrix& data, int B,
                             unsigned long long seed, const BootstrapTargets& targets,
                             const FitOptions& fit_options = {});

std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& text);

} // namespace drvar

#endif // DRVAR_STRUCTURAL_HPP
