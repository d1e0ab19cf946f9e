#ifndef DRVAR_ESTIMATION_HPP
#define DRVAR_ESTIMATION_HPP

#include "drvar/common.hpp"
#include "drvar/factor_space.hpp"
#include "drvar/timeseries.hpp"

#include <optional>
#include <string>
#include <vector>

namespace drvar {

/// Responses and stacked lags of the dynamic component x_t = A'Y_t.
/// Row s of `y` is Y_{p+s}; row s of `z` is [x_{p+s-1}', ..., x_{s}'].
struct RegressorSet {
  Matrix y;  // (T-p) x n
  Matrix z;  // (T-p) x rp
  int p = 0;
};

RegressorSet build_regressors(const Matrix& data, const Matrix& loading, int p);

/// Stacked coefficient block [alpha_1'; ...; alpha_p'] (rp x r) <-> list of r x r.
MatrixList unstack_alphas(const Matrix& stacked, int p);
Matrix stack_alphas(const MatrixList& alphas);

/// Phi = [Phi_1'; ...; Phi_p'] (np x n) with Phi_j = A alpha_j A'.
Matrix stacked_phi(const Matrix& loading, const MatrixList& alphas);

/// Spectral radius of the companion matrix of a VAR with the given lag matrices.
double companion_spectral_radius(const MatrixList& coefficients);

/// OLS: alpha_stack = (Z'Z)^{-1} Z' Y A.
MatrixList ols_alpha(const RegressorSet& reg, const Matrix& loading);

/// GLS: alpha_stack = (Z'Z)^{-1} Z' Y S^{-1} A (A' S^{-1} A)^{-1}.
MatrixList gls_alpha(const RegressorSet& reg, const Matrix& loading, const Matrix& sigma);
MatrixList gls_alpha_diagonal(const RegressorSet& reg, const Matrix& loading,
                              const Vector& sigma_diag);

/// Residuals Y - Z alpha A'.
Matrix drvar_residuals(const RegressorSet& reg, const Matrix& loading, const MatrixList& alphas);

struct FglsOptions {
  bool diagonal = false;
  double tol = 1e-8;
  int max_iter = 100;
};

struct FglsResult {
  MatrixList alphas;
  Matrix sigma;   // full covariance, or a diagonal matrix in diagonal mode
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  bool diagonal = false;  // mode actually used
  bool diagonal_forced = false;
};

/// Switching algorithm: alternate the residual covariance and the GLS step,
/// starting from OLS. The objective (ln det or trace ln diag) never increases.
FglsResult fgls_switching(const RegressorSet& reg, const Matrix& loading,
                          const FglsOptions& options = {});

/// Number of free parameters nq + (p-1)q^2.
long long parameter_count(long long n, long long q, long long p);
double penalty_weight(Penalty penalty, double T);

/// IC(q) = n^{-1} sum_i ln s_i^2 + c_T k / (T n), s_i^2 with divisor T - p.
double information_criterion(const Matrix& residuals, int q, Index n, Index T, int p,
                             Penalty penalty);

struct SelectionRow {
  int q = 0;
  long long k = 0;
  double mean_log_variance = 0;
  double aic = 0, hqic = 0, bic = 0;
  double value(Penalty penalty) const;
};

struct SelectionTable {
  int p = 0;
  std::vector<SelectionRow> rows;
  std::vector<MatrixList> alphas;  // fitted coefficients per q
  int chosen_aic = 0, chosen_hqic = 0, chosen_bic = 0;
  int chosen(Penalty penalty) const;
  std::string csv() const;
};

/// Fits the DRVAR with A = V_q for q = 1..R and tabulates the criteria.
SelectionTable select_rank(const Matrix& data, const Matrix& leading_vectors, int p, int R,
                           Method method);

struct LagRow {
  int p = 0;
  double log_det = 0;
  double aic = 0, hqic = 0, bic = 0;
  double coefficient_norm = 0;
};

struct LagTable {
  std::vector<LagRow> rows;
  int chosen_aic = 0, chosen_hqic = 0, chosen_bic = 0;
  int chosen(Penalty penalty) const;
  std::string csv() const;
};

/// VAR order selection for W = Y V_R over p = 1..pmax on a common sample.
LagTable select_lag(const Matrix& data, const Matrix& leading_vectors, int pmax);

struct ModelMeta {
  Index n = 0, r = 0, T = 0;
  int p = 0;
  Method method = Method::ols;
  int iterations = 0;
  bool converged = true;
  bool diagonal_fgls = false;
  std::vector<double> objective_trace;
  double companion_radius = 0;
  double condition_zz = 0;
};

struct DRVARModel {
  Matrix A;           // n x r, orthonormal columns
  MatrixList alphas;  // p blocks of r x r
  Matrix sigma_u;     // n x n full residual covariance (divisor T - p)
  Vector delta_u;     // diagonal of sigma_u
  Matrix residuals;   // (T-p) x n
  Matrix xi;          // (T-p) x r, residuals * A
  Matrix fitted;      // (T-p) x n
  Matrix history;     // last p observations, oldest first
  ModelMeta meta;
  std::vector<std::string> names;
  std::optional<Standardization> standardization;

  bool has_sample() const { return residuals.rows() > 0; }
  Index n() const { return A.rows(); }
  Index r() const { return A.cols(); }
  int p() const { return static_cast<int>(alphas.size()); }
};

struct FitOptions {
  Method method = Method::ols;
  int p0 = 5;
  FglsOptions fgls;
};

/// m_matrix -> V_r -> regressors -> OLS or FGLS.
DRVARModel fit_drvar(const Matrix& data, int r, int p, const FitOptions& options = {});

/// Fit with a given loading matrix (orthonormal columns).
DRVARModel fit_drvar_with_loading(const Matrix& data, const Matrix& loading, int p,
                                  const FitOptions& options = {});

/// Recomputes residuals, covariances and the stored history of a model
/// (e.g. one read from disk) against a data panel.
void attach_sample(DRVARModel& model, const Matrix& data);

/// k-step forecasts A x_{t+h}, history is p x n with the most recent row last.
Matrix forecast(const DRVARModel& model, const Matrix& history, int horizon,
                bool original_units = false);

struct FitMetrics {
  Vector r2_yz;   // R^2 of the DRVAR equation
  Vector r2_yxi;  // squared correlation of Y_i with its common component
};

/// Requires the projection matrix rho (n x r) of the static on the dynamic errors.
FitMetrics fit_metrics(const DRVARModel& model, const Matrix& rho);

struct OrthogonalizedComponents {
  Matrix x;        // (T-p) x r
  Matrix epsilon;  // (T-p) x n
};

/// x = (A'S^{-1}A)^{-1} A'S^{-1} Y_t and e = S A_perp (A_perp' S A_perp)^{-1} A_perp' Y_t,
/// over the estimation sample t = p+1..T.
OrthogonalizedComponents orthogonalized_components(const DRVARModel& model, const Matrix& data);

} // namespace drvar

#endif // DRVAR_ESTIMATION_HPP
