#include "drvar/estimation.hpp"
#include "drvar/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace drvar {

namespace {

void check_orthonormal(const Matrix& loading, const char* where) {
  const Index r = loading.cols();
  if (r < 1) throw ArgumentError(std::string(where) + ": loading matrix has no columns");
  const double err = (loading.transpose() * loading - Matrix::Identity(r, r)).cwiseAbs().maxCoeff();
  if (err > 1e-8)
    throw ArgumentError(std::string(where) + ": loading matrix columns are not orthonormal");
}

/// (Z'Z)^{-1} Z' rhs, with the condition number of Z'Z.
Matrix solve_normal_equations(const Matrix& z, const Matrix& rhs, double* condition = nullptr) {
  const Matrix ztz = z.transpose() * z;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(ztz, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  const double cond = lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (condition) *condition = cond;
  if (!(lmin > 0) || cond > 1e14)
    throw NumericalError("Z'Z is singular (condition estimate " + format_double(cond) + ")",
                         "E_SINGULAR");
  return ztz.llt().solve(z.transpose() * rhs);
}

double objective_value(const Matrix& sigma, bool diagonal, bool* ok) {
  *ok = true;
  if (diagonal) {
    const Vector d = sigma.diagonal();
    if (!(d.minCoeff() > 0)) {
      *ok = false;
      return 0;
    }
    return d.array().log().sum();
  }
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    *ok = false;
    return 0;
  }
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

} // namespace

RegressorSet build_regressors(const Matrix& data, const Matrix& loading, int p) {
  const Index T = data.rows();
  const Index r = loading.cols();
  if (p < 1) throw ArgumentError("lag order p must be at least 1");
  if (data.cols() != loading.rows()) throw ArgumentError("loading rows do not match panel columns");
  if (T <= p + 1) throw ArgumentError("too few observations for p = " + std::to_string(p));
  const Matrix x = data * loading;
  RegressorSet reg;
  reg.p = p;
  reg.y = data.bottomRows(T - p);
  reg.z.resize(T - p, r * p);
  for (int j = 0; j < p; ++j) reg.z.middleCols(j * r, r) = x.middleRows(p - 1 - j, T - p);
  return reg;
}

MatrixList unstack_alphas(const Matrix& stacked, int p) {
  const Index r = stacked.cols();
  if (stacked.rows() != r * p) throw ArgumentError("stacked coefficients have the wrong shape");
  MatrixList out;
  for (int j = 0; j < p; ++j) out.push_back(stacked.middleRows(j * r, r).transpose());
  return out;
}

Matrix stack_alphas(const MatrixList& alphas) {
  if (alphas.empty()) throw ArgumentError("no coefficient matrices");
  const Index r = alphas.front().rows();
  Matrix out(r * static_cast<Index>(alphas.size()), r);
  for (std::size_t j = 0; j < alphas.size(); ++j)
    out.middleRows(static_cast<Index>(j) * r, r) = alphas[j].transpose();
  return out;
}

Matrix stacked_phi(const Matrix& loading, const MatrixList& alphas) {
  const Index n = loading.rows();
  Matrix out(n * static_cast<Index>(alphas.size()), n);
  for (std::size_t j = 0; j < alphas.size(); ++j)
    out.middleRows(static_cast<Index>(j) * n, n) =
        (loading * alphas[j] * loading.transpose()).transpose();
  return out;
}

double companion_spectral_radius(const MatrixList& coefficients) {
  if (coefficients.empty()) return 0;
  const Index k = coefficients.front().rows();
  const Index p = static_cast<Index>(coefficients.size());
  Matrix companion = Matrix::Zero(k * p, k * p);
  for (Index j = 0; j < p; ++j) companion.block(0, j * k, k, k) = coefficients[j];
  if (p > 1) companion.bottomLeftCorner(k * (p - 1), k * (p - 1)).setIdentity();
  Eigen::EigenSolver<Matrix> eig(companion, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

MatrixList ols_alpha(const RegressorSet& reg, const Matrix& loading) {
  check_orthonormal(loading, "ols_alpha");
  return unstack_alphas(solve_normal_equations(reg.z, reg.y * loading), reg.p);
}

MatrixList gls_alpha(const RegressorSet& reg, const Matrix& loading, const Matrix& sigma) {
  check_orthonormal(loading, "gls_alpha");
  if (sigma.rows() != loading.rows() || sigma.cols() != loading.rows())
    throw ArgumentError("gls_alpha: covariance has the wrong shape");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw ArgumentError("gls_alpha: covariance matrix is not positive definite");
  const Matrix sia = llt.solve(loading);
  const Matrix weight = sia * (loading.transpose() * sia).inverse();
  return unstack_alphas(solve_normal_equations(reg.z, reg.y * weight), reg.p);
}

MatrixList gls_alpha_diagonal(const RegressorSet& reg, const Matrix& loading,
                              const Vector& sigma_diag) {
  check_orthonormal(loading, "gls_alpha");
  if (sigma_diag.size() != loading.rows())
    throw ArgumentError("gls_alpha: covariance diagonal has the wrong length");
  if (!(sigma_diag.minCoeff() > 0))
    throw ArgumentError("gls_alpha: diagonal covariance entries must be positive");
  const Matrix sia = sigma_diag.cwiseInverse().asDiagonal() * loading;
  const Matrix weight = sia * (loading.transpose() * sia).inverse();
  return unstack_alphas(solve_normal_equations(reg.z, reg.y * weight), reg.p);
}

Matrix drvar_residuals(const RegressorSet& reg, const Matrix& loading, const MatrixList& alphas) {
  return reg.y - (reg.z * stack_alphas(alphas)) * loading.transpose();
}

FglsResult fgls_switching(const RegressorSet& reg, const Matrix& loading,
                          const FglsOptions& options) {
  if (options.max_iter < 1) throw ArgumentError("fgls: max_iter must be positive");
  if (!(options.tol > 0)) throw ArgumentError("fgls: tol must be positive");
  const Index m = reg.y.rows();
  const Index n = reg.y.cols();

  FglsResult out;
  out.diagonal = options.diagonal;
  if (!out.diagonal && m <= n) {
    out.diagonal = true;
    out.diagonal_forced = true;
  }

  auto covariance = [&](const MatrixList& alphas) {
    const Matrix e = drvar_residuals(reg, loading, alphas);
    return Matrix(e.transpose() * e / static_cast<double>(m));
  };

  out.alphas = ols_alpha(reg, loading);
  Matrix sigma = covariance(out.alphas);
  bool ok = false;
  double objective = objective_value(sigma, out.diagonal, &ok);
  if (!ok && !out.diagonal) {
    out.diagonal = true;
    out.diagonal_forced = true;
    objective = objective_value(sigma, true, &ok);
  }
  if (!ok) throw NumericalError("fgls: residual variance is zero for some equation");
  out.objective_trace.push_back(objective);

  for (int it = 1; it <= options.max_iter; ++it) {
    MatrixList next = out.diagonal ? gls_alpha_diagonal(reg, loading, sigma.diagonal())
                                   : gls_alpha(reg, loading, sigma);
    Matrix next_sigma = covariance(next);
    const double next_objective = objective_value(next_sigma, out.diagonal, &ok);
    if (!ok) throw NumericalError("fgls: residual covariance degenerated during iteration");
    if (next_objective > objective + 1e-10 * std::max(1.0, std::abs(objective)))
      throw NumericalError("fgls: objective increased from " + format_double(objective) + " to " +
                               format_double(next_objective),
                           "E_MONOTONICITY");
    out.alphas = std::move(next);
    sigma = std::move(next_sigma);
    out.objective_trace.push_back(next_objective);
    out.iterations = it;
    const double change = std::abs(objective - next_objective) / std::max(1.0, std::abs(objective));
    objective = next_objective;
    if (change < options.tol) {
      out.converged = true;
      break;
    }
  }
  out.sigma = out.diagonal ? Matrix(sigma.diagonal().asDiagonal()) : sigma;
  return out;
}

long long parameter_count(long long n, long long q, long long p) { return n * q + (p - 1) * q * q; }

double penalty_weight(Penalty penalty, double T) {
  switch (penalty) {
    case Penalty::aic: return 2.0;
    case Penalty::hqic: return 2.0 * std::log(std::log(T));
    case Penalty::bic: return std::log(T);
  }
  return 0;
}

namespace {

double mean_log_variance(const Matrix& residuals) {
  const Index m = residuals.rows();
  if (m < 1) throw ArgumentError("information criterion needs residuals");
  double total = 0;
  for (Index i = 0; i < residuals.cols(); ++i) {
    const double s2 = residuals.col(i).squaredNorm() / static_cast<double>(m);
    if (!(s2 > 0))
      throw NumericalError("residual variance of equation " + std::to_string(i + 1) +
                           " is zero; the log criterion is undefined");
    total += std::log(s2);
  }
  return total / static_cast<double>(residuals.cols());
}

} // namespace

double information_criterion(const Matrix& residuals, int q, Index n, Index T, int p,
                             Penalty penalty) {
  const double k = static_cast<double>(parameter_count(n, q, p));
  return mean_log_variance(residuals) +
         penalty_weight(penalty, static_cast<double>(T)) * k / (static_cast<double>(T) * n);
}

double SelectionRow::value(Penalty penalty) const {
  switch (penalty) {
    case Penalty::aic: return aic;
    case Penalty::hqic: return hqic;
    case Penalty::bic: return bic;
  }
  return 0;
}

int SelectionTable::chosen(Penalty penalty) const {
  switch (penalty) {
    case Penalty::aic: return chosen_aic;
    case Penalty::hqic: return chosen_hqic;
    case Penalty::bic: return chosen_bic;
  }
  return 0;
}

std::string SelectionTable::csv() const {
  std::string out = "p,q,k,mean_log_variance,aic,hqic,bic\n";
  for (const auto& row : rows)
    out += std::to_string(p) + "," + std::to_string(row.q) + "," + std::to_string(row.k) + "," +
           format_double(row.mean_log_variance) + "," + format_double(row.aic) + "," +
           format_double(row.hqic) + "," + format_double(row.bic) + "\n";
  return out;
}

SelectionTable select_rank(const Matrix& data, const Matrix& leading_vectors, int p, int R,
                           Method method) {
  const Index T = data.rows();
  const Index n = data.cols();
  if (p < 1) throw ArgumentError("select_rank: p must be at least 1");
  if (R < 1 || R >= n) throw ArgumentError("select_rank: R must satisfy 1 <= R < n");
  if (leading_vectors.cols() < R) throw ArgumentError("select_rank: fewer than R eigenvectors");

  SelectionTable table;
  table.p = p;
  for (int q = 1; q <= R; ++q) {
    const Matrix loading = leading_vectors.leftCols(q);
    const RegressorSet reg = build_regressors(data, loading, p);
    MatrixList alphas;
    if (method == Method::ols) {
      alphas = ols_alpha(reg, loading);
    } else {
      FglsOptions opts;
      opts.diagonal = true;
      alphas = fgls_switching(reg, loading, opts).alphas;
    }
    const Matrix resid = drvar_residuals(reg, loading, alphas);
    SelectionRow row;
    row.q = q;
    row.k = parameter_count(n, q, p);
    row.mean_log_variance = mean_log_variance(resid);
    const double scale = static_cast<double>(row.k) / (static_cast<double>(T) * n);
    row.aic = row.mean_log_variance + penalty_weight(Penalty::aic, T) * scale;
    row.hqic = row.mean_log_variance + penalty_weight(Penalty::hqic, T) * scale;
    row.bic = row.mean_log_variance + penalty_weight(Penalty::bic, T) * scale;
    table.rows.push_back(row);
    table.alphas.push_back(std::move(alphas));
  }
  auto argmin = [&](Penalty penalty) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < table.rows.size(); ++i)
      if (table.rows[i].value(penalty) < table.rows[best].value(penalty)) best = i;
    return table.rows[best].q;
  };
  table.chosen_aic = argmin(Penalty::aic);
  table.chosen_hqic = argmin(Penalty::hqic);
  table.chosen_bic = argmin(Penalty::bic);
  return table;
}

int LagTable::chosen(Penalty penalty) const {
  switch (penalty) {
    case Penalty::aic: return chosen_aic;
    case Penalty::hqic: return chosen_hqic;
    case Penalty::bic: return chosen_bic;
  }
  return 0;
}

std::string LagTable::csv() const {
  std::string out = "p,log_det,aic,hqic,bic,coefficient_norm\n";
  for (const auto& row : rows)
    out += std::to_string(row.p) + "," + format_double(row.log_det) + "," + format_double(row.aic) +
           "," + format_double(row.hqic) + "," + format_double(row.bic) + "," +
           format_double(row.coefficient_norm) + "\n";
  return out;
}

LagTable select_lag(const Matrix& data, const Matrix& leading_vectors, int pmax) {
  const Index T = data.rows();
  if (pmax < 1 || 2 * pmax >= T) throw ArgumentError("select_lag: pmax must satisfy 1 <= pmax < T/2");
  if (leading_vectors.rows() != data.cols()) throw ArgumentError("select_lag: shape mismatch");
  const Matrix w = data * leading_vectors;
  const Index R = w.cols();
  const Index m = T - pmax;
  const Matrix response = w.bottomRows(m);

  LagTable table;
  for (int p = 1; p <= pmax; ++p) {
    Matrix x(m, R * p);
    for (int j = 0; j < p; ++j) x.middleCols(j * R, R) = w.middleRows(pmax - 1 - j, m);
    const Matrix b = solve_normal_equations(x, response);
    const Matrix e = response - x * b;
    const Matrix sigma = e.transpose() * e / static_cast<double>(m);
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw NumericalError("select_lag: residual covariance is singular at p = " + std::to_string(p));
    LagRow row;
    row.p = p;
    row.log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double k = static_cast<double>(R * R * p) / static_cast<double>(m);
    row.aic = row.log_det + penalty_weight(Penalty::aic, m) * k;
    row.hqic = row.log_det + penalty_weight(Penalty::hqic, m) * k;
    row.bic = row.log_det + penalty_weight(Penalty::bic, m) * k;
    row.coefficient_norm = b.norm();
    table.rows.push_back(row);
  }
  auto argmin = [&](auto member) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < table.rows.size(); ++i)
      if (table.rows[i].*member < table.rows[best].*member) best = i;
    return table.rows[best].p;
  };
  table.chosen_aic = argmin(&LagRow::aic);
  table.chosen_hqic = argmin(&LagRow::hqic);
  table.chosen_bic = argmin(&LagRow::bic);
  return table;
}

namespace {

void populate_sample(DRVARModel& model, const RegressorSet& reg) {
  model.residuals = drvar_residuals(reg, model.A, model.alphas);
  const double m = static_cast<double>(model.residuals.rows());
  model.sigma_u = model.residuals.transpose() * model.residuals / m;
  model.delta_u = model.sigma_u.diagonal();
  model.xi = model.residuals * model.A;
  model.fitted = reg.y - model.residuals;
}

} // namespace

DRVARModel fit_drvar(const Matrix& data, int r, int p, const FitOptions& options) {
  if (r < 1 || r > data.cols()) throw ArgumentError("fit_drvar: r must lie in [1, n]");
  const FactorSpaceEstimate fse = m_matrix(data, options.p0, r);
  return fit_drvar_with_loading(data, fse.vectors.leftCols(r), p, options);
}

DRVARModel fit_drvar_with_loading(const Matrix& data, const Matrix& loading, int p,
                                  const FitOptions& options) {
  check_orthonormal(loading, "fit_drvar");
  const RegressorSet reg = build_regressors(data, loading, p);
  DRVARModel model;
  model.A = loading;
  model.meta.n = data.cols();
  model.meta.r = loading.cols();
  model.meta.T = data.rows();
  model.meta.p = p;
  model.meta.method = options.method;
  solve_normal_equations(reg.z, reg.y.leftCols(1), &model.meta.condition_zz);
  if (options.method == Method::ols) {
    model.alphas = ols_alpha(reg, loading);
  } else {
    FglsResult fgls = fgls_switching(reg, loading, options.fgls);
    model.alphas = std::move(fgls.alphas);
    model.meta.iterations = fgls.iterations;
    model.meta.converged = fgls.converged;
    model.meta.diagonal_fgls = fgls.diagonal;
    model.meta.objective_trace = std::move(fgls.objective_trace);
  }
  model.meta.companion_radius = companion_spectral_radius(model.alphas);
  populate_sample(model, reg);
  model.history = data.bottomRows(p);
  return model;
}

void attach_sample(DRVARModel& model, const Matrix& data) {
  if (data.cols() != model.n())
    throw DataError("panel has " + std::to_string(data.cols()) + " series but the model has " +
                    std::to_string(model.n()));
  const RegressorSet reg = build_regressors(data, model.A, model.p());
  populate_sample(model, reg);
  model.history = data.bottomRows(model.p());
  model.meta.T = data.rows();
}

Matrix forecast(const DRVARModel& model, const Matrix& history, int horizon, bool original_units) {
  const int p = model.p();
  if (horizon < 1) throw ArgumentError("forecast horizon must be at least 1");
  if (history.rows() != p || history.cols() != model.n())
    throw ArgumentError("forecast history must be " + std::to_string(p) + " x " +
                        std::to_string(model.n()));
  const Index r = model.r();
  // states[0] is the most recent x
  std::vector<Vector> states;
  for (int j = 0; j < p; ++j) states.push_back(model.A.transpose() * history.row(p - 1 - j).transpose());
  Matrix out(horizon, model.n());
  for (int h = 0; h < horizon; ++h) {
    Vector next = Vector::Zero(r);
    for (int j = 0; j < p; ++j) next.noalias() += model.alphas[j] * states[j];
    out.row(h) = (model.A * next).transpose();
    states.insert(states.begin(), next);
    states.pop_back();
  }
  if (original_units) {
    if (!model.standardization)
      throw ArgumentError("model carries no standardization metadata for original units");
    out = destandardize(out, *model.standardization);
  }
  return out;
}

FitMetrics fit_metrics(const DRVARModel& model, const Matrix& rho) {
  if (!model.has_sample())
    throw ArgumentError("fit_metrics needs a model with residuals; attach the sample first");
  if (rho.rows() != model.n() || rho.cols() != model.r())
    throw ArgumentError("fit_metrics needs rho from the structural stage (n x r)");
  const Matrix y = model.fitted + model.residuals;
  const Matrix nu = model.residuals - model.xi * (model.A + rho).transpose();
  const Matrix chi = y - nu;
  const Index n = model.n();
  FitMetrics out{Vector(n), Vector(n)};
  for (Index i = 0; i < n; ++i) {
    const Vector yc = y.col(i).array() - y.col(i).mean();
    const Vector cc = chi.col(i).array() - chi.col(i).mean();
    const double sst = yc.squaredNorm();
    if (!(sst > 0)) throw DataError("series " + std::to_string(i + 1) + " is constant");
    out.r2_yz[i] = std::clamp(1.0 - model.residuals.col(i).squaredNorm() / sst, 0.0, 1.0);
    const double cvar = cc.squaredNorm();
    out.r2_yxi[i] = cvar > 0 ? std::min(1.0, std::pow(yc.dot(cc), 2) / (sst * cvar)) : 0.0;
    if (out.r2_yxi[i] < out.r2_yz[i] - 1e-10)
      throw NumericalError("fit_metrics: R2_Y,Xi < R2_Y,Z for series " + std::to_string(i + 1));
  }
  return out;
}

OrthogonalizedComponents orthogonalized_components(const DRVARModel& model, const Matrix& data) {
  const int p = model.p();
  if (data.cols() != model.n()) throw DataError("orthogonalized_components: column mismatch");
  const Index m = data.rows() - p;
  if (model.n() >= m)
    throw NumericalError("orthogonalized components need n < T - p; the full residual covariance "
                         "is singular and a diagonal approximation is not valid here");
  DRVARModel local = model;
  if (!local.has_sample() || local.residuals.rows() != m) attach_sample(local, data);
  const Matrix& sigma = local.sigma_u;
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NumericalError("residual covariance is singular; a diagonal approximation is not valid here");
  const Matrix y = data.bottomRows(m);
  const Matrix& a = local.A;
  const Matrix sia = llt.solve(a);
  const Matrix a_perp = orthogonal_complement(a);
  OrthogonalizedComponents out;
  out.x = y * sia * (a.transpose() * sia).inverse();
  if (a_perp.cols() == 0) {
    out.epsilon = Matrix::Zero(m, model.n());
  } else {
    const Matrix inner = a_perp.transpose() * sigma * a_perp;
    out.epsilon = y * a_perp * inner.llt().solve(a_perp.transpose() * sigma);
  }
  return out;
}

} // namespace drvar
