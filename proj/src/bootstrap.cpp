#include "drvar/montecarlo.hpp"
#include "drvar/structural.hpp"

#include <cmath>
#include <optional>

namespace drvar {

namespace {

struct Replicate {
  Matrix irf;
  Vector band, zero;
  Matrix q;  // loading of the identified shocks (mbccs), for sign alignment
};

Replicate evaluate(const DRVARModel& model, const BootstrapTargets& targets) {
  const StructuralDecomposition dec = common_component_ma(model, targets.H);
  const ShockIdentification ident = targets.scheme == Scheme::mbccs
                                        ? mbccs_identification(dec, targets.band, targets.grid_points)
                                        : recursive_identification(dec);
  Replicate out;
  out.irf = irf(ident, dec, targets.shock, targets.irf_horizons, targets.cumulate);
  const VarianceContributions vc =
      variance_contributions(ident, dec, targets.band, targets.shock, targets.grid_points);
  out.band = vc.band;
  out.zero = vc.zero;
  out.q = ident.Q;
  return out;
}

Matrix rebuild_panel(const DRVARModel& model, const Matrix& data, const Matrix& shocks) {
  const int p = model.p();
  const Index T = data.rows();
  Matrix y(T, model.n());
  y.topRows(p) = data.topRows(p);
  Matrix x(T, model.r());
  x.topRows(p) = data.topRows(p) * model.A;
  for (Index t = p; t < T; ++t) {
    Vector next = Vector::Zero(model.r());
    for (int j = 1; j <= p; ++j) next.noalias() += model.alphas[j - 1] * x.row(t - j).transpose();
    y.row(t) = (model.A * next).transpose() + shocks.row(t - p);
    x.row(t) = y.row(t) * model.A;
  }
  return y;
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace

BootstrapResult bootstrap_se(const DRVARModel& model, const Matrix& data, int B,
                             unsigned long long seed, const BootstrapTargets& targets,
                             const FitOptions& fit_options) {
  if (B < 50) throw ArgumentError("bootstrap needs B >= 50 replicates");
  if (data.cols() != model.n()) throw DataError("bootstrap: panel does not match the model");
  DRVARModel base = model;
  if (!base.has_sample() || base.residuals.rows() != data.rows() - base.p()) attach_sample(base, data);

  const Replicate point = evaluate(base, targets);
  const Matrix centered = base.residuals.rowwise() - base.residuals.colwise().mean();
  const Index m = centered.rows();
  const Index n = base.n();
  const int horizons = targets.irf_horizons;

  BootstrapResult result;
  result.replicates = B;
  if (centered.cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, data.cwiseAbs().maxCoeff())) {
    // every replicate reproduces the point estimate
    result.irf_se = Matrix::Zero(horizons, n);
    result.irf_lower = result.irf_upper = point.irf;
    result.band_se = result.zero_se = Vector::Zero(n);
    result.band_lower = result.band_upper = point.band;
    result.zero_lower = result.zero_upper = point.zero;
    return result;
  }

  std::vector<std::optional<Replicate>> draws(static_cast<std::size_t>(B));
  parallel_for(static_cast<std::size_t>(B), 0, [&](std::size_t b) {
    std::mt19937_64 rng(mix_seed(seed, 0xb0075ULL, b));
    std::uniform_int_distribution<Index> pick(0, m - 1);
    Matrix shocks(m, n);
    for (Index t = 0; t < m; ++t) shocks.row(t) = centered.row(pick(rng));
    try {
      const Matrix y = rebuild_panel(base, data, shocks);
      const DRVARModel refit = fit_drvar(y, static_cast<int>(base.r()), base.p(), fit_options);
      Replicate rep = evaluate(refit, targets);
      if (targets.scheme == Scheme::mbccs &&
          rep.q.col(targets.shock).dot(point.q.col(targets.shock)) < 0)
        rep.irf = -rep.irf;
      draws[b] = std::move(rep);
    } catch (const Error&) {
      draws[b].reset();
    }
  });

  std::vector<const Replicate*> ok;
  for (const auto& d : draws)
    if (d) ok.push_back(&*d);
  result.failures = B - static_cast<int>(ok.size());
  if (result.failures * 10 > B)
    throw NumericalError("bootstrap: " + std::to_string(result.failures) + " of " + std::to_string(B) +
                         " replicates failed");

  auto summarize = [&](auto get, double& se, double& lo, double& hi) {
    std::vector<double> v;
    v.reserve(ok.size());
    for (const Replicate* rep : ok) v.push_back(get(*rep));
    se = sample_sd(v);
    lo = quantile(v, 0.16);
    hi = quantile(v, 0.84);
  };

  result.irf_se.resize(horizons, n);
  result.irf_lower.resize(horizons, n);
  result.irf_upper.resize(horizons, n);
  for (int h = 0; h < horizons; ++h)
    for (Index i = 0; i < n; ++i)
      summarize([&](const Replicate& r) { return r.irf(h, i); }, result.irf_se(h, i),
                result.irf_lower(h, i), result.irf_upper(h, i));
  result.band_se.resize(n);
  result.band_lower.resize(n);
  result.band_upper.resize(n);
  result.zero_se.resize(n);
  result.zero_lower.resize(n);
  result.zero_upper.resize(n);
  for (Index i = 0; i < n; ++i) {
    summarize([&](const Replicate& r) { return r.band[i]; }, result.band_se[i], result.band_lower[i],
              result.band_upper[i]);
    summarize([&](const Replicate& r) { return r.zero[i]; }, result.zero_se[i], result.zero_lower[i],
              result.zero_upper[i]);
  }
  return result;
}

} // namespace drvar
