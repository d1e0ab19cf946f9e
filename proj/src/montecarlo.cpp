#include "drvar/montecarlo.hpp"
#include "drvar/factor_space.hpp"
#include "drvar/serialization.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

namespace drvar {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix(seed ^ splitmix(a ^ splitmix(b)));
}

Matrix standard_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix out(rows, cols);
  // column-major fill order is part of the reproducibility contract
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = dist(rng);
  return out;
}

void DGPConfig::validate() const {
  if (n < 1) throw ArgumentError("DGP: n must be positive");
  if (r < 1 || r > n) throw ArgumentError("DGP: r must lie in [1, n]");
  if (T < 3) throw ArgumentError("DGP: T must be at least 3");
  if (burn_in < 0) throw ArgumentError("DGP: burn-in must be non-negative");
  if (fixed_tau && !(std::abs(*fixed_tau) < 1.0)) throw ArgumentError("DGP: |tau| must be < 1");
}

SimulatedPanel generate_dgp(const DGPConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index n = cfg.n;
  const Index r = cfg.r;

  SimulatedPanel sim;
  DGPTruth& truth = sim.truth;
  truth.A_bar = standard_normal(n, r, rng);
  truth.m.resize(r);
  truth.omega.resize(r);
  for (Index i = 0; i < r; ++i) {
    truth.m[i] = 0.3 + 0.6 * unit(rng);
    truth.omega[i] = std::numbers::pi * unit(rng);
  }
  truth.delta1 = 2.0 * truth.m.array() * truth.omega.array().cos();
  truth.delta2 = -truth.m.array().square();
  truth.tau = cfg.fixed_tau ? *cfg.fixed_tau : unit(rng) - 0.5;
  truth.sigma_eta = toeplitz_sigma(n, truth.tau);

  const Index N = cfg.T + cfg.burn_in;
  const Matrix eta = standard_normal(N, n, rng) *
                     Matrix(truth.sigma_eta.llt().matrixL()).transpose();
  Matrix xbar = Matrix::Zero(N, r);
  for (Index t = 0; t < N; ++t) {
    xbar.row(t) = eta.row(t).head(r);
    if (t >= 1) xbar.row(t) += (xbar.row(t - 1).array() * truth.delta1.transpose().array()).matrix();
    if (t >= 2) xbar.row(t) += (xbar.row(t - 2).array() * truth.delta2.transpose().array()).matrix();
  }
  const Matrix a_perp = orthogonal_complement(truth.A_bar);
  Matrix eps = Matrix::Zero(N, n);
  if (r < n) eps = eta.rightCols(n - r) * a_perp.transpose();

  sim.x_bar = xbar.bottomRows(cfg.T);
  sim.epsilon = eps.bottomRows(cfg.T);
  sim.data = sim.x_bar * truth.A_bar.transpose() + sim.epsilon;

  const Matrix s = symmetric_sqrt(truth.A_bar.transpose() * truth.A_bar);
  const Matrix s_inv = s.inverse();
  truth.A = truth.A_bar * s_inv;
  truth.alphas = {s * truth.delta1.asDiagonal() * s_inv, s * truth.delta2.asDiagonal() * s_inv};
  truth.phi = stacked_phi(truth.A, truth.alphas);
  Matrix b(n, n);
  b.leftCols(r) = truth.A_bar;
  if (r < n) b.rightCols(n - r) = a_perp;
  truth.sigma_u = b * truth.sigma_eta * b.transpose();
  return sim;
}

DataBasedDgp::DataBasedDgp(const DRVARModel& model, Index burn_in)
    : model_(model), burn_in_(burn_in) {
  if (burn_in < 0) throw ArgumentError("burn-in must be non-negative");
  Matrix sigma = model.sigma_u;
  if (sigma.size() == 0) {
    sigma = model.delta_u.asDiagonal();
    diagonal_fallback_ = true;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (sigma + sigma.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of Sigma_u failed");
  const Vector& lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff();
  if (!(lmax > 0)) throw NumericalError("Sigma_u is zero");
  if (lambda.minCoeff() < -1e-10 * lmax) clamped_ = true;
  std::vector<Index> keep;
  for (Index i = 0; i < lambda.size(); ++i)
    if (lambda[i] > 1e-14 * lmax) keep.push_back(i);
  error_factor_.resize(sigma.rows(), static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k)
    error_factor_.col(static_cast<Index>(k)) =
        eig.eigenvectors().col(keep[k]) * std::sqrt(lambda[keep[k]]);
  phi_ = stacked_phi(model.A, model.alphas);
}

Matrix DataBasedDgp::simulate(Index T, std::uint64_t seed) const {
  if (T < 3) throw ArgumentError("simulate: T must be at least 3");
  std::mt19937_64 rng(seed);
  const Index N = T + burn_in_;
  const int p = model_.p();
  const Matrix u = standard_normal(N, error_factor_.cols(), rng) * error_factor_.transpose();
  const Matrix xi = u * model_.A;
  Matrix x = Matrix::Zero(N, model_.r());
  Matrix y(N, model_.n());
  for (Index t = 0; t < N; ++t) {
    Vector pred = Vector::Zero(model_.r());
    for (int j = 1; j <= p && j <= t; ++j) pred.noalias() += model_.alphas[j - 1] * x.row(t - j).transpose();
    x.row(t) = pred.transpose() + xi.row(t);
    y.row(t) = (model_.A * pred).transpose() + u.row(t);
  }
  return y.bottomRows(T);
}

Matrix data_based_dgp(const DRVARModel& model, Index T, std::uint64_t seed) {
  return DataBasedDgp(model).simulate(T, seed);
}

const MethodSummary& MCReport::row(const std::string& method) const {
  for (const auto& r : rows)
    if (r.method == method) return r;
  throw ArgumentError("report has no row for method '" + method + "'");
}

ReplicationOutcome run_replication(const ExperimentCell& cell, std::size_t cell_index, int rep,
                                   const ExperimentOptions& options) {
  ReplicationOutcome out;
  const std::uint64_t seed = mix_seed(options.seed, cell_index, static_cast<std::uint64_t>(rep));
  try {
    Matrix y;
    Matrix phi_true;
    if (cell.kind == CellKind::artificial) {
      DGPConfig cfg;
      cfg.n = cell.n;
      cfg.r = cell.r;
      cfg.T = cell.T;
      cfg.burn_in = options.burn_in;
      cfg.seed = seed;
      SimulatedPanel sim = generate_dgp(cfg);
      y = std::move(sim.data);
      phi_true = std::move(sim.truth.phi);
    } else {
      if (!cell.model) throw ArgumentError("data-based cell has no model");
      y = cell.model->simulate(cell.T, seed);
      phi_true = cell.model->phi();
    }
    const FactorSpaceEstimate fse = m_matrix(y, options.p0, options.R);
    out.ly = ly_rank(fse.eigenvalues, options.R);
    const SelectionTable table = select_rank(y, fse.vectors, options.p, options.R, options.estimator);
    out.aic = table.chosen_aic;
    out.hqic = table.chosen_hqic;
    out.bic = table.chosen_bic;
    auto distance = [&](int q) {
      const Matrix phi_hat =
          stacked_phi(fse.vectors.leftCols(q), table.alphas[static_cast<std::size_t>(q - 1)]);
      return rfd(phi_hat, phi_true);
    };
    out.rfd_aic = distance(out.aic);
    out.rfd_hqic = distance(out.hqic);
    out.rfd_bic = distance(out.bic);
  } catch (const Error& e) {
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

namespace {

MethodSummary summarize(const std::string& method, const std::vector<int>& ranks,
                        const std::vector<double>& rfds, Index r, bool r_equals_n, int R) {
  MethodSummary s;
  s.method = method;
  const double count = static_cast<double>(ranks.size());
  if (ranks.empty()) return s;
  double correct = 0, under = 0, total = 0;
  for (int q : ranks) {
    const int target = r_equals_n ? R : static_cast<int>(r);
    if (q == target) correct += 1;
    if (!r_equals_n && q < r) under += 1;
    total += q;
  }
  s.pct_correct = 100.0 * correct / count;
  s.pct_under = 100.0 * under / count;
  s.mean_rank = total / count;
  if (!rfds.empty()) {
    double mean = 0;
    for (double v : rfds) mean += v;
    s.rfd_mean = mean / static_cast<double>(rfds.size());
    s.rfd_median = quantile(rfds, 0.5);
    s.rfd_q25 = quantile(rfds, 0.25);
    s.rfd_q75 = quantile(rfds, 0.75);
  }
  return s;
}

} // namespace

std::vector<MCReport> run_experiment(const std::vector<ExperimentCell>& grid,
                                     const ExperimentOptions& options) {
  if (options.R < 1) throw ArgumentError("mc: R must be positive");
  if (options.p < 1) throw ArgumentError("mc: p must be positive");
  std::vector<MCReport> reports;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const ExperimentCell& cell = grid[c];
    if (cell.reps < 1) throw ArgumentError("mc: reps must be positive");
    if (cell.kind == CellKind::artificial && options.R >= cell.n)
      throw ArgumentError("mc: R must be smaller than n");
    const auto start = std::chrono::steady_clock::now();
    std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(cell.reps));
    parallel_for(outcomes.size(), options.threads, [&](std::size_t i) {
      outcomes[i] = run_replication(cell, c, static_cast<int>(i), options);
    });

    MCReport report;
    report.cell = cell;
    report.replications = cell.reps;
    std::vector<int> ly, aic, hqic, bic;
    std::vector<double> rfd_aic, rfd_hqic, rfd_bic;
    for (const auto& o : outcomes) {
      if (o.failed) {
        ++report.failures;
        continue;
      }
      ly.push_back(o.ly);
      aic.push_back(o.aic);
      hqic.push_back(o.hqic);
      bic.push_back(o.bic);
      rfd_aic.push_back(*o.rfd_aic);
      rfd_hqic.push_back(*o.rfd_hqic);
      rfd_bic.push_back(*o.rfd_bic);
    }
    const bool full = cell.kind == CellKind::artificial && cell.r == cell.n;
    const Index r = cell.kind == CellKind::data_based && cell.model ? cell.model->model().r() : cell.r;
    report.rows.push_back(summarize("LY", ly, {}, r, full, options.R));
    report.rows.push_back(summarize("BIC", bic, rfd_bic, r, full, options.R));
    report.rows.push_back(summarize("HQIC", hqic, rfd_hqic, r, full, options.R));
    report.rows.push_back(summarize("AIC", aic, rfd_aic, r, full, options.R));
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    reports.push_back(std::move(report));
  }
  return reports;
}

std::string mc_report_csv(const std::vector<MCReport>& reports) {
  std::string out =
      "cell,kind,n,r,T,reps,failures,method,pct_correct,pct_under,mean_rank,rfd_mean,rfd_median,"
      "rfd_q25,rfd_q75\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& rep : reports) {
    const auto& c = rep.cell;
    const Index r = c.kind == CellKind::data_based && c.model ? c.model->model().r() : c.r;
    for (const auto& row : rep.rows)
      out += c.label + "," + (c.kind == CellKind::artificial ? "artificial" : "data_based") + "," +
             std::to_string(c.n) + "," + std::to_string(r) + "," + std::to_string(c.T) + "," +
             std::to_string(rep.replications) + "," + std::to_string(rep.failures) + "," +
             row.method + "," + format_double(row.pct_correct) + "," +
             format_double(row.pct_under) + "," + format_double(row.mean_rank) + "," +
             opt(row.rfd_mean) + "," + opt(row.rfd_median) + "," + opt(row.rfd_q25) + "," +
             opt(row.rfd_q75) + "\n";
  }
  return out;
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

} // namespace drvar
