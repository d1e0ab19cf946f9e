#ifndef DRVAR_MONTECARLO_HPP
#define DRVAR_MONTECARLO_HPP

#include "drvar/common.hpp"
#include "drvar/estimation.hpp"
#include "drvar/timeseries.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace drvar {

/// splitmix64 finalizer, used to derive independent streams from counters.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Standard normal draws into a freshly allocated matrix.
Matrix standard_normal(Index rows, Index cols, std::mt19937_64& rng);

/// Entry (i, j) = tau^{|i-j|}.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> toeplitz_sigma(Index n, Scalar tau) {
  using std::abs;
  if (!(abs(tau) < Scalar(1))) throw ArgumentError("toeplitz_sigma: |tau| must be < 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Index d = i > j ? i - j : j - i;
      Scalar v(1);
      for (Index k = 0; k < d; ++k) v *= tau;
      out(i, j) = v;
    }
  return out;
}

/// 100 * ||Phi_hat - Phi||_F / ||Phi||_F.
template <typename DerivedA, typename DerivedB>
double rfd(const Eigen::MatrixBase<DerivedA>& phi_hat, const Eigen::MatrixBase<DerivedB>& phi_true) {
  if (phi_hat.rows() != phi_true.rows() || phi_hat.cols() != phi_true.cols())
    throw ArgumentError("rfd: shape mismatch");
  const double denom = phi_true.norm();
  if (denom == 0.0) throw ArgumentError("rfd: true coefficients have zero norm");
  return 100.0 * (phi_hat - phi_true).norm() / denom;
}

struct DGPConfig {
  Index n = 150;
  Index r = 3;
  Index T = 150;
  Index burn_in = 50;
  std::uint64_t seed = 1;
  std::optional<double> fixed_tau;  // drawn from U[-0.5, 0.5] when empty

  bool r_equals_n() const { return r == n; }
  void validate() const;
};

struct DGPTruth {
  Matrix A_bar;       // n x r
  Matrix A;           // n x r orthonormal
  MatrixList alphas;  // two r x r blocks
  Matrix phi;         // 2n x n stacked [Phi_1'; Phi_2']
  Matrix sigma_u;     // n x n
  Matrix sigma_eta;
  Vector m, omega, delta1, delta2;
  double tau = 0;
};

struct SimulatedPanel {
  Matrix data;  // T x n
  DGPTruth truth;
  Matrix x_bar;  // T x r diagonal VAR(2) states
  Matrix epsilon;  // T x n static component
};

/// Simulates the diagonal-VAR(2) design: x_bar driven by the first r
/// coordinates of eta ~ N(0, Toeplitz(tau)), e = A_bar_perp * (remaining),
/// Y = A_bar x_bar + e.
SimulatedPanel generate_dgp(const DGPConfig& cfg);

/// Precomputes the error factor of a fitted model for repeated simulation.
class DataBasedDgp {
public:
  explicit DataBasedDgp(const DRVARModel& model, Index burn_in = 50);

  Matrix simulate(Index T, std::uint64_t seed) const;
  const Matrix& phi() const { return phi_; }
  bool clamped() const { return clamped_; }
  bool diagonal_fallback() const { return diagonal_fallback_; }
  const DRVARModel& model() const { return model_; }

private:
  DRVARModel model_;
  Matrix error_factor_;  // n x k with error_factor * error_factor' = Sigma_u
  Matrix phi_;
  Index burn_in_;
  bool clamped_ = false;
  bool diagonal_fallback_ = false;
};

Matrix data_based_dgp(const DRVARModel& model, Index T, std::uint64_t seed);

/// Design targets for the synthetic stand-in of the empirical model
/// (n = 211 quarterly series, r = 8, p = 2).
struct CalibrationTargets {
  Index n = 211;
  Index r = 8;
  double r2_predictable = 0.30;  // cross-series mean R^2_{Y,Z}
  double r2_common = 0.53;       // cross-series mean R^2_{Y,Xi}
  std::uint64_t seed = 20191231;
};

/// Builds a DRVAR (A, alpha_1, alpha_2, Sigma_u) with one dominant
/// business-cycle index and seven weaker ones, scaled so that the population
/// fit measures match the targets on average across series.
DRVARModel calibrated_empirical_model(const CalibrationTargets& targets = {});

enum class CellKind { artificial, data_based };

struct ExperimentCell {
  CellKind kind = CellKind::artificial;
  Index n = 150;
  Index r = 3;  // for r = n cells, r equals n
  Index T = 150;
  int reps = 200;
  std::shared_ptr<const DataBasedDgp> model;  // data-based cells only
  std::string label;
};

struct ExperimentOptions {
  Method estimator = Method::ols;
  int p = 2;
  int p0 = 2;
  int R = 11;
  std::uint64_t seed = 2022;
  unsigned threads = 0;  // 0 = hardware concurrency
  Index burn_in = 50;
};

struct MethodSummary {
  std::string method;  // LY, BIC, HQIC, AIC
  double pct_correct = 0;  // %r_hat = r, or %r_hat = R when r = n
  double pct_under = 0;    // %r_hat < r (r < n only)
  double mean_rank = 0;
  std::optional<double> rfd_mean, rfd_median, rfd_q25, rfd_q75;
};

struct MCReport {
  ExperimentCell cell;
  std::vector<MethodSummary> rows;
  int replications = 0;
  int failures = 0;
  double wall_seconds = 0;
  const MethodSummary& row(const std::string& method) const;
};

struct ReplicationOutcome {
  int ly = 0;
  int aic = 0, hqic = 0, bic = 0;
  std::optional<double> rfd_aic, rfd_hqic, rfd_bic;
  bool failed = false;
  std::string error;
};

/// One replication of a cell; seeds derive from (options.seed, cell, rep).
ReplicationOutcome run_replication(const ExperimentCell& cell, std::size_t cell_index, int rep,
                                   const ExperimentOptions& options);

std::vector<MCReport> run_experiment(const std::vector<ExperimentCell>& grid,
                                     const ExperimentOptions& options = {});

std::string mc_report_csv(const std::vector<MCReport>& reports);

/// Runs body(i) for i in [0, count) on a small pool of threads.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

} // namespace drvar

#endif // DRVAR_MONTECARLO_HPP
