#ifndef DRVAR_FACTOR_SPACE_HPP
#define DRVAR_FACTOR_SPACE_HPP

#include "drvar/common.hpp"

#include <string>

namespace drvar {

/// Eigenanalysis of the summed squared autocovariances
/// M = sum_{j=1..p0} S(j) S(j)'.
struct FactorSpaceEstimate {
  Matrix m_hat;        // n x n, symmetric
  Vector eigenvalues;  // descending, clamped at zero
  Matrix vectors;      // n x R leading eigenvectors
  int p0 = 0;
  int R = 0;

  /// First q leading eigenvectors.
  Matrix leading(int q) const;
};

/// Sample autocovariance at lag j: T^{-1} sum_{t>j} (y_t - ybar)(y_{t-j} - ybar)'.
template <typename Derived>
Matrix autocovariance(const Eigen::MatrixBase<Derived>& data, Index lag) {
  const Index T = data.rows();
  if (lag < 0 || lag >= T)
    throw ArgumentError("autocovariance: lag " + std::to_string(lag) +
                        " must lie in [0, T) with T = " + std::to_string(T));
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Matrix centered = data.rowwise() - mean;
  const Index m = T - lag;
  return centered.bottomRows(m).transpose() * centered.topRows(m) / static_cast<double>(T);
}

FactorSpaceEstimate m_matrix(const Matrix& data, int p0, int R);

/// Eigenvalue-ratio rank estimate: argmin_{i=1..R} lambda_{i+1} / lambda_i.
/// Ratios with a zero denominator are excluded; ties go to the smallest i.
int ly_rank(const Eigen::Ref<const Vector>& eigenvalues, int R);

/// sqrt(1 - lambda_min(B'AA'B)) for orthonormal n x r blocks A and B.
double subspace_distance(const Matrix& a, const Matrix& b);

/// CSV with columns index,lambda,ratio (ratio = lambda_{i+1}/lambda_i).
std::string scree_csv(const Vector& eigenvalues);

} // namespace drvar

#endif // DRVAR_FACTOR_SPACE_HPP
