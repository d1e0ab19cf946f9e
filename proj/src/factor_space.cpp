#include "drvar/factor_space.hpp"
#include "drvar/serialization.hpp"

#include <limits>

namespace drvar {

Matrix FactorSpaceEstimate::leading(int q) const {
  if (q < 1 || q > vectors.cols())
    throw ArgumentError("requested " + std::to_string(q) + " eigenvectors but only " +
                        std::to_string(vectors.cols()) + " are stored");
  return vectors.leftCols(q);
}

FactorSpaceEstimate m_matrix(const Matrix& data, int p0, int R) {
  const Index T = data.rows();
  const Index n = data.cols();
  if (p0 < 1 || p0 >= T) throw ArgumentError("p0 must satisfy 1 <= p0 < T");
  if (R < 1 || R > n) throw ArgumentError("R must satisfy 1 <= R <= n");

  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Matrix centered = data.rowwise() - mean;
  Matrix m = Matrix::Zero(n, n);
  for (int j = 1; j <= p0; ++j) {
    const Index rows = T - j;
    const Matrix s = centered.bottomRows(rows).transpose() * centered.topRows(rows) /
                     static_cast<double>(T);
    m.noalias() += s * s.transpose();
  }

  FactorSpaceEstimate out;
  out.m_hat = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(out.m_hat);
  if (eig.info() != Eigen::Success) throw NumericalError("m_matrix: eigensolver failed");
  const Vector ascending = eig.eigenvalues();
  if (ascending.minCoeff() < -1e-10 * std::max(1.0, ascending.maxCoeff()))
    throw NumericalError("m_matrix: M is not positive semidefinite");
  out.eigenvalues = ascending.reverse().cwiseMax(0.0);
  out.vectors = eig.eigenvectors().rowwise().reverse().leftCols(R);
  normalize_column_signs(out.vectors);
  out.p0 = p0;
  out.R = R;
  return out;
}

int ly_rank(const Eigen::Ref<const Vector>& eigenvalues, int R) {
  if (R < 1) throw ArgumentError("ly_rank: R must be positive");
  if (R + 1 > eigenvalues.size())
    throw ArgumentError("ly_rank: need R + 1 = " + std::to_string(R + 1) + " eigenvalues, got " +
                        std::to_string(eigenvalues.size()));
  int best = 0;
  double best_ratio = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= R; ++i) {
    const double denom = eigenvalues[i - 1];
    if (denom == 0.0) continue;
    const double ratio = eigenvalues[i] / denom;
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best = i;
    }
  }
  // every ratio undefined: nothing distinguishes the indices
  return best == 0 ? 1 : best;
}

double subspace_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ArgumentError("subspace_distance: shape mismatch");
  const Index r = a.cols();
  const Matrix eye = Matrix::Identity(r, r);
  if ((a.transpose() * a - eye).cwiseAbs().maxCoeff() > 1e-8 ||
      (b.transpose() * b - eye).cwiseAbs().maxCoeff() > 1e-8)
    throw ArgumentError("subspace_distance: inputs must have orthonormal columns");
  const Matrix ab = a.transpose() * b;
  const Matrix g = ab.transpose() * ab;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
  const double lmin = std::clamp(eig.eigenvalues().minCoeff(), 0.0, 1.0);
  return std::sqrt(1.0 - lmin);
}

std::string scree_csv(const Vector& eigenvalues) {
  std::string out = "index,lambda,ratio\n";
  for (Index i = 0; i < eigenvalues.size(); ++i) {
    out += std::to_string(i + 1) + "," + format_double(eigenvalues[i]) + ",";
    if (i + 1 < eigenvalues.size() && eigenvalues[i] != 0.0)
      out += format_double(eigenvalues[i + 1] / eigenvalues[i]);
    out += "\n";
  }
  return out;
}

} // namespace drvar
