#include "drvar/common.hpp"

#include <algorithm>
#include <cctype>

namespace drvar {

namespace {

std::string lower(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return text;
}

} // namespace

std::string to_string(Penalty penalty) {
  switch (penalty) {
    case Penalty::aic: return "AIC";
    case Penalty::hqic: return "HQIC";
    case Penalty::bic: return "BIC";
  }
  return "?";
}

std::string to_string(Method method) { return method == Method::ols ? "ols" : "fgls"; }

Method parse_method(const std::string& text) {
  const auto t = lower(text);
  if (t == "ols") return Method::ols;
  if (t == "fgls") return Method::fgls;
  throw ArgumentError("unknown estimation method '" + text + "' (expected ols or fgls)", "E_USAGE");
}

Penalty parse_penalty(const std::string& text) {
  const auto t = lower(text);
  if (t == "aic") return Penalty::aic;
  if (t == "hqic" || t == "hq") return Penalty::hqic;
  if (t == "bic") return Penalty::bic;
  throw ArgumentError("unknown information criterion '" + text + "'", "E_USAGE");
}

Matrix orthogonal_complement(const Matrix& a) {
  const Index n = a.rows();
  const Index r = a.cols();
  if (r >= n) return Matrix(n, 0);
  Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q.rightCols(n - r);
}

Matrix symmetric_sqrt(const Matrix& spd) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(spd);
  if (eig.info() != Eigen::Success) throw NumericalError("symmetric_sqrt: eigensolver failed");
  if (eig.eigenvalues().minCoeff() <= 0)
    throw NumericalError("symmetric_sqrt: matrix is not positive definite");
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

} // namespace drvar
