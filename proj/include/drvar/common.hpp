#ifndef DRVAR_COMMON_HPP
#define DRVAR_COMMON_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace drvar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using MatrixList = std::vector<Eigen::MatrixXd>;
using Index = Eigen::Index;

// Error hierarchy. The category maps onto the CLI exit codes:
// argument -> 2, data -> 3, numerical -> 4.
enum class ErrorCategory { argument, data, numerical };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, std::string code, const std::string& message)
      : std::runtime_error(message), category_(category), code_(std::move(code)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& code() const noexcept { return code_; }

private:
  ErrorCategory category_;
  std::string code_;
};

class ArgumentError : public Error {
public:
  explicit ArgumentError(const std::string& message, std::string code = "E_ARGUMENT")
      : Error(ErrorCategory::argument, std::move(code), message) {}
};

class DataError : public Error {
public:
  explicit DataError(const std::string& message, std::string code = "E_DATA")
      : Error(ErrorCategory::data, std::move(code), message) {}
};

class ParseError : public DataError {
public:
  explicit ParseError(const std::string& message) : DataError(message, "E_PARSE") {}
};

class DomainError : public DataError {
public:
  explicit DomainError(const std::string& message) : DataError(message, "E_DOMAIN") {}
};

class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& message, std::string code = "E_NUMERICAL")
      : Error(ErrorCategory::numerical, std::move(code), message) {}
};

enum class Penalty { aic, hqic, bic };
enum class Method { ols, fgls };

inline constexpr Penalty kAllPenalties[] = {Penalty::aic, Penalty::hqic, Penalty::bic};

std::string to_string(Penalty penalty);
std::string to_string(Method method);
Method parse_method(const std::string& text);
Penalty parse_penalty(const std::string& text);

/// Flips each column so that its entry of largest magnitude is positive.
template <typename Derived>
void normalize_column_signs(Eigen::MatrixBase<Derived>& vectors) {
  for (Index c = 0; c < vectors.cols(); ++c) {
    Index arg = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, c) < 0) vectors.col(c) *= -1;
  }
}

/// Orthonormal basis of the orthogonal complement of span(a), n x (n - r).
Matrix orthogonal_complement(const Matrix& a);

/// Symmetric square root of a positive definite matrix.
Matrix symmetric_sqrt(const Matrix& spd);

} // namespace drvar

#endif // DRVAR_COMMON_HPP
