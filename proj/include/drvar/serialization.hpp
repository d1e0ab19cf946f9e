#ifndef DRVAR_SERIALIZATION_HPP
#define DRVAR_SERIALIZATION_HPP

#include "drvar/estimation.hpp"

#include <string>

namespace drvar {

inline constexpr int kModelSchemaVersion = 1;

/// JSON document {schema_version, n, r, p, A (row-major), alphas, sigma_diag,
/// sigma_full?, history?, standardization?, names, meta}.
std::string serialize_model(const DRVARModel& model, bool include_sigma_full = true);
DRVARModel deserialize_model(const std::string& text);

void save_model(const DRVARModel& model, const std::string& path, bool include_sigma_full = true);
DRVARModel load_model(const std::string& path);

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double value);

/// Header row then one row per matrix row.
std::string matrix_csv(const Matrix& values, const std::vector<std::string>& header,
                       const std::vector<std::string>& row_labels = {},
                       const std::string& label_header = "");

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

} // namespace drvar

#endif // DRVAR_SERIALIZATION_HPP
