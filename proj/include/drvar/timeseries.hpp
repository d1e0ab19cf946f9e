#ifndef DRVAR_TIMESERIES_HPP
#define DRVAR_TIMESERIES_HPP

#include "drvar/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace drvar {

struct Standardization {
  Vector mean;
  Vector scale;
};

/// T x n observation panel with per-variable metadata.
///
/// Leading cells of later-starting series are stored as NaN and the column
/// is flagged in `late_start`; every other entry is finite.
struct Panel {
  Matrix data;
  std::vector<std::string> names;
  std::vector<std::string> dates;  // empty when the file has no date column
  std::vector<int> tcodes;         // empty when the file has no tcode row
  std::vector<bool> late_start;    // one flag per column
  std::optional<Standardization> standardization;

  Index rows() const { return data.rows(); }
  Index cols() const { return data.cols(); }
  bool has_missing() const;
  void validate() const;
};

struct CleaningEntry {
  Index row;
  double original;
  double replacement;
};

struct CleaningReport {
  struct Column {
    Index column;
    std::string name;
    std::vector<CleaningEntry> entries;
    std::string warning;
  };
  std::vector<Column> columns;  // only columns that were touched or warned about

  Index series_touched() const;
  Index points_replaced() const;
  bool empty() const { return points_replaced() == 0; }
};

struct LoadOptions {
  // std::nullopt means auto-detect.
  std::optional<bool> dates_column;
  std::optional<bool> tcode_row;
};

Panel load_panel(const std::string& path, const LoadOptions& options = {});
Panel parse_panel(const std::string& text, const LoadOptions& options = {});
void write_panel(const Panel& panel, const std::string& path);
std::string format_panel(const Panel& panel);

/// Differencing order implied by a transformation code (0, 1 or 2).
int tcode_order(int code);

/// FRED transformation codes:
/// 1 level, 2 (1-L)x, 3 (1-L)^2 x, 4 log x, 5 (1-L) log x,
/// 6 (1-L)^2 log x, 7 (1-L)(x_t / x_{t-1} - 1).
Vector apply_tcode(const Eigen::Ref<const Vector>& series, int code);

/// Applies each column's tcode and trims every column to the longest
/// differencing loss so the panel stays rectangular.
Panel transform_panel(const Panel& panel);

/// Removes columns flagged as later-starting.
Panel drop_late_starting(const Panel& panel);

/// Drops leading rows until every column is observed.
Panel trim_to_common_sample(const Panel& panel);

/// Replaces points with |x - median| > k * IQR by linear interpolation of the
/// nearest non-outlier neighbours (nearest value at the endpoints).
std::pair<Panel, CleaningReport> clean_outliers(const Panel& panel, double k = 10.0);

/// Demeans and scales each column to unit variance (divisor T). Composes with
/// any standardization already recorded on the panel.
Panel standardize(const Panel& panel);

/// Maps standardized values back to original units, column by column.
Matrix destandardize(const Matrix& values, const Standardization& s);

/// Linear-interpolation quantile (R type 7) of an unsorted sample.
double quantile(std::vector<double> sample, double prob);

} // namespace drvar

#endif // DRVAR_TIMESERIES_HPP
