#include "drvar/timeseries.hpp"

#include <algorithm>
#include <cmath>

namespace drvar {

bool Panel::has_missing() const { return !data.allFinite(); }

void Panel::validate() const {
  const auto n = static_cast<std::size_t>(data.cols());
  if (data.rows() < 2) throw DataError("panel needs at least two observations");
  if (n < 1) throw DataError("panel needs at least one variable");
  if (names.size() != n) throw DataError("panel has " + std::to_string(n) + " columns but " +
                                         std::to_string(names.size()) + " names");
  if (!tcodes.empty() && tcodes.size() != n) throw DataError("tcode count does not match columns");
  if (!dates.empty() && dates.size() != static_cast<std::size_t>(data.rows()))
    throw DataError("date count does not match rows");
  if (!late_start.empty() && late_start.size() != n)
    throw DataError("late-start flags do not match columns");
}

Index CleaningReport::series_touched() const {
  return std::count_if(columns.begin(), columns.end(),
                       [](const Column& c) { return !c.entries.empty(); });
}

Index CleaningReport::points_replaced() const {
  Index total = 0;
  for (const auto& c : columns) total += static_cast<Index>(c.entries.size());
  return total;
}

int tcode_order(int code) {
  switch (code) {
    case 1:
    case 4: return 0;
    case 2:
    case 5: return 1;
    case 3:
    case 6:
    case 7: return 2;
    default:
      throw ArgumentError("transformation code " + std::to_string(code) + " is outside 1..7");
  }
}

namespace {

Vector difference(const Vector& x) {
  const Index m = x.size() - 1;
  return x.tail(m) - x.head(m);
}

Vector checked_log(const Eigen::Ref<const Vector>& x, int code) {
  for (Index i = 0; i < x.size(); ++i)
    if (!(x[i] > 0))
      throw DomainError("non-positive value " + std::to_string(x[i]) + " at index " +
                        std::to_string(i) + " under log transformation code " +
                        std::to_string(code));
  return x.array().log().matrix();
}

} // namespace

Vector apply_tcode(const Eigen::Ref<const Vector>& series, int code) {
  const int order = tcode_order(code);
  if (series.size() <= order)
    throw ArgumentError("series of length " + std::to_string(series.size()) +
                        " is too short for transformation code " + std::to_string(code));
  switch (code) {
    case 1: return series;
    case 2: return difference(series);
    case 3: return difference(difference(series));
    case 4: return checked_log(series, code);
    case 5: return difference(checked_log(series, code));
    case 6: return difference(difference(checked_log(series, code)));
    case 7: {
      const Index m = series.size() - 1;
      Vector growth(m);
      for (Index t = 0; t < m; ++t) {
        if (series[t] == 0)
          throw DomainError("zero value at index " + std::to_string(t) +
                            " under transformation code 7");
        growth[t] = series[t + 1] / series[t] - 1.0;
      }
      return difference(growth);
    }
  }
  return series;  // unreachable, tcode_order validated the code
}

Panel transform_panel(const Panel& panel) {
  panel.validate();
  if (panel.has_missing())
    throw DataError("panel has missing leading values; drop late-starting series or trim the sample first");
  const Index n = panel.cols();
  std::vector<int> codes = panel.tcodes;
  if (codes.empty()) codes.assign(n, 1);
  int max_order = 0;
  for (int c : codes) max_order = std::max(max_order, tcode_order(c));
  const Index T = panel.rows() - max_order;
  if (T < 2) throw DataError("too few observations left after differencing");

  Panel out;
  out.data.resize(T, n);
  for (Index j = 0; j < n; ++j) {
    try {
      const Vector transformed = apply_tcode(panel.data.col(j), codes[j]);
      out.data.col(j) = transformed.tail(T);
    } catch (const DomainError& e) {
      throw DomainError("variable '" + panel.names[j] + "': " + e.what());
    }
  }
  out.names = panel.names;
  if (!panel.dates.empty()) out.dates.assign(panel.dates.end() - T, panel.dates.end());
  out.tcodes.assign(n, 1);
  out.late_start.assign(n, false);
  return out;
}

Panel drop_late_starting(const Panel& panel) {
  panel.validate();
  std::vector<Index> keep;
  for (Index j = 0; j < panel.cols(); ++j)
    if (panel.late_start.empty() || !panel.late_start[j]) keep.push_back(j);
  if (keep.empty()) throw DataError("every series starts late; nothing left after dropping");
  Panel out;
  out.data.resize(panel.rows(), static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const Index j = keep[k];
    out.data.col(static_cast<Index>(k)) = panel.data.col(j);
    out.names.push_back(panel.names[j]);
    if (!panel.tcodes.empty()) out.tcodes.push_back(panel.tcodes[j]);
  }
  out.dates = panel.dates;
  out.late_start.assign(keep.size(), false);
  if (panel.standardization) {
    Standardization s;
    s.mean.resize(static_cast<Index>(keep.size()));
    s.scale.resize(static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      s.mean[static_cast<Index>(k)] = panel.standardization->mean[keep[k]];
      s.scale[static_cast<Index>(k)] = panel.standardization->scale[keep[k]];
    }
    out.standardization = s;
  }
  return out;
}

Panel trim_to_common_sample(const Panel& panel) {
  panel.validate();
  Index first = 0;
  while (first < panel.rows() && !panel.data.row(first).allFinite()) ++first;
  if (panel.rows() - first < 2) throw DataError("no common sample across series");
  Panel out = panel;
  out.data = panel.data.bottomRows(panel.rows() - first);
  if (!panel.dates.empty()) out.dates.assign(panel.dates.begin() + first, panel.dates.end());
  out.late_start.assign(panel.cols(), false);
  if (out.has_missing()) throw DataError("missing values remain after trimming leading rows");
  return out;
}

double quantile(std::vector<double> sample, double prob) {
  if (sample.empty()) throw ArgumentError("quantile of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double h = (static_cast<double>(sample.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sample.size() - 1);
  return sample[lo] + (h - static_cast<double>(lo)) * (sample[hi] - sample[lo]);
}

std::pair<Panel, CleaningReport> clean_outliers(const Panel& panel, double k) {
  if (!(k > 0)) throw ArgumentError("outlier multiplier k must be positive");
  panel.validate();
  if (panel.has_missing()) throw DataError("outlier cleaning needs a panel without missing values");

  Panel out = panel;
  CleaningReport report;
  const Index T = panel.rows();
  for (Index j = 0; j < panel.cols(); ++j) {
    const Vector col = panel.data.col(j);
    std::vector<double> values(col.data(), col.data() + T);
    const double median = quantile(values, 0.5);
    const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
    const double threshold = k * iqr;

    std::vector<bool> outlier(T);
    bool any = false;
    for (Index t = 0; t < T; ++t) {
      outlier[t] = std::abs(col[t] - median) > threshold;
      any = any || outlier[t];
    }
    if (!any) continue;

    CleaningReport::Column entry{j, panel.names[j], {}, {}};
    if (iqr == 0.0)
      entry.warning = "zero interquartile range: every point off the median is replaced";

    for (Index t = 0; t < T; ++t) {
      if (!outlier[t]) continue;
      Index before = t - 1;
      while (before >= 0 && outlier[before]) --before;
      Index after = t + 1;
      while (after < T && outlier[after]) ++after;
      double value = 0;
      if (before >= 0 && after < T) {
        const double w = static_cast<double>(t - before) / static_cast<double>(after - before);
        value = col[before] + w * (col[after] - col[before]);
      } else if (before >= 0) {
        value = col[before];
      } else if (after < T) {
        value = col[after];
      } else {
        entry.warning = "every point flagged; column left unchanged";
        entry.entries.clear();
        break;
      }
      entry.entries.push_back({t, col[t], value});
    }
    for (const auto& e : entry.entries) out.data(e.row, j) = e.replacement;
    report.columns.push_back(std::move(entry));
  }
  return {std::move(out), std::move(report)};
}

Panel standardize(const Panel& panel) {
  panel.validate();
  if (panel.has_missing()) throw DataError("standardize needs a panel without missing values");
  const Index T = panel.rows();
  const Index n = panel.cols();
  Panel out = panel;
  Standardization step{Vector(n), Vector(n)};
  for (Index j = 0; j < n; ++j) {
    const double mean = panel.data.col(j).mean();
    const double var = (panel.data.col(j).array() - mean).square().sum() / static_cast<double>(T);
    const double scale = std::sqrt(var);
    if (!(scale > 1e-12 * std::max(1.0, std::abs(mean))))
      throw DataError("variable '" + panel.names[j] + "' is constant and cannot be standardized");
    step.mean[j] = mean;
    step.scale[j] = scale;
    out.data.col(j) = (panel.data.col(j).array() - mean) / scale;
  }
  if (panel.standardization) {
    const auto& prev = *panel.standardization;
    out.standardization = Standardization{prev.mean + prev.scale.cwiseProduct(step.mean),
                                          prev.scale.cwiseProduct(step.scale)};
  } else {
    out.standardization = step;
  }
  return out;
}

Matrix destandardize(const Matrix& values, const Standardization& s) {
  if (values.cols() != s.mean.size()) throw ArgumentError("destandardize: column mismatch");
  Matrix out = values;
  for (Index j = 0; j < values.cols(); ++j)
    out.col(j) = (values.col(j).array() * s.scale[j] + s.mean[j]).matrix();
  return out;
}

} // namespace drvar
