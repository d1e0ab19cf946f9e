#include "drvar/serialization.hpp"
#include "drvar/timeseries.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace drvar {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(trim(current));
  return fields;
}

bool parse_double(const std::string& text, double& value) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last && std::isfinite(value);
}

bool is_missing(const std::string& text) {
  const auto t = lower(text);
  return t.empty() || t == "na" || t == "nan" || t == "." || t == "null";
}

bool is_tcode_label(const std::string& text) {
  const auto t = lower(text);
  return t.rfind("tcode", 0) == 0 || t.rfind("transform", 0) == 0;
}

bool is_date_header(const std::string& text) {
  const auto t = lower(text);
  return t.empty() || t == "date" || t == "dates" || t == "sasdate" || t == "period" || t == "time";
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

} // namespace

Panel parse_panel(const std::string& text, const LoadOptions& options) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  {
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty()) continue;
      rows.push_back(split_fields(line));
      line_numbers.push_back(number);
    }
  }
  if (rows.empty()) throw ParseError("empty panel file");

  const auto& header = rows.front();
  bool dates_col = false;
  if (options.dates_column) {
    dates_col = *options.dates_column;
  } else if (is_date_header(header.front())) {
    dates_col = true;
  } else if (rows.size() > 1) {
    double v = 0;
    const auto& probe = rows[1].front();
    dates_col = !(is_tcode_label(probe) || parse_double(probe, v) || is_missing(probe));
  }
  const std::size_t offset = dates_col ? 1 : 0;
  if (header.size() <= offset) throw ParseError("header row has no variable names");
  const std::size_t n = header.size() - offset;

  std::size_t body_start = 1;
  bool tcode_row = false;
  if (options.tcode_row) {
    tcode_row = *options.tcode_row;
  } else if (rows.size() > 1) {
    tcode_row = is_tcode_label(rows[1].front());
  }

  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].size() != header.size())
      throw ParseError("ragged row at line " + std::to_string(line_numbers[i]) + ": " +
                       std::to_string(rows[i].size()) + " fields, expected " +
                       std::to_string(header.size()));

  Panel panel;
  panel.names.assign(header.begin() + static_cast<std::ptrdiff_t>(offset), header.end());
  if (tcode_row) {
    if (rows.size() < 2) throw ParseError("tcode row expected but file has only a header");
    const auto& row = rows[1];
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0;
      const auto& cell = row[j + offset];
      if (!parse_double(cell, v) || v != std::floor(v) || v < 1 || v > 7)
        throw ParseError("invalid tcode '" + cell + "' at line " + std::to_string(line_numbers[1]) +
                         ", column " + std::to_string(j + offset + 1) + " (expected 1..7)");
      panel.tcodes.push_back(static_cast<int>(v));
    }
    body_start = 2;
  }

  const std::size_t T = rows.size() - body_start;
  if (T == 0) throw ParseError("panel file has no observations");
  panel.data.resize(static_cast<Index>(T), static_cast<Index>(n));
  panel.late_start.assign(n, false);
  std::vector<bool> seen(n, false);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& row = rows[body_start + t];
    if (dates_col) panel.dates.push_back(row.front());
    for (std::size_t j = 0; j < n; ++j) {
      const auto& cell = row[j + offset];
      double v = 0;
      if (parse_double(cell, v)) {
        panel.data(static_cast<Index>(t), static_cast<Index>(j)) = v;
        seen[j] = true;
      } else if (is_missing(cell)) {
        if (seen[j])
          throw ParseError("missing value at line " + std::to_string(line_numbers[body_start + t]) +
                           ", column " + std::to_string(j + offset + 1) +
                           ": only leading cells of a series may be missing");
        panel.data(static_cast<Index>(t), static_cast<Index>(j)) =
            std::numeric_limits<double>::quiet_NaN();
        panel.late_start[j] = true;
      } else {
        throw ParseError("non-numeric cell '" + cell + "' at line " +
                         std::to_string(line_numbers[body_start + t]) + ", column " +
                         std::to_string(j + offset + 1));
      }
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    if (!seen[j]) throw ParseError("variable '" + panel.names[j] + "' has no observations");
  if (T < 2) throw ParseError("panel needs at least two observations");
  return panel;
}

Panel load_panel(const std::string& path, const LoadOptions& options) {
  try {
    return parse_panel(read_file(path), options);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string format_panel(const Panel& panel) {
  panel.validate();
  const bool label_col = !panel.dates.empty() || !panel.tcodes.empty();
  std::string out;
  if (label_col) out += "date,";
  for (std::size_t j = 0; j < panel.names.size(); ++j) {
    if (j) out += ',';
    out += quote_if_needed(panel.names[j]);
  }
  out += '\n';
  if (!panel.tcodes.empty()) {
    out += "tcode";
    for (int c : panel.tcodes) out += "," + std::to_string(c);
    out += '\n';
  }
  for (Index t = 0; t < panel.rows(); ++t) {
    if (label_col)
      out += (panel.dates.empty() ? "obs" + std::to_string(t + 1) : quote_if_needed(panel.dates[t])) + ",";
    for (Index j = 0; j < panel.cols(); ++j) {
      if (j) out += ',';
      const double v = panel.data(t, j);
      if (std::isfinite(v)) out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_panel(const Panel& panel, const std::string& path) { write_file(path, format_panel(panel)); }

} // namespace drvar
