#include "drvar/serialization.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace drvar {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Matrix matrix_from_json(const json& j, Index rows, Index cols, const char* field) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows)
    throw DataError(std::string("model field '") + field + "' has the wrong number of rows",
                    "E_SCHEMA");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw DataError(std::string("model field '") + field + "' has the wrong number of columns",
                      "E_SCHEMA");
    for (Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Vector vector_from_json(const json& j, Index size, const char* field) {
  if (!j.is_array() || static_cast<Index>(j.size()) != size)
    throw DataError(std::string("model field '") + field + "' has the wrong length", "E_SCHEMA");
  Vector v(size);
  for (Index i = 0; i < size; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

const json& require(const json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end())
    throw DataError(std::string("model document lacks field '") + field + "'", "E_SCHEMA");
  return *it;
}

} // namespace

std::string serialize_model(const DRVARModel& model, bool include_sigma_full) {
  json doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["n"] = model.n();
  doc["r"] = model.r();
  doc["p"] = model.p();
  doc["A"] = matrix_to_json(model.A);
  json alphas = json::array();
  for (const auto& a : model.alphas) alphas.push_back(matrix_to_json(a));
  doc["alphas"] = std::move(alphas);
  doc["sigma_diag"] = vector_to_json(model.delta_u);
  if (include_sigma_full && model.sigma_u.size() > 0) doc["sigma_full"] = matrix_to_json(model.sigma_u);
  if (model.history.size() > 0) doc["history"] = matrix_to_json(model.history);
  if (model.standardization)
    doc["standardization"] = {{"mean", vector_to_json(model.standardization->mean)},
                              {"scale", vector_to_json(model.standardization->scale)}};
  else
    doc["standardization"] = nullptr;
  doc["names"] = model.names;
  const auto& m = model.meta;
  doc["meta"] = {{"T", m.T},
                 {"method", to_string(m.method)},
                 {"iterations", m.iterations},
                 {"converged", m.converged},
                 {"diagonal_fgls", m.diagonal_fgls},
                 {"objective_trace", m.objective_trace},
                 {"companion_radius", m.companion_radius},
                 {"condition_zz", m.condition_zz}};
  return doc.dump(1) + "\n";
}

DRVARModel deserialize_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what(), "E_SCHEMA");
  }
  if (!doc.is_object()) throw DataError("model document must be a JSON object", "E_SCHEMA");
  try {
    const int version = require(doc, "schema_version").get<int>();
    if (version != kModelSchemaVersion)
      throw DataError("model schema version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kModelSchemaVersion) + ")",
                      "E_SCHEMA");
    const Index n = require(doc, "n").get<Index>();
    const Index r = require(doc, "r").get<Index>();
    const int p = require(doc, "p").get<int>();
    if (n < 1 || r < 1 || r > n || p < 1) throw DataError("model dimensions are invalid", "E_SCHEMA");

    DRVARModel model;
    model.A = matrix_from_json(require(doc, "A"), n, r, "A");
    const json& alphas = require(doc, "alphas");
    if (!alphas.is_array() || static_cast<int>(alphas.size()) != p)
      throw DataError("model field 'alphas' must hold p matrices", "E_SCHEMA");
    for (const auto& a : alphas) model.alphas.push_back(matrix_from_json(a, r, r, "alphas"));
    model.delta_u = vector_from_json(require(doc, "sigma_diag"), n, "sigma_diag");
    if (doc.contains("sigma_full"))
      model.sigma_u = matrix_from_json(doc["sigma_full"], n, n, "sigma_full");
    else
      model.sigma_u = model.delta_u.asDiagonal();
    if (doc.contains("history")) model.history = matrix_from_json(doc["history"], p, n, "history");
    if (doc.contains("standardization") && !doc["standardization"].is_null()) {
      const json& s = doc["standardization"];
      model.standardization = Standardization{vector_from_json(require(s, "mean"), n, "mean"),
                                              vector_from_json(require(s, "scale"), n, "scale")};
    }
    model.names = require(doc, "names").get<std::vector<std::string>>();
    if (!model.names.empty() && static_cast<Index>(model.names.size()) != n)
      throw DataError("model field 'names' has the wrong length", "E_SCHEMA");
    model.meta.n = n;
    model.meta.r = r;
    model.meta.p = p;
    if (doc.contains("meta")) {
      const json& m = doc["meta"];
      model.meta.T = m.value("T", Index{0});
      model.meta.method = parse_method(m.value("method", std::string("ols")));
      model.meta.iterations = m.value("iterations", 0);
      model.meta.converged = m.value("converged", true);
      model.meta.diagonal_fgls = m.value("diagonal_fgls", false);
      model.meta.objective_trace = m.value("objective_trace", std::vector<double>{});
      model.meta.companion_radius = m.value("companion_radius", 0.0);
      model.meta.condition_zz = m.value("condition_zz", 0.0);
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what(), "E_SCHEMA");
  }
}

void save_model(const DRVARModel& model, const std::string& path, bool include_sigma_full) {
  write_file(path, serialize_model(model, include_sigma_full));
}

DRVARModel load_model(const std::string& path) {
  try {
    return deserialize_model(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what(), e.code());
  }
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string matrix_csv(const Matrix& values, const std::vector<std::string>& header,
                       const std::vector<std::string>& row_labels, const std::string& label_header) {
  const bool labels = !row_labels.empty();
  if (labels && static_cast<Index>(row_labels.size()) != values.rows())
    throw ArgumentError("matrix_csv: row label count does not match rows");
  if (!header.empty() && static_cast<Index>(header.size()) != values.cols())
    throw ArgumentError("matrix_csv: header does not match columns");
  std::string out;
  if (!header.empty()) {
    if (labels) out += label_header + ",";
    for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
    out += "\n";
  }
  for (Index i = 0; i < values.rows(); ++i) {
    if (labels) out += row_labels[static_cast<std::size_t>(i)] + ",";
    for (Index j = 0; j < values.cols(); ++j) out += (j ? "," : "") + format_double(values(i, j));
    out += "\n";
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading", "E_IO");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing", "E_IO");
  out << contents;
  if (!out) throw DataError("failed writing '" + path + "'", "E_IO");
}

} // namespace drvar
