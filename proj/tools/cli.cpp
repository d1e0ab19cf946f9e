#include "cli.hpp"

#include "drvar/drvar.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace drvar::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct UsageError : ArgumentError {
  explicit UsageError(const std::string& message) : ArgumentError(message, "E_USAGE") {}
};

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

std::string timestamp(const char* format) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, format);
  return ss.str();
}

/// Collects everything a run writes and records it in manifest.json.
class Run {
public:
  Run(std::string command, std::vector<std::string> args, std::ostream& out)
      : command_(std::move(command)), args_(std::move(args)), out_(out),
        start_(std::chrono::steady_clock::now()) {}

  void open(const std::string& requested) {
    dir_ = requested.empty() ? fs::path("runs") / (command_ + "-" + timestamp("%Y%m%dT%H%M%SZ"))
                             : fs::path(requested);
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create run directory '" + dir_.string() + "': " + ec.message(), "E_IO");
  }

  void input(const std::string& path) {
    const std::string bytes = read_file(path);
    inputs_.push_back({{"path", path}, {"bytes", bytes.size()}, {"fnv1a64", hex(fnv1a(bytes))}});
  }

  std::string write(const std::string& name, const std::string& contents) {
    const fs::path path = dir_ / name;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file(path.string(), contents);
    outputs_.push_back(name);
    return path.string();
  }

  json& config() { return config_; }
  json& seeds() { return seeds_; }
  const fs::path& dir() const { return dir_; }
  std::ostream& out() { return out_; }

  void finish() {
    json manifest;
    manifest["command"] = command_;
    manifest["arguments"] = args_;
    manifest["config"] = config_;
    manifest["inputs"] = inputs_;
    manifest["outputs"] = outputs_;
    manifest["seeds"] = seeds_;
    manifest["versions"] = {{"drvar", kVersion},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                          std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                          std::to_string(EIGEN_MINOR_VERSION)},
                            {"model_schema", kModelSchemaVersion},
                            {"compiler", __VERSION__}};
    manifest["started_utc"] = started_;
    manifest["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_file((dir_ / "manifest.json").string(), manifest.dump(2) + "\n");
    out_ << "run directory: " << dir_.string() << "\n";
  }

private:
  std::string command_;
  std::vector<std::string> args_;
  std::ostream& out_;
  fs::path dir_;
  json config_ = json::object();
  json seeds_ = json::object();
  json inputs_ = json::array();
  json outputs_ = json::array();
  std::chrono::steady_clock::time_point start_;
  std::string started_ = timestamp("%Y-%m-%dT%H:%M:%SZ");
};

// ---------------------------------------------------------------- options

struct Common {
  std::string config;
  std::string out;
};

struct TransformArgs {
  std::string input;
  bool no_clean = false;
  bool no_standardize = false;
  double outlier_k = 10.0;
  std::string late = "drop";
};

struct SelectArgs {
  std::string input;
  int p0 = 5;
  int R = 14;
  int p = 2;
  int pmax = 4;
  std::string method = "ols";
};

struct FitArgs {
  std::string input;
  int r = 0;
  int p = 2;
  int p0 = 5;
  std::string method = "ols";
  bool diagonal = false;
  double tol = 1e-8;
  int max_iter = 100;
  std::string standardization;
  bool no_sigma_full = false;
};

struct ForecastArgs {
  std::string model;
  std::string input;
  int k = 1;
  bool original_units = false;
};

struct StructuralArgs {
  std::string model;
  std::string input;
  std::vector<double> band{6.0, 32.0};
  std::string scheme = "mbccs";
  int H = 199;
  int grid = 100;
  int shock = 1;
  int horizons = 20;
  int B = 0;
  unsigned long long seed = 2022;
  bool diagonal_sigma = false;
  bool emit_plot_data = false;
};

struct McArgs {
  std::string grid;
  int reps = 0;
  unsigned long long seed = 2022;
  unsigned threads = 0;
  std::string method = "ols";
  int p0 = 2;
  int R = 11;
  int p = 2;
  int burn_in = 50;
};

struct SimulateArgs {
  std::string kind = "dgp";
  int n = 150;
  int r = 3;
  int T = 150;
  unsigned long long seed = 1;
  std::vector<double> tau;
  bool levels = false;
  int outliers = 0;
  int burn_in = 50;
};

std::vector<std::string> json_to_args(const json& v) {
  if (v.is_array()) {
    std::vector<std::string> out;
    for (const auto& e : v) {
      auto part = json_to_args(e);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  if (v.is_string()) return {v.get<std::string>()};
  if (v.is_boolean()) return {v.get<bool>() ? "true" : "false"};
  if (v.is_number_integer()) return {std::to_string(v.get<long long>())};
  if (v.is_number()) return {format_double(v.get<double>())};
  throw UsageError("config value " + v.dump() + " is not a scalar or list");
}

/// Fills options that were not given on the command line from a JSON config.
json merge_config(CLI::App& sub, const std::string& path) {
  json resolved = json::object();
  if (path.empty()) return resolved;
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (doc.contains(sub.get_name()) && doc[sub.get_name()].is_object()) doc = doc[sub.get_name()];
  if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    std::string key = it.key();
    std::replace(key.begin(), key.end(), '_', '-');
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt || key == "config") throw UsageError("config key '" + it.key() + "' is not an option of '" + sub.get_name() + "'");
    if (opt->count() > 0) continue;
    opt->add_result(json_to_args(it.value()));
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw UsageError("config key '" + it.key() + "': " + e.what());
    }
  }
  return doc;
}

json record_options(const CLI::App& sub) {
  json out = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    const auto results = opt->results();
    if (!results.empty())
      out[name] = results.size() == 1 ? json(results.front()) : json(results);
    else if (!opt->get_default_str().empty())
      out[name] = opt->get_default_str();
  }
  return out;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
}

void positive(long long value, const char* flag) {
  if (value < 1) throw UsageError(std::string(flag) + " must be a positive integer");
}

std::vector<std::string> labels(Index count, const std::string& prefix, int start = 1) {
  std::vector<std::string> out;
  for (Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i + start));
  return out;
}

std::string standardization_csv(const std::vector<std::string>& names, const Standardization& s) {
  std::string out = "variable,mean,scale\n";
  for (std::size_t j = 0; j < names.size(); ++j)
    out += names[j] + "," + format_double(s.mean[static_cast<Index>(j)]) + "," +
           format_double(s.scale[static_cast<Index>(j)]) + "\n";
  return out;
}

Standardization read_standardization(const std::string& path, const std::vector<std::string>& names) {
  const Panel table = load_panel(path, LoadOptions{true, false});
  if (table.cols() != 2 || table.rows() != static_cast<Index>(names.size()))
    throw DataError("standardization file '" + path + "' must have one row per variable");
  for (std::size_t j = 0; j < names.size(); ++j)
    if (table.dates[j] != names[j])
      throw DataError("standardization file lists '" + table.dates[j] + "' where the panel has '" +
                      names[j] + "'");
  return Standardization{table.data.col(0), table.data.col(1)};
}

Panel load_complete_panel(const std::string& path) {
  Panel panel = load_panel(path);
  if (panel.has_missing())
    throw DataError("panel '" + path + "' has missing values; run the transform command first");
  return panel;
}

// ---------------------------------------------------------------- commands

void cmd_transform(Run& run, const TransformArgs& a) {
  require(a.input, "--input");
  if (!(a.outlier_k > 0)) throw UsageError("--outlier-k must be positive");
  if (a.late != "drop" && a.late != "trim") throw UsageError("--late must be drop or trim");
  run.input(a.input);
  Panel panel = load_panel(a.input);
  const Index raw_n = panel.cols();
  panel = a.late == "drop" ? drop_late_starting(panel) : trim_to_common_sample(panel);
  const Index dropped = raw_n - panel.cols();
  Panel transformed = transform_panel(panel);

  std::string cleaning = "variable,row,original,replacement,warning\n";
  CleaningReport report;
  if (!a.no_clean) {
    auto cleaned = clean_outliers(transformed, a.outlier_k);
    transformed = std::move(cleaned.first);
    report = std::move(cleaned.second);
    for (const auto& c : report.columns) {
      for (const auto& e : c.entries)
        cleaning += c.name + "," + std::to_string(e.row + 1) + "," + format_double(e.original) + "," +
                    format_double(e.replacement) + "," + c.warning + "\n";
      if (c.entries.empty()) cleaning += c.name + ",,,," + c.warning + "\n";
    }
  }
  if (!a.no_standardize) {
    transformed = standardize(transformed);
    run.write("standardization.csv", standardization_csv(transformed.names, *transformed.standardization));
  }
  run.write("panel.csv", format_panel(transformed));
  run.write("cleaning.csv", cleaning);
  run.out() << "transformed panel: " << transformed.rows() << " observations x " << transformed.cols()
            << " series (" << dropped << " late-starting series dropped)\n"
            << "outliers replaced: " << report.points_replaced() << " points in "
            << report.series_touched() << " series\n";
}

void cmd_select(Run& run, const SelectArgs& a) {
  require(a.input, "--input");
  positive(a.p0, "--p0");
  positive(a.R, "--R");
  positive(a.pmax, "--pmax");
  positive(a.p, "--p");
  run.input(a.input);
  const Method method = parse_method(a.method);
  const Panel panel = load_complete_panel(a.input);
  if (a.R + 1 > panel.cols()) throw UsageError("--R must be smaller than the number of series");

  const FactorSpaceEstimate fse = m_matrix(panel.data, a.p0, a.R);
  const int ly = ly_rank(fse.eigenvalues, a.R);
  run.write("scree.csv", scree_csv(fse.eigenvalues));

  std::string ic = "p,q,k,mean_log_variance,aic,hqic,bic\n";
  json chosen = json::object();
  std::set<int> candidates{ly};
  const int top = std::max(a.p, a.pmax);
  for (int p = 1; p <= top; ++p) {
    const SelectionTable table = select_rank(panel.data, fse.vectors, p, a.R, method);
    const std::string csv = table.csv();
    ic += csv.substr(csv.find('\n') + 1);
    chosen[std::to_string(p)] = {{"AIC", table.chosen_aic}, {"HQIC", table.chosen_hqic}, {"BIC", table.chosen_bic}};
    if (p == a.p) {
      run.write("ic_table.csv", csv);
      for (Penalty pen : kAllPenalties) candidates.insert(table.chosen(pen));
      run.out() << "rank selection at p = " << p << ": AIC " << table.chosen_aic << ", HQIC "
                << table.chosen_hqic << ", BIC " << table.chosen_bic << ", LY " << ly << "\n";
    }
  }
  run.write("ic_table_all_p.csv", ic);

  const LagTable lags = select_lag(panel.data, fse.vectors, a.pmax);
  run.write("lag_table.csv", lags.csv());
  run.out() << "lag selection on " << a.R << " leading indexes: AIC " << lags.chosen_aic << ", HQIC "
            << lags.chosen_hqic << ", BIC " << lags.chosen_bic << "\n";

  json summary;
  summary["n"] = panel.cols();
  summary["T"] = panel.rows();
  summary["p0"] = a.p0;
  summary["R"] = a.R;
  summary["method"] = to_string(method);
  summary["ly_rank"] = ly;
  summary["rank_by_p"] = chosen;
  summary["lag"] = {{"AIC", lags.chosen_aic}, {"HQIC", lags.chosen_hqic}, {"BIC", lags.chosen_bic}};
  summary["rank_candidates"] = candidates;
  run.write("selection.json", summary.dump(2) + "\n");
}

void cmd_fit(Run& run, const FitArgs& a) {
  require(a.input, "--input");
  positive(a.r, "--r");
  positive(a.p, "--p");
  positive(a.p0, "--p0");
  positive(a.max_iter, "--max-iter");
  run.input(a.input);
  const Panel panel = load_complete_panel(a.input);
  if (a.r > panel.cols()) throw UsageError("--r exceeds the number of series");
  FitOptions opts;
  opts.method = parse_method(a.method);
  opts.p0 = a.p0;
  opts.fgls.diagonal = a.diagonal;
  opts.fgls.tol = a.tol;
  opts.fgls.max_iter = a.max_iter;
  DRVARModel model = fit_drvar(panel.data, a.r, a.p, opts);
  model.names = panel.names;
  if (!a.standardization.empty()) {
    run.input(a.standardization);
    model.standardization = read_standardization(a.standardization, panel.names);
  }
  run.write("model.json", serialize_model(model, !a.no_sigma_full));
  const auto& m = model.meta;
  std::string csv = "variable,residual_variance\n";
  for (Index i = 0; i < model.n(); ++i)
    csv += model.names[static_cast<std::size_t>(i)] + "," + format_double(model.delta_u[i]) + "\n";
  run.write("residual_variance.csv", csv);
  run.out() << "fitted DRVAR: n = " << m.n << ", r = " << m.r << ", p = " << m.p << ", "
            << to_string(m.method) << (m.method == Method::fgls ? (m.diagonal_fgls ? " (diagonal)" : " (full)") : "")
            << ", companion spectral radius " << m.companion_radius << "\n";
  if (m.method == Method::fgls && !m.converged)
    run.out() << "warning: FGLS stopped after " << m.iterations << " iterations without converging\n";
  if (m.companion_radius >= 1.0) run.out() << "warning: estimated dynamics are not stationary\n";
}

void cmd_forecast(Run& run, const ForecastArgs& a) {
  require(a.model, "--model");
  positive(a.k, "--k");
  run.input(a.model);
  const DRVARModel model = load_model(a.model);
  Matrix history = model.history;
  std::vector<std::string> names = model.names;
  if (!a.input.empty()) {
    run.input(a.input);
    const Panel panel = load_complete_panel(a.input);
    if (panel.cols() != model.n()) throw DataError("panel and model disagree on the number of series");
    if (panel.rows() < model.p()) throw DataError("panel is shorter than the lag order");
    history = panel.data.bottomRows(model.p());
    if (names.empty()) names = panel.names;
  }
  if (history.rows() != model.p())
    throw UsageError("model stores no history; pass --input with the panel");
  if (names.empty()) names = labels(model.n(), "y");
  const Matrix f = forecast(model, history, a.k, a.original_units);
  run.write("forecast.csv", matrix_csv(f, names, labels(a.k, ""), "horizon"));
  run.out() << "forecast " << a.k << " steps for " << model.n() << " series\n";
}

void cmd_structural(Run& run, const StructuralArgs& a) {
  require(a.model, "--model");
  require(a.input, "--input");
  if (a.band.size() != 2) throw UsageError("--band takes two periods");
  positive(a.H, "--H");
  positive(a.horizons, "--horizons");
  positive(a.shock, "--shock");
  if (a.grid < 2) throw UsageError("--grid must be at least 2");
  if (a.B != 0 && a.B < 50) throw UsageError("--B must be 0 (no bootstrap) or at least 50");
  run.input(a.model);
  run.input(a.input);
  DRVARModel model = load_model(a.model);
  const Panel panel = load_complete_panel(a.input);
  if (panel.cols() != model.n()) throw DataError("panel and model disagree on the number of series");
  attach_sample(model, panel.data);
  if (a.diagonal_sigma) model.sigma_u = model.delta_u.asDiagonal();
  std::vector<std::string> names = model.names.empty() ? panel.names : model.names;

  const Band band = Band::from_periods(std::min(a.band[0], a.band[1]), std::max(a.band[0], a.band[1]));
  const Scheme scheme = parse_scheme(a.scheme);
  const StructuralDecomposition dec = common_component_ma(model, a.H);
  const ShockIdentification ident =
      scheme == Scheme::mbccs ? mbccs_identification(dec, band, a.grid) : recursive_identification(dec);
  const int shock = a.shock - 1;
  if (shock >= model.r()) throw UsageError("--shock exceeds the number of shocks r");

  const FitMetrics metrics = fit_metrics(model, dec.rho);
  Matrix fm(model.n(), 2);
  fm << metrics.r2_yz, metrics.r2_yxi;
  run.write("fit_metrics.csv", matrix_csv(fm, {"r2_yz", "r2_yxi"}, names, "variable"));

  const int horizons = std::min(a.horizons, a.H + 1);
  const Matrix response = irf(ident, dec, shock, horizons, false);
  run.write("irf.csv", matrix_csv(response, names, labels(horizons, "", 0), "horizon"));

  const VarianceContributions vc = variance_contributions(ident, dec, band, shock, a.grid);
  const Vector nu_band = ignorable_share(dec, band, a.grid);
  const Vector nu_zero = ignorable_share_zero(dec);
  std::string contrib = "variable,band,zero,clipped,ignorable_band,ignorable_zero\n";
  int clipped = 0;
  for (Index i = 0; i < model.n(); ++i) {
    const bool c = vc.clipped[static_cast<std::size_t>(i)];
    clipped += c;
    contrib += names[static_cast<std::size_t>(i)] + "," + format_double(vc.band[i]) + "," +
               format_double(vc.zero[i]) + "," + (c ? "1" : "0") + "," + format_double(nu_band[i]) +
               "," + format_double(nu_zero[i]) + "\n";
  }
  run.write("contributions.csv", contrib);
  const std::string band_label = format_double(std::min(a.band[0], a.band[1])) + "-" +
                                 format_double(std::max(a.band[0], a.band[1]));
  Matrix table(2, model.n());
  table << vc.band.transpose(), vc.zero.transpose();
  run.write("contributions_table.csv", matrix_csv(table, names, {band_label, "long-run"}, "period"));

  Matrix spectrum(a.grid, model.n());
  Vector freqs(a.grid);
  for (int g = 0; g < a.grid; ++g) {
    freqs[g] = std::numbers::pi * g / (a.grid - 1);
    spectrum.row(g) = spectral_density_common(dec, freqs[g]).diagonal().real().transpose();
  }
  std::vector<std::string> freq_labels;
  for (int g = 0; g < a.grid; ++g) freq_labels.push_back(format_double(freqs[g]));
  run.write("spectrum.csv", matrix_csv(spectrum, names, freq_labels, "frequency"));

  json summary;
  summary["scheme"] = to_string(scheme);
  summary["band_radians"] = {band.lower, band.upper};
  summary["band_periods"] = {2.0 * std::numbers::pi / band.upper, 2.0 * std::numbers::pi / band.lower};
  summary["H"] = a.H;
  summary["tail_mass"] = dec.tail_mass;
  summary["shock"] = a.shock;
  summary["sigma_u"] = a.diagonal_sigma ? "diagonal" : "full";
  summary["mean_r2_yz"] = metrics.r2_yz.mean();
  summary["mean_r2_yxi"] = metrics.r2_yxi.mean();
  summary["clipped_contributions"] = clipped;
  summary["D"] = json::array();
  summary["C"] = json::array();
  for (Index i = 0; i < ident.D.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < ident.D.cols(); ++j) row.push_back(ident.D(i, j));
    summary["D"].push_back(row);
    json crow = json::array();
    for (Index j = 0; j < ident.C_chol.cols(); ++j) crow.push_back(ident.C_chol(i, j));
    summary["C"].push_back(crow);
  }
  if (scheme == Scheme::mbccs) {
    Matrix theta(ident.theta_eigenvalues.size(), 2);
    theta << ident.theta_eigenvalues, ident.shares;
    run.write("theta_eigenvalues.csv",
              matrix_csv(theta, {"eigenvalue", "share"}, labels(theta.rows(), ""), "index"));
    run.write("mbccs_weights.csv", matrix_csv(ident.Q, labels(model.r(), "q"), names, "variable"));
    summary["leading_share"] = ident.shares[0];
    summary["leading_tie"] = ident.leading_tie;
    if (ident.leading_tie) run.out() << "warning: the two leading eigenvalues of Theta are tied\n";
  }
  if (clipped > 0) run.out() << "warning: " << clipped << " contribution ratios exceeded 1 and were clipped\n";
  if (dec.tail_mass > 1e-6)
    run.out() << "warning: MA truncation tail mass " << dec.tail_mass << " exceeds 1e-6; raise --H\n";

  if (a.emit_plot_data) {
    const Matrix cumulated = irf(ident, dec, shock, horizons, true);
    run.write("plot/irf_cumulated.csv", matrix_csv(cumulated, names, labels(horizons, "", 0), "horizon"));
    if (scheme == Scheme::mbccs) {
      const Vector series = mbccc_series(ident, dec);
      std::vector<std::string> dates;
      for (Index t = 0; t < series.size(); ++t)
        dates.push_back(panel.dates.empty() ? std::to_string(t + model.p() + 1)
                                            : panel.dates[static_cast<std::size_t>(t + model.p())]);
      run.write("plot/mbccc.csv", matrix_csv(series, {"mbccc"}, dates, "date"));
    }
  }

  if (a.B > 0) {
    BootstrapTargets targets;
    targets.scheme = scheme;
    targets.band = band;
    targets.shock = shock;
    targets.irf_horizons = horizons;
    targets.H = a.H;
    targets.grid_points = a.grid;
    FitOptions fo;
    fo.method = model.meta.method;
    run.seeds()["bootstrap"] = a.seed;
    const BootstrapResult boot = bootstrap_se(model, panel.data, a.B, a.seed, targets, fo);
    run.write("bootstrap/irf_se.csv", matrix_csv(boot.irf_se, names, labels(horizons, "", 0), "horizon"));
    run.write("bootstrap/irf_p16.csv", matrix_csv(boot.irf_lower, names, labels(horizons, "", 0), "horizon"));
    run.write("bootstrap/irf_p84.csv", matrix_csv(boot.irf_upper, names, labels(horizons, "", 0), "horizon"));
    Matrix cs(model.n(), 6);
    cs << boot.band_se, boot.band_lower, boot.band_upper, boot.zero_se, boot.zero_lower, boot.zero_upper;
    run.write("bootstrap/contributions.csv",
              matrix_csv(cs, {"band_se", "band_p16", "band_p84", "zero_se", "zero_p16", "zero_p84"}, names,
                         "variable"));
    summary["bootstrap"] = {{"B", a.B}, {"failures", boot.failures}, {"seed", a.seed}};
  }
  run.write("structural.json", summary.dump(2) + "\n");
  run.out() << "structural analysis (" << to_string(scheme) << "): mean R2_Y,Z "
            << metrics.r2_yz.mean() << ", mean R2_Y,Xi " << metrics.r2_yxi.mean() << "\n";
}

std::vector<ExperimentCell> read_grid(const std::string& path, int reps_override) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError("grid file '" + path + "' is not valid JSON: " + e.what());
  }
  const json& cells = doc.is_object() ? doc.value("cells", json::array()) : doc;
  if (!cells.is_array() || cells.empty()) throw UsageError("grid file must list at least one cell");
  std::shared_ptr<const DataBasedDgp> calibrated;
  std::vector<ExperimentCell> grid;
  try {
    for (const auto& c : cells) {
      ExperimentCell cell;
      const std::string kind = c.value("kind", std::string("artificial"));
      if (kind == "artificial") {
        cell.kind = CellKind::artificial;
        cell.n = c.at("n").get<Index>();
        cell.r = c.value("r_equals_n", false) ? cell.n : c.at("r").get<Index>();
      } else if (kind == "data_based") {
        cell.kind = CellKind::data_based;
        const std::string source = c.value("model", std::string("calibrated"));
        if (source == "calibrated") {
          if (!calibrated) calibrated = std::make_shared<const DataBasedDgp>(calibrated_empirical_model());
          cell.model = calibrated;
        } else {
          cell.model = std::make_shared<const DataBasedDgp>(load_model(source));
        }
        cell.n = cell.model->model().n();
        cell.r = cell.model->model().r();
      } else {
        throw UsageError("unknown cell kind '" + kind + "'");
      }
      if (c.contains("T"))
        cell.T = c.at("T").get<Index>();
      else if (c.contains("T_ratio"))
        cell.T = static_cast<Index>(std::llround(c.at("T_ratio").get<double>() * static_cast<double>(cell.n)));
      else
        throw UsageError("grid cell needs T or T_ratio");
      cell.reps = reps_override > 0 ? reps_override : c.value("reps", 200);
      cell.label = c.value("label", kind + "_n" + std::to_string(cell.n) + "_r" + std::to_string(cell.r) +
                                        "_T" + std::to_string(cell.T));
      grid.push_back(std::move(cell));
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed grid cell: ") + e.what());
  }
  return grid;
}

void cmd_mc(Run& run, const McArgs& a) {
  require(a.grid, "--grid");
  positive(a.p0, "--p0");
  positive(a.R, "--R");
  positive(a.p, "--p");
  if (a.burn_in < 0) throw UsageError("--burn-in must be non-negative");
  run.input(a.grid);
  const auto grid = read_grid(a.grid, a.reps);
  ExperimentOptions opts;
  opts.estimator = parse_method(a.method);
  opts.p0 = a.p0;
  opts.R = a.R;
  opts.p = a.p;
  opts.seed = a.seed;
  opts.threads = a.threads;
  opts.burn_in = a.burn_in;
  run.seeds()["mc"] = a.seed;
  const auto reports = run_experiment(grid, opts);
  run.write("mc_report.csv", mc_report_csv(reports));
  json twin = json::array();
  for (const auto& rep : reports) {
    json cell = {{"label", rep.cell.label},
                 {"kind", rep.cell.kind == CellKind::artificial ? "artificial" : "data_based"},
                 {"n", rep.cell.n},
                 {"r", rep.cell.r},
                 {"T", rep.cell.T},
                 {"replications", rep.replications},
                 {"failures", rep.failures},
                 {"methods", json::array()}};
    for (const auto& row : rep.rows) {
      json m = {{"method", row.method},
                {"pct_correct", row.pct_correct},
                {"pct_under", row.pct_under},
                {"mean_rank", row.mean_rank}};
      if (row.rfd_mean) {
        m["rfd_mean"] = *row.rfd_mean;
        m["rfd_median"] = *row.rfd_median;
        m["rfd_q25"] = *row.rfd_q25;
        m["rfd_q75"] = *row.rfd_q75;
      }
      cell["methods"].push_back(m);
    }
    twin.push_back(cell);
    run.out() << rep.cell.label << ": ";
    for (const auto& row : rep.rows) run.out() << row.method << " " << row.pct_correct << "% ";
    run.out() << "(" << rep.failures << " failures)\n";
  }
  run.write("mc_report.json", twin.dump(2) + "\n");
}

/// Rebuilds FRED-style levels from a stationary panel, cycling through tcodes.
Panel to_levels(const Matrix& stationary, const std::vector<std::string>& names) {
  static constexpr int kCodes[] = {5, 5, 2, 1, 6, 5, 2, 4};
  const Index T = stationary.rows();
  const Index n = stationary.cols();
  Panel panel;
  panel.names = names;
  panel.data.resize(T + 2, n);
  for (Index j = 0; j < n; ++j) {
    const int code = kCodes[j % std::size(kCodes)];
    panel.tcodes.push_back(code);
    const Vector y = stationary.col(j);
    Vector level(T + 2);
    switch (code) {
      case 1: level << 0.0, 0.0, y; break;
      case 4: level << 0.0, 0.0, y * 0.05; level = (level.array() + 4.0).exp(); break;
      case 2: {
        level[0] = level[1] = 100.0;
        for (Index t = 0; t < T; ++t) level[t + 2] = level[t + 1] + y[t];
        break;
      }
      case 5: {
        double log_level = 5.0;
        level[0] = level[1] = std::exp(log_level);
        for (Index t = 0; t < T; ++t) {
          log_level += 0.005 + 0.01 * y[t];
          level[t + 2] = std::exp(log_level);
        }
        break;
      }
      case 6: {
        double log_level = 3.0, growth = 0.005;
        level[0] = std::exp(log_level - growth);
        level[1] = std::exp(log_level);
        for (Index t = 0; t < T; ++t) {
          growth += 0.002 * y[t];
          log_level += growth;
          level[t + 2] = std::exp(log_level);
        }
        break;
      }
    }
    panel.data.col(j) = level;
  }
  for (Index t = 0; t < T + 2; ++t) {
    const Index quarter = t % 4;
    const Index year = 1959 + t / 4;
    panel.dates.push_back(std::to_string(year) + "-" + (quarter < 3 ? "0" : "") +
                          std::to_string(3 * quarter + 1) + "-01");
  }
  panel.late_start.assign(static_cast<std::size_t>(n), false);
  return panel;
}

void cmd_simulate(Run& run, const SimulateArgs& a) {
  positive(a.T, "--T");
  if (a.burn_in < 0) throw UsageError("--burn-in must be non-negative");
  if (a.tau.size() > 1) throw UsageError("--tau takes one value");
  run.seeds()["simulate"] = a.seed;
  Matrix data;
  std::vector<std::string> names;
  if (a.kind == "dgp") {
    positive(a.n, "--n");
    positive(a.r, "--r");
    DGPConfig cfg;
    cfg.n = a.n;
    cfg.r = a.r;
    cfg.T = a.T;
    cfg.burn_in = a.burn_in;
    cfg.seed = a.seed;
    if (!a.tau.empty()) cfg.fixed_tau = a.tau.front();
    SimulatedPanel sim = generate_dgp(cfg);
    data = std::move(sim.data);
    names = labels(a.n, "Y");
    DRVARModel truth;
    truth.A = sim.truth.A;
    truth.alphas = sim.truth.alphas;
    truth.sigma_u = sim.truth.sigma_u;
    truth.delta_u = truth.sigma_u.diagonal();
    truth.names = names;
    truth.meta.n = a.n;
    truth.meta.r = a.r;
    truth.meta.p = 2;
    run.write("truth_model.json", serialize_model(truth));
  } else if (a.kind == "calibrated") {
    const DRVARModel model = calibrated_empirical_model();
    data = DataBasedDgp(model, a.burn_in).simulate(a.T, a.seed);
    names = model.names;
    run.write("truth_model.json", serialize_model(model));
  } else {
    throw UsageError("--kind must be dgp or calibrated");
  }
  Panel panel;
  if (a.levels) {
    panel = to_levels(data, names);
    std::mt19937_64 rng(mix_seed(a.seed, 0x0071e5ULL));
    std::uniform_int_distribution<Index> row(2, panel.rows() - 1);
    std::vector<Index> logged;
    for (Index j = 0; j < panel.cols(); ++j)
      if (panel.tcodes[static_cast<std::size_t>(j)] == 5) logged.push_back(j);
    if (a.outliers > 0 && logged.empty()) throw UsageError("--outliers needs series with tcode 5");
    std::uniform_int_distribution<std::size_t> pick(0, logged.size() - 1);
    for (int k = 0; k < a.outliers; ++k) {
      const Index j = logged[pick(rng)];
      const Index t = row(rng);
      // a one-period level jump of 15 interquartile ranges of the growth rates, reverted the period after
      std::vector<double> growth(static_cast<std::size_t>(panel.rows() - 1));
      for (Index s = 1; s < panel.rows(); ++s)
        growth[static_cast<std::size_t>(s - 1)] = std::log(panel.data(s, j) / panel.data(s - 1, j));
      std::sort(growth.begin(), growth.end());
      const double iqr = growth[growth.size() * 3 / 4] - growth[growth.size() / 4];
      panel.data(t, j) *= std::exp(15.0 * iqr);
    }
  } else {
    panel.data = data;
    panel.names = names;
  }
  run.write("panel.csv", format_panel(panel));
  run.out() << "simulated " << panel.rows() << " x " << panel.cols() << " panel (" << a.kind << ")\n";
}

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::argument: return 2;
    case ErrorCategory::data: return 3;
    case ErrorCategory::numerical: return 4;
  }
  return 1;
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dimension-reduced VAR estimation, structural analysis and simulation", "drvar"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1, 1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON file with option values (flags override)");
    sub->add_option("--out", common.out, "run directory (default runs/<command>-<timestamp>)");
  };

  TransformArgs ta;
  auto* transform = app.add_subcommand("transform", "apply tcodes, clean outliers and standardize a raw panel");
  add_common(transform);
  transform->add_option("--input", ta.input, "raw panel CSV (header, optional tcode row)");
  transform->add_flag("--no-clean", ta.no_clean, "skip outlier replacement");
  transform->add_flag("--no-standardize", ta.no_standardize, "keep transformed units");
  transform->add_option("--outlier-k", ta.outlier_k, "outlier threshold in interquartile ranges")->capture_default_str();
  transform->add_option("--late", ta.late, "late-starting series: drop or trim")->capture_default_str();

  SelectArgs sa;
  auto* select = app.add_subcommand("select", "eigenvalue scree, LY estimate and information criteria");
  add_common(select);
  select->add_option("--input", sa.input, "stationary panel CSV");
  select->add_option("--p0", sa.p0, "autocovariance lags in M")->capture_default_str();
  select->add_option("--R", sa.R, "largest rank considered")->capture_default_str();
  select->add_option("--p", sa.p, "lag order for the rank table")->capture_default_str();
  select->add_option("--pmax", sa.pmax, "largest lag order considered")->capture_default_str();
  select->add_option("--method", sa.method, "ols or fgls")->capture_default_str();

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "estimate a DRVAR and write model.json");
  add_common(fit);
  fit->add_option("--input", fa.input, "stationary panel CSV");
  fit->add_option("--r", fa.r, "number of dynamic indexes");
  fit->add_option("--p", fa.p, "lag order")->capture_default_str();
  fit->add_option("--p0", fa.p0, "autocovariance lags in M")->capture_default_str();
  fit->add_option("--method", fa.method, "ols or fgls")->capture_default_str();
  fit->add_flag("--diagonal", fa.diagonal, "diagonal FGLS weighting");
  fit->add_option("--tol", fa.tol, "FGLS relative tolerance")->capture_default_str();
  fit->add_option("--max-iter", fa.max_iter, "FGLS iteration cap")->capture_default_str();
  fit->add_option("--standardization", fa.standardization, "standardization.csv from transform");
  fit->add_flag("--no-sigma-full", fa.no_sigma_full, "store only the residual variances");

  ForecastArgs fca;
  auto* fc = app.add_subcommand("forecast", "k-step forecasts from a fitted model");
  add_common(fc);
  fc->add_option("--model", fca.model, "model.json");
  fc->add_option("--input", fca.input, "panel whose last p rows start the forecast (default: stored history)");
  fc->add_option("--k", fca.k, "horizon")->capture_default_str();
  fc->add_flag("--original-units", fca.original_units, "undo the stored standardization");

  StructuralArgs st;
  auto* structural = app.add_subcommand("structural", "common-component decomposition and shock identification");
  add_common(structural);
  structural->add_option("--model", st.model, "model.json");
  structural->add_option("--input", st.input, "panel the model was fitted on");
  structural->add_option("--band", st.band, "band in periods, e.g. 6 32")->expected(2)->capture_default_str();
  structural->add_option("--scheme", st.scheme, "mbccs or recursive")->capture_default_str();
  structural->add_option("--H", st.H, "MA truncation")->capture_default_str();
  structural->add_option("--grid", st.grid, "frequency grid points")->capture_default_str();
  structural->add_option("--shock", st.shock, "shock reported (1-based)")->capture_default_str();
  structural->add_option("--horizons", st.horizons, "IRF horizons")->capture_default_str();
  structural->add_option("--B", st.B, "bootstrap replicates (0 = none)")->capture_default_str();
  structural->add_option("--seed", st.seed, "bootstrap seed")->capture_default_str();
  structural->add_flag("--diagonal-sigma", st.diagonal_sigma, "use only the residual variances");
  structural->add_flag("--emit-plot-data", st.emit_plot_data, "write MBCCC series and cumulated IRFs");

  McArgs ma;
  auto* mc = app.add_subcommand("mc", "Monte Carlo study of rank selection");
  add_common(mc);
  mc->add_option("--grid", ma.grid, "JSON grid of cells");
  mc->add_option("--reps", ma.reps, "replications per cell (overrides the grid)");
  mc->add_option("--seed", ma.seed, "master seed")->capture_default_str();
  mc->add_option("--threads", ma.threads, "worker threads (0 = all cores)")->capture_default_str();
  mc->add_option("--method", ma.method, "ols or fgls")->capture_default_str();
  mc->add_option("--p0", ma.p0, "autocovariance lags in M")->capture_default_str();
  mc->add_option("--R", ma.R, "largest rank considered")->capture_default_str();
  mc->add_option("--p", ma.p, "lag order")->capture_default_str();
  mc->add_option("--burn-in", ma.burn_in, "discarded initial observations")->capture_default_str();

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "simulate a panel from the artificial or calibrated design");
  add_common(simulate);
  simulate->add_option("--kind", sim.kind, "dgp or calibrated")->capture_default_str();
  simulate->add_option("--n", sim.n, "series (dgp)")->capture_default_str();
  simulate->add_option("--r", sim.r, "dynamic indexes (dgp)")->capture_default_str();
  simulate->add_option("--T", sim.T, "observations")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "seed")->capture_default_str();
  simulate->add_option("--tau", sim.tau, "fixed Toeplitz parameter (dgp)")->expected(1);
  simulate->add_flag("--levels", sim.levels, "write raw levels with tcodes and dates");
  simulate->add_option("--outliers", sim.outliers, "level spikes injected with --levels")->capture_default_str();
  simulate->add_option("--burn-in", sim.burn_in, "discarded initial observations")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error[E_USAGE]: " << one_line(e.what()) << "\n";
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    merge_config(*sub, common.config);
    Run run(sub->get_name(), args, out);
    run.config() = record_options(*sub);
    run.open(common.out);
    if (!common.config.empty()) run.input(common.config);
    const std::string& name = sub->get_name();
    if (name == "transform") cmd_transform(run, ta);
    else if (name == "select") cmd_select(run, sa);
    else if (name == "fit") cmd_fit(run, fa);
    else if (name == "forecast") cmd_forecast(run, fca);
    else if (name == "structural") cmd_structural(run, st);
    else if (name == "mc") cmd_mc(run, ma);
    else if (name == "simulate") cmd_simulate(run, sim);
    run.finish();
  } catch (const Error& e) {
    err << "error[" << e.code() << "]: " << one_line(e.what()) << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "error[E_INTERNAL]: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}

} // namespace drvar::cli
