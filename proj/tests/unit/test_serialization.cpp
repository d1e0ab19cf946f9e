#include "drvar/serialization.hpp"

#include "support.hpp"

#include <doctest.h>

#include <limits>

using namespace drvar;

namespace {

DRVARModel fitted_model(std::uint64_t seed, Method method = Method::ols) {
  std::mt19937_64 rng(seed);
  const Matrix a = testing::random_orthonormal(7, 2, rng);
  const testing::MatrixList alphas = testing::random_stable_alphas(2, 2, rng, 0.75);
  const Matrix y = testing::simulate_var(testing::full_phi(a, alphas), testing::random_pd(7, rng), 300, rng);
  FitOptions opt;
  opt.method = method;
  DRVARModel m = fit_drvar(y, 2, 2, opt);
  for (int i = 0; i < 7; ++i) m.names.push_back("s" + std::to_string(i));
  Standardization s;
  s.mean = testing::gaussian(7, 1, rng).col(0);
  s.scale = testing::gaussian(7, 1, rng).col(0).cwiseAbs().array() + 0.1;
  m.standardization = s;
  return m;
}

} // namespace

TEST_SUITE("serialization") {

TEST_CASE("format_double round-trips exactly") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(4.0) == "4");
  CHECK(std::strtod(format_double(std::numeric_limits<double>::denorm_min()).c_str(), nullptr) ==
        std::numeric_limits<double>::denorm_min());
}

TEST_CASE("model round trip") {
  for (Method method : {Method::ols, Method::fgls}) {
    const DRVARModel m = fitted_model(2, method);
    const DRVARModel back = deserialize_model(serialize_model(m));
    CHECK(back.A == m.A);
    REQUIRE(back.alphas.size() == 2);
    for (int j = 0; j < 2; ++j) CHECK(back.alphas[j] == m.alphas[j]);
    CHECK(back.sigma_u == m.sigma_u);
    CHECK(back.delta_u == m.delta_u);
    CHECK(back.history == m.history);
    CHECK(back.names == m.names);
    REQUIRE(back.standardization.has_value());
    CHECK(back.standardization->mean == m.standardization->mean);
    CHECK(back.standardization->scale == m.standardization->scale);
    CHECK(back.meta.method == m.meta.method);
    CHECK(back.meta.p == 2);
    CHECK(back.meta.objective_trace == m.meta.objective_trace);
    CHECK(back.meta.iterations == m.meta.iterations);
  }
}

TEST_CASE("saving a loaded model reproduces the file byte for byte") {
  const std::string dir = testing::scratch_dir("serialization");
  const DRVARModel m = fitted_model(3);
  save_model(m, dir + "/a.json");
  save_model(load_model(dir + "/a.json"), dir + "/b.json");
  CHECK(read_file(dir + "/a.json") == read_file(dir + "/b.json"));
}

TEST_CASE("diagonal-only documents") {
  const DRVARModel m = fitted_model(4);
  const DRVARModel back = deserialize_model(serialize_model(m, false));
  CHECK(back.delta_u == m.delta_u);
  CHECK(back.sigma_u == Matrix(m.delta_u.asDiagonal()));
}

TEST_CASE("forecasts agree after a round trip") {
  const DRVARModel m = fitted_model(5);
  const DRVARModel back = deserialize_model(serialize_model(m));
  CHECK(forecast(back, back.history, 12) == forecast(m, m.history, 12));
  CHECK(forecast(back, back.history, 4, true) == forecast(m, m.history, 4, true));
}

TEST_CASE("malformed documents are schema errors") {
  const std::string text = serialize_model(fitted_model(6));
  auto code_of = [](const std::string& doc) {
    try {
      deserialize_model(doc);
    } catch (const DataError& e) {
      return std::string(e.code());
    }
    return std::string("none");
  };
  CHECK(code_of(text.substr(0, text.size() / 2)) == "E_SCHEMA");
  CHECK(code_of("[1, 2]") == "E_SCHEMA");
  CHECK(code_of("{}") == "E_SCHEMA");
  std::string wrong_version = text;
  const auto at = wrong_version.find("\"schema_version\": 1");
  REQUIRE(at != std::string::npos);
  wrong_version.replace(at, 19, "\"schema_version\": 9");
  CHECK(code_of(wrong_version) == "E_SCHEMA");
  CHECK_THROWS_AS(load_model("/nonexistent/drvar/model.json"), DataError);
}

TEST_CASE("matrix_csv layout") {
  const Matrix m{{1, 2.5}, {-3, 0}};
  CHECK(matrix_csv(m, {"a", "b"}) == "a,b\n1,2.5\n-3,0\n");
  CHECK(matrix_csv(m, {"a", "b"}, {"x", "y"}, "row") == "row,a,b\nx,1,2.5\ny,-3,0\n");
  CHECK_THROWS_AS(matrix_csv(m, {"a"}), ArgumentError);
}

}
