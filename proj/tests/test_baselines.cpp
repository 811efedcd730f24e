#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"

#include "cgkoop/baselines/baselines.hpp"
#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/linalg.hpp"
#include "cgkoop/numcore/rng.hpp"

using namespace cgkoop;
using namespace cgkoop::base;
using std::numbers::pi;

namespace {

Tensor sample_at(const std::vector<std::size_t>& idx, const pde::GridSpec& g, double (*f)(double)) {
  Tensor u({idx.size()});
  for (std::size_t i = 0; i < idx.size(); ++i) u[i] = f(static_cast<double>(idx[i]) * g.dx());
  return u;
}

std::vector<std::size_t> every(std::size_t n, std::size_t stride, std::size_t offset = 0) {
  std::vector<std::size_t> v;
  for (std::size_t i = offset; i < n; i += stride) v.push_back(i);
  return v;
}

double max_error(const Tensor& field, const pde::GridSpec& g, double (*f)(double)) {
  double e = 0;
  for (std::size_t j = 0; j < g.n; ++j) e = std::max(e, std::abs(field[j] - f(static_cast<double>(j) * g.dx())));
  return e;
}

double wave(double x) { return std::sin(2 * pi * x) + 0.3 * std::cos(4 * pi * x); }

}  // namespace

TEST_CASE("spline interpolation") {
  const pde::GridSpec g{1.0, 128};
  const auto obs = every(128, 16);
  SUBCASE("constants are reproduced") {
    const Tensor f = interpolate_field(Tensor({8}, 2.5), obs, g);
    for (double x : f.data()) CHECK(x == doctest::Approx(2.5).epsilon(1e-14));
  }
  SUBCASE("low-frequency sine") {
    const Tensor u = sample_at(obs, g, [](double x) { return std::sin(2 * pi * x); });
    CHECK(max_error(interpolate_field(u, obs, g), g, [](double x) { return std::sin(2 * pi * x); }) < 0.05);
  }
  SUBCASE("observed entries are exact") {
    num::RngStream rng(1);
    const auto idx = std::vector<std::size_t>{3, 10, 40, 77, 100};
    Tensor u({5});
    for (double& x : u.data()) x = rng.normal();
    const Tensor f = interpolate_field(u, idx, g);
    for (std::size_t i = 0; i < idx.size(); ++i) CHECK(f[idx[i]] == u[i]);
  }
  SUBCASE("commutes with adding a constant") {
    num::RngStream rng(2);
    Tensor u({8});
    for (double& x : u.data()) x = rng.normal();
    Tensor shifted = u;
    for (double& x : shifted.data()) x += 3.0;
    const Tensor a = interpolate_field(u, obs, g), b = interpolate_field(shifted, obs, g);
    for (std::size_t j = 0; j < g.n; ++j) CHECK(std::abs(b[j] - a[j] - 3.0) < 1e-12);
  }
  SUBCASE("fourth-order convergence on a smooth periodic field") {
    const double e8 = max_error(interpolate_field(sample_at(every(128, 16), g, wave), every(128, 16), g), g, wave);
    const double e16 = max_error(interpolate_field(sample_at(every(128, 8), g, wave), every(128, 8), g), g, wave);
    CHECK(e8 / e16 > 12.0);
    CHECK(e8 / e16 < 20.0);
  }
  SUBCASE("wrap-around interval with an offset start") {
    const auto idx = every(128, 16, 5);
    const Tensor u = sample_at(idx, g, [](double x) { return std::sin(2 * pi * x); });
    CHECK(max_error(interpolate_field(u, idx, g), g, [](double x) { return std::sin(2 * pi * x); }) < 0.05);
  }
  SUBCASE("two points and validation") {
    const Tensor f = interpolate_field(Tensor({2}, std::vector<double>{1.0, -1.0}), {0, 64}, g);
    CHECK(f[0] == 1.0);
    CHECK(f[64] == -1.0);
    CHECK(std::abs(f[32]) < 1e-12);
    CHECK_THROWS_AS(interpolate_field(Tensor({1}), {0}, g), ConfigError);
    CHECK_THROWS_AS(interpolate_field(Tensor({2}), {5, 5}, g), ConfigError);
    CHECK_THROWS_AS(interpolate_field(Tensor({3}), {0, 5}, g), ShapeError);
  }
  SUBCASE("series") {
    Tensor rows = Tensor::matrix(3, 8, 1.0);
    const Tensor s = interpolate_series(rows, obs, g);
    CHECK(s.rows() == 3);
    CHECK(s.cols() == 128);
  }
}

TEST_CASE("mse") {
  num::RngStream rng(3);
  Tensor a = Tensor::matrix(20, 7), b = Tensor::matrix(20, 7);
  for (double& x : a.data()) x = rng.normal();
  for (double& x : b.data()) x = rng.normal();
  CHECK(mse(a, a) == 0.0);
  CHECK(mse(Tensor::matrix(3, 4), Tensor::matrix(3, 4, 1.0)) == 1.0);
  // Reverse-order accumulation oracle.
  double s = 0;
  for (std::size_t i = a.size(); i-- > 0;) s += std::pow(a[i] - b[i], 2);
  CHECK(std::abs(mse(a, b) - s / a.size()) < 1e-12);
  CHECK(mse(a, b) == mse(b, a));
  Tensor scaled = a;
  for (std::size_t i = 0; i < a.size(); ++i) scaled[i] = a[i] + 3.0 * (b[i] - a[i]);
  CHECK(mse(a, scaled) == doctest::Approx(9.0 * mse(a, b)).epsilon(1e-12));
  CHECK_THROWS_AS(mse(a, Tensor::matrix(7, 20)), ShapeError);
}

TEST_CASE("evaluate") {
  num::RngStream rng(4);
  Tensor truth({2, 5, 4});
  for (double& x : truth.data()) x = rng.normal();
  const std::vector<std::size_t> obs{0};
  SUBCASE("perfect estimates") {
    EvalInputs in{"x", truth, truth, Tensor({2, 4, 4}), obs, 1, 0.0};
    for (std::size_t k = 0; k < 2; ++k) {
      for (std::size_t n = 1; n < 5; ++n) {
        for (std::size_t j = 0; j < 4; ++j) (*in.forecast)[(k * 4 + n - 1) * 4 + j] = truth[(k * 5 + n) * 4 + j];
      }
    }
    const auto r = evaluate(in);
    CHECK(r.da_mse == 0.0);
    CHECK(*r.forecast_mse == 0.0);
  }
  SUBCASE("warm-up boundary") {
    // Error 1 on every unobserved entry of row 1 only; row 0 is never scored.
    Tensor est = truth;
    for (std::size_t k = 0; k < 2; ++k) {
      for (std::size_t j = 1; j < 4; ++j) {
        est[(k * 5 + 1) * 4 + j] += 1.0;
        est[(k * 5 + 0) * 4 + j] += 5.0;
      }
      est[(k * 5 + 2) * 4 + 0] += 7.0;  // observed dims are ignored
    }
    EvalInputs in{"x", truth, est, std::nullopt, obs, 0, 0.0};
    CHECK(evaluate(in).da_mse == doctest::Approx(1.0 / 4));
    in.warmup = 1;
    CHECK(evaluate(in).da_mse == 0.0);
    const auto r = evaluate(in);
    REQUIRE(r.per_step_mse.size() == 5);
    CHECK(r.per_step_mse[0] == doctest::Approx(25.0));
    CHECK(r.per_step_mse[1] == doctest::Approx(1.0));
    CHECK(!r.forecast_mse);
    in.warmup = 4;
    CHECK_THROWS_AS(evaluate(in), ContractError);
  }
  SUBCASE("shape checks") {
    EvalInputs in{"x", truth, Tensor({2, 4, 4}), std::nullopt, obs, 0, 0.0};
    CHECK_THROWS_AS(evaluate(in), ShapeError);
  }
}

TEST_CASE("metric report serialization") {
  MetricReport r;
  r.method = "cgkn";
  r.forecast_mse = 1.0 / 3.0;
  r.da_mse = 7.5037e-04;
  r.per_step_mse = {0.1, 1e-300, 2.0 / 7.0};
  r.wall_time_s = 0.02;
  const MetricReport j = MetricReport::from_json(r.to_json());
  CHECK(j.method == r.method);
  CHECK(*j.forecast_mse == *r.forecast_mse);
  CHECK(j.da_mse == r.da_mse);
  CHECK(j.per_step_mse == r.per_step_mse);
  CHECK(j.wall_time_s == r.wall_time_s);

  MetricReport interp;
  interp.method = "interp";
  interp.da_mse = 1.3514e-02;
  std::stringstream ss;
  write_metrics_csv(ss, {r, interp});
  const auto rows = read_metrics_csv(ss);
  REQUIRE(rows.size() == 2);
  CHECK(*rows[0].forecast_mse == *r.forecast_mse);
  CHECK(rows[0].da_mse == r.da_mse);
  CHECK(!rows[1].forecast_mse);
  CHECK(rows[1].da_mse == interp.da_mse);
  CHECK(MetricReport::from_json(interp.to_json()).forecast_mse == std::nullopt);

  const std::string table = format_table({{"burgers", r}, {"burgers", interp}, {"ks", interp}});
  CHECK(table.find("| cgkn | 3.3333e-01 | 7.5037e-04 | --- | --- |") != std::string::npos);
  CHECK(table.find("| interp | --- | 1.3514e-02 | --- | 1.3514e-02 |") != std::string::npos);
  std::istringstream bad("method,da\n");
  CHECK_THROWS_AS(read_metrics_csv(bad), ConfigError);
}
