#include "doctest.h"
#include "support/model_fixtures.hpp"

#include <sstream>

#include "cgkoop/errors.hpp"
#include "cgkoop/filter/cgfilter.hpp"
#include "cgkoop/model/kernels.hpp"
#include "cgkoop/numcore/linalg.hpp"

using namespace cgkoop;
using namespace cgkoop::filter;
using model::StateSpec;
using num::Tensor;
using oracle::random_matrix;

namespace {

CGCoeffs scalar_coeffs(double f1, double g1, double f2, double g2) {
  return {Tensor::matrix(1, 1, f1), Tensor::matrix(1, 1, g1), Tensor::matrix(1, 1, f2), Tensor::matrix(1, 1, g2)};
}

GaussianBelief scalar_belief(double mu, double var) { return {Tensor({1}, mu), Tensor::matrix(1, 1, var)}; }

}  // namespace

TEST_CASE("scalar hand case is exact") {
  const GaussianBelief b =
      filter_step(scalar_coeffs(0, 1, 0, 1), Tensor({1}, 1.0), Tensor({1}, 0.0), scalar_belief(0, 1), Tensor({1}, 2.0));
  CHECK(b.mu_v[0] == 1.0);
  CHECK(b.sigma_v(0, 0) == 0.5);
}

TEST_CASE("uninformative observation propagates the prior") {
  const GaussianBelief b =
      filter_step(scalar_coeffs(0, 0, 0, 0.5), Tensor({1}, 1.0), Tensor({1}, 1.0), scalar_belief(2, 1), Tensor({1}, 5.0));
  CHECK(b.mu_v[0] == 1.0);
  CHECK(b.sigma_v(0, 0) == 1.25);
}

TEST_CASE("observing reduces variance in the scalar case") {
  for (double g1 : {0.1, 0.5, 1.0, 3.0}) {
    const auto with = filter_step(scalar_coeffs(0, g1, 0, 0.9), Tensor({1}, 0.4), Tensor({1}, 0.3), scalar_belief(0, 2),
                                  Tensor({1}, 1.0));
    const auto without = filter_step(scalar_coeffs(0, 0, 0, 0.9), Tensor({1}, 0.4), Tensor({1}, 0.3),
                                     scalar_belief(0, 2), Tensor({1}, 1.0));
    CHECK(with.sigma_v(0, 0) <= without.sigma_v(0, 0));
  }
}

TEST_CASE("3-dim linear system over 100 steps matches a textbook Kalman filter") {
  num::RngStream rng(5);
  const CGCoeffs c = oracle::random_coeffs(rng, 2, 3);
  const Tensor s1({2}, std::vector<double>{0.5, 0.8}), s2({3}, std::vector<double>{0.3, 0.2, 0.4});
  const auto kf = oracle::kalman_for(c, s1, s2);
  GaussianBelief b = GaussianBelief::standard(3);
  Tensor mu = Tensor::matrix(3, 1), P = Tensor::identity(3);
  for (int n = 0; n < 100; ++n) {
    const Tensor y = random_matrix(rng, 2, 1);
    b = filter_step(c, s1, s2, b, y.reshaped({2}), n);
    kf.step(mu, P, y);
    REQUIRE(num::max_abs_diff(b.mu_v.reshaped({3, 1}), mu) < 1e-9);
    REQUIRE(num::max_abs_diff(b.sigma_v, P) < 1e-9);
  }
}

TEST_CASE("filter_run with constant coefficients equals the Kalman oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    num::RngStream rng(seed);
    const std::size_t d1 = 1 + rng.below(4), dv = 1 + rng.below(6);
    const CGCoeffs c = oracle::random_coeffs(rng, d1, dv);
    Tensor s1({d1}), s2({dv});
    for (double& s : s1.data()) s = 0.2 + rng.uniform();
    for (double& s : s2.data()) s = 0.1 + 0.5 * rng.uniform();
    const auto p = oracle::constant_model(oracle::square_spec(d1, dv), c, s1, s2);
    const Tensor obs = random_matrix(rng, 51, d1, 2.0);
    GaussianBelief init{num::slice(random_matrix(rng, dv, 1), 0, dv), oracle::random_spd(rng, dv, 0.5)};
    const auto run = filter_run(p, obs, init, 5);
    REQUIRE(run.size() == 50);
    Tensor mu = init.mu_v.reshaped({dv, 1}), P = init.sigma_v;
    const auto kf = oracle::kalman_for(c, s1, s2);
    double err = 0;
    for (std::size_t n = 0; n < 50; ++n) {
      kf.step(mu, P, num::slice(obs, (n + 1) * d1, d1).reshaped({d1, 1}));
      err = std::max(err, num::max_abs_diff(run[n].mu_v.reshaped({dv, 1}), mu));
      err = std::max(err, num::max_abs_diff(run[n].sigma_v, P));
      CHECK(run[n].warmup == (n < 5));
      CHECK(num::max_abs_diff(run[n].sigma_v, num::transpose(run[n].sigma_v)) == 0.0);
    }
    CHECK(err < 1e-9);
  }
}

TEST_CASE("filter_run agrees with the shared autodiff-capable update") {
  num::RngStream rng(21);
  model::ModelShape shape;
  shape.encoder_hidden = shape.decoder_hidden = {5};
  shape.eta_hidden = {7};
  const StateSpec spec(9, {1, 4, 7}, 4);
  const auto p = model::CGKNParams::create(spec, shape, rng);
  const Tensor u1 = random_matrix(rng, 31, 3);
  const auto run = filter_run(p, u1, GaussianBelief::standard(4), 0);
  const auto ref = model::cg_filter(model::view(p), u1, model::Belief<Tensor>{Tensor::matrix(4, 1), Tensor::identity(4)}, 30);
  double err = 0;
  for (std::size_t n = 0; n < 30; ++n) {
    err = std::max(err, num::max_abs_diff(run[n].mu_v.reshaped({4, 1}), ref[n].mu));
    err = std::max(err, num::max_abs_diff(run[n].sigma_v, ref[n].sigma));
  }
  CHECK(err < 1e-12);
}

TEST_CASE("filter_run edge cases") {
  num::RngStream rng(3);
  SUBCASE("single observation gives no beliefs") {
    const auto p = oracle::constant_model(oracle::square_spec(2, 2), oracle::random_coeffs(rng, 2, 2), Tensor({2}, 1.0),
                                          Tensor({2}, 1.0));
    CHECK(filter_run(p, Tensor::matrix(1, 2), GaussianBelief::standard(2), 0).empty());
    CHECK_THROWS_AS(filter_run(p, Tensor::matrix(3, 2), GaussianBelief::standard(2), 3), ContractError);
  }
  SUBCASE("zero dynamics sit at the fixed point") {
    const CGCoeffs zero{Tensor::matrix(2, 1), Tensor::matrix(2, 3), Tensor::matrix(3, 1), Tensor::matrix(3, 3)};
    const Tensor s2({3}, std::vector<double>{0.5, 1.0, 2.0});
    const auto p = oracle::constant_model(oracle::square_spec(2, 3), zero, Tensor({2}, 0.7), s2);
    const auto run = filter_run(p, random_matrix(rng, 6, 2), GaussianBelief::standard(3), 0);
    for (const auto& b : run) {
      CHECK(num::max_abs(b.mu_v) == 0.0);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(b.sigma_v(i, j) == (i == j ? s2[i] * s2[i] : 0.0));
    }
  }
  SUBCASE("zero observation noise with no coupling falls back to jitter") {
    const CGCoeffs c{Tensor::matrix(1, 1), Tensor::matrix(1, 1), Tensor::matrix(1, 1), Tensor::matrix(1, 1, 0.5)};
    const auto p = oracle::constant_model(oracle::square_spec(1, 1), c, Tensor({1}, 0.0), Tensor({1}, 1.0));
    const auto run = filter_run(p, Tensor::matrix(3, 1, 1.0), GaussianBelief::standard(1), 0);
    CHECK(run.back().mu_v[0] == 0.0);
  }
  SUBCASE("indefinite innovation reports the step") {
    const auto p = oracle::constant_model(oracle::square_spec(1, 1), scalar_coeffs(0, 1, 0, 1), Tensor({1}, 0.0),
                                          Tensor({1}, 0.0));
    try {
      filter_run(p, Tensor::matrix(3, 1, 1.0), scalar_belief(0, -1), 0);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(e.step() == 1);
      CHECK(e.pivot_index() == 0);
      CHECK(e.pivot() < 0);
    }
  }
}

TEST_CASE("filter log and stacking") {
  num::RngStream rng(8);
  const auto p = oracle::constant_model(oracle::square_spec(1, 2), oracle::random_coeffs(rng, 1, 2), Tensor({1}, 1.0),
                                        Tensor({2}, 0.5));
  const auto run = filter_run(p, random_matrix(rng, 4, 1), GaussianBelief::standard(2), 1);
  std::ostringstream os;
  write_filter_log(os, run);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "step,warmup_flag,mu_0,mu_1");
  std::getline(is, line);
  CHECK(line.rfind("1,1,", 0) == 0);
  std::getline(is, line);
  CHECK(line.rfind("2,0,", 0) == 0);
  CHECK(stack_means(run).rows() == 3);
  CHECK(stack_variances(run)(2, 1) == run[2].sigma_v(1, 1));
}

TEST_CASE("decode_posterior") {
  num::RngStream rng(12);
  const auto p = oracle::constant_model(oracle::square_spec(2, 3), oracle::random_coeffs(rng, 2, 3), Tensor({2}, 1.0),
                                        Tensor({3}, 1.0));
  GaussianBelief b{Tensor({3}, std::vector<double>{1, -2, 3}), Tensor::identity(3)};
  const DecodedPosterior d = decode_posterior(p, b);
  CHECK(d.mu == b.mu_v);
  CHECK_FALSE(d.std.has_value());

  model::Mlp uq = model::Mlp::zeros({2, 3});
  uq.biases[0] = Tensor::matrix(1, 3, std::vector<double>{0.0, 1.0, -1.0});
  uq.output = model::OutputTransform::Softplus;
  const Tensor u1({2}, 5.0);
  const DecodedPosterior du = decode_posterior(p, b, &uq, &u1);
  REQUIRE(du.std.has_value());
  CHECK((*du.std)[0] == doctest::Approx(std::log(2.0)));
  for (double s : du.std->data()) CHECK(s >= 0.0);
}

TEST_CASE("log-log slope of exact power laws") {
  std::vector<ComplexityRow> rows;
  for (std::size_t dv : {8, 16, 32, 64}) rows.push_back({dv, 1e-9 * std::pow(double(dv), 3.0)});
  CHECK(loglog_slope(rows) == doctest::Approx(3.0));
  const auto report = filter_complexity_probe({2, 4}, 20, 2, 1);
  CHECK(report.rows.size() == 2);
  CHECK(report.rows[1].seconds > 0.0);
}
