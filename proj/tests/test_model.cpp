#include <filesystem>

#include "doctest.h"
#include "support/model_fixtures.hpp"

#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/linalg.hpp"

using namespace cgkoop;
using namespace cgkoop::model;
using num::Tensor;
using oracle::random_matrix;

namespace {

CGKNParams random_model(std::uint64_t seed, std::size_t d = 12, std::size_t dv = 5) {
  num::RngStream rng(seed);
  StateSpec spec(d, {0, 4, 8}, dv);
  ModelShape shape;
  shape.encoder_hidden = {9, 7};
  shape.decoder_hidden = {8};
  shape.eta_hidden = {10, 10};
  CGKNParams p = CGKNParams::create(spec, shape, rng);
  // Nonzero biases so the oracle comparison exercises them too.
  for (Tensor* t : trainable_tensors(p, false)) {
    if (t->rows() == 1) for (double& v : t->data()) v = 0.3 * rng.normal();
  }
  return p;
}

}  // namespace

TEST_CASE("state spec validation") {
  CHECK_THROWS_AS(StateSpec(4, {1, 1}, 2), ConfigError);
  CHECK_THROWS_AS(StateSpec(4, {0, 1, 2, 3}, 2), ConfigError);
  CHECK_THROWS_AS(StateSpec(4, {5}, 2), ConfigError);
  CHECK_THROWS_AS(StateSpec(4, {1}, 0), ConfigError);
  const StateSpec s(6, {1, 4}, 3);
  CHECK(s.d1() == 2);
  CHECK(s.d2() == 4);
  CHECK(s.unobserved() == std::vector<std::size_t>{0, 2, 3, 5});
  const Tensor u = Tensor::matrix(2, 6, {0, 1, 2, 3, 4, 5, 10, 11, 12, 13, 14, 15});
  CHECK(s.merge(s.observed_part(u), s.unobserved_part(u)) == u);
  CHECK(s.observed_part(u)(1, 1) == 14);
}

TEST_CASE("encode") {
  SUBCASE("identity network") {
    num::RngStream rng(1);
    CGKNParams p =
        oracle::constant_model(oracle::square_spec(1, 3), oracle::random_coeffs(rng, 1, 3), Tensor({1}), Tensor({3}));
    const Tensor u2 = Tensor({3}, std::vector<double>{1.5, -2, 3});
    CHECK(encode(p, u2) == u2);
    CHECK(decode(p, u2) == u2);
  }
  SUBCASE("zero weights give the bias") {
    CGKNParams p = random_model(1);
    for (auto& w : p.encoder.weights) w = num::scale(w, 0.0);
    for (auto& w : p.decoder.weights) w = num::scale(w, 0.0);
    // Biases flow through tanh layers; with zero weights only the last bias survives.
    const Tensor v = encode(p, Tensor({p.spec.d2()}, 7.0));
    for (std::size_t j = 0; j < v.size(); ++j) CHECK(v[j] == p.encoder.biases.back()[j]);
    const Tensor u2 = decode(p, Tensor({p.spec.dv}, -3.0));
    for (std::size_t j = 0; j < u2.size(); ++j) CHECK(u2[j] == p.decoder.biases.back()[j]);
  }
  SUBCASE("random weights against loop oracle") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const CGKNParams p = random_model(seed);
      num::RngStream rng(100 + seed);
      const Tensor u2 = random_matrix(rng, 1, p.spec.d2());
      const auto ref = oracle::mlp_eval(p.encoder, u2.storage());
      const Tensor v = encode(p, u2.reshaped({p.spec.d2()}));
      for (std::size_t j = 0; j < ref.size(); ++j) CHECK(std::abs(v[j] - ref[j]) < 1e-12);
      const auto ref2 = oracle::mlp_eval(p.decoder, v.storage());
      const Tensor back = decode(p, v);
      for (std::size_t j = 0; j < ref2.size(); ++j) CHECK(std::abs(back[j] - ref2[j]) < 1e-12);
    }
  }
  SUBCASE("batched rows match one-by-one") {
    const CGKNParams p = random_model(3);
    num::RngStream rng(9);
    const Tensor batch = random_matrix(rng, 4, p.spec.d2());
    const Tensor v = encode(p, batch);
    CHECK(v.rows() == 4);
    for (std::size_t r = 0; r < 4; ++r) {
      const Tensor one = encode(p, num::slice(batch, r * p.spec.d2(), p.spec.d2()));
      for (std::size_t j = 0; j < p.spec.dv; ++j) CHECK(v(r, j) == one[j]);
    }
  }
  SUBCASE("dimension mismatch") {
    const CGKNParams p = random_model(2);
    CHECK_THROWS_AS(encode(p, Tensor({p.spec.d2() + 1})), ShapeError);
    CHECK_THROWS_AS(decode(p, Tensor({p.spec.dv + 2})), ShapeError);
  }
}

TEST_CASE("coefficient packing") {
  CHECK(StateSpec(32, {0, 8, 16, 24}, 10).coeff_size() == 154);
  CHECK(StateSpec(128, {0, 16, 32, 48, 64, 80, 96, 112}, 12).coeff_size() == 260);

  num::RngStream rng(4);
  const StateSpec spec(9, {2, 5, 7}, 4);
  const CGCoeffs c = oracle::random_coeffs(rng, 3, 4);
  const Tensor flat = pack(c);
  CHECK(flat.size() == spec.coeff_size());
  const CGCoeffs back = unpack(flat, 0, spec);
  CHECK(num::max_abs_diff(back.F1, c.F1) == 0.0);
  CHECK(num::max_abs_diff(back.G1, c.G1) == 0.0);
  CHECK(num::max_abs_diff(back.F2, c.F2) == 0.0);
  CHECK(num::max_abs_diff(back.G2, c.G2) == 0.0);
  // Row-major: G1(1, 2) sits after F1 (3) and one full G1 row (4) plus 2.
  CHECK(flat[3 + 4 + 2] == c.G1(1, 2));
  CHECK(pack(back) == flat);

  CGKNParams p = oracle::constant_model(StateSpec(7, {0, 1, 2}, 4), c, Tensor({3}), Tensor({4}));
  const CGCoeffs got = coeffs(p, Tensor({3}, 123.0));
  CHECK(num::max_abs_diff(got.G2, c.G2) == 0.0);
}

TEST_CASE("zero eta gives zero coefficients") {
  CGKNParams p = random_model(5);
  for (auto& w : p.eta.weights) w = num::scale(w, 0.0);
  for (auto& b : p.eta.biases) b = num::scale(b, 0.0);
  const CGCoeffs c = coeffs(p, Tensor({p.spec.d1()}, 2.0));
  CHECK(num::max_abs(c.F1) == 0.0);
  CHECK(num::max_abs(c.G1) == 0.0);
  CHECK(num::max_abs(c.F2) == 0.0);
  CHECK(num::max_abs(c.G2) == 0.0);
  const StepResult s = step_mean(p, Tensor({p.spec.d1()}, 1.0), Tensor({p.spec.dv}, 1.0));
  CHECK(num::max_abs(s.u1) == 0.0);
  CHECK(num::max_abs(s.v) == 0.0);
}

TEST_CASE("eta output width is validated") {
  CGKNParams p = random_model(6);
  p.eta.weights.back() = Tensor::matrix(p.eta.weights.back().rows(), 128);
  p.eta.biases.back() = Tensor::matrix(1, 128);
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_THROWS_AS(coeffs(p, Tensor({p.spec.d1()})), ConfigError);
}

TEST_CASE("step_mean") {
  SUBCASE("hand arithmetic") {
    const CGCoeffs c{Tensor::matrix(1, 1, 0.0), Tensor::matrix(1, 1, 1.0), Tensor::matrix(1, 1, 0.0),
                     Tensor::matrix(1, 1, 0.5)};
    const CGKNParams p = oracle::constant_model(oracle::square_spec(1, 1), c, Tensor({1}), Tensor({1}));
    const StepResult s = step_mean(p, Tensor({1}, 9.0), Tensor({1}, 2.0));
    CHECK(s.u1[0] == 2.0);
    CHECK(s.v[0] == 1.0);
  }
  SUBCASE("10 steps against matrix powers") {
    num::RngStream rng(10);
    const CGCoeffs c = oracle::random_coeffs(rng, 2, 3);
    const CGKNParams p = oracle::constant_model(oracle::square_spec(2, 3), c, Tensor({2}), Tensor({3}));
    Tensor u1 = Tensor({2}, 0.0), v = num::slice(random_matrix(rng, 3, 1), 0, 3);
    const Tensor v0 = v.reshaped({3, 1});
    for (int n = 0; n < 10; ++n) {
      const StepResult s = step_mean(p, u1, v);
      u1 = s.u1;
      v = s.v;
    }
    // v¹⁰ = G2¹⁰ v⁰ + Σ_{k<10} G2ᵏ F2 ; u1¹⁰ = F1 + G1 v⁹
    Tensor pow = Tensor::identity(3), acc = Tensor::matrix(3, 1), v9;
    for (int k = 0; k < 10; ++k) {
      if (k == 9) v9 = num::add(oracle::naive_matmul(pow, v0), acc);
      acc = num::add(acc, oracle::naive_matmul(pow, c.F2));
      pow = oracle::naive_matmul(pow, c.G2);
    }
    const Tensor v10 = num::add(oracle::naive_matmul(pow, v0), acc);
    const Tensor u10 = num::add(c.F1, oracle::naive_matmul(c.G1, v9));
    CHECK(num::max_abs_diff(v.reshaped({3, 1}), v10) < 1e-10);
    CHECK(num::max_abs_diff(u1.reshaped({2, 1}), u10) < 1e-10);
  }
}

TEST_CASE("step_mean is affine in v for fixed u1") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const CGKNParams p = random_model(20 + seed);
    num::RngStream rng(seed);
    const Tensor u1 = num::slice(random_matrix(rng, p.spec.d1(), 1), 0, p.spec.d1());
    const Tensor a = num::slice(random_matrix(rng, p.spec.dv, 1), 0, p.spec.dv);
    const Tensor b = num::slice(random_matrix(rng, p.spec.dv, 1), 0, p.spec.dv);
    const double alpha = 0.3;
    const StepResult sa = step_mean(p, u1, a), sb = step_mean(p, u1, b);
    const StepResult sm = step_mean(p, u1, num::add(num::scale(a, alpha), num::scale(b, 1 - alpha)));
    CHECK(num::max_abs_diff(sm.v, num::add(num::scale(sa.v, alpha), num::scale(sb.v, 1 - alpha))) < 1e-10);
    CHECK(num::max_abs_diff(sm.u1, num::add(num::scale(sa.u1, alpha), num::scale(sb.u1, 1 - alpha))) < 1e-10);
  }
}

TEST_CASE("step_sample") {
  num::RngStream rng(31);
  const CGCoeffs c = oracle::random_coeffs(rng, 2, 2);
  CGKNParams p = oracle::constant_model(oracle::square_spec(2, 2), c, Tensor({2}, 0.0), Tensor({2}, 0.0));
  const Tensor u1({2}, 0.5), v({2}, -1.0);
  SUBCASE("zero noise equals the mean") {
    num::RngStream r(1);
    const StepResult a = step_sample(p, u1, v, r), b = step_mean(p, u1, v);
    CHECK(a.u1 == b.u1);
    CHECK(a.v == b.v);
  }
  SUBCASE("reproducible") {
    p.sigma1 = Tensor({2}, std::vector<double>{0.3, 0.7});
    num::RngStream r1(8), r2(8);
    CHECK(step_sample(p, u1, v, r1).u1 == step_sample(p, u1, v, r2).u1);
  }
  SUBCASE("empirical covariance of u1") {
    p.sigma1 = Tensor({2}, std::vector<double>{0.3, 0.7});
    p.sigma2 = Tensor({2}, std::vector<double>{0.2, 0.2});
    const StepResult mean = step_mean(p, u1, v);
    num::RngStream r(77);
    const std::size_t n = 100000;
    double c00 = 0, c11 = 0, c01 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const StepResult s = step_sample(p, u1, v, r);
      const double e0 = s.u1[0] - mean.u1[0], e1 = s.u1[1] - mean.u1[1];
      c00 += e0 * e0;
      c11 += e1 * e1;
      c01 += e0 * e1;
    }
    CHECK(std::abs(c00 / n / 0.09 - 1.0) < 0.02);
    CHECK(std::abs(c11 / n / 0.49 - 1.0) < 0.02);
    CHECK(std::abs(c01 / n) < 0.02 * 0.3 * 0.7 * 5);
  }
}

TEST_CASE("forecast") {
  SUBCASE("one step of a zero model") {
    const CGCoeffs zero{Tensor::matrix(1, 1), Tensor::matrix(1, 2), Tensor::matrix(2, 1), Tensor::matrix(2, 2)};
    const CGKNParams p = oracle::constant_model(oracle::square_spec(1, 2), zero, Tensor({1}), Tensor({2}));
    const Tensor out = forecast(p, Tensor({3}, std::vector<double>{1, 2, 3}), 1);
    CHECK(out.rows() == 1);
    CHECK(num::max_abs(out) == 0.0);
  }
  SUBCASE("linear configuration against the joint linear recursion") {
    // With constant coefficients and identity maps the model is the linear
    // system x' = M x + f on x = (u1, v), where u1 only feeds back through η
    // (it does not, since η is constant), so M = [[0, G1], [0, G2]].
    num::RngStream rng(41);
    const CGCoeffs c = oracle::random_coeffs(rng, 2, 3);
    const CGKNParams p = oracle::constant_model(oracle::square_spec(2, 3), c, Tensor({2}), Tensor({3}));
    Tensor M = Tensor::matrix(5, 5), f = Tensor::matrix(5, 1);
    for (std::size_t i = 0; i < 2; ++i) {
      f(i, 0) = c.F1[i];
      for (std::size_t j = 0; j < 3; ++j) M(i, 2 + j) = c.G1(i, j);
    }
    for (std::size_t i = 0; i < 3; ++i) {
      f(2 + i, 0) = c.F2[i];
      for (std::size_t j = 0; j < 3; ++j) M(2 + i, 2 + j) = c.G2(i, j);
    }
    Tensor x = random_matrix(rng, 5, 1);
    const Tensor out = forecast(p, x.reshaped({5}), 25);
    for (std::size_t n = 0; n < 25; ++n) {
      x = num::add(oracle::naive_matmul(M, x), f);
      for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(out(n, j) - x[j]) < 1e-9);
    }
  }
  SUBCASE("latent recursion without observation coupling") {
    // η ignores u1, F2 = 0, G2 = A, G1 = 0: v follows vⁿ⁺¹ = A vⁿ.
    num::RngStream rng(43);
    const Tensor A = random_matrix(rng, 3, 3, 0.5);
    const CGCoeffs c{Tensor::matrix(1, 1), Tensor::matrix(1, 3), Tensor::matrix(3, 1), A};
    const CGKNParams p = oracle::constant_model(oracle::square_spec(1, 3), c, Tensor({1}), Tensor({3}));
    Tensor v = random_matrix(rng, 3, 1);
    const Tensor out = forecast(p, Tensor({4}, std::vector<double>{0.0, v[0], v[1], v[2]}), 15);
    for (std::size_t n = 0; n < 15; ++n) {
      v = oracle::naive_matmul(A, v);
      for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(out(n, 1 + j) - v[j]) < 1e-12);
      CHECK(out(n, 0) == 0.0);
    }
  }
  SUBCASE("deterministic") {
    const CGKNParams p = random_model(50);
    const Tensor u0({p.spec.d}, 0.25);
    CHECK(forecast(p, u0, 8) == forecast(p, u0, 8));
  }
  SUBCASE("divergence reports the step") {
    const CGCoeffs c{Tensor::matrix(1, 1), Tensor::matrix(1, 1), Tensor::matrix(1, 1), Tensor::matrix(1, 1, 1e200)};
    const CGKNParams p = oracle::constant_model(oracle::square_spec(1, 1), c, Tensor({1}), Tensor({1}));
    try {
      forecast(p, Tensor({2}, 1.0), 10);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.step() == 2);
    }
  }
  SUBCASE("n_steps must be positive") {
    const CGKNParams p = random_model(51);
    CHECK_THROWS_AS(forecast(p, Tensor({p.spec.d}), 0), ContractError);
  }
}

TEST_CASE("checkpoint round trip") {
  const CGKNParams p = random_model(60);
  Checkpoint ck{p, std::nullopt, 1};
  ck.params.sigma1 = Tensor({3}, std::vector<double>{0.1, 0.2, 0.3});
  num::RngStream rng(2);
  ck.uq = Mlp::glorot({3, 6, p.spec.d2()}, rng);
  ck.uq->output = OutputTransform::Softplus;
  const auto dir = std::filesystem::temp_directory_path() / "cgkoop_test_ckpt";
  save_checkpoint(dir, ck);
  const Checkpoint back = load_checkpoint(dir);
  CHECK(back.stage == 1);
  CHECK(back.params.spec.observed == p.spec.observed);
  CHECK(back.params.sigma1 == ck.params.sigma1);
  REQUIRE(back.uq.has_value());
  CHECK(back.uq->output == OutputTransform::Softplus);
  CHECK(back.uq->weights[1] == ck.uq->weights[1]);
  CGKNParams a = ck.params, b = back.params;
  const auto ta = trainable_tensors(a, true), tb = trainable_tensors(b, true);
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_checkpoint(dir), ConfigError);
}
