#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "support/oracles.hpp"

#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/cgt_io.hpp"
#include "cgkoop/numcore/fft.hpp"
#include "cgkoop/numcore/linalg.hpp"
#include "cgkoop/numcore/parallel.hpp"
#include "cgkoop/numcore/rng.hpp"

using namespace cgkoop;
using namespace cgkoop::num;

TEST_CASE("matmul hand cases") {
  const Tensor m = Tensor::from_rows({{1, 2}, {3, 4}});
  CHECK(matmul(Tensor::identity(2), m) == m);
  const Tensor r = matmul(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{3}, {4}}));
  CHECK(r.rows() == 1);
  CHECK(r.cols() == 1);
  CHECK(r(0, 0) == 11.0);
}

TEST_CASE("matmul against triple loop") {
  RngStream rng(11);
  const Tensor a = oracle::random_matrix(rng, 5, 7);
  const Tensor b = oracle::random_matrix(rng, 7, 3);
  CHECK(max_abs_diff(matmul(a, b), oracle::naive_matmul(a, b)) < 1e-12);
}

TEST_CASE("matmul shape mismatch") {
  CHECK_THROWS_AS(matmul(Tensor::matrix(2, 3), Tensor::matrix(2, 3)), ShapeError);
}

TEST_CASE("matmul associativity") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(seed);
    const Tensor a = oracle::random_matrix(rng, 4, 6);
    const Tensor b = oracle::random_matrix(rng, 6, 5);
    const Tensor c = oracle::random_matrix(rng, 5, 3);
    const Tensor l = matmul(matmul(a, b), c);
    const Tensor r = matmul(a, matmul(b, c));
    CHECK(oracle::rel_error(l, r) < 1e-9);
  }
}

TEST_CASE("solve_spd") {
  SUBCASE("diagonal") {
    const Tensor x = solve_spd(scale(Tensor::identity(3), 2.0), Tensor::identity(3));
    CHECK(max_abs_diff(x, scale(Tensor::identity(3), 0.5)) == 0.0);
  }
  SUBCASE("2x2 by hand") {
    const Tensor a = Tensor::from_rows({{4, 1}, {1, 3}});
    const Tensor x = solve_spd(a, Tensor::column({1, 2}));
    CHECK(x[0] == doctest::Approx(1.0 / 11).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(7.0 / 11).epsilon(1e-14));
    // a·x = b
    CHECK(4 * x[0] + x[1] == doctest::Approx(1.0));
    CHECK(x[0] + 3 * x[1] == doctest::Approx(2.0));
  }
  SUBCASE("random 8x8 residual") {
    RngStream rng(5);
    const Tensor a = oracle::random_spd(rng, 8);
    const Tensor b = oracle::random_matrix(rng, 8, 3);
    const Tensor x = solve_spd(a, b);
    CHECK(max_abs_diff(oracle::naive_matmul(a, x), b) < 1e-10);
  }
  SUBCASE("relative residual up to cond 1e6") {
    for (double shift : {1.0, 1e-2, 1e-4}) {
      RngStream rng(17);
      const Tensor a = oracle::random_spd(rng, 6, shift);
      const auto ev = symmetric_eigenvalues(a);
      REQUIRE(ev.back() / ev.front() < 1e6);
      const Tensor b = oracle::random_matrix(rng, 6, 2);
      const Tensor r = sub(matmul(a, solve_spd(a, b)), b);
      CHECK(max_abs(r) / max_abs(b) < 1e-10);
    }
  }
  SUBCASE("non-SPD reports pivot") {
    const Tensor a = Tensor::from_rows({{1, 0, 0}, {0, 2, 0}, {0, 0, -1}});
    try {
      solve_spd(a, Tensor::column({1, 1, 1}));
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(e.pivot_index() == 2);
      CHECK(e.pivot() == -1.0);
    }
  }
}

TEST_CASE("symmetric eigenvalues of a known matrix") {
  const auto ev = symmetric_eigenvalues(Tensor::from_rows({{2, 1}, {1, 2}}));
  CHECK(ev[0] == doctest::Approx(1.0));
  CHECK(ev[1] == doctest::Approx(3.0));
}

TEST_CASE("fft") {
  SUBCASE("DC") {
    const std::vector<double> x{1, 1, 1, 1};
    const auto y = fft_real(x);
    CHECK(std::abs(y[0] - Complex(4, 0)) < 1e-15);
    for (int k = 1; k < 4; ++k) CHECK(std::abs(y[k]) < 1e-15);
  }
  SUBCASE("single sine") {
    const std::size_t n = 32, mode = 3;
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = std::sin(2 * std::numbers::pi * mode * j / n);
    const auto y = fft_real(x);
    for (std::size_t k = 0; k < n; ++k) {
      if (k == mode || k == n - mode)
        CHECK(std::abs(y[k]) == doctest::Approx(n / 2.0));
      else
        CHECK(std::abs(y[k]) < 1e-12);
    }
  }
  SUBCASE("direct DFT oracle") {
    RngStream rng(3);
    std::vector<Complex> x(64);
    for (auto& c : x) c = Complex(rng.normal(), rng.normal());
    const auto y = fft(x);
    const auto z = oracle::direct_dft(x);
    double err = 0;
    for (std::size_t k = 0; k < x.size(); ++k) err = std::max(err, std::abs(y[k] - z[k]));
    CHECK(err < 1e-10);
  }
  SUBCASE("round trip up to 4096") {
    for (std::size_t n = 1; n <= 4096; n *= 2) {
      RngStream rng(n);
      std::vector<Complex> x(n);
      for (auto& c : x) c = Complex(rng.normal(), rng.normal());
      const auto back = ifft(fft(x));
      double err = 0;
      for (std::size_t k = 0; k < n; ++k) err = std::max(err, std::abs(back[k] - x[k]));
      CHECK(err < 1e-12);
    }
  }
  SUBCASE("non power of two") {
    std::vector<Complex> x(12);
    CHECK_THROWS_AS(fft(x), ShapeError);
    CHECK_THROWS_AS(FftPlan(0), ShapeError);
  }
}

TEST_CASE("gaussian draws") {
  SUBCASE("determinism") {
    RngStream a(42), b(42);
    CHECK(gaussian(a, {100}) == gaussian(b, {100}));
  }
  SUBCASE("distinct seeds") {
    RngStream a(1), b(2);
    const Tensor x = gaussian(a, {10}), y = gaussian(b, {10});
    for (std::size_t i = 0; i < 10; ++i) CHECK(x[i] != y[i]);
  }
  SUBCASE("moments over 1e6 draws") {
    RngStream rng(2024);
    const Tensor x = gaussian(rng, {1000000});
    double s = 0, s2 = 0;
    for (double v : x.data()) s += v;
    const double m = s / x.size();
    for (double v : x.data()) s2 += (v - m) * (v - m);
    CHECK(std::abs(m) < 0.01);
    CHECK(std::abs(s2 / (x.size() - 1) - 1.0) < 0.01);
  }
  SUBCASE("uniform stays in the open interval") {
    RngStream rng(9);
    for (int i = 0; i < 100000; ++i) {
      const double u = rng.uniform();
      REQUIRE(u > 0.0);
      REQUIRE(u < 1.0);
    }
  }
  SUBCASE("counter resumes a stream") {
    RngStream a(77);
    for (int i = 0; i < 5; ++i) a.next_u64();
    RngStream b(77, a.counter());
    CHECK(a.next_u64() == b.next_u64());
  }
  SUBCASE("derived seeds differ by tag and index") {
    CHECK(derive_seed(1, "gen", 0) != derive_seed(1, "gen", 1));
    CHECK(derive_seed(1, "gen", 0) != derive_seed(1, "train", 0));
    CHECK(derive_seed(1, "gen", 0) == derive_seed(1, "gen", 0));
  }
}

TEST_CASE("cgt round trip is bit exact") {
  RngStream rng(8);
  const Tensor t = gaussian(rng, {3, 4, 5});
  std::stringstream ss;
  write_cgt(ss, t);
  const std::string bytes = ss.str();
  REQUIRE(bytes.size() == 4 + 4 + 3 * 8 + 60 * 8);
  CHECK(bytes.substr(0, 4) == "CGT1");
  CHECK(static_cast<unsigned char>(bytes[4]) == 3);
  CHECK(static_cast<unsigned char>(bytes[8]) == 3);
  CHECK(static_cast<unsigned char>(bytes[16]) == 4);
  const Tensor back = read_cgt(ss);
  CHECK(back == t);

  std::stringstream bad("CGT2xxxx");
  CHECK_THROWS(read_cgt(bad));
}

TEST_CASE("parallel_for output does not depend on thread count") {
  std::vector<double> a(1000), b(1000);
  parallel_for(a.size(), 1, [&](std::size_t i) { a[i] = std::sin(double(i)); });
  parallel_for(b.size(), 4, [&](std::size_t i) { b[i] = std::sin(double(i)); });
  CHECK(a == b);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw std::runtime_error("x");
                  }),
                  std::runtime_error);
}

TEST_CASE("tensor shape rules") {
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  const Tensor t({2, 3}, 1.0);
  CHECK(t.reshaped({3, 2}).dim(0) == 3);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  CHECK(Tensor::scalar(2.5).item() == 2.5);
  CHECK_THROWS(t.item());
}
