#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

using namespace quasipot;
using qptest::random_mat;
using qptest::random_sym;
using qptest::random_vec;

TEST_CASE("solve_linear basic cases") {
  SUBCASE("identity") {
    Vec b(3);
    b << 1, 2, 3;
    const Vec x = solve_linear(Mat::Identity(3, 3), b);
    CHECK((x - b).norm() == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("diagonal") {
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = 2.0;
    a(1, 1) = 4.0;
    Vec b(2);
    b << 2, 8;
    const Vec x = solve_linear(a, b);
    CHECK(x(0) == doctest::Approx(1.0));
    CHECK(x(1) == doctest::Approx(2.0));
  }
  SUBCASE("rank deficient throws") {
    Mat a(2, 2);
    a << 1, 1, 1, 1;
    Vec b(2);
    b << 1, 0;
    CHECK_THROWS_AS(solve_linear(a, b), SingularMatrix);
  }
}

TEST_CASE("solve_linear recovers random right-hand sides") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    Mat a = random_mat(rng, n, n);
    if (cond(a) > 1e6) continue;
    const Vec v = random_vec(rng, n);
    const Vec x = solve_linear(a, a * v);
    CHECK((x - v).norm() <= 1e-9 * std::max(1.0, v.norm()));
    CHECK((a * x - a * v).norm() <= 1e-10 * (a.norm() * x.norm() + (a * v).norm() + 1.0));
  }
}

TEST_CASE("eig on small fixed matrices") {
  SUBCASE("diagonal") {
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = 3.0;
    a(1, 1) = 1.0;
    const Spectrum s = eig(a);
    CHECK(s.eigenvalues(0).real() == doctest::Approx(3.0));
    CHECK(s.eigenvalues(1).real() == doctest::Approx(1.0));
    CHECK(s.eigenvalues(0).imag() == doctest::Approx(0.0));
  }
  SUBCASE("rotation generator gives a conjugate pair, +i first") {
    Mat a(2, 2);
    a << 0, 1, -1, 0;
    const Spectrum s = eig(a);
    CHECK(std::abs(s.eigenvalues(0).real()) <= 1e-12);
    CHECK(s.eigenvalues(0).imag() == doctest::Approx(1.0));
    CHECK(s.eigenvalues(1).imag() == doctest::Approx(-1.0));
  }
  SUBCASE("companion-style matrix: roots of l^2 + l - 2") {
    Mat a(2, 2);
    a << 0, 1, 2, -1;
    const Spectrum s = eig(a);
    CHECK(s.eigenvalues(0).real() == doctest::Approx(1.0));
    CHECK(s.eigenvalues(1).real() == doctest::Approx(-2.0));
  }
}

TEST_CASE("eig satisfies the residual and ordering contract") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    const Mat a = random_mat(rng, n, n);
    const Spectrum s = eig(a);
    const double norm_a = a.norm();
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(s.eigenvectors.col(i).norm() - 1.0) <= 1e-12);
      const CVec resid = a * s.eigenvectors.col(i) - s.eigenvalues(i) * s.eigenvectors.col(i);
      CHECK(resid.norm() <= 1e-9 * std::max(1.0, norm_a));
      if (i > 0) {
        const auto prev = s.eigenvalues(i - 1), cur = s.eigenvalues(i);
        CHECK((prev.real() > cur.real() ||
               (prev.real() == cur.real() && prev.imag() >= cur.imag())));
      }
    }
  }
}

TEST_CASE("eig of a symmetric matrix: real spectrum, orthogonal eigenvectors") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);
    const Mat a = random_sym(rng, n);
    const Spectrum s = eig(a);
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(s.eigenvalues(i).imag()) <= 1e-10);
      for (int j = i + 1; j < n; ++j) {
        const auto dot = s.eigenvectors.col(i).dot(s.eigenvectors.col(j));
        CHECK(std::abs(dot) <= 1e-8);
      }
    }
  }
}

TEST_CASE("det equals the eigenvalue product") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);  // n <= 6
    const Mat a = random_mat(rng, n, n);
    const Spectrum s = eig(a);
    std::complex<double> prod = 1.0;
    for (int i = 0; i < n; ++i) prod *= s.eigenvalues(i);
    const double d = det(a);
    CHECK(std::abs(prod.imag()) <= 1e-8 * std::max(1.0, std::abs(d)));
    CHECK(std::abs(prod.real() - d) <= 1e-8 * std::max(1.0, std::abs(d)));
  }
}

TEST_CASE("inverse, det and rank on fixed inputs") {
  SUBCASE("inverse of a diagonal matrix") {
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = 2.0;
    a(1, 1) = 4.0;
    const Mat inv = inverse(a);
    CHECK(inv(0, 0) == doctest::Approx(0.5));
    CHECK(inv(1, 1) == doctest::Approx(0.25));
    CHECK((a * inv - Mat::Identity(2, 2)).norm() <= 1e-9);
  }
  SUBCASE("inverse of rank-deficient throws") {
    Mat a(2, 2);
    a << 1, 2, 2, 4;
    CHECK_THROWS_AS(inverse(a), SingularMatrix);
  }
  SUBCASE("det 2x2") {
    Mat a(2, 2);
    a << 0, 1, -2, -3;
    CHECK(det(a) == doctest::Approx(2.0));
  }
  SUBCASE("rank with explicit tolerance") {
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = 1.0;
    CHECK(rank(a, 1e-10) == 1);
    CHECK(rank(Mat::Zero(3, 3)) == 0);
    CHECK(rank(Mat::Identity(4, 4)) == 4);
  }
}

TEST_CASE("inverse contract on random well-conditioned matrices") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 7);
    const Mat a = random_mat(rng, n, n);
    if (cond(a) > 1e6) continue;
    CHECK((a * inverse(a) - Mat::Identity(n, n)).norm() <= 1e-9);
  }
}
