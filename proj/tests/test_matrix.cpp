#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "attnshap/matrix.hpp"

using namespace attnshap;

TEST_CASE("softmax of a constant row is uniform") {
  Matrix m{{0.0, 0.0}};
  Matrix s = softmax_rows(m);
  CHECK(s(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("softmax of log-odds recovers the odds") {
  Matrix m{{std::log(1.0), std::log(3.0)}};
  Matrix s = softmax_rows(m);
  CHECK(s(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(s(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax is stabilized against large scores") {
  Matrix m{{1000.0, 0.0}};
  Matrix s = softmax_rows(m);
  CHECK(std::isfinite(s(0, 0)));
  CHECK(s(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("softmax rejects non-finite input") {
  Matrix m{{std::numeric_limits<double>::infinity(), 0.0}};
  CHECK_THROWS_AS(softmax_rows(m), std::invalid_argument);
  Matrix nan{{std::nan(""), 0.0}};
  CHECK_THROWS_AS(softmax_rows(nan), std::invalid_argument);
}

TEST_CASE("softmax rows sum to one") {
  Matrix m{{0.3, -2.0, 5.1}, {1.0, 1.0, 1.0}, {-7.0, 0.0, 7.0}};
  Matrix s = softmax_rows(m);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < s.cols(); ++j) sum += s(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("matmul and transpose basics") {
  Matrix a{{1.0, 2.0}, {3.0, 4.0}};
  Matrix b{{5.0, 6.0}, {7.0, 8.0}};
  Matrix c = matmul(a, b);
  CHECK(c(0, 0) == 19.0);
  CHECK(c(0, 1) == 22.0);
  CHECK(c(1, 0) == 43.0);
  CHECK(c(1, 1) == 50.0);
  Matrix t = transposed(a);
  CHECK(t(0, 1) == 3.0);
  CHECK(t(1, 0) == 2.0);
  CHECK_THROWS_AS(matmul(a, Matrix(3, 2)), std::invalid_argument);
}

TEST_CASE("finite check catches bad entries") {
  Matrix m(2, 2, 1.0);
  CHECK(m.all_finite());
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(m.all_finite());
  CHECK_THROWS_AS(m.check_finite("test"), std::invalid_argument);
}
