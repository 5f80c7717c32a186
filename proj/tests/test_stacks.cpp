#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "attnshap/rng.hpp"
#include "attnshap/stacks.hpp"

using namespace attnshap;

namespace {

Matrix uniform_attention(std::size_t n) {
  return Matrix(n, n, 1.0 / static_cast<double>(n));
}

AttentionStack random_stack(std::size_t layers, std::size_t heads, std::size_t n,
                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Matrix> mats;
  for (std::size_t m = 0; m < layers * heads; ++m) {
    Matrix scores(n, n);
    for (double& v : scores.data()) v = 2.0 * rng.next_gaussian();
    mats.push_back(softmax_rows(scores));
  }
  return AttentionStack(layers, heads, n, std::move(mats));
}

}  // namespace

TEST_CASE("attention stack rejects non-stochastic rows") {
  Matrix scores{{3.0, 1.0}, {0.5, 0.5}};  // raw scores, first row sums to 4
  CHECK_THROWS_AS(AttentionStack(1, 1, 2, {scores}), std::invalid_argument);
}

TEST_CASE("attention stack renormalizes small row-sum deviations") {
  Matrix near{{0.5 + 2e-8, 0.5}, {0.25, 0.75}};
  AttentionStack stack(1, 1, 2, {near});
  double sum = stack.at(0, 0)(0, 0) + stack.at(0, 0)(0, 1);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("attention stack rejects entries outside the unit interval") {
  Matrix bad{{1.2, -0.2}, {0.5, 0.5}};
  CHECK_THROWS_AS(AttentionStack(1, 1, 2, {bad}), std::invalid_argument);
}

TEST_CASE("contribution matrix vanishes when no gradient is positive") {
  AttentionStack attn = random_stack(2, 2, 3, 7);
  std::vector<Matrix> neg(4, Matrix(3, 3, -1.0));
  GradientStack grads(2, 2, 3, neg);
  ContributionMatrix m = contribution_matrix(attn, grads, 0);
  CHECK(max_abs(m.mat) == 0.0);
}

TEST_CASE("contribution matrix hand value") {
  Matrix a{{0.5, 0.5}, {0.5, 0.5}};
  Matrix g{{2.0, -2.0}, {4.0, 0.0}};
  ContributionMatrix m =
      contribution_matrix(AttentionStack(1, 1, 2, {a}), GradientStack(1, 1, 2, {g}), 1);
  CHECK(m.class_id == 1);
  CHECK(m.mat(0, 0) == doctest::Approx(1.0));
  CHECK(m.mat(0, 1) == doctest::Approx(0.0));
  CHECK(m.mat(1, 0) == doctest::Approx(2.0));
  CHECK(m.mat(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("averaging identical per-layer products is the identity") {
  Matrix a{{0.25, 0.75}, {0.6, 0.4}};
  Matrix g{{1.0, 2.0}, {3.0, 0.5}};
  ContributionMatrix one =
      contribution_matrix(AttentionStack(1, 1, 2, {a}), GradientStack(1, 1, 2, {g}), 0);
  ContributionMatrix two = contribution_matrix(AttentionStack(2, 1, 2, {a, a}),
                                               GradientStack(2, 1, 2, {g, g}), 0);
  CHECK(max_abs_diff(one.mat, two.mat) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("contribution matrix rejects shape mismatch") {
  AttentionStack attn = random_stack(1, 1, 3, 1);
  GradientStack grads(1, 1, 2, {Matrix(2, 2, 0.1)});
  CHECK_THROWS_AS(contribution_matrix(attn, grads, 0), std::invalid_argument);
}

TEST_CASE("contribution matrix is monotone in positive gradients") {
  AttentionStack attn = random_stack(2, 2, 4, 11);
  Rng rng(13);
  std::vector<Matrix> gm;
  for (int m = 0; m < 4; ++m) {
    Matrix g(4, 4);
    for (double& v : g.data()) v = rng.next_gaussian();
    gm.push_back(std::move(g));
  }
  ContributionMatrix base = contribution_matrix(attn, GradientStack(2, 2, 4, gm), 0);
  // bump one positive entry
  for (auto& g : gm) {
    for (double& v : g.data()) {
      if (v > 0.0) v += 0.5;
    }
  }
  ContributionMatrix bumped = contribution_matrix(attn, GradientStack(2, 2, 4, gm), 0);
  for (std::size_t i = 0; i < base.mat.data().size(); ++i) {
    CHECK(bumped.mat.data()[i] >= base.mat.data()[i] - 1e-15);
  }
}

TEST_CASE("contribution matrix ignores layer/head ordering") {
  AttentionStack attn = random_stack(2, 1, 3, 17);
  Rng rng(19);
  Matrix g1(3, 3), g2(3, 3);
  for (double& v : g1.data()) v = rng.next_gaussian();
  for (double& v : g2.data()) v = rng.next_gaussian();
  ContributionMatrix fwd = contribution_matrix(
      attn, GradientStack(2, 1, 3, {g1, g2}), 0);
  AttentionStack swapped(2, 1, 3, {attn.at(1, 0), attn.at(0, 0)});
  ContributionMatrix rev = contribution_matrix(
      swapped, GradientStack(2, 1, 3, {g2, g1}), 0);
  CHECK(max_abs_diff(fwd.mat, rev.mat) < 1e-15);
}

TEST_CASE("average of a single matrix is that matrix") {
  AttentionStack stack = random_stack(1, 1, 4, 3);
  CHECK(max_abs_diff(average_attention(stack), stack.at(0, 0)) == 0.0);
}

TEST_CASE("averaging permutation heads gives the uniform matrix") {
  Matrix id{{1.0, 0.0}, {0.0, 1.0}};
  Matrix swap{{0.0, 1.0}, {1.0, 0.0}};
  AttentionStack stack(1, 2, 2, {id, swap});
  Matrix avg = average_attention(stack);
  CHECK(max_abs_diff(avg, Matrix(2, 2, 0.5)) < 1e-15);
}

TEST_CASE("uniform stacks average to the uniform matrix") {
  AttentionStack stack(2, 2, 3, std::vector<Matrix>(4, uniform_attention(3)));
  CHECK(max_abs_diff(average_attention(stack), uniform_attention(3)) < 1e-15);
}

TEST_CASE("average attention stays row-stochastic") {
  AttentionStack stack = random_stack(3, 2, 5, 23);
  Matrix avg = average_attention(stack);
  for (std::size_t i = 0; i < avg.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < avg.cols(); ++j) sum += avg(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("raw attention importance is exactly 1/N for every token") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    AttentionStack stack = random_stack(2, 2, 6, seed);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(raw_attention_importance(stack, i) ==
            doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    }
  }
  AttentionStack four = random_stack(1, 1, 4, 9);
  CHECK(raw_attention_importance(four, 2) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(raw_attention_importance(four, 4), std::invalid_argument);
}
