#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "attnshap/rng.hpp"
#include "attnshap/shapley.hpp"

using namespace attnshap;

namespace {

Matrix random_nonneg(std::size_t n, Rng& rng) {
  Matrix m(n, n);
  for (double& v : m.data()) v = rng.next_double();
  return m;
}

std::vector<int> first_players(int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

double grand_value(const CharacteristicSpec& spec) {
  return char_value(spec, Coalition{spec.players});
}

}  // namespace

TEST_CASE("hand-enumerated mutual game") {
  Matrix m{{1.0, 2.0}, {3.0, 4.0}};
  auto spec = CharacteristicSpec::matrix_game(CharKind::GradAttMutual, m, {0, 1});
  AttributionResult res = exact_shapley(spec);
  CHECK(res.scores[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.scores[1] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(res.scores[0] + res.scores[1] == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("symmetric games give equal shares") {
  // uniform matrix: v depends only on coalition size
  Matrix m(5, 5, 0.3);
  for (CharKind kind : {CharKind::GradAttCls, CharKind::GradAttMutual,
                        CharKind::GradAttMaxMutual}) {
    auto spec = CharacteristicSpec::matrix_game(kind, m, first_players(5));
    AttributionResult res = exact_shapley(spec);
    for (double s : res.scores) {
      CHECK(s == doctest::Approx(res.scores[0]).epsilon(1e-12));
    }
  }
}

TEST_CASE("a player with all-zero marginals gets zero") {
  Rng rng(31);
  Matrix m = random_nonneg(5, rng);
  for (std::size_t i = 0; i < 5; ++i) m(i, i) = 0.0;  // mutual singletons off
  for (std::size_t j = 0; j < 5; ++j) {
    m(2, j) = 0.0;
    m(j, 2) = 0.0;
  }
  for (CharKind kind : {CharKind::GradAttCls, CharKind::GradAttMutual,
                        CharKind::GradAttMaxMutual}) {
    // the cls game reads row 0, so player 2 is null there via m(0,2)=0 only
    // when the whole column is zeroed, which it is
    auto spec = CharacteristicSpec::matrix_game(kind, m, {1, 2, 3, 4});
    AttributionResult res = exact_shapley(spec);
    CHECK(std::fabs(res.scores[1]) < 1e-12);  // player 2 sits at slot 1
  }
}

TEST_CASE("efficiency holds for every kind on random instances") {
  Rng rng(47);
  for (int n = 1; n <= 8; ++n) {
    Matrix m = random_nonneg(n, rng);
    for (CharKind kind : {CharKind::GradAttCls, CharKind::GradAttMutual,
                          CharKind::GradAttMaxMutual}) {
      auto spec = CharacteristicSpec::matrix_game(kind, m, first_players(n));
      AttributionResult res = exact_shapley(spec);
      double total = std::accumulate(res.scores.begin(), res.scores.end(), 0.0);
      CHECK(total == doctest::Approx(grand_value(spec)).epsilon(1e-9));
    }
  }
}

TEST_CASE("exact enumeration refuses oversized player sets") {
  Matrix m(25, 25, 0.1);
  auto spec = CharacteristicSpec::matrix_game(CharKind::AttCls, m, first_players(25));
  CHECK_THROWS_WITH_AS(exact_shapley(spec),
                       doctest::Contains("use sampled_shapley"),
                       std::invalid_argument);
}

TEST_CASE("closed-form cls equals the cls row") {
  Matrix m{{0.0, 0.2, 0.5, 0.3}, {0.1, 0.1, 0.4, 0.4}, {0.3, 0.3, 0.2, 0.2},
           {0.25, 0.25, 0.25, 0.25}};
  AttributionResult res = closed_form_cls(m, {1, 2, 3}, 0);
  CHECK(res.scores[0] == doctest::Approx(0.2));
  CHECK(res.scores[1] == doctest::Approx(0.5));
  CHECK(res.scores[2] == doctest::Approx(0.3));

  Matrix zero(3, 3, 0.0);
  AttributionResult z = closed_form_cls(zero, {1, 2}, 0);
  CHECK(z.scores[0] == 0.0);
  CHECK(z.scores[1] == 0.0);
}

TEST_CASE("closed-form cls matches enumeration") {
  Rng rng(53);
  for (int n = 1; n <= 10; ++n) {
    Matrix m = random_nonneg(n + 1, rng);
    std::vector<int> players;
    for (int p = 1; p <= n; ++p) players.push_back(p);
    auto spec = CharacteristicSpec::matrix_game(CharKind::GradAttCls, m, players, 0);
    AttributionResult exact = exact_shapley(spec);
    AttributionResult closed = closed_form_cls(m, players, 0);
    for (int i = 0; i < n; ++i) {
      CHECK(closed.scores[i] == doctest::Approx(exact.scores[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("closed-form mutual: single player returns its diagonal") {
  Matrix m{{0.7}};
  AttributionResult res = closed_form_mutual(m, {0});
  CHECK(res.scores[0] == doctest::Approx(0.7));
}

TEST_CASE("closed-form mutual hand value") {
  Matrix m{{1.0, 2.0}, {3.0, 4.0}};
  AttributionResult res = closed_form_mutual(m, {0, 1});
  CHECK(res.scores[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.scores[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("closed-form mutual matches enumeration on random matrices") {
  Rng rng(61);
  for (int n = 2; n <= 12; ++n) {
    for (int rep = 0; rep < 8; ++rep) {
      Matrix m = random_nonneg(n, rng);
      auto spec =
          CharacteristicSpec::matrix_game(CharKind::GradAttMutual, m, first_players(n));
      AttributionResult exact = exact_shapley(spec);
      AttributionResult closed = closed_form_mutual(m, first_players(n));
      for (int i = 0; i < n; ++i) {
        CHECK(std::fabs(closed.scores[i] - exact.scores[i]) < 1e-9);
      }
    }
  }
}

TEST_CASE("kernel weight spot values and symmetry") {
  CHECK(kernel_weight(4, 2) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(std::isinf(kernel_weight(4, 0)));
  CHECK(std::isinf(kernel_weight(4, 4)));
  for (int n = 2; n <= 16; ++n) {
    for (int s = 1; s < n; ++s) {
      CHECK(kernel_weight(n, s) == doctest::Approx(kernel_weight(n, n - s)).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(kernel_weight(4, 5), std::invalid_argument);
  CHECK_THROWS_AS(kernel_weight(4, -1), std::invalid_argument);
}

TEST_CASE("kernel sampler always includes the empty and grand coalitions") {
  SamplingScheme scheme;
  scheme.mode = SampleMode::Kernel;
  scheme.n_samples = 3;
  for (std::uint64_t seed : {0ull, 1ull, 2ull, 99ull}) {
    scheme.seed = seed;
    auto players = first_players(7);
    auto samples = sample_coalitions(scheme, players);
    bool has_empty = false, has_grand = false;
    for (const Coalition& s : samples) {
      if (s.empty()) has_empty = true;
      if (s.members == players) has_grand = true;
    }
    CHECK(has_empty);
    CHECK(has_grand);
  }
}

TEST_CASE("dedup exhaustion reduces sampling to enumeration") {
  Rng rng(71);
  Matrix m = random_nonneg(6, rng);
  auto spec =
      CharacteristicSpec::matrix_game(CharKind::GradAttMaxMutual, m, first_players(6));
  AttributionResult exact = exact_shapley(spec);
  SamplingScheme scheme;
  scheme.mode = SampleMode::MonteCarlo;
  scheme.n_samples = 1 << 6;
  scheme.dedup = true;
  scheme.seed = 3;
  AttributionResult sampled = sampled_shapley(spec, scheme);
  for (int i = 0; i < 6; ++i) {
    CHECK(std::fabs(sampled.scores[i] - exact.scores[i]) < 1e-9);
  }
}

TEST_CASE("identical seeds give identical estimates") {
  Rng rng(73);
  Matrix m = random_nonneg(8, rng);
  auto spec =
      CharacteristicSpec::matrix_game(CharKind::GradAttMaxMutual, m, first_players(8));
  for (SampleMode mode : {SampleMode::MonteCarlo, SampleMode::Kernel}) {
    SamplingScheme scheme;
    scheme.mode = mode;
    scheme.n_samples = 50;
    scheme.seed = 12345;
    AttributionResult a = sampled_shapley(spec, scheme);
    AttributionResult b = sampled_shapley(spec, scheme);
    CHECK(a.scores == b.scores);
  }
}

TEST_CASE("constant-marginal games are estimated exactly from any sample") {
  // cls-kind games have constant marginals, so the renormalized estimator
  // reproduces the exact value seed by seed.
  Rng rng(79);
  Matrix m = random_nonneg(7, rng);
  auto players = first_players(6);
  for (int& p : players) p += 1;
  auto spec = CharacteristicSpec::matrix_game(CharKind::GradAttCls, m, players, 0);
  AttributionResult exact = exact_shapley(spec);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SamplingScheme scheme;
    scheme.mode = SampleMode::MonteCarlo;
    scheme.n_samples = 16;
    scheme.seed = seed;
    AttributionResult est = sampled_shapley(spec, scheme);
    for (std::size_t i = 0; i < est.scores.size(); ++i) {
      CHECK(est.scores[i] == doctest::Approx(exact.scores[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("monte carlo estimates are close to exact for the max-mutual game") {
  Rng rng(83);
  Matrix m = random_nonneg(10, rng);
  auto spec =
      CharacteristicSpec::matrix_game(CharKind::GradAttMaxMutual, m, first_players(10));
  AttributionResult exact = exact_shapley(spec);
  double range = *std::max_element(exact.scores.begin(), exact.scores.end()) -
                 *std::min_element(exact.scores.begin(), exact.scores.end());
  SamplingScheme scheme;
  scheme.mode = SampleMode::MonteCarlo;
  scheme.n_samples = 4000;
  scheme.seed = 5;
  AttributionResult est = sampled_shapley(spec, scheme);
  for (int i = 0; i < 10; ++i) {
    CHECK(std::fabs(est.scores[i] - exact.scores[i]) < 0.05 * range);
  }
}

TEST_CASE("positive scaling of the payload scales every share") {
  Rng rng(89);
  Matrix m = random_nonneg(6, rng);
  const double c = 3.25;
  for (CharKind kind : {CharKind::GradAttCls, CharKind::GradAttMutual,
                        CharKind::GradAttMaxMutual}) {
    auto spec = CharacteristicSpec::matrix_game(kind, m, first_players(6));
    auto scaled_spec =
        CharacteristicSpec::matrix_game(kind, scaled(m, c), first_players(6));
    AttributionResult base = exact_shapley(spec);
    AttributionResult big = exact_shapley(scaled_spec);
    for (int i = 0; i < 6; ++i) {
      CHECK(big.scores[i] == doctest::Approx(c * base.scores[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("grad-sam scores are column means") {
  Matrix zero(3, 3, 0.0);
  AttributionResult z = grad_sam_scores(zero, {0, 1, 2});
  for (double s : z.scores) CHECK(s == 0.0);

  Matrix single(3, 3, 0.0);
  single(0, 1) = 0.9;
  single(2, 1) = 0.3;
  AttributionResult one = grad_sam_scores(single, {0, 1, 2});
  CHECK(one.scores[0] == 0.0);
  CHECK(one.scores[1] == doctest::Approx(0.4));
  CHECK(one.scores[2] == 0.0);

  Matrix m{{1.0, 0.0}, {2.0, 4.0}};
  AttributionResult res = grad_sam_scores(m, {0, 1});
  CHECK(res.scores[0] == doctest::Approx(1.5));
  CHECK(res.scores[1] == doctest::Approx(2.0));
}

TEST_CASE("sampled mode rejects zero samples") {
  Matrix m(3, 3, 0.1);
  auto spec = CharacteristicSpec::matrix_game(CharKind::AttCls, m, {0, 1, 2});
  SamplingScheme scheme;
  scheme.mode = SampleMode::MonteCarlo;
  scheme.n_samples = 0;
  CHECK_THROWS_AS(sampled_shapley(spec, scheme), std::invalid_argument);
}
