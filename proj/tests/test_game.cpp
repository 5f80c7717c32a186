#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "attnshap/game.hpp"
#include "attnshap/rng.hpp"

using namespace attnshap;

namespace {

const Matrix kM{{1.0, 2.0}, {3.0, 4.0}};

CharacteristicSpec mutual_spec() {
  return CharacteristicSpec::matrix_game(CharKind::GradAttMutual, kM, {0, 1});
}

}  // namespace

TEST_CASE("every kind values the empty coalition at zero") {
  for (CharKind kind : {CharKind::GradAttCls, CharKind::GradAttMutual,
                        CharKind::GradAttMaxMutual, CharKind::AttCls,
                        CharKind::AttMutual, CharKind::AttMaxMutual}) {
    auto spec = CharacteristicSpec::matrix_game(kind, kM, {0, 1});
    CHECK(char_value(spec, Coalition{}) == 0.0);
  }
  TransformerModel model(ModelConfig{});
  auto spec = CharacteristicSpec::masking_game(model, make_sequence({0, 2, 3}), 0);
  CHECK(char_value(spec, Coalition{}) == 0.0);
}

TEST_CASE("mutual game hand values") {
  auto spec = mutual_spec();
  CHECK(char_value(spec, Coalition::of({0})) == doctest::Approx(1.0));
  CHECK(char_value(spec, Coalition::of({1})) == doctest::Approx(4.0));
  CHECK(char_value(spec, Coalition::of({0, 1})) == doctest::Approx(5.0));
}

TEST_CASE("max-mutual game scores each pair once, ordered mode doubles it") {
  auto spec = CharacteristicSpec::matrix_game(CharKind::GradAttMaxMutual, kM, {0, 1});
  CHECK(char_value(spec, Coalition::of({0, 1})) == doctest::Approx(3.0));
  spec.ordered_pairs = true;
  CHECK(char_value(spec, Coalition::of({0, 1})) == doctest::Approx(6.0));
}

TEST_CASE("cls game sums the cls row over the coalition") {
  Matrix m{{0.0, 0.2, 0.5, 0.3}, {0.1, 0.3, 0.3, 0.3}, {0.25, 0.25, 0.25, 0.25},
           {0.4, 0.2, 0.2, 0.2}};
  auto spec = CharacteristicSpec::matrix_game(CharKind::AttCls, m, {1, 2, 3}, 0);
  CHECK(char_value(spec, Coalition::of({1})) == doctest::Approx(0.2));
  CHECK(char_value(spec, Coalition::of({1, 3})) == doctest::Approx(0.5));
  CHECK(char_value(spec, Coalition::of({1, 2, 3})) == doctest::Approx(1.0));
}

TEST_CASE("coalitions must stay inside the player set") {
  auto spec = mutual_spec();
  CHECK_THROWS_AS(char_value(spec, Coalition::of({2})), std::invalid_argument);
}

TEST_CASE("payload and kind must agree") {
  CharacteristicSpec bad;
  bad.kind = CharKind::InputMasking;  // no model attached
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(
      CharacteristicSpec::matrix_game(CharKind::AttCls, Matrix(2, 3, 0.0), {0}),
      std::invalid_argument);
}

TEST_CASE("marginal matches the value difference on random coalitions") {
  Rng rng(99);
  Matrix m(6, 6);
  for (double& v : m.data()) v = rng.next_double();
  for (CharKind kind :
       {CharKind::GradAttCls, CharKind::GradAttMutual, CharKind::GradAttMaxMutual}) {
    auto spec = CharacteristicSpec::matrix_game(kind, m, {1, 2, 3, 4, 5}, 0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<int> members;
      for (int p = 1; p <= 5; ++p) {
        if (rng.next_bool()) members.push_back(p);
      }
      Coalition s = Coalition::of(members);
      for (int p = 1; p <= 5; ++p) {
        if (s.contains(p)) continue;
        Coalition with = Coalition::of(members);
        with.members.push_back(p);
        with = Coalition::of(with.members);
        double direct = char_value(spec, with) - char_value(spec, s);
        CHECK(marginal_value(spec, s, p) == doctest::Approx(direct).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("masking game evaluates the model on the kept subset") {
  ModelConfig cfg;
  cfg.vocab_size = 12;
  cfg.seed = 5;
  TransformerModel model(cfg);
  SequenceInput x = make_sequence({0, 3, 4, 5}, 1);
  auto spec = CharacteristicSpec::masking_game(model, x, 1);

  double grand = char_value(spec, Coalition::of({1, 2, 3}));
  CHECK(grand == doctest::Approx(model.predict(x).probs[1]));

  SequenceInput masked = x;
  masked.token_ids[2] = 1;
  masked.token_ids[3] = 1;
  CHECK(char_value(spec, Coalition::of({1})) ==
        doctest::Approx(model.predict(masked).probs[1]));

  // marginal agrees with the explicit difference
  double direct = char_value(spec, Coalition::of({1, 2})) -
                  char_value(spec, Coalition::of({2}));
  CHECK(marginal_value(spec, Coalition::of({2}), 1) == doctest::Approx(direct));
}

TEST_CASE("masking game with a baseline empty value") {
  ModelConfig cfg;
  cfg.seed = 6;
  TransformerModel model(cfg);
  SequenceInput x = make_sequence({0, 2, 3}, 1);
  double base = model.predict(mask_tokens(x, {})).probs[0];
  auto spec = CharacteristicSpec::masking_game(model, x, 0, base);
  CHECK(char_value(spec, Coalition{}) == doctest::Approx(base));
  // a masked-token player has zero marginal against the baseline
  SequenceInput with_masked = x;
  with_masked.token_ids[1] = 1;
  auto spec2 = CharacteristicSpec::masking_game(model, with_masked, 0, base);
  CHECK(marginal_value(spec2, Coalition{}, 1) == doctest::Approx(0.0).epsilon(1e-12));
}
