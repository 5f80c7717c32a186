#pragma once

#include <string>
#include <vector>

#include "attnshap/matrix.hpp"
#include "attnshap/model.hpp"

namespace attnshap {

/// A coalition of players, kept as a sorted set of token indices.
struct Coalition {
  std::vector<int> members;

  static Coalition of(std::vector<int> m);
  bool contains(int p) const;
  std::size_t size() const { return members.size(); }
  bool empty() const { return members.empty(); }
};

enum class CharKind {
  GradAttCls,
  GradAttMutual,
  GradAttMaxMutual,
  AttCls,
  AttMutual,
  AttMaxMutual,
  InputMasking,
};

std::string to_string(CharKind kind);
CharKind char_kind_from_string(const std::string& name);

/// A cooperative game over the original-token players.
///
/// Matrix-backed kinds read the full token-by-token matrix (contribution
/// matrix for Grad* kinds, layer/head-averaged attention for Att* kinds) and
/// restrict themselves to the player subset. The masking kind evaluates the
/// model's class probability on the coalition-masked input.
///
/// Mutual kinds score each token pair once (sum or max of the two directed
/// entries); set ordered_pairs to count every ordered pair instead, which
/// doubles each pair term.
struct CharacteristicSpec {
  CharKind kind = CharKind::GradAttCls;
  Matrix payload;
  int cls_index = 0;
  std::vector<int> players;
  bool ordered_pairs = false;

  const TransformerModel* model = nullptr;
  SequenceInput input;
  int class_k = 0;
  // Value of the empty coalition. Zero by definition; the SHAP baseline
  // substitutes the model output on the fully masked input.
  double empty_value = 0.0;

  static CharacteristicSpec matrix_game(CharKind kind, Matrix payload,
                                        std::vector<int> players, int cls_index = 0);
  static CharacteristicSpec masking_game(const TransformerModel& model,
                                         SequenceInput input, int class_k,
                                         double empty_value = 0.0);

  void validate() const;
};

double char_value(const CharacteristicSpec& spec, const Coalition& s);

/// v(S ∪ {player}) − v(S) for player ∉ S. O(|S|) for matrix kinds; two model
/// evaluations for the masking kind.
double marginal_value(const CharacteristicSpec& spec, const Coalition& s, int player);

}  // namespace attnshap
