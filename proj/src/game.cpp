#include "attnshap/game.hpp"

#include <algorithm>
#include <stdexcept>

namespace attnshap {

Coalition Coalition::of(std::vector<int> m) {
  std::sort(m.begin(), m.end());
  m.erase(std::unique(m.begin(), m.end()), m.end());
  return Coalition{std::move(m)};
}

bool Coalition::contains(int p) const {
  return std::binary_search(members.begin(), members.end(), p);
}

std::string to_string(CharKind kind) {
  switch (kind) {
    case CharKind::GradAttCls: return "grad-att-cls";
    case CharKind::GradAttMutual: return "grad-att-mutual";
    case CharKind::GradAttMaxMutual: return "grad-att-max-mutual";
    case CharKind::AttCls: return "att-cls";
    case CharKind::AttMutual: return "att-mutual";
    case CharKind::AttMaxMutual: return "att-max-mutual";
    case CharKind::InputMasking: return "input-masking";
  }
  return "unknown";
}

CharKind char_kind_from_string(const std::string& name) {
  for (CharKind k : {CharKind::GradAttCls, CharKind::GradAttMutual,
                     CharKind::GradAttMaxMutual, CharKind::AttCls,
                     CharKind::AttMutual, CharKind::AttMaxMutual,
                     CharKind::InputMasking}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown characteristic kind: " + name);
}

CharacteristicSpec CharacteristicSpec::matrix_game(CharKind kind, Matrix payload,
                                                   std::vector<int> players,
                                                   int cls_index) {
  CharacteristicSpec spec;
  spec.kind = kind;
  spec.payload = std::move(payload);
  spec.players = Coalition::of(std::move(players)).members;
  spec.cls_index = cls_index;
  spec.validate();
  return spec;
}

CharacteristicSpec CharacteristicSpec::masking_game(const TransformerModel& model,
                                                    SequenceInput input, int class_k,
                                                    double empty_value) {
  CharacteristicSpec spec;
  spec.kind = CharKind::InputMasking;
  spec.model = &model;
  spec.input = std::move(input);
  spec.class_k = class_k;
  spec.empty_value = empty_value;
  spec.players = spec.input.original_indices();
  spec.validate();
  return spec;
}

void CharacteristicSpec::validate() const {
  if (kind == CharKind::InputMasking) {
    if (model == nullptr) {
      throw std::invalid_argument("CharacteristicSpec: masking game without a model");
    }
    if (class_k < 0 || class_k >= model->config().n_classes) {
      throw std::invalid_argument("CharacteristicSpec: class out of range");
    }
    auto originals = input.original_indices();
    for (int p : players) {
      if (std::find(originals.begin(), originals.end(), p) == originals.end()) {
        throw std::invalid_argument("CharacteristicSpec: player is not an original token");
      }
    }
  } else {
    if (payload.rows() != payload.cols() || payload.empty()) {
      throw std::invalid_argument("CharacteristicSpec: payload must be square");
    }
    payload.check_finite("CharacteristicSpec payload");
    int n = static_cast<int>(payload.rows());
    if (cls_index < 0 || cls_index >= n) {
      throw std::invalid_argument("CharacteristicSpec: cls index out of range");
    }
    for (int p : players) {
      if (p < 0 || p >= n) {
        throw std::invalid_argument("CharacteristicSpec: player index outside matrix");
      }
    }
  }
}

namespace {

bool is_cls_kind(CharKind k) {
  return k == CharKind::GradAttCls || k == CharKind::AttCls;
}
bool is_max_kind(CharKind k) {
  return k == CharKind::GradAttMaxMutual || k == CharKind::AttMaxMutual;
}

double pair_term(const CharacteristicSpec& spec, int i, int j) {
  const Matrix& m = spec.payload;
  double t = is_max_kind(spec.kind)
                 ? std::max(m(i, j), m(j, i))
                 : m(i, j) + m(j, i);
  return spec.ordered_pairs ? 2.0 * t : t;
}

double masking_value(const CharacteristicSpec& spec, const Coalition& s) {
  SequenceInput masked = mask_tokens(spec.input, s.members);
  return spec.model->predict(masked).probs[spec.class_k];
}

void check_members(const CharacteristicSpec& spec, const Coalition& s) {
  for (int p : s.members) {
    if (!std::binary_search(spec.players.begin(), spec.players.end(), p)) {
      throw std::invalid_argument("char_value: coalition member is not a player");
    }
  }
}

}  // namespace

double char_value(const CharacteristicSpec& spec, const Coalition& s) {
  check_members(spec, s);
  if (s.empty()) return spec.empty_value;

  if (spec.kind == CharKind::InputMasking) {
    return masking_value(spec, s);
  }
  if (is_cls_kind(spec.kind)) {
    double sum = 0.0;
    for (int p : s.members) sum += spec.payload(spec.cls_index, p);
    return sum;
  }
  // mutual / max-mutual
  if (s.size() == 1) {
    int i = s.members[0];
    return spec.payload(i, i);
  }
  double sum = 0.0;
  for (std::size_t a = 0; a < s.members.size(); ++a) {
    for (std::size_t b = a + 1; b < s.members.size(); ++b) {
      sum += pair_term(spec, s.members[a], s.members[b]);
    }
  }
  return sum;
}

double marginal_value(const CharacteristicSpec& spec, const Coalition& s, int player) {
  if (s.contains(player)) {
    throw std::invalid_argument("marginal_value: player already in coalition");
  }
  if (spec.kind == CharKind::InputMasking) {
    Coalition with = s;
    with.members.insert(
        std::lower_bound(with.members.begin(), with.members.end(), player), player);
    return char_value(spec, with) - char_value(spec, s);
  }
  check_members(spec, s);
  if (is_cls_kind(spec.kind)) {
    return spec.payload(spec.cls_index, player);
  }
  if (s.empty()) {
    return spec.payload(player, player);
  }
  if (s.size() == 1) {
    int j = s.members[0];
    return pair_term(spec, player, j) - spec.payload(j, j);
  }
  double sum = 0.0;
  for (int j : s.members) sum += pair_term(spec, player, j);
  return sum;
}

}  // namespace attnshap
