#include "attnshap/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "attnshap/rng.hpp"

namespace attnshap {

namespace {

// Pascal triangle in doubles; n stays small enough for exact values.
std::vector<std::vector<double>> binomials(int n) {
  std::vector<std::vector<double>> c(n + 1);
  for (int i = 0; i <= n; ++i) {
    c[i].assign(i + 1, 1.0);
    for (int j = 1; j < i; ++j) c[i][j] = c[i - 1][j - 1] + c[i - 1][j];
  }
  return c;
}

// Positional weight |S|!(N-1-|S|)!/N! expressed as 1/(N*C(N-1,|S|)).
std::vector<double> positional_weights(int n) {
  auto c = binomials(std::max(1, n - 1));
  std::vector<double> w(n, 0.0);
  for (int s = 0; s < n; ++s) {
    w[s] = 1.0 / (static_cast<double>(n) * c[n - 1][s]);
  }
  return w;
}

Coalition coalition_from_mask(const std::vector<int>& players, std::uint32_t mask) {
  Coalition s;
  for (std::size_t p = 0; p < players.size(); ++p) {
    if (mask & (1u << p)) s.members.push_back(players[p]);
  }
  return s;
}

}  // namespace

std::string to_string(SampleMode mode) {
  switch (mode) {
    case SampleMode::Exact: return "exact";
    case SampleMode::MonteCarlo: return "montecarlo";
    case SampleMode::Kernel: return "kernel";
  }
  return "unknown";
}

SampleMode sample_mode_from_string(const std::string& name) {
  if (name == "exact") return SampleMode::Exact;
  if (name == "montecarlo" || name == "monte-carlo" || name == "mc") {
    return SampleMode::MonteCarlo;
  }
  if (name == "kernel") return SampleMode::Kernel;
  throw std::invalid_argument("unknown sampling mode: " + name);
}

AttributionResult exact_shapley(const CharacteristicSpec& spec, int exact_limit) {
  spec.validate();
  const std::vector<int>& players = spec.players;
  const int n = static_cast<int>(players.size());
  AttributionResult res;
  res.player_indices = players;
  res.class_k = spec.kind == CharKind::InputMasking ? spec.class_k : 0;
  if (n == 0) return res;
  if (n > exact_limit || n > 22) {
    throw std::invalid_argument(
        "exact_shapley: " + std::to_string(n) + " players exceeds the exact limit of " +
        std::to_string(std::min(exact_limit, 22)) + "; use sampled_shapley instead");
  }

  const std::uint32_t full = (1u << n) - 1u;
  std::vector<double> v(static_cast<std::size_t>(full) + 1, 0.0);
  v[0] = spec.empty_value;
  if (spec.kind == CharKind::InputMasking) {
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
      v[mask] = char_value(spec, coalition_from_mask(players, mask));
    }
  } else {
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
      int low = std::countr_zero(mask);
      std::uint32_t rest = mask & (mask - 1u);
      v[mask] = v[rest] + marginal_value(spec, coalition_from_mask(players, rest),
                                         players[low]);
    }
  }

  std::vector<double> w = positional_weights(n);
  res.scores.assign(n, 0.0);
  for (int p = 0; p < n; ++p) {
    const std::uint32_t bit = 1u << p;
    double phi = 0.0;
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
      if (mask & bit) continue;
      phi += w[std::popcount(mask)] * (v[mask | bit] - v[mask]);
    }
    res.scores[p] = phi;
  }
  return res;
}

AttributionResult closed_form_cls(const Matrix& payload,
                                  const std::vector<int>& players, int cls_index) {
  if (cls_index < 0 || static_cast<std::size_t>(cls_index) >= payload.rows()) {
    throw std::invalid_argument("closed_form_cls: cls index out of range");
  }
  AttributionResult res;
  res.player_indices = Coalition::of(players).members;
  res.scores.reserve(res.player_indices.size());
  for (int p : res.player_indices) {
    res.scores.push_back(payload(cls_index, p));
  }
  return res;
}

AttributionResult closed_form_mutual(const Matrix& payload,
                                     const std::vector<int>& players) {
  AttributionResult res;
  res.player_indices = Coalition::of(players).members;
  const int n = static_cast<int>(res.player_indices.size());
  if (n < 1) {
    throw std::invalid_argument("closed_form_mutual: needs at least one player");
  }
  auto c = binomials(n);
  // Coalitions of size >= 2 contribute the pair sum with a shared weight.
  double big_weight = 0.0;
  for (int z = 2; z <= n - 1; ++z) {
    // z!(n-z-1)!/n! == 1/(n*C(n-1,z))
    big_weight += c[n - 2][z - 1] / (static_cast<double>(n) * c[n - 1][z]);
  }
  const double singleton_weight = 1.0 / (static_cast<double>(n) * std::max(1, n - 1));

  res.scores.assign(n, 0.0);
  for (int a = 0; a < n; ++a) {
    int i = res.player_indices[a];
    double phi = payload(i, i) / static_cast<double>(n);
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      int j = res.player_indices[b];
      double pair = payload(i, j) + payload(j, i);
      phi += singleton_weight * (pair - payload(j, j));
      phi += pair * big_weight;
    }
    res.scores[a] = phi;
  }
  return res;
}

double kernel_weight(int n_players, int coalition_size) {
  if (n_players < 1 || coalition_size < 0 || coalition_size > n_players) {
    throw std::invalid_argument("kernel_weight: size out of range");
  }
  if (coalition_size == 0 || coalition_size == n_players) {
    return std::numeric_limits<double>::infinity();
  }
  auto c = binomials(n_players);
  return (n_players - 1.0) /
         (c[n_players][coalition_size] * coalition_size * (n_players - coalition_size));
}

std::vector<Coalition> sample_coalitions(const SamplingScheme& scheme,
                                         const std::vector<int>& players) {
  if (scheme.mode == SampleMode::Exact) {
    throw std::invalid_argument("sample_coalitions: scheme is not a sampled mode");
  }
  if (scheme.n_samples < 1) {
    throw std::invalid_argument("sample_coalitions: n_samples must be positive");
  }
  const int n = static_cast<int>(players.size());
  if (n == 0) return {};

  // Kernel mode size distribution over 1..n-1.
  std::vector<double> size_cdf;
  if (scheme.mode == SampleMode::Kernel && n >= 2) {
    size_cdf.assign(n - 1, 0.0);
    double total = 0.0;
    for (int s = 1; s <= n - 1; ++s) {
      total += kernel_weight(n, s);
      size_cdf[s - 1] = total;
    }
    for (double& v : size_cdf) v /= total;
  }

  auto draw_members = [&](Rng& rng, int size) -> std::vector<int> {
    std::vector<int> picked;
    std::vector<int> pool = players;
    for (int t = 0; t < size; ++t) {
      std::size_t j = t + rng.next_below(pool.size() - t);
      std::swap(pool[t], pool[j]);
      picked.push_back(pool[t]);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
  };

  auto draw = [&](Rng& rng) -> std::vector<int> {
    int size;
    if (scheme.mode == SampleMode::MonteCarlo) {
      // Uniform over coalition sizes, then uniform members within the size.
      // The estimator weights every size equally, so covering all size
      // strata evenly is what drives its error down; drawing coalitions
      // uniformly instead leaves the singleton strata (empty and
      // all-but-one) unseen often enough to dominate the error.
      size = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    } else {
      if (size_cdf.empty()) return {};  // single player: only forced coalitions
      double u = rng.next_double();
      size = 1 + static_cast<int>(std::lower_bound(size_cdf.begin(), size_cdf.end(), u) -
                                  size_cdf.begin());
      size = std::min(size, n - 1);
    }
    return draw_members(rng, size);
  };

  std::vector<Coalition> samples;
  std::set<std::vector<int>> seen;
  const std::uint64_t tag = fnv1a64(to_string(scheme.mode));
  bool enumerated = false;
  if (scheme.dedup && n <= 22 &&
      static_cast<double>(scheme.n_samples) >= std::ldexp(1.0, n)) {
    // Requesting at least one sample per coalition: enumerate them all.
    const std::uint32_t full = (1u << n) - 1u;
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
      samples.push_back(coalition_from_mask(players, mask));
    }
    enumerated = true;
  } else {
    std::uint64_t attempts = 0;
    const std::uint64_t max_attempts =
        64ull * static_cast<std::uint64_t>(scheme.n_samples) + 64ull;
    std::uint64_t idx = 0;
    while (static_cast<int>(samples.size()) < scheme.n_samples) {
      Rng rng = derive_stream(scheme.seed, tag, idx++);
      std::vector<int> picked = draw(rng);
      if (scheme.dedup) {
        if (++attempts > max_attempts) break;
        if (!seen.insert(picked).second) continue;
      }
      samples.push_back(Coalition{std::move(picked)});
    }
  }
  if (scheme.mode == SampleMode::Kernel && !enumerated) {
    if (!scheme.dedup || !seen.count({})) {
      samples.push_back(Coalition{});  // empty coalition
    }
    if (!scheme.dedup || !seen.count(players)) {
      samples.push_back(Coalition{players});  // grand coalition
    }
  }
  return samples;
}

AttributionResult sampled_shapley(const CharacteristicSpec& spec,
                                  const SamplingScheme& scheme) {
  if (scheme.mode == SampleMode::Exact) {
    return exact_shapley(spec);
  }
  spec.validate();
  const std::vector<int>& players = spec.players;
  const int n = static_cast<int>(players.size());
  AttributionResult res;
  res.player_indices = players;
  res.seed = scheme.seed;
  res.n_samples = scheme.n_samples;
  res.class_k = spec.kind == CharKind::InputMasking ? spec.class_k : 0;
  if (n == 0) return res;

  std::vector<Coalition> samples = sample_coalitions(scheme, players);

  // Cache v(S) once per sample; the masking game pays one model evaluation
  // per cached value and one per usable (sample, player) pair.
  const bool masking = spec.kind == CharKind::InputMasking;
  std::vector<double> sample_value;
  if (masking) {
    sample_value.reserve(samples.size());
    for (const Coalition& s : samples) sample_value.push_back(char_value(spec, s));
  }

  // Every coalition size carries the same total positional mass under the
  // factorial weights (C(n-1,s) coalitions of weight 1/(n*C(n-1,s)) each), so
  // the renormalized estimate is the mean of per-size mean marginals over the
  // sizes actually sampled. Stratifying by size this way keeps the estimate
  // exact for constant-marginal games and reduces to full enumeration when
  // every coalition has been drawn.
  res.scores.assign(n, 0.0);
  std::vector<double> size_sum(n, 0.0);
  std::vector<std::int64_t> size_count(n, 0);
  for (int p = 0; p < n; ++p) {
    int player = players[p];
    std::fill(size_sum.begin(), size_sum.end(), 0.0);
    std::fill(size_count.begin(), size_count.end(), 0);
    for (std::size_t si = 0; si < samples.size(); ++si) {
      const Coalition& s = samples[si];
      if (s.contains(player)) continue;
      double marginal;
      if (masking) {
        Coalition with = s;
        with.members.insert(
            std::lower_bound(with.members.begin(), with.members.end(), player), player);
        marginal = char_value(spec, with) - sample_value[si];
      } else {
        marginal = marginal_value(spec, s, player);
      }
      size_sum[s.size()] += marginal;
      size_count[s.size()] += 1;
    }
    double acc = 0.0;
    int present = 0;
    for (int s = 0; s < n; ++s) {
      if (size_count[s] > 0) {
        acc += size_sum[s] / static_cast<double>(size_count[s]);
        ++present;
      }
    }
    res.scores[p] = present > 0 ? acc / static_cast<double>(present) : 0.0;
  }
  return res;
}

AttributionResult grad_sam_scores(const Matrix& contribution,
                                  const std::vector<int>& players) {
  if (contribution.rows() != contribution.cols() || contribution.empty()) {
    throw std::invalid_argument("grad_sam_scores: square matrix required");
  }
  AttributionResult res;
  res.player_indices = Coalition::of(players).members;
  const double inv_rows = 1.0 / static_cast<double>(contribution.rows());
  for (int p : res.player_indices) {
    double col = 0.0;
    for (std::size_t i = 0; i < contribution.rows(); ++i) col += contribution(i, p);
    res.scores.push_back(col * inv_rows);
  }
  return res;
}

}  // namespace attnshap
