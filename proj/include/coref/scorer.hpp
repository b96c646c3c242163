#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "coref/common.hpp"
#include "coref/conllu.hpp"

// Coreference metrics between a key (gold) and a response (system)
// clustering: link-based MUC, mention-based B-cubed, entity-based CEAF with
// the phi4 similarity, their F1 mean (the CoNLL score), and a simplified
// zero-anaphor score. Mentions are matched by exact document position;
// mentions present on one side only behave as singletons absent from the
// other. All metrics are invariant under entity relabeling.

namespace coref {

struct ScoredMention {
  MentionPos pos;
  MentionKind kind = MentionKind::overt;
};

struct Clustering {
  std::vector<std::vector<ScoredMention>> entities;  // disjoint; singletons allowed
};

inline Clustering clustering_from_document(const Document& doc, Diagnostics* diags = nullptr) {
  Clustering c;
  std::map<std::string, size_t> index;
  for (const auto& m : extract_mentions(doc, diags)) {
    auto it = index.try_emplace(m.entity_id, c.entities.size()).first;
    if (it->second == c.entities.size()) c.entities.emplace_back();
    c.entities[it->second].push_back({m.pos, m.kind});
  }
  return c;
}

struct PRF {
  double p = 0, r = 0, f1 = 0;
};

// Numerators and denominators, kept separate so corpus-level scores can be
// micro-averaged by summing counts over documents.
struct PairCounts {
  double rec_num = 0, rec_den = 0, prec_num = 0, prec_den = 0;

  void accumulate(const PairCounts& other) {
    rec_num += other.rec_num;
    rec_den += other.rec_den;
    prec_num += other.prec_num;
    prec_den += other.prec_den;
  }
};

inline PRF to_prf(const PairCounts& c) {
  PRF out;
  out.r = c.rec_den > 0 ? c.rec_num / c.rec_den : 0.0;
  out.p = c.prec_den > 0 ? c.prec_num / c.prec_den : 0.0;
  out.f1 = (out.p + out.r) > 0 ? 2 * out.p * out.r / (out.p + out.r) : 0.0;
  return out;
}

namespace detail {

// position -> entity index, per side
inline std::map<MentionPos, size_t> entity_index(const Clustering& c) {
  std::map<MentionPos, size_t> index;
  for (size_t e = 0; e < c.entities.size(); ++e)
    for (const auto& m : c.entities[e])
      if (!index.emplace(m.pos, e).second)
        throw Error(cat("clustering entities are not disjoint at ", m.pos.str()));
  return index;
}

// MUC recall side: sum over key entities of |K| - |partition of K by the
// response|, unmatched mentions counting as their own parts.
inline void muc_one_side(const Clustering& key, const std::map<MentionPos, size_t>& response_of,
                         double* num, double* den) {
  for (const auto& entity : key.entities) {
    std::set<size_t> parts;
    size_t unmatched = 0;
    for (const auto& m : entity) {
      auto it = response_of.find(m.pos);
      if (it == response_of.end())
        ++unmatched;
      else
        parts.insert(it->second);
    }
    *num += static_cast<double>(entity.size() - (parts.size() + unmatched));
    *den += static_cast<double>(entity.size() - 1);
  }
}

// B-cubed recall side: mean over key mentions of |K(m) and R(m)| / |K(m)|,
// zero for mentions absent from the response.
inline void b_cubed_one_side(const Clustering& key,
                             const std::map<MentionPos, size_t>& response_of, double* num,
                             double* den) {
  for (const auto& entity : key.entities) {
    for (const auto& m : entity) {
      auto it = response_of.find(m.pos);
      if (it != response_of.end()) {
        size_t inter = 0;
        for (const auto& q : entity) {
          auto qit = response_of.find(q.pos);
          if (qit != response_of.end() && qit->second == it->second) ++inter;
        }
        *num += static_cast<double>(inter) / static_cast<double>(entity.size());
      }
      *den += 1.0;
    }
  }
}

}  // namespace detail

inline PairCounts muc_counts(const Clustering& key, const Clustering& response) {
  auto key_of = detail::entity_index(key);
  auto response_of = detail::entity_index(response);
  PairCounts c;
  detail::muc_one_side(key, response_of, &c.rec_num, &c.rec_den);
  detail::muc_one_side(response, key_of, &c.prec_num, &c.prec_den);
  return c;
}

inline PairCounts b_cubed_counts(const Clustering& key, const Clustering& response) {
  auto key_of = detail::entity_index(key);
  auto response_of = detail::entity_index(response);
  PairCounts c;
  detail::b_cubed_one_side(key, response_of, &c.rec_num, &c.rec_den);
  detail::b_cubed_one_side(response, key_of, &c.prec_num, &c.prec_den);
  return c;
}

// ---------------------------------------------------------------------------
// CEAF_e

// Maximum-weight one-to-one assignment (Hungarian method with potentials,
// O(n^3)). Returns for each row the assigned column or -1. Weights >= 0;
// unassigned pairs contribute nothing.
inline std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights) {
  size_t rows = weights.size();
  size_t cols = rows ? weights[0].size() : 0;
  if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);

  bool transposed = rows > cols;
  size_t n = transposed ? cols : rows;  // n <= m
  size_t m = transposed ? rows : cols;
  auto cost = [&](size_t i, size_t j) {  // minimize negated weight
    return transposed ? -weights[j][i] : -weights[i][j];
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(m + 1, 0);
  std::vector<size_t> match(m + 1, 0);  // column -> row (1-based; 0 = free)
  std::vector<size_t> way(m + 1, 0);

  for (size_t i = 1; i <= n; ++i) {
    match[0] = i;
    size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      size_t i0 = match[j0], j1 = 0;
      double delta = inf;
      for (size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(rows, -1);
  for (size_t j = 1; j <= m; ++j) {
    if (match[j] == 0) continue;
    size_t i = match[j] - 1;
    if (transposed)
      row_to_col[j - 1] = static_cast<int>(i);
    else
      row_to_col[i] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

// phi4(K, R) = 2|K and R| / (|K| + |R|) over exact-position mention overlap.
inline double phi4(const std::vector<ScoredMention>& k, const std::vector<ScoredMention>& r) {
  std::set<MentionPos> kp;
  for (const auto& m : k) kp.insert(m.pos);
  size_t inter = 0;
  for (const auto& m : r) inter += kp.count(m.pos);
  return 2.0 * static_cast<double>(inter) / static_cast<double>(k.size() + r.size());
}

inline PairCounts ceaf_e_counts(const Clustering& key, const Clustering& response) {
  PairCounts c;
  c.rec_den = static_cast<double>(key.entities.size());
  c.prec_den = static_cast<double>(response.entities.size());
  if (key.entities.empty() || response.entities.empty()) return c;

  std::vector<std::vector<double>> sim(key.entities.size(),
                                       std::vector<double>(response.entities.size(), 0.0));
  for (size_t i = 0; i < key.entities.size(); ++i)
    for (size_t j = 0; j < response.entities.size(); ++j)
      sim[i][j] = phi4(key.entities[i], response.entities[j]);

  std::vector<int> assignment = max_weight_assignment(sim);
  double total = 0;
  for (size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] >= 0) total += sim[i][static_cast<size_t>(assignment[i])];
  c.rec_num = total;
  c.prec_num = total;
  return c;
}

// ---------------------------------------------------------------------------
// Zero-anaphor score (simplified)
//
// A response zero is correct iff the key has a zero at the same position and
// the two entities share at least one preceding mention at a common
// position. This is a stand-in for the CRAC 2022 anaphor-decomposable score
// and must be reported as `zero (simplified)`.

inline PairCounts zero_anaphor_counts(const Clustering& key, const Clustering& response) {
  auto key_of = detail::entity_index(key);
  auto response_of = detail::entity_index(response);

  auto zeros_of = [](const Clustering& c) {
    std::vector<ScoredMention> zeros;
    for (const auto& entity : c.entities)
      for (const auto& m : entity)
        if (m.kind == MentionKind::zero) zeros.push_back(m);
    return zeros;
  };
  std::vector<ScoredMention> key_zeros = zeros_of(key);
  std::vector<ScoredMention> resp_zeros = zeros_of(response);
  std::set<MentionPos> key_zero_pos;
  for (const auto& z : key_zeros) key_zero_pos.insert(z.pos);

  double correct = 0;
  for (const auto& z : resp_zeros) {
    if (!key_zero_pos.count(z.pos)) continue;
    const auto& resp_entity = response.entities[response_of.at(z.pos)];
    const auto& key_entity = key.entities[key_of.at(z.pos)];
    std::set<MentionPos> key_positions;
    for (const auto& m : key_entity) key_positions.insert(m.pos);
    bool shared_antecedent = false;
    for (const auto& m : resp_entity) {
      if (m.pos < z.pos && key_positions.count(m.pos)) {
        shared_antecedent = true;
        break;
      }
    }
    if (shared_antecedent) correct += 1;
  }

  PairCounts c;
  c.rec_num = correct;
  c.rec_den = static_cast<double>(key_zeros.size());
  c.prec_num = correct;
  c.prec_den = static_cast<double>(resp_zeros.size());
  return c;
}

// ---------------------------------------------------------------------------
// Reports

struct AlignmentCounts {
  long matched = 0, missing = 0, spurious = 0;

  void accumulate(const AlignmentCounts& o) {
    matched += o.matched;
    missing += o.missing;
    spurious += o.spurious;
  }
};

inline AlignmentCounts align_mentions(const Clustering& key, const Clustering& response) {
  std::set<MentionPos> kp, rp;
  for (const auto& e : key.entities)
    for (const auto& m : e) kp.insert(m.pos);
  for (const auto& e : response.entities)
    for (const auto& m : e) rp.insert(m.pos);
  AlignmentCounts c;
  for (const auto& p : kp) (rp.count(p) ? c.matched : c.missing)++;
  for (const auto& p : rp)
    if (!kp.count(p)) ++c.spurious;
  return c;
}

struct ScoreReport {
  PRF muc, b3, ceaf_e, zero;
  double conll = 0;
  bool zero_applicable = false;
  AlignmentCounts counts;
  // raw counts for micro-aggregation
  PairCounts muc_c, b3_c, ceaf_c, zero_c;

  void finish() {
    muc = to_prf(muc_c);
    b3 = to_prf(b3_c);
    ceaf_e = to_prf(ceaf_c);
    zero = to_prf(zero_c);
    conll = (muc.f1 + b3.f1 + ceaf_e.f1) / 3.0;
    zero_applicable = zero_c.rec_den > 0 || zero_c.prec_den > 0;
  }
};

inline ScoreReport score_clusterings(const Clustering& key, const Clustering& response) {
  ScoreReport r;
  r.muc_c = muc_counts(key, response);
  r.b3_c = b_cubed_counts(key, response);
  r.ceaf_c = ceaf_e_counts(key, response);
  r.zero_c = zero_anaphor_counts(key, response);
  r.counts = align_mentions(key, response);
  r.finish();
  return r;
}

// Micro-average: counts summed over documents, then scores recomputed.
inline ScoreReport aggregate_reports(std::span<const ScoreReport> reports) {
  ScoreReport agg;
  for (const auto& r : reports) {
    agg.muc_c.accumulate(r.muc_c);
    agg.b3_c.accumulate(r.b3_c);
    agg.ceaf_c.accumulate(r.ceaf_c);
    agg.zero_c.accumulate(r.zero_c);
    agg.counts.accumulate(r.counts);
  }
  agg.finish();
  return agg;
}

}  // namespace coref
