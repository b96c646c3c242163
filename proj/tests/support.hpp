#pragma once

// Shared test machinery: programmatic CoNLL-U fixtures, a seeded random
// document generator, and independent oracles (union-find closure,
// brute-force metric evaluators) that the implementation is checked against.

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "coref/conllu.hpp"
#include "coref/framing.hpp"
#include "coref/merge.hpp"
#include "coref/pipeline.hpp"
#include "coref/scorer.hpp"

namespace ts {

using namespace coref;

// ---------------------------------------------------------------------------
// Fixture builders

inline Token word(int id, std::string form) {
  Token t;
  t.id = {id, 0};
  t.form = std::move(form);
  t.opaque.fill("_");
  return t;
}

inline Token empty_node(int anchor, int sub, std::string form = "_") {
  Token t;
  t.id = {anchor, sub};
  t.form = std::move(form);
  t.opaque.fill("_");
  return t;
}

inline Sentence sentence(std::string sent_id, std::vector<Token> tokens) {
  Sentence s;
  s.sent_id = sent_id;
  s.comments = {"# sent_id = " + sent_id};
  s.tokens = std::move(tokens);
  return s;
}

inline Document document(std::string doc_id, std::vector<Sentence> sentences) {
  Document d;
  d.doc_id = doc_id;
  d.header_comments = {"# newdoc id = " + std::move(doc_id)};
  d.sentences = std::move(sentences);
  return d;
}

inline Mention overt(std::string eid, int sent, int start, int end) {
  return {std::move(eid), MentionKind::overt, {sent, {start, 0}, {end, 0}}};
}

inline Mention zero(std::string eid, int sent, int anchor, int sub) {
  return {std::move(eid), MentionKind::zero, {sent, {anchor, sub}, {anchor, sub}}};
}

inline LengthFn words_fn() {
  return [](std::string_view t) { return whitespace_token_count(t); };
}

inline PipelineOptions options(long frame_budget, long tuple_budget, int instruction_id = 5,
                               bool zero_suffix = true) {
  PipelineOptions opt;
  opt.instruction = {instruction_id, "English", zero_suffix};
  opt.budgets = {frame_budget, tuple_budget};
  opt.length_fn = words_fn();
  return opt;
}

// ---------------------------------------------------------------------------
// Random documents

struct GenOptions {
  int min_sentences = 2, max_sentences = 7;
  int min_tokens = 4, max_tokens = 10;
  int entities = 4;
  int max_mentions_per_sentence = 3;
  bool cover_all_sentences = false;  // a mention in every sentence of the entity's range
  double zero_prob = 0.25;
  double multi_token_prob = 0.6;
};

inline const std::vector<std::string>& vocab() {
  static const std::vector<std::string> v = {"the",  "old",  "sailor", "ship",  "storm", "harbor",
                                             "told", "saw",  "a",      "tale",  "wind",  "sea",
                                             "rope", "gull", "calm",   "night", "star",  "chart"};
  return v;
}

inline Document random_document(const GenOptions& g, std::mt19937& rng, const std::string& doc_id) {
  auto rand_int = [&rng](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto rand_real = [&rng] { return std::uniform_real_distribution<double>(0, 1)(rng); };

  int n_sentences = rand_int(g.min_sentences, g.max_sentences);
  std::vector<std::vector<Token>> tokens(static_cast<size_t>(n_sentences));
  std::vector<int> n_words(static_cast<size_t>(n_sentences));
  for (int si = 0; si < n_sentences; ++si) {
    int n = rand_int(g.min_tokens, g.max_tokens);
    n_words[static_cast<size_t>(si)] = n;
    for (int w = 1; w <= n; ++w)
      tokens[static_cast<size_t>(si)].push_back(
          word(w, vocab()[static_cast<size_t>(rand_int(0, static_cast<int>(vocab().size()) - 1))]));
  }

  std::vector<Mention> mentions;
  std::map<int, std::vector<std::pair<TokenId, TokenId>>> spans_by_sentence;
  std::map<int, std::map<int, int>> empty_subs;  // sentence -> anchor -> next sub

  auto try_add_overt = [&](const std::string& eid, int si) {
    int n = n_words[static_cast<size_t>(si)];
    for (int attempt = 0; attempt < 12; ++attempt) {
      int start = rand_int(1, n);
      int len = rand_real() < g.multi_token_prob ? rand_int(1, 3) : 1;
      int end = std::min(n, start + len - 1);
      std::pair<TokenId, TokenId> span{{start, 0}, {end, 0}};
      bool ok = true;
      for (const auto& other : spans_by_sentence[si]) {
        bool same = other == span;
        bool disjoint = other.second < span.first || span.second < other.first;
        bool nested = (span.first >= other.first && span.second <= other.second) ||
                      (other.first >= span.first && other.second <= span.second);
        if (same || (!disjoint && !nested)) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      spans_by_sentence[si].push_back(span);
      mentions.push_back({eid, MentionKind::overt, {si, span.first, span.second}});
      return true;
    }
    return false;
  };

  auto add_zero = [&](const std::string& eid, int si) {
    int anchor = rand_int(1, n_words[static_cast<size_t>(si)]);
    int sub = ++empty_subs[si][anchor];
    mentions.push_back({eid, MentionKind::zero, {si, {anchor, sub}, {anchor, sub}}});
  };

  for (int e = 0; e < g.entities; ++e) {
    std::string eid = "e" + std::to_string(e);
    int a = rand_int(0, n_sentences - 1);
    int b = rand_int(a, n_sentences - 1);
    for (int si = a; si <= b; ++si) {
      if (!g.cover_all_sentences && si != a && si != b && rand_real() < 0.3) continue;
      if (rand_real() < g.zero_prob)
        add_zero(eid, si);
      else if (!try_add_overt(eid, si) && (g.cover_all_sentences || si == a || si == b))
        add_zero(eid, si);  // keep the range covered when spans run out
    }
  }

  // materialize empty nodes in token order
  std::vector<Sentence> sentences;
  for (int si = 0; si < n_sentences; ++si) {
    std::vector<Token>& toks = tokens[static_cast<size_t>(si)];
    for (const auto& [anchor, max_sub] : empty_subs[si])
      for (int sub = 1; sub <= max_sub; ++sub) toks.push_back(empty_node(anchor, sub));
    std::sort(toks.begin(), toks.end(), [](const Token& a, const Token& b) { return a.id < b.id; });
    sentences.push_back(sentence(doc_id + "-s" + std::to_string(si), std::move(toks)));
  }
  Document bare = document(doc_id, std::move(sentences));
  return write_entities(bare, mentions);
}

// ---------------------------------------------------------------------------
// Union-find (test oracle)

class UnionFind {
 public:
  explicit UnionFind(size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), size_t{0});
  }
  size_t find(size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void merge(size_t a, size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<size_t> parent_, size_;
};

using Partition = std::set<std::set<MentionPos>>;

inline Partition partition_of(const GlobalClusterMap& globals) {
  std::map<long long, std::set<MentionPos>> groups;
  for (const auto& [pos, g] : globals.by_position) groups[g].insert(pos);
  Partition p;
  for (auto& [g, set] : groups) p.insert(std::move(set));
  return p;
}

inline Partition partition_of(const Clustering& clustering) {
  Partition p;
  for (const auto& entity : clustering.entities) {
    std::set<MentionPos> set;
    for (const auto& m : entity) set.insert(m.pos);
    p.insert(std::move(set));
  }
  return p;
}

// Transitive closure of "same local number within one tuple" — the
// brute-force counterpart of the sequential merge.
inline Partition union_find_merge(
    const std::vector<std::pair<FrameAssignments, FrameAssignments>>& per_tuple) {
  std::map<MentionPos, size_t> index;
  for (const auto& [before, after] : per_tuple)
    for (const auto* frame : {&before, &after})
      for (const auto& [pos, local] : frame->items) index.try_emplace(pos, index.size());

  UnionFind uf(index.size());
  for (const auto& [before, after] : per_tuple) {
    std::map<long long, size_t> first_with_local;
    for (const auto* frame : {&before, &after})
      for (const auto& [pos, local] : frame->items) {
        auto it = first_with_local.try_emplace(local, index.at(pos)).first;
        uf.merge(it->second, index.at(pos));
      }
  }
  std::map<size_t, std::set<MentionPos>> groups;
  for (const auto& [pos, i] : index) groups[uf.find(i)].insert(pos);
  Partition p;
  for (auto& [root, set] : groups) p.insert(std::move(set));
  return p;
}

// Gold per-tuple assignments, split by frame — feeds the merge the same way
// the inference engine does.
inline std::vector<std::pair<FrameAssignments, FrameAssignments>> gold_tuple_assignments(
    const Document& doc, const PipelineOptions& opt) {
  std::map<MentionPos, std::string> entity_of;
  for (const auto& m : extract_mentions(doc)) entity_of[m.pos] = m.entity_id;
  std::vector<std::pair<FrameAssignments, FrameAssignments>> out;
  for (const auto& tuple :
       document_tuples(doc, render_instruction(opt.instruction), opt.budgets, opt.length_fn)) {
    std::vector<long long> numbers = gold_local_numbers(tuple, entity_of);
    FrameAssignments before, after;
    for (size_t i = 0; i < tuple.slots.size(); ++i) {
      (i < tuple.before_slot_count ? before : after)
          .items.emplace_back(tuple.slots[i].mention, numbers[i]);
    }
    out.emplace_back(std::move(before), std::move(after));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force metric evaluators (independent of scorer.hpp internals)

inline std::map<MentionPos, size_t> index_of(const Clustering& c) {
  std::map<MentionPos, size_t> idx;
  for (size_t e = 0; e < c.entities.size(); ++e)
    for (const auto& m : c.entities[e]) idx[m.pos] = e;
  return idx;
}

// MUC one side via connected components: link mentions of a key entity that
// share a response entity, count components.
inline void muc_brute_side(const Clustering& key, const Clustering& response, double* num,
                           double* den) {
  auto resp_of = index_of(response);
  for (const auto& entity : key.entities) {
    UnionFind uf(entity.size());
    for (size_t i = 0; i < entity.size(); ++i)
      for (size_t j = i + 1; j < entity.size(); ++j) {
        auto a = resp_of.find(entity[i].pos);
        auto b = resp_of.find(entity[j].pos);
        if (a != resp_of.end() && b != resp_of.end() && a->second == b->second) uf.merge(i, j);
      }
    std::set<size_t> roots;
    for (size_t i = 0; i < entity.size(); ++i) roots.insert(uf.find(i));
    *num += static_cast<double>(entity.size() - roots.size());
    *den += static_cast<double>(entity.size() - 1);
  }
}

inline PRF muc_brute(const Clustering& key, const Clustering& response) {
  PairCounts c;
  muc_brute_side(key, response, &c.rec_num, &c.rec_den);
  muc_brute_side(response, key, &c.prec_num, &c.prec_den);
  return to_prf(c);
}

// B-cubed via a pairwise scan over all mention pairs.
inline void b3_brute_side(const Clustering& key, const Clustering& response, double* num,
                          double* den) {
  auto key_of = index_of(key);
  auto resp_of = index_of(response);
  for (const auto& [pos, ke] : key_of) {
    *den += 1.0;
    auto rit = resp_of.find(pos);
    if (rit == resp_of.end()) continue;
    size_t agree = 0, key_size = 0;
    for (const auto& [qpos, qke] : key_of) {
      if (qke != ke) continue;
      ++key_size;
      auto qrit = resp_of.find(qpos);
      if (qrit != resp_of.end() && qrit->second == rit->second) ++agree;
    }
    *num += static_cast<double>(agree) / static_cast<double>(key_size);
  }
}

inline PRF b3_brute(const Clustering& key, const Clustering& response) {
  PairCounts c;
  b3_brute_side(key, response, &c.rec_num, &c.rec_den);
  b3_brute_side(response, key, &c.prec_num, &c.prec_den);
  return to_prf(c);
}

// CEAF_e via exhaustive matching enumeration.
inline double ceaf_best_matching(const Clustering& key, const Clustering& response, size_t i,
                                 std::vector<bool>& used) {
  if (i >= key.entities.size()) return 0;
  double best = ceaf_best_matching(key, response, i + 1, used);  // key entity i unmatched
  for (size_t j = 0; j < response.entities.size(); ++j) {
    if (used[j]) continue;
    used[j] = true;
    double with = phi4(key.entities[i], response.entities[j]) +
                  ceaf_best_matching(key, response, i + 1, used);
    used[j] = false;
    best = std::max(best, with);
  }
  return best;
}

inline PRF ceaf_e_brute(const Clustering& key, const Clustering& response) {
  PairCounts c;
  c.rec_den = static_cast<double>(key.entities.size());
  c.prec_den = static_cast<double>(response.entities.size());
  if (!key.entities.empty() && !response.entities.empty()) {
    std::vector<bool> used(response.entities.size(), false);
    double total = ceaf_best_matching(key, response, 0, used);
    c.rec_num = total;
    c.prec_num = total;
  }
  return to_prf(c);
}

// Scratch directory removed when the test ends.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("coref_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, std::string_view content) const {
    std::string p = file(name);
    std::ofstream out(p, std::ios::binary);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    return p;
  }

 private:
  std::filesystem::path path_;
};

// Random small clusterings over a shared mention pool (for metric property
// tests). Kinds are overt; positions are single tokens of one sentence.
inline Clustering random_clustering(std::mt19937& rng, int n_mentions, int max_entities,
                                    double drop_prob = 0.0) {
  auto rand_int = [&rng](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto rand_real = [&rng] { return std::uniform_real_distribution<double>(0, 1)(rng); };
  std::map<int, std::vector<ScoredMention>> entities;
  for (int m = 0; m < n_mentions; ++m) {
    if (rand_real() < drop_prob) continue;
    int e = rand_int(0, max_entities - 1);
    entities[e].push_back({{0, {m + 1, 0}, {m + 1, 0}}, MentionKind::overt});
  }
  Clustering c;
  for (auto& [e, ms] : entities) c.entities.push_back(std::move(ms));
  return c;
}

}  // namespace ts
