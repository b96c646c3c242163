#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coref/common.hpp"
#include "coref/conllu.hpp"

// Merging per-tuple local cluster numbers into document-global clusters.
// Local numbers are only comparable inside one tuple; the shared frame of
// consecutive tuples carries cluster identity across the document.

namespace coref {

// (mention position, local number) pairs for one frame of one tuple.
struct FrameAssignments {
  std::vector<std::pair<MentionPos, long long>> items;
};

struct GlobalClusterMap {
  std::map<MentionPos, long long> by_position;
  long long next_fresh = 0;  // == max assigned global + 1
};

// First frame of the first tuple: each distinct local number, in first
// appearance order, becomes a fresh global cluster.
inline GlobalClusterMap seed_global(const FrameAssignments& first_frame) {
  GlobalClusterMap globals;
  std::unordered_map<long long, long long> local_to_global;
  for (const auto& [pos, local] : first_frame.items) {
    auto [it, inserted] = local_to_global.try_emplace(local, globals.next_fresh);
    if (inserted) ++globals.next_fresh;
    if (!globals.by_position.emplace(pos, it->second).second)
      throw Error(cat("duplicate mention position ", pos.str(), " while seeding global clusters"));
  }
  return globals;
}

// One tuple: before-frame mentions map their locals onto known globals
// (later occurrences overwrite earlier on conflict); after-frame mentions
// inherit through that map, unseen locals getting fresh globals.
inline GlobalClusterMap merge_tuple(GlobalClusterMap globals, const FrameAssignments& before,
                                    const FrameAssignments& after, Diagnostics* diags = nullptr) {
  std::unordered_map<long long, long long> local_to_global;
  for (const auto& [pos, local] : before.items) {
    auto it = globals.by_position.find(pos);
    if (it == globals.by_position.end())
      throw Error(cat("chain integrity: before-frame mention at ", pos.str(),
                      " has no global cluster yet"));
    auto [lit, inserted] = local_to_global.try_emplace(local, it->second);
    if (!inserted && lit->second != it->second) {
      if (diags)
        diags->push_back(cat("conflicting before-frame evidence for local ", local, ": global ",
                             lit->second, " overwritten by ", it->second, " at ", pos.str()));
      lit->second = it->second;
    }
  }
  for (const auto& [pos, local] : after.items) {
    auto lit = local_to_global.find(local);
    if (lit == local_to_global.end())
      lit = local_to_global.emplace(local, globals.next_fresh++).first;
    globals.by_position[pos] = lit->second;
  }
  return globals;
}

// Sequentially merges a document's tuples. Requires the overlap contract:
// tuple k's before-frame positions equal tuple k-1's after-frame positions.
inline GlobalClusterMap merge_document(
    const std::vector<std::pair<FrameAssignments, FrameAssignments>>& per_tuple,
    Diagnostics* diags = nullptr) {
  if (per_tuple.empty()) return {};
  GlobalClusterMap globals = seed_global(per_tuple.front().first);
  for (size_t k = 0; k < per_tuple.size(); ++k) {
    if (k > 0) {
      const auto& prev_after = per_tuple[k - 1].second.items;
      const auto& cur_before = per_tuple[k].first.items;
      bool ok = prev_after.size() == cur_before.size();
      for (size_t i = 0; ok && i < cur_before.size(); ++i)
        ok = cur_before[i].first == prev_after[i].first;
      if (!ok)
        throw Error(cat("overlap contract violated at tuple ", k,
                        ": before-frame positions differ from the previous after-frame"));
    }
    globals = merge_tuple(std::move(globals), per_tuple[k].first, per_tuple[k].second, diags);
  }
  return globals;
}

// Writes merged clusters back as Entity annotations `e<global>`.
inline Document apply_to_document(const Document& doc, const GlobalClusterMap& globals) {
  std::vector<Mention> mentions;
  mentions.reserve(globals.by_position.size());
  for (const auto& [pos, global] : globals.by_position) {
    MentionKind kind = (pos.start == pos.end && pos.start.is_empty_node()) ? MentionKind::zero
                                                                           : MentionKind::overt;
    mentions.push_back({cat('e', global), kind, pos});
  }
  return write_entities(doc, mentions);
}

// Chain-break report: a gold entity whose mentions ended up in more than one
// global cluster was split across frames (typically an overlap frame with no
// mention of it).
struct EntitySplit {
  std::string entity_id;
  size_t cluster_count = 0;
  std::vector<MentionPos> positions;
};

inline std::vector<EntitySplit> find_entity_splits(const std::vector<Mention>& gold_mentions,
                                                   const GlobalClusterMap& globals) {
  std::map<std::string, std::vector<MentionPos>> by_entity;
  for (const auto& m : gold_mentions) by_entity[m.entity_id].push_back(m.pos);

  std::vector<EntitySplit> splits;
  for (const auto& [eid, positions] : by_entity) {
    std::set<long long> clusters;
    for (const auto& pos : positions) {
      auto it = globals.by_position.find(pos);
      if (it != globals.by_position.end()) clusters.insert(it->second);
    }
    if (clusters.size() > 1) splits.push_back({eid, clusters.size(), positions});
  }
  return splits;
}

}  // namespace coref
