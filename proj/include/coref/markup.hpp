#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coref/common.hpp"
#include "coref/conllu.hpp"

// Masked markup for coreference linking. An overt mention is rendered as
// `<m> words </m>#MASK`, a zero mention as `</z>@MASK` in empty-node order;
// everything else is the space-joined token sequence. Filling a MASK means
// writing a cluster number right after its `#`/`@` sentinel.

namespace coref {

struct MaskSlot {
  int slot_index = 0;        // left-to-right among MASK occurrences
  MentionPos mention;
  MentionKind kind = MentionKind::overt;
  size_t sentinel_offset = 0;  // byte offset of '#'/'@' in the owning text
};

struct MaskedSentence {
  std::string text;
  std::vector<MaskSlot> slots;
};

inline constexpr std::string_view kOpenTag = "<m>";
inline constexpr std::string_view kCloseTag = "</m>#MASK";
inline constexpr std::string_view kZeroTag = "</z>@MASK";

// Wraps mentions of one sentence in masked markup. Mentions must lie inside
// the sentence and be non-crossing; zero mentions sit on empty nodes. Empty
// nodes without a zero mention produce no text.
inline MaskedSentence render_masked_sentence(const Sentence& sentence, int sentence_index,
                                             std::span<const Mention> mentions) {
  std::map<TokenId, std::vector<const Mention*>> opens;  // start -> mentions, longer first
  std::map<TokenId, const Mention*> zeros;

  for (const auto& m : mentions) {
    if (m.pos.sentence != sentence_index)
      throw Error(cat("mention at ", m.pos.str(), " does not belong to sentence ", sentence_index));
    if (m.kind == MentionKind::zero) {
      if (m.pos.start != m.pos.end || !m.pos.start.is_empty_node())
        throw Error(cat("zero mention at ", m.pos.str(), " is not a single empty node"));
      if (zeros.count(m.pos.start))
        throw Error(cat("duplicate zero mention at ", m.pos.str()));
      zeros[m.pos.start] = &m;
    } else {
      if (m.pos.start.is_empty_node() || m.pos.end.is_empty_node())
        throw Error(cat("overt mention at ", m.pos.str(), " anchored on an empty node"));
      opens[m.pos.start].push_back(&m);
    }
  }
  for (auto& [start, list] : opens)
    std::sort(list.begin(), list.end(),
              [](const Mention* a, const Mention* b) { return b->pos.end < a->pos.end; });

  MaskedSentence out;
  std::vector<const Mention*> stack;
  int next_slot = 0;
  auto append = [&out](std::string_view piece) {
    if (!out.text.empty()) out.text += ' ';
    out.text += piece;
  };
  auto emit_close = [&](const Mention* m, std::string_view tag) {
    append(tag);
    MaskSlot slot;
    slot.slot_index = next_slot++;
    slot.mention = m->pos;
    slot.kind = m->kind;
    slot.sentinel_offset = out.text.size() - 5;  // '#'/'@' sits before "MASK"
    out.slots.push_back(slot);
  };

  for (const auto& tok : sentence.tokens) {
    if (tok.id.is_empty_node()) {
      auto it = zeros.find(tok.id);
      if (it != zeros.end()) {
        emit_close(it->second, kZeroTag);
        zeros.erase(it);
      }
      continue;
    }
    auto oit = opens.find(tok.id);
    if (oit != opens.end()) {
      for (const Mention* m : oit->second) {
        if (!stack.empty() && stack.back()->pos.end < m->pos.end)
          throw Error(cat("crossing mentions: ", stack.back()->entity_id, " at ",
                          stack.back()->pos.str(), " and ", m->entity_id, " at ", m->pos.str()));
        append(kOpenTag);
        stack.push_back(m);
      }
    }
    append(tok.form);
    while (!stack.empty() && stack.back()->pos.end == tok.id) {
      emit_close(stack.back(), kCloseTag);
      stack.pop_back();
    }
  }
  if (!stack.empty())
    throw Error(cat("mention at ", stack.back()->pos.str(), " extends past its sentence"));
  if (!zeros.empty())
    throw Error(cat("zero mention at ", zeros.begin()->second->pos.str(),
                    " has no matching empty node"));
  return out;
}

// Replaces the MASK of each slot with a number. `numbers[i]` fills slot i.
inline std::string fill_masks(std::string_view masked_text, std::span<const MaskSlot> slots,
                              std::span<const long long> numbers) {
  if (slots.size() != numbers.size())
    throw Error(cat("fill_masks: ", slots.size(), " slots but ", numbers.size(), " numbers"));
  std::string out;
  out.reserve(masked_text.size());
  size_t cursor = 0;
  for (size_t i = 0; i < slots.size(); ++i) {
    size_t o = slots[i].sentinel_offset;
    if (o + 5 > masked_text.size() || masked_text.substr(o + 1, 4) != "MASK")
      throw Error(cat("fill_masks: slot ", i, " does not point at a MASK token"));
    if (numbers[i] < 0) throw Error(cat("fill_masks: negative cluster number for slot ", i));
    out += masked_text.substr(cursor, o + 1 - cursor);
    out += std::to_string(numbers[i]);
    cursor = o + 5;
  }
  out += masked_text.substr(cursor);
  return out;
}

// Training-target rendering: masked markup with gold cluster numbers in
// place of each MASK.
inline std::string render_output_sentence(const Sentence& sentence, int sentence_index,
                                          std::span<const Mention> mentions,
                                          const std::map<MentionPos, long long>& cluster_numbers) {
  MaskedSentence masked = render_masked_sentence(sentence, sentence_index, mentions);
  std::vector<long long> numbers;
  numbers.reserve(masked.slots.size());
  for (const auto& slot : masked.slots) {
    auto it = cluster_numbers.find(slot.mention);
    if (it == cluster_numbers.end())
      throw Error(cat("no cluster number for mention at ", slot.mention.str()));
    numbers.push_back(it->second);
  }
  return fill_masks(masked.text, masked.slots, numbers);
}

// Reads the number following each `</m>#` / `</z>@` of a filled text, in
// slot order, validating that everything outside the slots is unchanged.
inline std::vector<std::pair<int, long long>> parse_filled_text(
    std::string_view filled, std::string_view masked_text, std::span<const MaskSlot> slots) {
  std::vector<std::pair<int, long long>> out;
  size_t ri = 0, fi = 0;
  for (size_t k = 0; k < slots.size(); ++k) {
    size_t o = slots[k].sentinel_offset;
    size_t seg = o + 1 - ri;  // verbatim segment, sentinel included
    if (fi + seg > filled.size() || filled.substr(fi, seg) != masked_text.substr(ri, seg))
      throw Error(cat("filled text diverges from markup before slot ", k));
    ri += seg;
    fi += seg;
    if (masked_text.substr(ri, 4) != "MASK")
      throw Error(cat("slot ", k, " does not point at a MASK token"));
    ri += 4;
    size_t digits = 0;
    while (fi + digits < filled.size() && is_ascii_digit(filled[fi + digits])) ++digits;
    if (digits == 0 || digits > 18)
      throw Error(cat("slot ", k, ": expected a cluster number, found \"",
                      filled.substr(fi, std::min<size_t>(8, filled.size() - fi)), "\""));
    out.emplace_back(static_cast<int>(k), std::stoll(std::string(filled.substr(fi, digits))));
    fi += digits;
  }
  if (filled.substr(fi) != masked_text.substr(ri))
    throw Error("filled text diverges from markup after the last slot");
  return out;
}

inline std::vector<std::pair<int, long long>> parse_filled_output(std::string_view filled,
                                                                  const MaskedSentence& reference) {
  return parse_filled_text(filled, reference.text, reference.slots);
}

}  // namespace coref
