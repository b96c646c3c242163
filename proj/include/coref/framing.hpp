#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coref/common.hpp"
#include "coref/conllu.hpp"
#include "coref/markup.hpp"

// Length-budgeted frames over masked sentences and the two-frame input
// tuples fed to the model. Consecutive tuples share a frame: tuple k's
// before-frame is tuple k-1's after-frame, which is what lets local cluster
// numbers be merged into document-global ones downstream.

namespace coref {

using LengthFn = std::function<long(std::string_view)>;

struct FramingBudgets {
  long frame_budget = 1600;
  long tuple_budget = 7168;
};

struct Frame {
  int frame_index = 0;
  int first_sentence = 0;  // inclusive
  int last_sentence = 0;   // inclusive
  std::string masked_text;
  std::vector<MaskSlot> slots;  // offsets into masked_text
};

inline constexpr std::string_view kFrameSeparator = " [MID] ";

struct InputTuple {
  std::string instruction;
  Frame before;
  std::optional<Frame> after;
  std::string input_text;       // before [MID] after (no separator when degenerate)
  std::vector<MaskSlot> slots;  // offsets into input_text; before slots first
  size_t before_slot_count = 0;

  // Budget- and inference-facing composition: instruction, blank line, input.
  std::string composed_text() const { return instruction + "\n\n" + input_text; }
};

// Greedy sentence packing: a sentence joins the current frame unless that
// would push the frame over `frame_budget` under `length_fn`.
inline std::vector<Frame> build_frames(std::span<const MaskedSentence> masked, long frame_budget,
                                       const LengthFn& length_fn) {
  if (frame_budget <= 0) throw Error("frame budget must be positive");
  std::vector<Frame> frames;
  Frame cur;
  bool cur_open = false;

  auto flush = [&] {
    if (!cur_open) return;
    cur.frame_index = static_cast<int>(frames.size());
    frames.push_back(std::move(cur));
    cur = Frame{};
    cur_open = false;
  };

  for (size_t si = 0; si < masked.size(); ++si) {
    const MaskedSentence& ms = masked[si];
    if (ms.text.empty() && cur_open) {  // token-less sentence, extend the range
      cur.last_sentence = static_cast<int>(si);
      continue;
    }
    std::string candidate = cur.masked_text;
    if (!candidate.empty() && !ms.text.empty()) candidate += ' ';
    candidate += ms.text;
    if (cur_open && length_fn(candidate) > frame_budget) {
      flush();
      candidate = ms.text;
    }
    if (!cur_open && length_fn(candidate) > frame_budget)
      throw Error(cat("sentence ", si, " alone exceeds the frame budget (", length_fn(candidate),
                      " > ", frame_budget, ")"));
    size_t base = cur.masked_text.empty() || ms.text.empty() ? cur.masked_text.size()
                                                             : cur.masked_text.size() + 1;
    if (!cur_open) {
      cur.first_sentence = static_cast<int>(si);
      base = 0;
    }
    cur.last_sentence = static_cast<int>(si);
    cur.masked_text = std::move(candidate);
    for (const MaskSlot& slot : ms.slots) {
      MaskSlot shifted = slot;
      shifted.slot_index = static_cast<int>(cur.slots.size());
      shifted.sentinel_offset = slot.sentinel_offset + base;
      cur.slots.push_back(shifted);
    }
    cur_open = true;
  }
  flush();
  return frames;
}

// n frames make n-1 overlapping tuples; a single frame makes one degenerate
// tuple without the [MID] separator.
inline std::vector<InputTuple> build_tuples(std::span<const Frame> frames,
                                            std::string_view instruction, long tuple_budget,
                                            const LengthFn& length_fn) {
  if (frames.empty()) throw Error("cannot build tuples from zero frames");
  if (tuple_budget <= 0) throw Error("tuple budget must be positive");

  auto make = [&](const Frame& before, const Frame* after) {
    InputTuple t;
    t.instruction = std::string(instruction);
    t.before = before;
    t.input_text = before.masked_text;
    t.slots = before.slots;
    t.before_slot_count = before.slots.size();
    if (after) {
      t.after = *after;
      size_t base = t.input_text.size() + kFrameSeparator.size();
      t.input_text += kFrameSeparator;
      t.input_text += after->masked_text;
      for (const MaskSlot& slot : after->slots) {
        MaskSlot shifted = slot;
        shifted.slot_index = static_cast<int>(t.slots.size());
        shifted.sentinel_offset = slot.sentinel_offset + base;
        t.slots.push_back(shifted);
      }
    }
    long total = length_fn(t.composed_text());
    if (total > tuple_budget)
      throw Error(cat("tuple over frames (", before.frame_index, ",",
                      after ? after->frame_index : before.frame_index, ") exceeds the tuple budget (",
                      total, " > ", tuple_budget, "); lower the frame budget"));
    return t;
  };

  std::vector<InputTuple> tuples;
  if (frames.size() == 1) {
    tuples.push_back(make(frames[0], nullptr));
  } else {
    for (size_t k = 0; k + 1 < frames.size(); ++k)
      tuples.push_back(make(frames[k], &frames[k + 1]));
  }
  return tuples;
}

// ---------------------------------------------------------------------------
// Instructions

struct InstructionSpec {
  int id = 5;
  std::string language = "English";  // substituted into instruction #1 only
  bool zero_suffix = false;
};

inline constexpr std::string_view kZeroSuffixLine =
    "Where you see </z>@ there is a zero mention, which is normally not written but you also "
    "need to link them with other mentions.";

inline std::string render_instruction(const InstructionSpec& spec) {
  std::string text;
  switch (spec.id) {
    case 1:
      text = cat("The text is in ", spec.language, ".\n");
      text +=
          "You are a coreference resolver.\n"
          "Rewrite the sentence considering these rules:\n"
          "Mentions are in <m>...</m>#MASK format.\n"
          "Group the mentions that refer to same real-world entity.\n"
          "If mentions refer to same thing write the same number instead of MASK.\n"
          "If mentions represent different things write another number.";
      break;
    case 2:
      text =
          "Identify instances of coreference where different mentions refer to the same entity.\n"
          "Rewrite the passage, tagging each term with a unique identifier and indicating "
          "coreferential relationships.\n"
          "Ensure accuracy and consider context.\n"
          "Fill MASK with unique number for every entity. Be sure that they represent exactly "
          "the same entity, not similar.\n"
          "Example output format:\n"
          "... <m>Bertrand Russell </m>#MASK is a good author, I love <m>The History of Western "
          "Philosophy </m>#MASK ...\n"
          "... <m>Bertrand Russell </m>#0 is good author, I love <m>The History of Western "
          "Philosophy </m>#1 ...";
      break;
    case 3:
      text =
          "For every mention in <m> </m> tags examine if there is any coreferential/coherent "
          "mention.\n"
          "If two mentions represent the same entity write the same number instead of MASK "
          "after closing mention tag </m>.\n"
          "Do not change anything else other than MASK.";
      break;
    case 4:
      text =
          "For every mention in <m> </m> tags examine if there is any coreferential mention.\n"
          "If two mentions represent the same entity write the same number instead of MASK "
          "after closing mention tag </m>.\n"
          "For example: author and book represent different entities.\n"
          "Do not change anything else other than MASK.";
      break;
    case 5:
      text =
          "For every mention in <m> </m> tags examine if there is any coreferential/coherent "
          "mention.\n"
          "If two mentions represent the same entity write the same number instead of MASK "
          "after closing mention tag </m>.\n"
          "For example: author and book represent different entities.\n"
          "Do not change anything else other than MASK.";
      break;
    default:
      throw Error(cat("instruction id out of range: ", spec.id, " (expected 1..5)"));
  }
  if (spec.zero_suffix) {
    text += '\n';
    text += kZeroSuffixLine;
  }
  return text;
}

// ---------------------------------------------------------------------------
// Document-level assembly and training export

// Masks every sentence and packs the document into overlapping tuples.
inline std::vector<InputTuple> document_tuples(const Document& doc, std::string_view instruction,
                                               const FramingBudgets& budgets,
                                               const LengthFn& length_fn,
                                               Diagnostics* diags = nullptr) {
  std::vector<Mention> mentions = extract_mentions(doc, diags);
  std::vector<std::vector<Mention>> by_sentence(doc.sentences.size());
  for (const auto& m : mentions) by_sentence[static_cast<size_t>(m.pos.sentence)].push_back(m);

  std::vector<MaskedSentence> masked;
  masked.reserve(doc.sentences.size());
  for (size_t si = 0; si < doc.sentences.size(); ++si)
    masked.push_back(render_masked_sentence(doc.sentences[si], static_cast<int>(si), by_sentence[si]));

  std::vector<Frame> frames = build_frames(masked, budgets.frame_budget, length_fn);
  if (frames.empty()) return {};
  return build_tuples(frames, instruction, budgets.tuple_budget, length_fn);
}

// Local training targets: entities renumbered 0,1,2,... by first appearance
// within this tuple. Numbers are only meaningful inside one tuple.
inline std::vector<long long> gold_local_numbers(const InputTuple& tuple,
                                                 const std::map<MentionPos, std::string>& entity_of) {
  std::vector<long long> numbers;
  numbers.reserve(tuple.slots.size());
  std::map<std::string, long long> local;
  for (const MaskSlot& slot : tuple.slots) {
    auto it = entity_of.find(slot.mention);
    if (it == entity_of.end())
      throw Error(cat("no gold entity for mention at ", slot.mention.str()));
    auto lit = local.try_emplace(it->second, static_cast<long long>(local.size())).first;
    numbers.push_back(lit->second);
  }
  return numbers;
}

struct TrainingRecord {
  std::string instruction;
  std::string input;
  std::string output;
};

inline std::vector<TrainingRecord> export_training_tuples(const Document& doc,
                                                          const InstructionSpec& spec,
                                                          const FramingBudgets& budgets,
                                                          const LengthFn& length_fn,
                                                          Diagnostics* diags = nullptr) {
  std::string instruction = render_instruction(spec);
  std::vector<InputTuple> tuples = document_tuples(doc, instruction, budgets, length_fn, diags);

  std::map<MentionPos, std::string> entity_of;
  for (const auto& m : extract_mentions(doc)) entity_of[m.pos] = m.entity_id;

  std::vector<TrainingRecord> records;
  records.reserve(tuples.size());
  for (const auto& tuple : tuples) {
    std::vector<long long> numbers = gold_local_numbers(tuple, entity_of);
    records.push_back({instruction, tuple.input_text,
                       fill_masks(tuple.input_text, tuple.slots, numbers)});
  }
  return records;
}

}  // namespace coref
