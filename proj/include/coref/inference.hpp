#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coref/common.hpp"
#include "coref/framing.hpp"

// Controlled inference: the model is called once per MASK slot, left to
// right, with the full preceding context; everything outside the slots is
// copied verbatim. The predictor behind the calls is pluggable.

namespace coref {

// Completion service unreachable or misbehaving; the engine aborts the
// current tuple but keeps partial assignments.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error(what) {}
};

class PredictorBackend {
 public:
  virtual ~PredictorBackend() = default;
  virtual std::string complete(const std::string& context, int max_new_length,
                               const std::vector<std::string>& stop) = 0;
};

struct ErrorPolicy {
  int max_retries = 2;                       // on non-numeric generations
  long long max_cluster_number = 1'000'000;  // larger values take the fallback path
  int generation_length = 8;
};

// Longest leading digit run after optional whitespace; nullopt when the
// generation carries no usable number.
inline std::optional<long long> parse_cluster_number(std::string_view generation, long long cap) {
  size_t i = 0;
  while (i < generation.size() && is_ascii_space(generation[i])) ++i;
  size_t start = i;
  while (i < generation.size() && is_ascii_digit(generation[i])) ++i;
  size_t len = i - start;
  if (len == 0 || len > 18) return std::nullopt;
  long long value = std::stoll(std::string(generation.substr(start, len)));
  if (value > cap) return std::nullopt;
  return value;
}

struct SlotAssignment {
  int slot_index = 0;
  long long local_number = 0;
};

struct InferenceResult {
  std::string filled_text;  // input markup with numbers at the slots
  std::vector<SlotAssignment> assignments;
  Diagnostics diagnostics;
  long backend_calls = 0;
  bool aborted = false;
  std::string abort_reason;
};

inline const std::vector<std::string>& default_stop_tokens() {
  static const std::vector<std::string> stop = {"<", "\n"};
  return stop;
}

// Fills each slot of `tuple` in order. The context for slot k is the
// instruction, the full masked input, and the output rebuilt so far,
// truncated right after slot k's '#'/'@' sentinel. One backend call per
// slot; retries and the fresh-number fallback follow `policy`.
inline InferenceResult run_controlled_inference(const InputTuple& tuple, PredictorBackend& backend,
                                                const ErrorPolicy& policy = {}) {
  InferenceResult result;
  const std::string& input = tuple.input_text;
  std::string prefix = tuple.instruction + "\n\n" + input + "\n\n";
  std::string out;
  out.reserve(input.size());
  size_t cursor = 0;
  long long max_assigned = -1;

  for (size_t k = 0; k < tuple.slots.size(); ++k) {
    size_t o = tuple.slots[k].sentinel_offset;
    if (o + 5 > input.size() || input.substr(o + 1, 4) != "MASK")
      throw Error(cat("tuple slot ", k, " does not point at a MASK token"));
    out += input.substr(cursor, o + 1 - cursor);

    std::optional<long long> number;
    for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
      std::string generated;
      try {
        generated = backend.complete(prefix + out, policy.generation_length, default_stop_tokens());
        ++result.backend_calls;
      } catch (const TransportError& e) {
        result.aborted = true;
        result.abort_reason = e.what();
        result.diagnostics.push_back(cat("slot ", k, ": transport failure: ", e.what()));
        out += input.substr(o + 1);  // remaining MASKs left intact
        result.filled_text = std::move(out);
        return result;
      }
      number = parse_cluster_number(generated, policy.max_cluster_number);
      if (number) break;
      result.diagnostics.push_back(cat("slot ", k, ": unusable generation \"", generated,
                                       "\" (attempt ", attempt + 1, ")"));
    }
    if (!number) {
      number = max_assigned + 1;  // treat as a new entity
      result.diagnostics.push_back(cat("slot ", k, ": fallback to fresh local number ", *number));
    }
    max_assigned = std::max(max_assigned, *number);
    result.assignments.push_back({static_cast<int>(k), *number});
    out += std::to_string(*number);
    cursor = o + 5;
  }
  out += input.substr(cursor);
  result.filled_text = std::move(out);
  return result;
}

// ---------------------------------------------------------------------------
// Deterministic backends

// Emits scripted generations in order; exhaustion is a transport error.
class ReplayBackend : public PredictorBackend {
 public:
  explicit ReplayBackend(std::vector<std::string> script) : script_(std::move(script)) {}

  std::string complete(const std::string&, int, const std::vector<std::string>&) override {
    if (next_ >= script_.size())
      throw TransportError(cat("replay script exhausted after ", script_.size(), " generations"));
    return script_[next_++];
  }

  size_t consumed() const { return next_; }

 private:
  std::vector<std::string> script_;
  size_t next_ = 0;
};

// Emits the gold local number for every slot of a document, in call order:
// tuples in document order, slots left to right, numbers renumbered per
// tuple by first appearance. Matches the exported training targets.
class OracleBackend : public PredictorBackend {
 public:
  explicit OracleBackend(std::vector<long long> numbers) : numbers_(std::move(numbers)) {}

  std::string complete(const std::string&, int, const std::vector<std::string>&) override {
    if (next_ >= numbers_.size())
      throw TransportError("oracle exhausted: inference asked for more slots than the gold "
                           "document provides (pipeline misalignment)");
    return std::to_string(numbers_[next_++]);
  }

 private:
  std::vector<long long> numbers_;
  size_t next_ = 0;
};

inline std::unique_ptr<PredictorBackend> make_oracle_backend(const Document& gold,
                                                             std::string_view instruction,
                                                             const FramingBudgets& budgets,
                                                             const LengthFn& length_fn) {
  std::map<MentionPos, std::string> entity_of;
  for (const auto& m : extract_mentions(gold)) entity_of[m.pos] = m.entity_id;
  std::vector<long long> numbers;
  for (const auto& tuple : document_tuples(gold, instruction, budgets, length_fn))
    for (long long n : gold_local_numbers(tuple, entity_of)) numbers.push_back(n);
  return std::make_unique<OracleBackend>(std::move(numbers));
}

}  // namespace coref
