#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "coref/common.hpp"
#include "coref/conllu.hpp"
#include "coref/framing.hpp"
#include "coref/inference.hpp"
#include "coref/merge.hpp"
#include "coref/scorer.hpp"

// End-to-end wiring: document -> masked frames -> controlled inference ->
// merged global clusters -> annotated document. Documents are independent;
// within a document, slots are strictly sequential.

namespace coref {

struct PipelineOptions {
  InstructionSpec instruction;
  FramingBudgets budgets;
  LengthFn length_fn = [](std::string_view t) { return whitespace_token_count(t); };
  ErrorPolicy policy;
  int jobs = 1;
  unsigned seed = 0;  // recorded in diagnostics; backends are deterministic
};

struct DocumentInferResult {
  Document annotated;
  Diagnostics diagnostics;
  long backend_calls = 0;
  long slot_count = 0;
  bool aborted = false;
  std::string abort_reason;
};

// Runs the full per-document chain against one backend. Mention spans come
// from the input annotation; entity ids of the input are replaced by merged
// `e<global>` clusters. If the input carried entity ids, entities split
// across frames (chain breaks) are reported as diagnostics.
inline DocumentInferResult infer_document(const Document& doc, PredictorBackend& backend,
                                          const PipelineOptions& options) {
  DocumentInferResult result;
  std::string instruction = render_instruction(options.instruction);
  std::vector<InputTuple> tuples =
      document_tuples(doc, instruction, options.budgets, options.length_fn, &result.diagnostics);

  std::vector<std::pair<FrameAssignments, FrameAssignments>> per_tuple;
  per_tuple.reserve(tuples.size());
  for (const auto& tuple : tuples) {
    InferenceResult inf = run_controlled_inference(tuple, backend, options.policy);
    result.backend_calls += inf.backend_calls;
    result.slot_count += static_cast<long>(tuple.slots.size());
    for (auto& d : inf.diagnostics) result.diagnostics.push_back(std::move(d));
    if (inf.aborted) {
      result.aborted = true;
      result.abort_reason = inf.abort_reason;
      break;
    }
    FrameAssignments before, after;
    for (const auto& a : inf.assignments) {
      const MaskSlot& slot = tuple.slots[static_cast<size_t>(a.slot_index)];
      auto& side = static_cast<size_t>(a.slot_index) < tuple.before_slot_count ? before : after;
      side.items.emplace_back(slot.mention, a.local_number);
    }
    per_tuple.emplace_back(std::move(before), std::move(after));
  }

  if (result.aborted) {
    result.annotated = doc;
    return result;
  }

  GlobalClusterMap globals = merge_document(per_tuple, &result.diagnostics);
  result.annotated = apply_to_document(doc, globals);

  std::vector<Mention> gold = extract_mentions(doc);
  bool has_entity_ids = !gold.empty();
  if (has_entity_ids) {
    for (const auto& split : find_entity_splits(gold, globals)) {
      std::string positions;
      for (const auto& p : split.positions) {
        if (!positions.empty()) positions += ", ";
        positions += p.str();
      }
      result.diagnostics.push_back(cat("chain break: entity ", split.entity_id, " split into ",
                                       split.cluster_count, " global clusters (mentions at ",
                                       positions, ")"));
    }
  }
  return result;
}

// One backend per document; oracle and replay backends are stateful, so the
// factory isolates them per run.
using BackendFactory = std::function<std::unique_ptr<PredictorBackend>(const Document&)>;

inline BackendFactory oracle_backend_factory(const PipelineOptions& options) {
  return [options](const Document& doc) {
    return make_oracle_backend(doc, render_instruction(options.instruction), options.budgets,
                               options.length_fn);
  };
}

// Worker pool over documents, results in document order.
inline std::vector<DocumentInferResult> infer_corpus(const std::vector<Document>& docs,
                                                     const BackendFactory& factory,
                                                     const PipelineOptions& options) {
  std::vector<DocumentInferResult> results(docs.size());
  if (docs.empty()) return results;
  size_t workers = static_cast<size_t>(std::max(1, options.jobs));
  workers = std::min(workers, docs.size());

  if (workers == 1) {
    for (size_t i = 0; i < docs.size(); ++i) {
      auto backend = factory(docs[i]);
      results[i] = infer_document(docs[i], *backend, options);
    }
    return results;
  }

  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(docs.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        size_t i = next.fetch_add(1);
        if (i >= docs.size()) return;
        try {
          auto backend = factory(docs[i]);
          results[i] = infer_document(docs[i], *backend, options);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

// infer + score against the key in one pass (the key provides both the
// mention spans and the reference clustering).
struct PipelineOutcome {
  std::vector<DocumentInferResult> runs;
  std::vector<ScoreReport> per_document;
  ScoreReport aggregate;
};

inline PipelineOutcome run_pipeline(const std::vector<Document>& key_docs,
                                    const BackendFactory& factory, const PipelineOptions& options) {
  PipelineOutcome outcome;
  outcome.runs = infer_corpus(key_docs, factory, options);
  outcome.per_document.reserve(key_docs.size());
  for (size_t i = 0; i < key_docs.size(); ++i) {
    Clustering key = clustering_from_document(key_docs[i]);
    Clustering response = clustering_from_document(outcome.runs[i].annotated);
    outcome.per_document.push_back(score_clusterings(key, response));
  }
  outcome.aggregate = aggregate_reports(outcome.per_document);
  return outcome;
}

}  // namespace coref
