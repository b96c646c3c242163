#pragma once

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coref/common.hpp"
#include "coref/conllu.hpp"
#include "coref/framing.hpp"
#include "coref/http_backend.hpp"
#include "coref/inference.hpp"
#include "coref/pipeline.hpp"
#include "coref/scorer.hpp"

// Command implementations behind the `coref` CLI. Flag parsing lives in
// cli_main.hpp; everything here is driveable from tests.

namespace coref {

struct CliConfig {
  int instruction_id = 5;
  std::string language = "English";
  bool zero_suffix = false;
  long frame_budget = 1600;
  long tuple_budget = 7168;
  std::string length_fn = "words";  // words | bytes
  std::string backend = "oracle";   // oracle | replay:<file> | remote:<url>
  int retries = 2;
  int jobs = 1;
  unsigned seed = 0;
  std::string auth_token;
  double timeout_sec = 30;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(cat("cannot open ", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(cat("cannot write ", path));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(cat("short write to ", path));
}

inline LengthFn make_length_fn(const std::string& name) {
  if (name == "words") return [](std::string_view t) { return whitespace_token_count(t); };
  if (name == "bytes") return [](std::string_view t) { return byte_count(t); };
  throw Error(cat("unknown length function \"", name, "\" (expected words or bytes)"));
}

inline PipelineOptions make_pipeline_options(const CliConfig& cfg) {
  PipelineOptions opt;
  opt.instruction = {cfg.instruction_id, cfg.language, cfg.zero_suffix};
  opt.budgets = {cfg.frame_budget, cfg.tuple_budget};
  opt.length_fn = make_length_fn(cfg.length_fn);
  opt.policy.max_retries = cfg.retries;
  opt.jobs = cfg.jobs;
  opt.seed = cfg.seed;

  if (cfg.frame_budget <= 0 || cfg.tuple_budget <= 0) throw Error("budgets must be positive");
  long instruction_len = opt.length_fn(render_instruction(opt.instruction));
  if (cfg.tuple_budget < 2 * cfg.frame_budget + instruction_len)
    throw Error(cat("tuple budget ", cfg.tuple_budget, " cannot hold two frames of ",
                    cfg.frame_budget, " plus the instruction (", instruction_len, ")"));
  return opt;
}

// `replay:` scripts are shared across documents, so replay runs are forced
// sequential to keep consumption order deterministic.
class ForwardingBackend : public PredictorBackend {
 public:
  explicit ForwardingBackend(std::shared_ptr<PredictorBackend> inner) : inner_(std::move(inner)) {}
  std::string complete(const std::string& context, int max_new_length,
                       const std::vector<std::string>& stop) override {
    return inner_->complete(context, max_new_length, stop);
  }

 private:
  std::shared_ptr<PredictorBackend> inner_;
};

inline BackendFactory make_backend_factory(const CliConfig& cfg, PipelineOptions* options) {
  if (cfg.backend == "oracle") return oracle_backend_factory(*options);
  if (cfg.backend.rfind("replay:", 0) == 0) {
    std::string path = cfg.backend.substr(7);
    std::vector<std::string> script;
    for (auto& line : split(read_file(path), '\n'))
      if (!line.empty()) script.push_back(std::move(line));
    auto shared = std::make_shared<ReplayBackend>(std::move(script));
    options->jobs = 1;
    return [shared](const Document&) { return std::make_unique<ForwardingBackend>(shared); };
  }
  if (cfg.backend.rfind("remote:", 0) == 0) {
    RemoteConfig rc;
    rc.url = cfg.backend.substr(7);
    rc.auth_token = cfg.auth_token;
    rc.timeout_sec = cfg.timeout_sec;
    rc.max_retries = cfg.retries;
    return [rc](const Document&) { return make_remote_backend(rc); };
  }
  throw Error(cat("unknown backend \"", cfg.backend,
                  "\" (expected oracle, replay:<file> or remote:<url>)"));
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::ordered_json report_record(const std::string& unit, const std::string& id,
                                            const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["unit"] = unit;
  j["id"] = id;
  auto put = [&j](const char* name, const PRF& m) {
    j[std::string(name) + ".p"] = m.p;
    j[std::string(name) + ".r"] = m.r;
    j[std::string(name) + ".f1"] = m.f1;
  };
  put("muc", r.muc);
  put("b3", r.b3);
  put("ceaf_e", r.ceaf_e);
  j["conll"] = r.conll;
  put("zero", r.zero);
  j["zero.applicable"] = r.zero_applicable;
  j["counts.matched"] = r.counts.matched;
  j["counts.missing"] = r.counts.missing;
  j["counts.spurious"] = r.counts.spurious;
  return j;
}

inline std::string format_prf(const PRF& m) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100 * m.p << '/' << 100 * m.r << '/' << 100 * m.f1;
  return os.str();
}

inline void print_report_row(std::ostream& os, const std::string& id, const ScoreReport& r) {
  os << std::left << std::setw(28) << id << ' ' << std::setw(21) << format_prf(r.muc)
     << std::setw(21) << format_prf(r.b3) << std::setw(21) << format_prf(r.ceaf_e);
  std::ostringstream conll;
  conll << std::fixed << std::setprecision(2) << 100 * r.conll;
  os << std::setw(8) << conll.str();
  os << (r.zero_applicable ? format_prf(r.zero) : std::string("n/a")) << '\n';
}

inline void print_report_header(std::ostream& os) {
  os << std::left << std::setw(28) << "document" << ' ' << std::setw(21) << "MUC P/R/F1"
     << std::setw(21) << "B3 P/R/F1" << std::setw(21) << "CEAF_e P/R/F1" << std::setw(8) << "CoNLL"
     << "zero(simplified) P/R/F1" << '\n';
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_export_train(const std::string& in_path, const std::string& out_path,
                            const CliConfig& cfg, std::ostream& err = std::cerr) {
  try {
    PipelineOptions opt = make_pipeline_options(cfg);
    std::vector<Document> docs = parse_documents(read_file(in_path));
    std::string out;
    for (const auto& doc : docs) {
      for (const auto& rec :
           export_training_tuples(doc, opt.instruction, opt.budgets, opt.length_fn)) {
        nlohmann::ordered_json j;
        j["instruction"] = rec.instruction;
        j["input"] = rec.input;
        j["output"] = rec.output;
        out += j.dump();
        out += '\n';
      }
    }
    write_file(out_path, out);
    return 0;
  } catch (const std::exception& e) {
    err << "export-train: " << e.what() << '\n';
    return 1;
  }
}

inline int cmd_infer(const std::string& in_path, const std::string& out_path,
                     const std::string& diag_path, const CliConfig& cfg,
                     std::ostream& err = std::cerr) {
  try {
    PipelineOptions opt = make_pipeline_options(cfg);
    BackendFactory factory = make_backend_factory(cfg, &opt);
    std::vector<Document> docs = parse_documents(read_file(in_path));
    std::vector<DocumentInferResult> runs = infer_corpus(docs, factory, opt);

    std::string out;
    std::string diag = cat("# seed=", opt.seed, " backend=", cfg.backend, "\n");
    bool aborted = false;
    for (size_t i = 0; i < runs.size(); ++i) {
      serialize_document(runs[i].annotated, &out);
      for (const auto& d : runs[i].diagnostics)
        diag += cat(docs[i].doc_id.empty() ? cat("doc", i) : docs[i].doc_id, ": ", d, '\n');
      if (runs[i].aborted) {
        aborted = true;
        err << "infer: document " << (docs[i].doc_id.empty() ? cat("doc", i) : docs[i].doc_id)
            << " aborted: " << runs[i].abort_reason << '\n';
      }
    }
    write_file(out_path, out);
    if (!diag_path.empty()) write_file(diag_path, diag);
    return aborted ? 1 : 0;
  } catch (const std::exception& e) {
    err << "infer: " << e.what() << '\n';
    return 1;
  }
}

namespace detail {

struct DatasetScore {
  std::string name;
  std::vector<std::pair<std::string, ScoreReport>> documents;
  ScoreReport aggregate;
};

inline DatasetScore score_dataset(const std::string& key_path, const std::string& response_path) {
  DatasetScore ds;
  ds.name = key_path;
  std::vector<Document> key = parse_documents(read_file(key_path));
  std::vector<Document> response = parse_documents(read_file(response_path));
  if (key.size() != response.size())
    throw Error(cat(key_path, " has ", key.size(), " documents but ", response_path, " has ",
                    response.size()));
  std::map<std::string, size_t> by_id;
  for (size_t i = 0; i < response.size(); ++i) by_id[response[i].doc_id] = i;

  std::vector<ScoreReport> reports;
  for (size_t i = 0; i < key.size(); ++i) {
    size_t ri = i;  // documents without ids pair up positionally
    if (!key[i].doc_id.empty()) {
      auto it = by_id.find(key[i].doc_id);
      if (it == by_id.end())
        throw Error(cat("document \"", key[i].doc_id, "\" missing from ", response_path));
      ri = it->second;
    }
    ScoreReport r =
        score_clusterings(clustering_from_document(key[i]), clustering_from_document(response[ri]));
    ds.documents.emplace_back(key[i].doc_id.empty() ? cat("doc", i) : key[i].doc_id, r);
    reports.push_back(r);
  }
  ds.aggregate = aggregate_reports(reports);
  return ds;
}

}  // namespace detail

inline int cmd_score(const std::vector<std::string>& paths, const std::string& out_path,
                     std::ostream& os = std::cout, std::ostream& err = std::cerr) {
  try {
    if (paths.empty() || paths.size() % 2 != 0)
      throw Error("score expects one or more <key> <response> file pairs");

    std::vector<detail::DatasetScore> datasets;
    for (size_t i = 0; i < paths.size(); i += 2)
      datasets.push_back(detail::score_dataset(paths[i], paths[i + 1]));

    std::string records;
    print_report_header(os);
    for (const auto& ds : datasets) {
      if (datasets.size() == 1) {
        for (const auto& [id, r] : ds.documents) {
          print_report_row(os, id, r);
          records += report_record("document", id, r).dump() + "\n";
        }
      }
      print_report_row(os, cat(ds.name, " (all)"), ds.aggregate);
      records += report_record("dataset", ds.name, ds.aggregate).dump() + "\n";
    }
    if (datasets.size() > 1) {
      // macro average across datasets, mirroring per-dataset tables
      ScoreReport macro;
      auto mean = [&](auto pick) {
        double s = 0;
        for (const auto& ds : datasets) s += pick(ds.aggregate);
        return s / static_cast<double>(datasets.size());
      };
      macro.muc = {mean([](const ScoreReport& r) { return r.muc.p; }),
                   mean([](const ScoreReport& r) { return r.muc.r; }),
                   mean([](const ScoreReport& r) { return r.muc.f1; })};
      macro.b3 = {mean([](const ScoreReport& r) { return r.b3.p; }),
                  mean([](const ScoreReport& r) { return r.b3.r; }),
                  mean([](const ScoreReport& r) { return r.b3.f1; })};
      macro.ceaf_e = {mean([](const ScoreReport& r) { return r.ceaf_e.p; }),
                      mean([](const ScoreReport& r) { return r.ceaf_e.r; }),
                      mean([](const ScoreReport& r) { return r.ceaf_e.f1; })};
      macro.zero = {mean([](const ScoreReport& r) { return r.zero.p; }),
                    mean([](const ScoreReport& r) { return r.zero.r; }),
                    mean([](const ScoreReport& r) { return r.zero.f1; })};
      macro.conll = mean([](const ScoreReport& r) { return r.conll; });
      for (const auto& ds : datasets) {
        macro.zero_applicable = macro.zero_applicable || ds.aggregate.zero_applicable;
        macro.counts.accumulate(ds.aggregate.counts);
      }
      print_report_row(os, "macro average", macro);
      records += report_record("macro", "macro", macro).dump() + "\n";
    }
    if (!out_path.empty()) write_file(out_path, records);
    return 0;
  } catch (const std::exception& e) {
    err << "score: " << e.what() << '\n';
    return 1;
  }
}

inline int cmd_pipeline(const std::string& key_path, const std::string& out_path,
                        const std::string& diag_path, const CliConfig& cfg,
                        std::ostream& os = std::cout, std::ostream& err = std::cerr) {
  try {
    PipelineOptions opt = make_pipeline_options(cfg);
    BackendFactory factory = make_backend_factory(cfg, &opt);
    std::vector<Document> docs = parse_documents(read_file(key_path));
    PipelineOutcome outcome = run_pipeline(docs, factory, opt);

    bool aborted = false;
    std::string diag = cat("# seed=", opt.seed, " backend=", cfg.backend, "\n");
    print_report_header(os);
    for (size_t i = 0; i < docs.size(); ++i) {
      std::string id = docs[i].doc_id.empty() ? cat("doc", i) : docs[i].doc_id;
      print_report_row(os, id, outcome.per_document[i]);
      for (const auto& d : outcome.runs[i].diagnostics) diag += cat(id, ": ", d, '\n');
      aborted = aborted || outcome.runs[i].aborted;
    }
    print_report_row(os, cat(key_path, " (all)"), outcome.aggregate);
    long breaks = 0;
    for (const auto& run : outcome.runs)
      for (const auto& d : run.diagnostics)
        if (d.rfind("chain break", 0) == 0) ++breaks;
    if (breaks > 0) os << "chain breaks: " << breaks << " (see diagnostics)\n";

    if (!out_path.empty()) {
      std::string out;
      for (const auto& run : outcome.runs) serialize_document(run.annotated, &out);
      write_file(out_path, out);
    }
    if (!diag_path.empty()) write_file(diag_path, diag);
    return aborted ? 1 : 0;
  } catch (const std::exception& e) {
    err << "pipeline: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace coref
