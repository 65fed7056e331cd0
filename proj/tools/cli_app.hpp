#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sqlrefine/backend.hpp"
#include "sqlrefine/perturb.hpp"
#include "sqlrefine/schema_graph.hpp"
#include "sqlrefine/synthesis.hpp"
#include "sqlrefine/taxonomy.hpp"

namespace sqlrefine::cli {

// exit codes: 0 success, 1 runtime failure, 2 configuration/IO failure
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct BackendSection {
    std::string type = "none";  // http | oracle | fixed | failing | none
    BackendConfig http;
    std::string fixed_response;
    std::vector<std::pair<std::string, std::string>> fixed_rules;
};

struct RunConfig {
    std::string corpus;
    std::string db_root;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    int jobs = 1;
    bool order_sensitive = false;
    std::int64_t exec_timeout_ms = 30000;
    BackendSection detector;
    BackendSection localizer;
    BackendSection refiner;
    BackendSection assistant;
    SynthConfig synthesis;

    static RunConfig load(const std::string& path);
    std::string to_json() const;
};

/// One row of a run corpus: a prediction to detect/refine plus the gold SQL
/// for evaluation and optional oracle data (labels, mutation log).
struct RunRow {
    std::string question_id;
    std::string db_id;
    std::string question;
    std::string gold_sql;
    std::string predicted_sql;
    std::optional<ErrorLabelSet> labels;
    std::vector<MutationRecord> mutation_log;
    std::optional<SchemaLinkingResult> schema_linking;
    std::optional<ErrorLabelSet> gold_labels;
};

std::vector<RunRow> load_run_corpus(const std::string& path);
std::string run_corpus_to_jsonl(const std::vector<RunRow>& rows);

int cmd_introspect(const std::string& db_path, bool as_json, std::ostream& out,
                   std::ostream& err);
int cmd_taxonomy_export(const std::optional<std::string>& out_file, std::ostream& out,
                        std::ostream& err);
int cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_detect(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_refine(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_eval(const std::string& records_path, const std::optional<std::string>& out_dir,
             std::optional<std::int64_t> total, std::ostream& out, std::ostream& err);

/// Full argv entry point (argv[0] ignored).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sqlrefine::cli
