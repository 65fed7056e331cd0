#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sqlrefine/backend.hpp"
#include "sqlrefine/db.hpp"
#include "sqlrefine/perturb.hpp"
#include "sqlrefine/schema_graph.hpp"
#include "sqlrefine/taxonomy.hpp"

namespace sqlrefine {

/// One ingested corpus row: gold SQL plus an optional model prediction.
struct CorpusRow {
    std::string question_id;
    std::string db_id;
    std::string question;
    std::string gold_sql;
    std::optional<std::string> predicted_sql;
    std::optional<bool> pred_correct;
};

std::vector<CorpusRow> load_corpus_jsonl(const std::string& path);
std::string corpus_to_jsonl(const std::vector<CorpusRow>& rows);

enum class SampleSource { rule_single, rule_compound, llm_injected, gold_correct, pred_correct };

const char* sample_source_name(SampleSource source);
std::optional<SampleSource> sample_source_by_name(const std::string& name);

/// A labeled (sql, error-label set, provenance) record for detector
/// training or evaluation. Gold SQL and the mutation log ride along so
/// downstream verification and oracle runs stay self-contained.
struct SynthSample {
    std::string question_id;
    std::string db_id;
    std::string question;
    std::string sql;
    ErrorLabelSet labels;
    std::vector<std::string> tokens;
    SampleSource source = SampleSource::gold_correct;
    std::string gold_sql;
    std::vector<MutationRecord> mutation_log;
};

std::string synth_samples_to_jsonl(const std::vector<SynthSample>& samples);
std::vector<SynthSample> load_synth_jsonl(const std::string& path);

/// LLM-assisted error injection: the assistant sees predicted and gold SQL
/// and must return labels plus a refined SQL; accepted only when the
/// refined SQL is execution-equivalent to gold. Transport failures
/// propagate as BackendError.
struct InjectionResult {
    bool accepted = false;
    ErrorLabelSet labels;
    std::string refined_sql;
    std::string reject_reason;  // not_equivalent | unparseable_labels | backend_error
};

InjectionResult llm_inject(const std::string& question, const QuestionSchemaStructure& qss,
                           const std::string& predicted_sql, const std::string& gold_sql,
                           const Db& db, ChatBackend& backend,
                           std::int64_t exec_timeout_ms = 30000);

struct PartitionTargets {
    double no_error = 0.490;
    double rule_single = 0.116;
    double rule_compound = 0.129;
    double llm = 0.265;
};

struct SynthConfig {
    double target_correct_ratio = 0.49;
    double ratio_tolerance = 0.02;
    int per_label_minimum = 1;
    double compound_fraction = 0.53;  // share of rule-based samples that are compound
    std::uint64_t seed = 0;
    PartitionTargets targets;
    std::int64_t exec_timeout_ms = 30000;
};

struct SynthReport {
    int no_error_count = 0;
    int rule_single_count = 0;
    int rule_compound_count = 0;
    int llm_count = 0;
    int llm_rejected = 0;
    int incorrect_pool = 0;
    double correct_ratio = 0.0;
    bool ratio_within_tolerance = false;
    std::map<std::string, int> per_label_counts;
    std::vector<std::string> warnings;

    int total() const {
        return no_error_count + rule_single_count + rule_compound_count + llm_count;
    }
    std::string to_json(const SynthConfig& config) const;
};

struct SynthResult {
    std::vector<SynthSample> samples;
    SynthReport report;
};

/// Build the balanced dataset in the stage order: LLM-assisted injection
/// first (when an assistant backend is configured), then rule-based
/// perturbation to complement it, then no-error sampling up to the
/// configured correct:incorrect ratio. Deterministic under (corpus,
/// config, seed). Throws InsufficientCorpus when per-label minimums cannot
/// be met.
SynthResult synthesize_dataset(const std::vector<CorpusRow>& corpus, const std::string& db_root,
                               const SynthConfig& config, ChatBackend* assistant);

/// Locate "<db_id>" under a database root: tries db_root/db_id.sqlite,
/// db_root/db_id/db_id.sqlite, then db_id as a literal path.
std::string resolve_db_path(const std::string& db_root, const std::string& db_id);

}  // namespace sqlrefine
