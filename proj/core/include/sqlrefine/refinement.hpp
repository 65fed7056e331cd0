#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sqlrefine/ast.hpp"
#include "sqlrefine/backend.hpp"
#include "sqlrefine/detection.hpp"
#include "sqlrefine/parser.hpp"
#include "sqlrefine/schema_graph.hpp"
#include "sqlrefine/taxonomy.hpp"

namespace sqlrefine {

struct SchemaElementRef {
    std::string table;
    std::string column;  // empty for whole-table references

    std::string qualified() const { return column.empty() ? table : table + "." + column; }
};

/// Per-error localization: AST nodes, schema elements, and the completed
/// guideline. Unresolvable backend references downgrade to whole-clause
/// localization instead of failing the sample.
struct Localization {
    ErrorType error_type = ErrorType::value_error;
    std::vector<NodeId> error_nodes;
    std::vector<SchemaElementRef> schema_elements;
    FilledGuideline guideline;
    bool downgraded = false;
    std::string warning;
};

struct RefinementExample {
    std::string erroneous_sql;
    std::string corrected_sql;
    std::string rationale;
};

/// Few-shot demonstration store, type-filtered with deterministic order.
class ExampleStore {
public:
    /// Demonstrations authored against the campus fixture schema; each pair
    /// is execution-verified in the test suite.
    static const ExampleStore& builtin();

    void add(ErrorType type, RefinementExample example);
    std::vector<RefinementExample> retrieve(ErrorType type, std::size_t k = 2) const;
    const std::map<ErrorType, std::vector<RefinementExample>>& all() const { return store_; }

private:
    std::map<ErrorType, std::vector<RefinementExample>> store_;
};

/// Per-error refinement context entry.
struct RefinementEntry {
    ErrorType error_type = ErrorType::value_error;
    AstFragment subtree;
    std::string subtree_sql;
    SchemaGraph subgraph;
    std::vector<LinkEdge> link_edges;
    FilledGuideline guideline;
    std::vector<RefinementExample> examples;
};

/// The localization request: detection input plus detected labels plus the
/// unfilled guideline templates.
std::string localization_request(const DetectionInput& input, const ErrorLabelSet& labels);

/// Ask the localization backend to fill one guideline per detected label,
/// then resolve its answers: node spans map back to AST ids (exact
/// token-span lookup, then unique-substring fallback), schema names resolve
/// against the full graph. Unresolvable references downgrade with a
/// warning. Throws MalformedLocalization after retries; propagates
/// BackendError.
std::vector<Localization> localize(const DetectionInput& input, const ErrorLabelSet& final_labels,
                                   const SqlAst& ast, const SchemaGraph& full_schema,
                                   ChatBackend& backend, int max_retries = 2);

/// Build a whole-statement fallback localization for one label.
Localization downgraded_localization(ErrorType type, const std::string& warning);

RefinementEntry extract_context(const SqlAst& ast, const QuestionSchemaStructure& qss,
                                const Localization& loc, const ExampleStore& store,
                                std::size_t examples_k = 2);

struct RefineResult {
    std::string sql;
    bool failed = false;      // RefinementFailed: the original SQL is returned
    int backend_calls = 0;
};

/// Single-pass refinement: one backend call carrying every context entry in
/// priority order plus the original SQL (and the user question when given).
/// The response must parse as SQL; parse failures retry up to
/// `max_retries`, after which the original SQL is returned with `failed`
/// set.
RefineResult refine(const std::string& original_sql, std::vector<RefinementEntry> entries,
                    ChatBackend& backend, int max_retries = 2,
                    const std::string& question = "");

// ---- end-to-end pipeline ----

struct PipelineSample {
    std::string question_id;
    std::string db_id;
    std::string question;
    std::string predicted_sql;
    std::string gold_sql;  // evaluation only; never shown to backends
    std::optional<SchemaLinkingResult> schema_linking;
};

struct PipelineBackends {
    BackendPtr detector;
    BackendPtr localizer;
    BackendPtr refiner;
};

struct PipelineRecord {
    std::string question_id;
    std::string original_sql;
    DetectionResult detection;
    std::vector<Localization> localizations;
    std::string refined_sql;
    std::string status;  // ok | no_error | refinement_failed | detector_error | ...
    int refiner_calls = 0;
};

/// Detection followed by error-guided refinement for one sample. Per-stage
/// failures are recorded in the status and fall back to the original SQL;
/// the call itself never throws on backend trouble.
PipelineRecord run_pipeline(const PipelineSample& sample, const Db* db,
                            const SchemaGraph& schema, const PipelineBackends& backends,
                            std::int64_t exec_timeout_ms = 30000);

}  // namespace sqlrefine
