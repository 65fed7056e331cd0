#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sqlrefine/ast.hpp"
#include "sqlrefine/db.hpp"
#include "sqlrefine/schema_graph.hpp"
#include "sqlrefine/taxonomy.hpp"

namespace sqlrefine {

struct MutationRecord {
    NodeId node = 0;  // node in the pre-mutation ast
    std::string before;
    std::string after;
    std::string table;
    std::string column;
    std::string clause;  // clause kind name
};

struct PerturbationOutcome {
    enum class Status { applied, inapplicable };

    Status status = Status::inapplicable;
    std::optional<SqlAst> perturbed_ast;  // re-parsed from the flattened SQL
    std::string perturbed_sql;
    ErrorLabelSet injected_labels;
    std::vector<MutationRecord> mutation_log;

    bool applied() const { return status == Status::applied; }
};

/// Apply the rule-based operator for one error type. The seed fixes the
/// site choice; each candidate mutation is execution-verified (the mutated
/// SQL must execute successfully and produce a different result; order-
/// sensitive when the original has a top-level ORDER BY). When no site
/// survives verification the outcome is `inapplicable`. Throws
/// ExecutionError when the database itself is unreadable.
PerturbationOutcome perturb(const SqlAst& ast, const SchemaGraph& schema, const Db& db,
                            ErrorType label, std::uint64_t seed);

/// Compose two distinct, compatible operators; both mutations are applied
/// and jointly execution-verified. Incompatible pairs are rejected before
/// any mutation (IncompatiblePair); identical labels violate the
/// precondition (std::invalid_argument).
PerturbationOutcome compose(const SqlAst& ast, const SchemaGraph& schema, const Db& db,
                            std::pair<ErrorType, ErrorType> labels, std::uint64_t seed);

/// The composition compatibility table: same-family pairs and the
/// condition pair are excluded, everything else may compose.
bool compatible_pair(ErrorType a, ErrorType b);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace sqlrefine
