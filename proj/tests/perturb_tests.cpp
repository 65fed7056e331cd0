#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "sqlrefine/errors.hpp"
#include "sqlrefine/execution.hpp"
#include "sqlrefine/parser.hpp"
#include "sqlrefine/perturb.hpp"

using namespace sqlrefine;

namespace {

struct Env {
    testutil::Fixtures fixtures;
    SchemaGraph campus_schema;
    Db campus;
    Env()
        : fixtures(testutil::make_fixtures(testutil::fresh_temp_dir("perturb"))),
          campus_schema(introspect_schema(fixtures.db_path("campus"))),
          campus(Db::open_readonly(fixtures.db_path("campus"))) {}
};

Env& env() {
    static Env instance;
    return instance;
}

const char* kGoldSql =
    "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id WHERE "
    "e.status = 'Completed'";

void check_verified_difference(const std::string& original, const PerturbationOutcome& outcome,
                               const Db& db) {
    REQUIRE(outcome.applied());
    // independent re-execution pass
    SqlAst gold_ast = parse_sql(original);
    bool order_sensitive = false;
    for (NodeId kid : gold_ast.children(gold_ast.root())) {
        if (gold_ast.node(kid).kind == NodeKind::order_by) order_sensitive = true;
    }
    ExecOutcome a = execute(original, db);
    ExecOutcome b = execute(outcome.perturbed_sql, db);
    CHECK(a.status == ExecOutcome::Status::rows);
    CHECK(b.status == ExecOutcome::Status::rows);
    CHECK_FALSE(exec_equivalent(a, b, order_sensitive));
}

}  // namespace

TEST_CASE("value error replaces the literal with an out-of-domain morphological variant") {
    auto& e = env();
    SqlAst gold = parse_sql(kGoldSql);
    PerturbationOutcome outcome =
        perturb(gold, e.campus_schema, e.campus, ErrorType::value_error, 0);

    REQUIRE(outcome.applied());
    CHECK(outcome.perturbed_sql.find("'Complete'") != std::string::npos);
    CHECK(outcome.injected_labels == ErrorLabelSet::of({ErrorType::value_error}));
    REQUIRE(outcome.mutation_log.size() == 1);
    CHECK(outcome.mutation_log[0].before == "Completed");
    CHECK(outcome.mutation_log[0].after == "Complete");
    CHECK(outcome.mutation_log[0].table == "enrollment");
    CHECK(outcome.mutation_log[0].column == "status");
    CHECK(outcome.mutation_log[0].clause == "where_clause");

    // the replacement left the column domain, and execution verifies it
    ExecOutcome variant = execute(outcome.perturbed_sql, e.campus);
    CHECK(variant.rows.empty());
    check_verified_difference(kGoldSql, outcome, e.campus);

    SUBCASE("deterministic under the same seed") {
        PerturbationOutcome again =
            perturb(gold, e.campus_schema, e.campus, ErrorType::value_error, 0);
        CHECK(again.perturbed_sql == outcome.perturbed_sql);
    }
}

TEST_CASE("operators report inapplicable when no site exists") {
    auto& e = env();
    SqlAst trivial = parse_sql("SELECT 1");
    for (ErrorType label : {ErrorType::table_missing, ErrorType::value_error,
                            ErrorType::attribute_missing, ErrorType::clause_error,
                            ErrorType::condition_missing}) {
        PerturbationOutcome outcome = perturb(trivial, e.campus_schema, e.campus, label, 1);
        CHECK(outcome.status == PerturbationOutcome::Status::inapplicable);
        CHECK(outcome.mutation_log.empty());
    }
}

TEST_CASE("modifier error flips ORDER BY direction with order-sensitive verification") {
    auto& e = env();
    SqlAst gold = parse_sql("SELECT s.name FROM student AS s ORDER BY s.name DESC");
    PerturbationOutcome outcome =
        perturb(gold, e.campus_schema, e.campus, ErrorType::modifier_error, 3);
    REQUIRE(outcome.applied());
    // student names are unique, so the DISTINCT site cannot verify; the
    // direction flip is the only surviving mutation
    CHECK(outcome.perturbed_sql.find("ASC") != std::string::npos);
    REQUIRE(outcome.mutation_log.size() == 1);
    CHECK(outcome.mutation_log[0].before == "DESC");
    CHECK(outcome.mutation_log[0].after == "ASC");

    ExecOutcome a = execute("SELECT s.name FROM student AS s ORDER BY s.name DESC", e.campus);
    ExecOutcome b = execute(outcome.perturbed_sql, e.campus);
    CHECK_FALSE(exec_equivalent(a, b, /*order_sensitive=*/true));
    CHECK(exec_equivalent(a, b, /*order_sensitive=*/false));  // same multiset
}

TEST_CASE("every operator applies somewhere on the fixture corpus") {
    auto& e = env();
    struct Case {
        ErrorType label;
        const char* sql;
    };
    const std::vector<Case> cases = {
        {ErrorType::attribute_mismatch, "SELECT s.name FROM student AS s"},
        {ErrorType::attribute_redundancy, "SELECT s.name FROM student AS s"},
        {ErrorType::attribute_missing, "SELECT s.name, s.age FROM student AS s"},
        {ErrorType::table_mismatch, kGoldSql},
        {ErrorType::table_redundancy, kGoldSql},
        {ErrorType::table_missing,
         "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id"},
        {ErrorType::value_error, kGoldSql},
        {ErrorType::condition_missing, kGoldSql},
        {ErrorType::condition_error, kGoldSql},
        {ErrorType::function_error, "SELECT MAX(s.gpa) FROM student AS s"},
        {ErrorType::clause_error,
         "SELECT c.department, COUNT(*) FROM course AS c GROUP BY c.department"},
        {ErrorType::modifier_error, "SELECT s.name FROM student AS s ORDER BY s.name DESC"},
    };
    for (const auto& test : cases) {
        CAPTURE(error_type_name(test.label));
        CAPTURE(test.sql);
        SqlAst gold = parse_sql(test.sql);
        PerturbationOutcome outcome = perturb(gold, e.campus_schema, e.campus, test.label, 5);
        REQUIRE(outcome.applied());
        CHECK(outcome.injected_labels == ErrorLabelSet::of({test.label}));
        CHECK(!outcome.mutation_log.empty());
        REQUIRE(outcome.perturbed_ast.has_value());
        check_verified_difference(test.sql, outcome, e.campus);
    }
}

TEST_CASE("table mismatch swaps in an existing table that still resolves") {
    auto& e = env();
    SqlAst gold = parse_sql(kGoldSql);
    PerturbationOutcome outcome =
        perturb(gold, e.campus_schema, e.campus, ErrorType::table_mismatch, 0);
    REQUIRE(outcome.applied());
    // the mutated SQL executes successfully against the schema
    ExecOutcome run = execute(outcome.perturbed_sql, e.campus);
    CHECK(run.status == ExecOutcome::Status::rows);
    // the replacement table really is a different existing table
    REQUIRE(outcome.mutation_log.size() == 1);
    CHECK(e.campus_schema.resolve_table(outcome.mutation_log[0].after).has_value());
    CHECK(outcome.mutation_log[0].after != outcome.mutation_log[0].before);
}

TEST_CASE("table redundancy duplicates an existing join under a fresh alias") {
    auto& e = env();
    SqlAst gold = parse_sql(kGoldSql);
    PerturbationOutcome outcome =
        perturb(gold, e.campus_schema, e.campus, ErrorType::table_redundancy, 0);
    REQUIRE(outcome.applied());
    // enrollment now appears twice
    SqlAst mutated = parse_sql(outcome.perturbed_sql);
    int enrollment_refs = 0;
    for (NodeId id : mutated.preorder()) {
        if (mutated.node(id).kind == NodeKind::table_ref &&
            mutated.node(id).attr("table") == "enrollment") {
            ++enrollment_refs;
        }
    }
    CHECK(enrollment_refs == 2);
}

TEST_CASE("condition missing drops one conjunct when the WHERE is a conjunction") {
    auto& e = env();
    SqlAst gold = parse_sql("SELECT s.name FROM student AS s WHERE s.age < 21 AND s.gpa > 3.0");
    PerturbationOutcome outcome =
        perturb(gold, e.campus_schema, e.campus, ErrorType::condition_missing, 0);
    REQUIRE(outcome.applied());
    CHECK(outcome.perturbed_sql.find("WHERE") != std::string::npos);  // one conjunct stays
    CHECK(outcome.perturbed_sql.find("AND") == std::string::npos);
}

TEST_CASE("composition applies both operators and verifies jointly") {
    auto& e = env();
    SqlAst gold = parse_sql(
        "SELECT s.name, s.age FROM student AS s JOIN enrollment AS e ON s.id = e.student_id");
    PerturbationOutcome outcome =
        compose(gold, e.campus_schema, e.campus,
                {ErrorType::attribute_missing, ErrorType::table_missing}, 0);
    REQUIRE(outcome.applied());
    CHECK(outcome.injected_labels ==
          ErrorLabelSet::of({ErrorType::attribute_missing, ErrorType::table_missing}));
    CHECK(outcome.mutation_log.size() >= 2);
    check_verified_difference(
        "SELECT s.name, s.age FROM student AS s JOIN enrollment AS e ON s.id = e.student_id",
        outcome, e.campus);
}

TEST_CASE("composition preconditions and compatibility") {
    auto& e = env();
    SqlAst gold = parse_sql(kGoldSql);
    SUBCASE("identical labels violate the precondition") {
        CHECK_THROWS_AS(compose(gold, e.campus_schema, e.campus,
                                {ErrorType::attribute_missing, ErrorType::attribute_missing}, 0),
                        std::invalid_argument);
    }
    SUBCASE("same-family pairs are excluded before mutation") {
        CHECK_THROWS_AS(compose(gold, e.campus_schema, e.campus,
                                {ErrorType::attribute_mismatch, ErrorType::attribute_missing}, 0),
                        IncompatiblePair);
        CHECK_THROWS_AS(compose(gold, e.campus_schema, e.campus,
                                {ErrorType::table_mismatch, ErrorType::table_redundancy}, 0),
                        IncompatiblePair);
        CHECK_THROWS_AS(compose(gold, e.campus_schema, e.campus,
                                {ErrorType::condition_missing, ErrorType::condition_error}, 0),
                        IncompatiblePair);
    }
    SUBCASE("the compatibility table is symmetric and excludes exactly the declared pairs") {
        int excluded = 0;
        for (int i = 1; i <= kErrorTypeCount; ++i) {
            for (int j = 1; j <= kErrorTypeCount; ++j) {
                ErrorType a = static_cast<ErrorType>(i);
                ErrorType b = static_cast<ErrorType>(j);
                CHECK(compatible_pair(a, b) == compatible_pair(b, a));
                if (i < j && !compatible_pair(a, b)) ++excluded;
            }
        }
        CHECK(excluded == 7);  // 3 attribute pairs + 3 table pairs + the condition pair
        CHECK(compatible_pair(ErrorType::attribute_missing, ErrorType::table_missing));
        CHECK(compatible_pair(ErrorType::value_error, ErrorType::condition_missing));
    }
}

TEST_CASE("composition reports inapplicable on site exhaustion") {
    auto& e = env();
    // the joined table's column is used in the WHERE clause, so table_missing
    // has no applicable site before or after the second operator
    SqlAst gold = parse_sql(kGoldSql);
    PerturbationOutcome outcome =
        compose(gold, e.campus_schema, e.campus,
                {ErrorType::table_missing, ErrorType::condition_missing}, 0);
    CHECK(outcome.status == PerturbationOutcome::Status::inapplicable);
}

TEST_CASE("unreadable databases raise ExecutionError, distinct from inapplicable") {
    auto& e = env();
    SqlAst gold = parse_sql(kGoldSql);
    Db closed;  // never opened
    CHECK_THROWS_AS(perturb(gold, e.campus_schema, closed, ErrorType::value_error, 0),
                    ExecutionError);
    CHECK_THROWS_AS(compose(gold, e.campus_schema, closed,
                            {ErrorType::value_error, ErrorType::table_missing}, 0),
                    ExecutionError);
}

TEST_CASE("perturbed asts re-parse cleanly and satisfy span invariants") {
    auto& e = env();
    SqlAst gold = parse_sql(kGoldSql);
    for (int seed = 0; seed < 4; ++seed) {
        PerturbationOutcome outcome =
            perturb(gold, e.campus_schema, e.campus, ErrorType::condition_error,
                    static_cast<std::uint64_t>(seed));
        if (!outcome.applied()) continue;
        REQUIRE(outcome.perturbed_ast.has_value());
        const SqlAst& ast = *outcome.perturbed_ast;
        CHECK(ast.node(ast.root()).span.first == 0);
        CHECK(ast.node(ast.root()).span.last == ast.source_tokens().size() - 1);
        CHECK(structurally_equal(ast, parse_sql(outcome.perturbed_sql)));
    }
}
