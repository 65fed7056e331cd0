#pragma once

#include <string>
#include <vector>

#include "sqlrefine/ast.hpp"
#include "sqlrefine/schema_graph.hpp"

namespace sqlrefine::testutil {

struct GoldSample {
    std::string question_id;
    std::string db_id;
    std::string question;
    std::string gold_sql;
};

struct Fixtures {
    std::string root_dir;  // contains campus.sqlite, library.sqlite, shop.sqlite
    std::vector<GoldSample> corpus;

    std::string db_path(const std::string& db_id) const {
        return root_dir + "/" + db_id + ".sqlite";
    }
};

/// Build the three fixture databases plus the gold corpus under `dir`
/// (created if needed). Deterministic content.
Fixtures make_fixtures(const std::string& dir);

/// Fresh unique scratch directory under the system temp dir.
std::string fresh_temp_dir(const std::string& tag);

/// Schema-linking result derived from a gold SQL: the tables and columns
/// the query references, resolved against the schema.
SchemaLinkingResult sl_from_sql(const SqlAst& gold_ast, const SchemaGraph& schema);

/// Parser corpus: every gold SQL plus enumerated feature variants (joins,
/// aggregation, GROUP BY/HAVING, ORDER BY, subqueries, DISTINCT); at least
/// 200 distinct queries.
std::vector<std::string> parser_corpus();

}  // namespace sqlrefine::testutil
