#include <benchmark/benchmark.h>

#include "sqlrefine/parser.hpp"

namespace {

const char* kSimpleSql = "SELECT name FROM student WHERE age > 20";
const char* kJoinSql =
    "SELECT s.name, c.name, AVG(e.grade) FROM student AS s JOIN enrollment AS e ON s.id = "
    "e.student_id JOIN course AS c ON e.course_id = c.id WHERE e.status = 'Completed' AND "
    "c.credits >= 3 GROUP BY s.name, c.name HAVING AVG(e.grade) > 80 ORDER BY s.name DESC "
    "LIMIT 10";
const char* kSubquerySql =
    "SELECT t.status FROM (SELECT e.status FROM enrollment AS e WHERE e.student_id IN "
    "(SELECT s.id FROM student AS s WHERE s.gpa > 3.0)) AS t";

void BM_ParseSimple(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(sqlrefine::parse_sql(kSimpleSql));
    }
}
BENCHMARK(BM_ParseSimple);

void BM_ParseJoinAggregate(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(sqlrefine::parse_sql(kJoinSql));
    }
}
BENCHMARK(BM_ParseJoinAggregate);

void BM_ParseNestedSubqueries(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(sqlrefine::parse_sql(kSubquerySql));
    }
}
BENCHMARK(BM_ParseNestedSubqueries);

void BM_FlattenJoinAggregate(benchmark::State& state) {
    sqlrefine::SqlAst ast = sqlrefine::parse_sql(kJoinSql);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sqlrefine::flatten_ast(ast));
    }
}
BENCHMARK(BM_FlattenJoinAggregate);

void BM_CollectSchemaReferences(benchmark::State& state) {
    sqlrefine::SqlAst ast = sqlrefine::parse_sql(kJoinSql);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sqlrefine::collect_schema_references(ast));
    }
}
BENCHMARK(BM_CollectSchemaReferences);

}  // namespace

BENCHMARK_MAIN();
