#include "query_gen.hpp"

#include <vector>

namespace sqlrefine::testutil {

namespace {

struct Gen {
    std::mt19937_64& rng;

    int pick(int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }
    bool chance(int percent) { return pick(100) < percent; }

    std::string table() {
        static const std::vector<std::string> tables = {"alpha", "beta", "gamma", "delta",
                                                        "long_name_table", "t1"};
        return tables[pick(static_cast<int>(tables.size()))];
    }

    std::string column() {
        static const std::vector<std::string> columns = {"id",    "name",  "value", "status",
                                                         "score", "state", "kind",  "amount"};
        return columns[pick(static_cast<int>(columns.size()))];
    }

    std::string identifier() {
        std::string name = column();
        if (chance(10)) return "\"" + name + "\"";  // quoted identifier
        return name;
    }

    std::string literal() {
        switch (pick(4)) {
            case 0: return std::to_string(pick(1000));
            case 1: return std::to_string(pick(100)) + "." + std::to_string(pick(9));
            case 2: return "'txt" + std::to_string(pick(50)) + "'";
            default: return "'it''s " + std::to_string(pick(9)) + "'";
        }
    }

    std::string value_expr(int depth) {
        int roll = pick(10);
        if (roll < 4) return qualified_column();
        if (roll < 6) return literal();
        if (roll < 8) {
            static const std::vector<std::string> ops = {"+", "-", "*", "/"};
            return qualified_column() + " " + ops[static_cast<std::size_t>(pick(4))] + " " +
                   literal();
        }
        if (roll == 8) {
            static const std::vector<std::string> aggs = {"COUNT", "SUM", "AVG", "MIN", "MAX"};
            return aggs[static_cast<std::size_t>(pick(5))] + "(" + qualified_column() + ")";
        }
        if (depth > 0) return "(SELECT " + column() + " FROM " + table() + " LIMIT 1)";
        return qualified_column();
    }

    std::string qualified_column() {
        if (chance(50)) return "a." + column();
        return column();
    }

    std::string comparison(int depth) {
        int roll = pick(8);
        std::string lhs = qualified_column();
        switch (roll) {
            case 0: return lhs + " = " + literal();
            case 1: return lhs + " != " + literal();
            case 2: return lhs + " < " + std::to_string(pick(500));
            case 3: return lhs + " >= " + std::to_string(pick(500));
            case 4: return lhs + " LIKE 'p%" + std::to_string(pick(9)) + "'";
            case 5: return lhs + " BETWEEN " + std::to_string(pick(50)) + " AND " +
                           std::to_string(50 + pick(100));
            case 6:
                if (depth > 0 && chance(50)) {
                    return lhs + " IN (SELECT " + column() + " FROM " + table() + ")";
                }
                return lhs + " IN (" + literal() + ", " + literal() + ")";
            default: return lhs + (chance(50) ? " IS NULL" : " IS NOT NULL");
        }
    }

    std::string condition(int depth, int budget = 2) {
        std::string first = comparison(depth);
        if (budget <= 0) return first;
        int roll = pick(10);
        if (roll < 3) return first + " AND " + condition(depth, budget - 1);
        if (roll < 5) return first + " OR " + condition(depth, budget - 1);
        if (roll == 5) return "NOT " + first;
        if (roll == 6) return "(" + condition(depth, budget - 1) + ")";
        return first;
    }

    std::string select_statement(int depth) {
        std::string sql = "SELECT ";
        if (chance(15)) sql += "DISTINCT ";
        int items = 1 + pick(3);
        bool has_aggregate = false;
        std::vector<std::string> select_items;
        for (int i = 0; i < items; ++i) {
            std::string item = value_expr(depth);
            if (item.find('(') != std::string::npos && item.find("SELECT") == std::string::npos) {
                has_aggregate = true;
            }
            if (chance(20)) item += " AS col" + std::to_string(i);
            select_items.push_back(item);
            sql += item;
            if (i + 1 < items) sql += ", ";
        }
        sql += " FROM " + table() + " AS a";
        if (chance(30)) {
            static const std::vector<std::string> joins = {"JOIN", "LEFT JOIN", "INNER JOIN"};
            sql += " " + joins[static_cast<std::size_t>(pick(3))] + " " + table() + " AS b ON a." +
                   column() + " = b." + column();
        }
        if (chance(60)) sql += " WHERE " + condition(depth);
        bool grouped = false;
        if (has_aggregate && chance(50)) {
            sql += " GROUP BY a." + column();
            grouped = true;
        }
        if (grouped && chance(40)) sql += " HAVING COUNT(*) > " + std::to_string(pick(5));
        if (chance(40)) {
            sql += " ORDER BY " + qualified_column();
            if (chance(50)) sql += chance(50) ? " DESC" : " ASC";
            if (chance(30)) sql += ", " + qualified_column();
        }
        if (chance(30)) {
            sql += " LIMIT " + std::to_string(1 + pick(20));
            if (chance(30)) sql += " OFFSET " + std::to_string(pick(5));
        }
        return sql;
    }
};

}  // namespace

std::string random_query(std::mt19937_64& rng, int max_depth) {
    Gen gen{rng};
    return gen.select_statement(max_depth);
}

}  // namespace sqlrefine::testutil
