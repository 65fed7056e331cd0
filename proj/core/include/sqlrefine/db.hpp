#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

struct sqlite3;

namespace sqlrefine {

/// One cell of a result row.
struct SqlValue {
    enum class Kind { null, integer, real, text, blob };

    Kind kind = Kind::null;
    std::int64_t int_value = 0;
    double real_value = 0.0;
    std::string text_value;  // also holds blob bytes

    static SqlValue null() { return SqlValue{}; }
    static SqlValue integer(std::int64_t v) { return SqlValue{Kind::integer, v, 0.0, {}}; }
    static SqlValue real(double v) { return SqlValue{Kind::real, 0, v, {}}; }
    static SqlValue text(std::string v) { return SqlValue{Kind::text, 0, 0.0, std::move(v)}; }

    bool is_numeric() const { return kind == Kind::integer || kind == Kind::real; }
    double as_double() const { return kind == Kind::integer ? static_cast<double>(int_value) : real_value; }

    /// Rendering used in serialized feedback and reports.
    std::string to_display() const;
};

using Row = std::vector<SqlValue>;

/// Read-only SQLite connection. One handle per worker; not shared across
/// threads.
class Db {
public:
    /// Opens an existing database file read-only. Throws IoError when the
    /// file is missing and CorruptDatabase when SQLite rejects it.
    static Db open_readonly(const std::string& path);
    /// In-memory scratch database (read-write); fixtures and tests only.
    static Db open_memory();
    /// Create-or-open a file read-write; fixture construction only.
    static Db open_readwrite(const std::string& path);

    Db() = default;
    ~Db();
    Db(Db&& other) noexcept;
    Db& operator=(Db&& other) noexcept;
    Db(const Db&) = delete;
    Db& operator=(const Db&) = delete;

    bool valid() const { return handle_ != nullptr; }
    sqlite3* raw() const { return handle_; }
    const std::string& path() const { return path_; }

    /// Run a query, collecting every row. Throws ExecutionError on failure.
    std::vector<Row> query(const std::string& sql) const;
    std::vector<Row> query(const std::string& sql, const std::vector<SqlValue>& binds) const;

    /// Execute DDL/DML (fixture construction). Throws ExecutionError.
    void exec(const std::string& sql) const;

private:
    sqlite3* handle_ = nullptr;
    std::string path_;
};

}  // namespace sqlrefine
