#include "sqlrefine/db.hpp"

#include <sqlite3.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <utility>

#include "sqlrefine/errors.hpp"

namespace sqlrefine {

std::string SqlValue::to_display() const {
    switch (kind) {
        case Kind::null:
            return "NULL";
        case Kind::integer:
            return std::to_string(int_value);
        case Kind::real: {
            std::ostringstream out;
            out << real_value;
            return out.str();
        }
        case Kind::text:
            return "'" + text_value + "'";
        case Kind::blob:
            return "<blob:" + std::to_string(text_value.size()) + ">";
    }
    return "NULL";
}

namespace {

SqlValue column_value(sqlite3_stmt* stmt, int col) {
    switch (sqlite3_column_type(stmt, col)) {
        case SQLITE_INTEGER:
            return SqlValue::integer(sqlite3_column_int64(stmt, col));
        case SQLITE_FLOAT:
            return SqlValue::real(sqlite3_column_double(stmt, col));
        case SQLITE_TEXT: {
            const unsigned char* text = sqlite3_column_text(stmt, col);
            int n = sqlite3_column_bytes(stmt, col);
            return SqlValue::text(std::string(reinterpret_cast<const char*>(text),
                                              static_cast<std::size_t>(n)));
        }
        case SQLITE_BLOB: {
            const void* data = sqlite3_column_blob(stmt, col);
            int n = sqlite3_column_bytes(stmt, col);
            SqlValue v;
            v.kind = SqlValue::Kind::blob;
            v.text_value.assign(static_cast<const char*>(data), static_cast<std::size_t>(n));
            return v;
        }
        default:
            return SqlValue::null();
    }
}

void bind_value(sqlite3_stmt* stmt, int index, const SqlValue& v) {
    switch (v.kind) {
        case SqlValue::Kind::null:
            sqlite3_bind_null(stmt, index);
            break;
        case SqlValue::Kind::integer:
            sqlite3_bind_int64(stmt, index, v.int_value);
            break;
        case SqlValue::Kind::real:
            sqlite3_bind_double(stmt, index, v.real_value);
            break;
        case SqlValue::Kind::text:
            sqlite3_bind_text(stmt, index, v.text_value.data(),
                              static_cast<int>(v.text_value.size()), SQLITE_TRANSIENT);
            break;
        case SqlValue::Kind::blob:
            sqlite3_bind_blob(stmt, index, v.text_value.data(),
                              static_cast<int>(v.text_value.size()), SQLITE_TRANSIENT);
            break;
    }
}

}  // namespace

Db Db::open_readonly(const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError("database file not found: " + path);
    Db db;
    db.path_ = path;
    int rc = sqlite3_open_v2(path.c_str(), &db.handle_, SQLITE_OPEN_READONLY, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = db.handle_ ? sqlite3_errmsg(db.handle_) : "open failed";
        throw IoError("cannot open database " + path + ": " + msg);
    }
    // Fail fast on files SQLite opens lazily but cannot actually read.
    sqlite3_stmt* stmt = nullptr;
    rc = sqlite3_prepare_v2(db.handle_, "SELECT count(*) FROM sqlite_master", -1, &stmt, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = sqlite3_errmsg(db.handle_);
        throw CorruptDatabase("unreadable database " + path + ": " + msg);
    }
    rc = sqlite3_step(stmt);
    sqlite3_finalize(stmt);
    if (rc != SQLITE_ROW) throw CorruptDatabase("unreadable database " + path);
    return db;
}

Db Db::open_memory() {
    Db db;
    db.path_ = ":memory:";
    if (sqlite3_open(":memory:", &db.handle_) != SQLITE_OK) {
        throw IoError("cannot open in-memory database");
    }
    return db;
}

Db Db::open_readwrite(const std::string& path) {
    Db db;
    db.path_ = path;
    int rc = sqlite3_open_v2(path.c_str(), &db.handle_,
                             SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = db.handle_ ? sqlite3_errmsg(db.handle_) : "open failed";
        throw IoError("cannot open database " + path + ": " + msg);
    }
    return db;
}

Db::~Db() {
    if (handle_) sqlite3_close_v2(handle_);
}

Db::Db(Db&& other) noexcept : handle_(other.handle_), path_(std::move(other.path_)) {
    other.handle_ = nullptr;
}

Db& Db::operator=(Db&& other) noexcept {
    if (this != &other) {
        if (handle_) sqlite3_close_v2(handle_);
        handle_ = other.handle_;
        path_ = std::move(other.path_);
        other.handle_ = nullptr;
    }
    return *this;
}

std::vector<Row> Db::query(const std::string& sql) const {
    return query(sql, {});
}

std::vector<Row> Db::query(const std::string& sql, const std::vector<SqlValue>& binds) const {
    if (!handle_) throw ExecutionError("database handle not open");
    sqlite3_stmt* stmt = nullptr;
    int rc = sqlite3_prepare_v2(handle_, sql.c_str(), -1, &stmt, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = sqlite3_errmsg(handle_);
        throw ExecutionError(msg);
    }
    for (std::size_t i = 0; i < binds.size(); ++i) {
        bind_value(stmt, static_cast<int>(i + 1), binds[i]);
    }
    std::vector<Row> rows;
    while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
        int n = sqlite3_column_count(stmt);
        Row row;
        row.reserve(static_cast<std::size_t>(n));
        for (int c = 0; c < n; ++c) row.push_back(column_value(stmt, c));
        rows.push_back(std::move(row));
    }
    if (rc != SQLITE_DONE) {
        std::string msg = sqlite3_errmsg(handle_);
        sqlite3_finalize(stmt);
        throw ExecutionError(msg);
    }
    sqlite3_finalize(stmt);
    return rows;
}

void Db::exec(const std::string& sql) const {
    if (!handle_) throw ExecutionError("database handle not open");
    char* err = nullptr;
    if (sqlite3_exec(handle_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "exec failed";
        sqlite3_free(err);
        throw ExecutionError(msg);
    }
}

}  // namespace sqlrefine
