#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace sqlrefine {

/// Syntax error while parsing SQL. Carries the offending token index.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t position, std::string message)
        : std::runtime_error("parse error at token " + std::to_string(position) + ": " + message),
          position_(position),
          detail_(std::move(message)) {}

    std::size_t position() const noexcept { return position_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t position_;
    std::string detail_;
};

class UnknownNode : public std::runtime_error {
public:
    explicit UnknownNode(std::size_t id)
        : std::runtime_error("unknown AST node id " + std::to_string(id)), id_(id) {}
    std::size_t id() const noexcept { return id_; }

private:
    std::size_t id_;
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class CorruptDatabase : public std::runtime_error {
public:
    explicit CorruptDatabase(const std::string& what) : std::runtime_error(what) {}
};

class UnknownColumn : public std::runtime_error {
public:
    UnknownColumn(const std::string& table, const std::string& column)
        : std::runtime_error("unknown column " + table + "." + column) {}
};

class UnresolvedLinkTarget : public std::runtime_error {
public:
    explicit UnresolvedLinkTarget(const std::string& name)
        : std::runtime_error("schema linking result references unknown element: " + name),
          name_(name) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

class UnknownToken : public std::runtime_error {
public:
    explicit UnknownToken(const std::string& surface)
        : std::runtime_error("unknown error token: " + surface) {}
};

/// Token indices 13..N are recognized but not mapped to any error type.
class ReservedToken : public std::runtime_error {
public:
    explicit ReservedToken(int index)
        : std::runtime_error("reserved error token index " + std::to_string(index)),
          index_(index) {}
    int index() const noexcept { return index_; }

private:
    int index_;
};

class IncompatiblePair : public std::runtime_error {
public:
    IncompatiblePair(const std::string& a, const std::string& b)
        : std::runtime_error("incompatible perturbation pair: " + a + " + " + b) {}
};

class ExecutionError : public std::runtime_error {
public:
    explicit ExecutionError(const std::string& what) : std::runtime_error(what) {}
};

class InsufficientCorpus : public std::runtime_error {
public:
    explicit InsufficientCorpus(const std::string& what) : std::runtime_error(what) {}
};

class InconsistentRecords : public std::runtime_error {
public:
    explicit InconsistentRecords(const std::string& what) : std::runtime_error(what) {}
};

// Backend transport failures. Distinct from contract-level rejections so
// callers can separate "the wire broke" from "the model answered badly".
class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

class AuthError : public BackendError {
public:
    explicit AuthError(const std::string& what) : BackendError(what) {}
};

class RateLimited : public BackendError {
public:
    RateLimited(const std::string& what, double retry_after_seconds)
        : BackendError(what), retry_after_(retry_after_seconds) {}
    double retry_after_seconds() const noexcept { return retry_after_; }

private:
    double retry_after_;
};

class TimeoutError : public BackendError {
public:
    explicit TimeoutError(const std::string& what) : BackendError(what) {}
};

class ProtocolError : public BackendError {
public:
    explicit ProtocolError(const std::string& what) : BackendError(what) {}
};

/// An unconstrained backend kept violating the error-token output grammar.
class InvalidOutput : public std::runtime_error {
public:
    explicit InvalidOutput(const std::string& raw)
        : std::runtime_error("backend output violates the error-token grammar: " + raw),
          raw_(raw) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class MalformedLocalization : public std::runtime_error {
public:
    explicit MalformedLocalization(const std::string& what) : std::runtime_error(what) {}
};

class MissingGold : public std::runtime_error {
public:
    explicit MissingGold(const std::string& sample_id)
        : std::runtime_error("oracle fixture lacks gold data for sample " + sample_id) {}
};

}  // namespace sqlrefine
