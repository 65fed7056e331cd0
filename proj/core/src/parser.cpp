#include "sqlrefine/parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <sstream>
#include <unordered_set>

#include "sqlrefine/errors.hpp"

namespace sqlrefine {

namespace {

std::string upper(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

const std::unordered_set<std::string>& keyword_set() {
    static const std::unordered_set<std::string> kws = {
        "SELECT", "DISTINCT", "ALL",   "FROM",    "WHERE",  "GROUP", "BY",     "HAVING",
        "ORDER",  "LIMIT",    "OFFSET", "JOIN",   "LEFT",   "RIGHT", "FULL",   "OUTER",
        "INNER",  "CROSS",    "ON",    "AS",      "AND",    "OR",    "NOT",    "IN",
        "LIKE",   "BETWEEN",  "IS",    "NULL",    "EXISTS", "CAST",  "ASC",    "DESC",
        "UNION",  "INTERSECT", "EXCEPT", "CASE",  "WHEN",   "THEN",  "ELSE",   "END",
    };
    return kws;
}

bool is_keyword(const std::string& word) { return keyword_set().count(upper(word)) != 0; }

std::string strip_comments(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == '\'' || c == '"' || c == '`' || c == '[') {
            char quote = c == '[' ? ']' : c;
            out += c;
            ++i;
            while (i < text.size()) {
                out += text[i];
                if (text[i] == quote) {
                    if (quote == '\'' && i + 1 < text.size() && text[i + 1] == '\'') {
                        out += text[i + 1];
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                ++i;
            }
        } else if (c == '-' && i + 1 < text.size() && text[i + 1] == '-') {
            while (i < text.size() && text[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '*') {
            i += 2;
            while (i + 1 < text.size() && !(text[i] == '*' && text[i + 1] == '/')) ++i;
            i = std::min(i + 2, text.size());
            out += ' ';
        } else {
            out += c;
            ++i;
        }
    }
    return out;
}

bool word_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

std::vector<Token> lex_sql(const std::string& raw_text) {
    const std::string text = strip_comments(raw_text);
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (c == '\'') {
            ++i;
            while (i < text.size()) {
                if (text[i] == '\'') {
                    if (i + 1 < text.size() && text[i + 1] == '\'') {
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                ++i;
            }
            if (i > text.size() || text[i - 1] != '\'' || i - start < 2) {
                throw ParseError(tokens.size(), "unterminated string literal");
            }
            tokens.push_back({TokenKind::string, text.substr(start, i - start), start});
        } else if (c == '"' || c == '`' || c == '[') {
            char close = c == '[' ? ']' : c;
            ++i;
            while (i < text.size() && text[i] != close) ++i;
            if (i >= text.size()) throw ParseError(tokens.size(), "unterminated quoted identifier");
            ++i;
            tokens.push_back({TokenKind::quoted_ident, text.substr(start, i - start), start});
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < text.size() &&
                    std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
            ++i;
            while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) ||
                                       text[i] == '.' || text[i] == 'e' || text[i] == 'E' ||
                                       ((text[i] == '+' || text[i] == '-') &&
                                        (text[i - 1] == 'e' || text[i - 1] == 'E')))) {
                ++i;
            }
            tokens.push_back({TokenKind::number, text.substr(start, i - start), start});
        } else if (word_start(c)) {
            ++i;
            while (i < text.size() && word_char(text[i])) ++i;
            tokens.push_back({TokenKind::word, text.substr(start, i - start), start});
        } else {
            static const std::array<const char*, 6> two_char = {"<=", ">=", "<>", "!=", "==", "||"};
            std::string two = text.substr(i, 2);
            if (std::find(two_char.begin(), two_char.end(), two) != two_char.end()) {
                tokens.push_back({TokenKind::op, two, start});
                i += 2;
            } else if (std::string("=<>+-*/%").find(c) != std::string::npos) {
                tokens.push_back({TokenKind::op, std::string(1, c), start});
                ++i;
            } else if (std::string(",().;").find(c) != std::string::npos) {
                tokens.push_back({TokenKind::punct, std::string(1, c), start});
                ++i;
            } else {
                throw ParseError(tokens.size(), std::string("unexpected character '") + c + "'");
            }
        }
    }
    return tokens;
}

namespace {

std::string unquote_ident(const Token& tok) {
    if (tok.kind != TokenKind::quoted_ident) return tok.text;
    std::string inner = tok.text.substr(1, tok.text.size() - 2);
    return inner;
}

std::string unquote_string(const std::string& lexeme) {
    std::string inner = lexeme.substr(1, lexeme.size() - 2);
    std::string out;
    out.reserve(inner.size());
    for (std::size_t i = 0; i < inner.size(); ++i) {
        out += inner[i];
        if (inner[i] == '\'' && i + 1 < inner.size() && inner[i + 1] == '\'') ++i;
    }
    return out;
}

class Parser {
public:
    Parser(const std::vector<Token>& toks, AstBuilder& builder) : toks_(toks), b_(builder) {}

    NodeId parse_statement() {
        NodeId stmt = parse_select_statement();
        if (!at_end() && is_punct(";")) advance();
        if (!at_end()) fail("unexpected trailing input");
        // Root span covers every source token, trailing semicolon included.
        b_.set_span(stmt, 0, toks_.empty() ? 0 : toks_.size() - 1);
        return stmt;
    }

private:
    const std::vector<Token>& toks_;
    AstBuilder& b_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& message) const { throw ParseError(pos_, message); }

    bool at_end() const { return pos_ >= toks_.size(); }
    const Token& peek(std::size_t ahead = 0) const {
        if (pos_ + ahead >= toks_.size()) {
            static Token eof{TokenKind::punct, "", 0};
            return eof;
        }
        return toks_[pos_ + ahead];
    }
    void advance() { ++pos_; }

    bool is_kw(const char* kw, std::size_t ahead = 0) const {
        const Token& t = peek(ahead);
        return t.kind == TokenKind::word && upper(t.text) == kw;
    }
    bool is_punct(const char* p, std::size_t ahead = 0) const {
        const Token& t = peek(ahead);
        return t.kind == TokenKind::punct && t.text == p;
    }
    bool is_op(const char* o, std::size_t ahead = 0) const {
        const Token& t = peek(ahead);
        return t.kind == TokenKind::op && t.text == o;
    }
    void expect_kw(const char* kw) {
        if (!is_kw(kw)) fail(std::string("expected ") + kw);
        advance();
    }
    void expect_punct(const char* p) {
        if (!is_punct(p)) fail(std::string("expected '") + p + "'");
        advance();
    }

    bool is_identifier() const {
        const Token& t = peek();
        if (t.kind == TokenKind::quoted_ident) return true;
        return t.kind == TokenKind::word && !is_keyword(t.text);
    }

    std::string take_identifier(const char* what) {
        if (!is_identifier()) fail(std::string("expected ") + what);
        std::string name = unquote_ident(peek());
        advance();
        return name;
    }

    NodeId parse_select_statement() {
        std::size_t start = pos_;
        if (!is_kw("SELECT")) fail("expected SELECT");
        NodeId stmt = b_.add(NodeKind::subquery);
        parse_select_clause(stmt);
        if (is_kw("FROM")) parse_from(stmt);
        if (is_kw("WHERE")) parse_where(stmt);
        if (is_kw("GROUP")) parse_group_by(stmt);
        if (is_kw("HAVING")) parse_having(stmt);
        if (is_kw("ORDER")) parse_order_by(stmt);
        if (is_kw("LIMIT")) parse_limit(stmt);
        if (is_kw("UNION") || is_kw("INTERSECT") || is_kw("EXCEPT")) {
            fail("compound SELECT is not supported by this dialect subset");
        }
        b_.set_span(stmt, start, pos_ == start ? start : pos_ - 1);
        return stmt;
    }

    void parse_select_clause(NodeId stmt) {
        std::size_t start = pos_;
        expect_kw("SELECT");
        NodeId clause = b_.add(NodeKind::select_clause, stmt);
        if (is_kw("DISTINCT")) {
            NodeId mod = b_.add(NodeKind::modifier, clause);
            b_.set_attr(mod, "keyword", "DISTINCT");
            b_.set_span(mod, pos_, pos_);
            advance();
        } else if (is_kw("ALL")) {
            advance();
        }
        while (true) {
            parse_select_item(clause);
            if (is_punct(",")) {
                advance();
                continue;
            }
            break;
        }
        b_.set_span(clause, start, pos_ - 1);
    }

    void parse_select_item(NodeId clause) {
        std::size_t start = pos_;
        NodeId item = parse_expression(clause);
        // optional alias: AS name | bare identifier
        if (is_kw("AS")) {
            advance();
            std::string alias = take_identifier("alias after AS");
            b_.set_attr(item, "alias", alias);
        } else if (is_identifier()) {
            std::string alias = take_identifier("alias");
            b_.set_attr(item, "alias", alias);
        }
        b_.set_span(item, start, pos_ - 1);
    }

    void parse_from(NodeId stmt) {
        std::size_t start = pos_;
        expect_kw("FROM");
        NodeId from = b_.add(NodeKind::from_item, stmt);
        parse_from_atom(from);
        while (true) {
            if (is_punct(",")) {
                std::size_t jstart = pos_;
                advance();
                NodeId join = b_.add(NodeKind::join, from);
                b_.set_attr(join, "type", ",");
                parse_from_atom(join);
                b_.set_span(join, jstart, pos_ - 1);
                continue;
            }
            std::string join_type;
            std::size_t jstart = pos_;
            if (is_kw("JOIN")) {
                join_type = "JOIN";
                advance();
            } else if (is_kw("INNER") && is_kw("JOIN", 1)) {
                join_type = "INNER JOIN";
                advance();
                advance();
            } else if (is_kw("CROSS") && is_kw("JOIN", 1)) {
                join_type = "CROSS JOIN";
                advance();
                advance();
            } else if (is_kw("LEFT")) {
                advance();
                if (is_kw("OUTER")) advance();
                expect_kw("JOIN");
                join_type = "LEFT JOIN";
            } else {
                break;
            }
            NodeId join = b_.add(NodeKind::join, from);
            b_.set_attr(join, "type", join_type);
            parse_from_atom(join);
            if (is_kw("ON")) {
                advance();
                parse_expression(join);
            }
            b_.set_span(join, jstart, pos_ - 1);
        }
        b_.set_span(from, start, pos_ - 1);
    }

    void parse_from_atom(NodeId parent) {
        std::size_t start = pos_;
        if (is_punct("(")) {
            advance();
            if (!is_kw("SELECT")) fail("expected SELECT in derived table");
            NodeId sub = parse_select_statement();
            b_.reparent(sub, parent);
            expect_punct(")");
            if (is_kw("AS")) {
                advance();
                b_.set_attr(sub, "alias", take_identifier("alias after AS"));
            } else if (is_identifier()) {
                b_.set_attr(sub, "alias", take_identifier("alias"));
            }
            b_.set_span(sub, start, pos_ - 1);
            return;
        }
        std::string table = take_identifier("table name");
        NodeId ref = b_.add(NodeKind::table_ref, parent);
        b_.set_attr(ref, "table", table);
        if (is_kw("AS")) {
            advance();
            b_.set_attr(ref, "alias", take_identifier("alias after AS"));
        } else if (is_identifier()) {
            b_.set_attr(ref, "alias", take_identifier("alias"));
        }
        b_.set_span(ref, start, pos_ - 1);
    }

    void parse_where(NodeId stmt) {
        std::size_t start = pos_;
        expect_kw("WHERE");
        NodeId clause = b_.add(NodeKind::where_clause, stmt);
        parse_expression(clause);
        b_.set_span(clause, start, pos_ - 1);
    }

    void parse_group_by(NodeId stmt) {
        std::size_t start = pos_;
        expect_kw("GROUP");
        expect_kw("BY");
        NodeId clause = b_.add(NodeKind::group_by, stmt);
        while (true) {
            parse_expression(clause);
            if (is_punct(",")) {
                advance();
                continue;
            }
            break;
        }
        b_.set_span(clause, start, pos_ - 1);
    }

    void parse_having(NodeId stmt) {
        std::size_t start = pos_;
        expect_kw("HAVING");
        NodeId clause = b_.add(NodeKind::having, stmt);
        parse_expression(clause);
        b_.set_span(clause, start, pos_ - 1);
    }

    void parse_order_by(NodeId stmt) {
        std::size_t start = pos_;
        expect_kw("ORDER");
        expect_kw("BY");
        NodeId clause = b_.add(NodeKind::order_by, stmt);
        while (true) {
            parse_expression(clause);
            if (is_kw("ASC") || is_kw("DESC")) {
                NodeId mod = b_.add(NodeKind::modifier, clause);
                b_.set_attr(mod, "keyword", upper(peek().text));
                b_.set_span(mod, pos_, pos_);
                advance();
            }
            if (is_punct(",")) {
                advance();
                continue;
            }
            break;
        }
        b_.set_span(clause, start, pos_ - 1);
    }

    void parse_limit(NodeId stmt) {
        std::size_t start = pos_;
        expect_kw("LIMIT");
        NodeId clause = b_.add(NodeKind::limit, stmt);
        NodeId first = parse_expression(clause);
        if (is_kw("OFFSET")) {
            advance();
            parse_expression(clause);
        } else if (is_punct(",")) {
            // LIMIT skip, count  ==  LIMIT count OFFSET skip
            advance();
            NodeId count = parse_expression(clause);
            (void)count;
            // normalize child order to [count, offset]
            b_.reparent(first, clause);  // moves `first` to the back: [count, offset]
        }
        b_.set_span(clause, start, pos_ - 1);
    }

    // --- expressions ---

    NodeId parse_expression(NodeId parent) {
        NodeId e = parse_or();
        b_.reparent(e, parent);
        return e;
    }

    NodeId parse_or() {
        std::size_t start = pos_;
        NodeId left = parse_and();
        while (is_kw("OR")) {
            advance();
            NodeId right = parse_and();
            NodeId op = b_.add(NodeKind::logical_op);
            b_.set_attr(op, "op", "OR");
            b_.reparent(left, op);
            b_.reparent(right, op);
            b_.set_span(op, start, pos_ - 1);
            left = op;
        }
        return left;
    }

    NodeId parse_and() {
        std::size_t start = pos_;
        NodeId left = parse_not();
        while (is_kw("AND")) {
            advance();
            NodeId right = parse_not();
            NodeId op = b_.add(NodeKind::logical_op);
            b_.set_attr(op, "op", "AND");
            b_.reparent(left, op);
            b_.reparent(right, op);
            b_.set_span(op, start, pos_ - 1);
            left = op;
        }
        return left;
    }

    NodeId parse_not() {
        if (is_kw("NOT") && !is_kw("EXISTS", 1)) {
            std::size_t start = pos_;
            advance();
            NodeId operand = parse_not();
            NodeId op = b_.add(NodeKind::logical_op);
            b_.set_attr(op, "op", "NOT");
            b_.reparent(operand, op);
            b_.set_span(op, start, pos_ - 1);
            return op;
        }
        return parse_predicate();
    }

    NodeId parse_predicate() {
        std::size_t start = pos_;
        if (is_kw("EXISTS") || (is_kw("NOT") && is_kw("EXISTS", 1))) {
            std::string op = "EXISTS";
            if (is_kw("NOT")) {
                op = "NOT EXISTS";
                advance();
            }
            advance();
            expect_punct("(");
            NodeId sub = parse_select_statement();
            expect_punct(")");
            NodeId pred = b_.add(NodeKind::predicate);
            b_.set_attr(pred, "op", op);
            b_.reparent(sub, pred);
            b_.set_span(sub, start, pos_ - 1);
            b_.set_span(pred, start, pos_ - 1);
            return pred;
        }

        NodeId lhs = parse_additive();

        const Token& t = peek();
        if (t.kind == TokenKind::op) {
            static const std::unordered_set<std::string> cmp_ops = {"=",  "==", "!=", "<>",
                                                                    "<",  "<=", ">",  ">="};
            if (cmp_ops.count(t.text)) {
                std::string op = t.text == "==" ? "=" : t.text;
                advance();
                NodeId rhs = parse_additive();
                NodeId cmp = b_.add(NodeKind::comparison);
                b_.set_attr(cmp, "op", op);
                b_.reparent(lhs, cmp);
                b_.reparent(rhs, cmp);
                b_.set_span(cmp, start, pos_ - 1);
                return cmp;
            }
        }

        bool negated = false;
        if (is_kw("NOT") && (is_kw("IN", 1) || is_kw("LIKE", 1) || is_kw("BETWEEN", 1))) {
            negated = true;
            advance();
        }
        if (is_kw("LIKE")) {
            advance();
            NodeId rhs = parse_additive();
            NodeId cmp = b_.add(NodeKind::comparison);
            b_.set_attr(cmp, "op", negated ? "NOT LIKE" : "LIKE");
            b_.reparent(lhs, cmp);
            b_.reparent(rhs, cmp);
            b_.set_span(cmp, start, pos_ - 1);
            return cmp;
        }
        if (is_kw("IN")) {
            advance();
            expect_punct("(");
            NodeId pred = b_.add(NodeKind::predicate);
            b_.set_attr(pred, "op", negated ? "NOT IN" : "IN");
            b_.reparent(lhs, pred);
            if (is_kw("SELECT")) {
                NodeId sub = parse_select_statement();
                b_.reparent(sub, pred);
            } else {
                while (true) {
                    parse_expression(pred);
                    if (is_punct(",")) {
                        advance();
                        continue;
                    }
                    break;
                }
            }
            expect_punct(")");
            b_.set_span(pred, start, pos_ - 1);
            return pred;
        }
        if (is_kw("BETWEEN")) {
            advance();
            NodeId lo = parse_additive();
            expect_kw("AND");
            NodeId hi = parse_additive();
            NodeId pred = b_.add(NodeKind::predicate);
            b_.set_attr(pred, "op", negated ? "NOT BETWEEN" : "BETWEEN");
            b_.reparent(lhs, pred);
            b_.reparent(lo, pred);
            b_.reparent(hi, pred);
            b_.set_span(pred, start, pos_ - 1);
            return pred;
        }
        if (is_kw("IS")) {
            advance();
            std::string op = "IS NULL";
            if (is_kw("NOT")) {
                advance();
                op = "IS NOT NULL";
            }
            expect_kw("NULL");
            NodeId pred = b_.add(NodeKind::predicate);
            b_.set_attr(pred, "op", op);
            b_.reparent(lhs, pred);
            b_.set_span(pred, start, pos_ - 1);
            return pred;
        }
        return lhs;
    }

    NodeId parse_additive() {
        std::size_t start = pos_;
        NodeId left = parse_multiplicative();
        while (is_op("+") || is_op("-") || is_op("||")) {
            std::string sym = peek().text;
            advance();
            NodeId right = parse_multiplicative();
            left = make_infix(sym, left, right, start);
        }
        return left;
    }

    NodeId parse_multiplicative() {
        std::size_t start = pos_;
        NodeId left = parse_unary();
        while (is_op("*") || is_op("/") || is_op("%")) {
            // '*' here is always arithmetic: bare star select items are
            // handled before expression parsing ever sees them.
            std::string sym = peek().text;
            advance();
            NodeId right = parse_unary();
            left = make_infix(sym, left, right, start);
        }
        return left;
    }

    NodeId make_infix(const std::string& sym, NodeId left, NodeId right, std::size_t start) {
        NodeId op = b_.add(NodeKind::function_call);
        b_.set_attr(op, "name", sym);
        b_.set_attr(op, "infix", "1");
        b_.reparent(left, op);
        b_.reparent(right, op);
        b_.set_span(op, start, pos_ - 1);
        return op;
    }

    NodeId parse_unary() {
        if (is_op("-")) {
            if (peek(1).kind == TokenKind::number) {
                std::size_t start = pos_;
                advance();
                NodeId lit = b_.add(NodeKind::literal);
                b_.set_attr(lit, "type", "number");
                b_.set_attr(lit, "value", "-" + peek().text);
                b_.set_span(lit, start, pos_);
                advance();
                return lit;
            }
            fail("unary '-' is only supported on numeric literals");
        }
        if (is_op("+")) {
            advance();
            return parse_unary();
        }
        return parse_primary();
    }

    NodeId parse_primary() {
        std::size_t start = pos_;
        const Token& t = peek();

        if (t.kind == TokenKind::punct && t.text == "(") {
            advance();
            if (is_kw("SELECT")) {
                NodeId sub = parse_select_statement();
                expect_punct(")");
                b_.set_span(sub, start, pos_ - 1);
                return sub;
            }
            NodeId inner = parse_or();
            expect_punct(")");
            return inner;
        }
        if (t.kind == TokenKind::string) {
            NodeId lit = b_.add(NodeKind::literal);
            b_.set_attr(lit, "type", "string");
            b_.set_attr(lit, "value", unquote_string(t.text));
            b_.set_span(lit, pos_, pos_);
            advance();
            return lit;
        }
        if (t.kind == TokenKind::number) {
            NodeId lit = b_.add(NodeKind::literal);
            b_.set_attr(lit, "type", "number");
            b_.set_attr(lit, "value", t.text);
            b_.set_span(lit, pos_, pos_);
            advance();
            return lit;
        }
        if (is_kw("NULL")) {
            NodeId lit = b_.add(NodeKind::literal);
            b_.set_attr(lit, "type", "null");
            b_.set_attr(lit, "value", "NULL");
            b_.set_span(lit, pos_, pos_);
            advance();
            return lit;
        }
        if (is_kw("CAST")) {
            advance();
            expect_punct("(");
            NodeId call = b_.add(NodeKind::function_call);
            b_.set_attr(call, "name", "CAST");
            parse_expression(call);
            expect_kw("AS");
            const Token& ty = peek();
            if (ty.kind != TokenKind::word) fail("expected type name in CAST");
            b_.set_attr(call, "cast_type", upper(ty.text));
            advance();
            expect_punct(")");
            b_.set_span(call, start, pos_ - 1);
            return call;
        }
        if (t.kind == TokenKind::op && t.text == "*") {
            NodeId star = b_.add(NodeKind::star);
            b_.set_span(star, pos_, pos_);
            advance();
            return star;
        }
        if (t.kind == TokenKind::word || t.kind == TokenKind::quoted_ident) {
            if (t.kind == TokenKind::word && is_keyword(t.text)) {
                fail("expected expression, found keyword " + upper(t.text));
            }
            // function call?
            if (is_punct("(", 1)) {
                std::string fname = upper(unquote_ident(t));
                advance();
                advance();
                NodeId call = b_.add(NodeKind::function_call);
                b_.set_attr(call, "name", fname);
                if (is_kw("DISTINCT")) {
                    b_.set_attr(call, "distinct", "1");
                    advance();
                }
                if (is_op("*")) {
                    NodeId star = b_.add(NodeKind::star, call);
                    b_.set_span(star, pos_, pos_);
                    advance();
                } else if (!is_punct(")")) {
                    while (true) {
                        parse_expression(call);
                        if (is_punct(",")) {
                            advance();
                            continue;
                        }
                        break;
                    }
                }
                expect_punct(")");
                b_.set_span(call, start, pos_ - 1);
                return call;
            }
            // qualified name: ident '.' (ident | *)
            std::string first = unquote_ident(t);
            advance();
            if (is_punct(".")) {
                advance();
                if (is_op("*")) {
                    NodeId star = b_.add(NodeKind::star);
                    b_.set_attr(star, "table", first);
                    b_.set_span(star, start, pos_);
                    advance();
                    return star;
                }
                std::string col = take_identifier("column name after '.'");
                NodeId ref = b_.add(NodeKind::column_ref);
                b_.set_attr(ref, "table", first);
                b_.set_attr(ref, "column", col);
                b_.set_span(ref, start, pos_ - 1);
                return ref;
            }
            NodeId ref = b_.add(NodeKind::column_ref);
            b_.set_attr(ref, "column", first);
            b_.set_span(ref, start, pos_ - 1);
            return ref;
        }
        fail("expected expression");
    }
};

}  // namespace

SqlAst parse_sql(const std::string& text, Dialect dialect) {
    if (dialect != Dialect::sqlite) throw ParseError(0, "unsupported dialect");
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw ParseError(0, "empty SQL text");
    }
    std::vector<Token> tokens = lex_sql(text);
    if (tokens.empty()) throw ParseError(0, "empty SQL text");
    AstBuilder builder(tokens, dialect);
    Parser parser(tokens, builder);
    NodeId root = parser.parse_statement();
    return builder.finish(root);
}

// --- flatten ---

namespace {

bool needs_quoting(const std::string& ident) {
    if (ident.empty()) return true;
    if (!word_start(ident[0])) return true;
    for (char c : ident) {
        if (!word_char(c)) return true;
    }
    return is_keyword(ident);
}

std::string quote_ident(const std::string& ident) {
    if (!needs_quoting(ident)) return ident;
    std::string out = "\"";
    for (char c : ident) {
        out += c;
        if (c == '"') out += '"';
    }
    out += '"';
    return out;
}

std::string quote_string(const std::string& value) {
    std::string out = "'";
    for (char c : value) {
        out += c;
        if (c == '\'') out += '\'';
    }
    out += '\'';
    return out;
}

int precedence(const SqlAst& ast, NodeId id) {
    const AstNode& n = ast.node(id);
    switch (n.kind) {
        case NodeKind::logical_op: {
            std::string op = n.attr("op");
            if (op == "OR") return 1;
            if (op == "AND") return 2;
            return 3;  // NOT
        }
        case NodeKind::comparison:
        case NodeKind::predicate:
            return 4;
        case NodeKind::function_call:
            if (n.attr("infix") == "1") {
                std::string op = n.attr("name");
                if (op == "*" || op == "/" || op == "%") return 6;
                return 5;
            }
            return 9;
        default:
            return 9;
    }
}

bool is_binary_kind(const SqlAst& ast, NodeId id) {
    const AstNode& n = ast.node(id);
    if (n.kind == NodeKind::logical_op) return n.attr("op") != "NOT";
    if (n.kind == NodeKind::comparison) return true;
    if (n.kind == NodeKind::function_call && n.attr("infix") == "1") return true;
    return false;
}

struct Flattener {
    const SqlAst& ast;

    std::string operand(NodeId parent, NodeId child, bool right_side) const {
        std::string text = render(child);
        int pp = precedence(ast, parent);
        int cp = precedence(ast, child);
        bool wrap = cp < pp || (cp == pp && right_side && is_binary_kind(ast, child));
        return wrap ? "(" + text + ")" : text;
    }

    std::string render(NodeId id) const {
        const AstNode& n = ast.node(id);
        const auto& kids = ast.children(id);
        switch (n.kind) {
            case NodeKind::subquery: {
                std::string body;
                for (NodeId kid : kids) {
                    if (!body.empty()) body += ' ';
                    body += render(kid);
                }
                if (id == ast.root()) return body;
                std::string out = "(" + body + ")";
                if (n.has_attr("alias")) out += " AS " + quote_ident(n.attr("alias"));
                return out;
            }
            case NodeKind::select_clause: {
                std::string out = "SELECT";
                std::size_t i = 0;
                if (!kids.empty() && ast.node(kids[0]).kind == NodeKind::modifier &&
                    ast.node(kids[0]).attr("keyword") == "DISTINCT") {
                    out += " DISTINCT";
                    i = 1;
                }
                bool first = true;
                for (; i < kids.size(); ++i) {
                    out += first ? " " : ", ";
                    first = false;
                    out += render_item(kids[i]);
                }
                return out;
            }
            case NodeKind::from_item: {
                std::string out = "FROM " + render(kids.empty() ? id : kids[0]);
                for (std::size_t i = 1; i < kids.size(); ++i) out += render(kids[i]);
                return out;
            }
            case NodeKind::join: {
                std::string type = n.attr("type");
                std::string out = type == "," ? ", " : " " + type + " ";
                if (kids.empty()) return out;
                out += render(kids[0]);
                if (kids.size() > 1) out += " ON " + render(kids[1]);
                return out;
            }
            case NodeKind::where_clause:
                return "WHERE " + (kids.empty() ? "" : render(kids[0]));
            case NodeKind::group_by: {
                std::string out = "GROUP BY ";
                for (std::size_t i = 0; i < kids.size(); ++i) {
                    if (i) out += ", ";
                    out += render(kids[i]);
                }
                return out;
            }
            case NodeKind::having:
                return "HAVING " + (kids.empty() ? "" : render(kids[0]));
            case NodeKind::order_by: {
                std::string out = "ORDER BY ";
                bool first = true;
                for (std::size_t i = 0; i < kids.size(); ++i) {
                    if (ast.node(kids[i]).kind == NodeKind::modifier) {
                        out += " " + ast.node(kids[i]).attr("keyword");
                        continue;
                    }
                    if (!first) out += ", ";
                    first = false;
                    out += render(kids[i]);
                }
                return out;
            }
            case NodeKind::limit: {
                std::string out = "LIMIT ";
                if (!kids.empty()) out += render(kids[0]);
                if (kids.size() > 1) out += " OFFSET " + render(kids[1]);
                return out;
            }
            case NodeKind::logical_op: {
                std::string op = n.attr("op");
                if (op == "NOT") {
                    return "NOT " + (kids.empty() ? "" : operand(id, kids[0], true));
                }
                if (kids.size() < 2) return kids.empty() ? "" : render(kids[0]);
                return operand(id, kids[0], false) + " " + op + " " + operand(id, kids[1], true);
            }
            case NodeKind::comparison: {
                if (kids.size() < 2) return kids.empty() ? "" : render(kids[0]);
                return operand(id, kids[0], false) + " " + n.attr("op") + " " +
                       operand(id, kids[1], true);
            }
            case NodeKind::predicate: {
                std::string op = n.attr("op");
                if (op == "EXISTS" || op == "NOT EXISTS") {
                    return op + " " + (kids.empty() ? "" : render(kids[0]));
                }
                if (kids.empty()) return "";
                std::string lhs = operand(id, kids[0], false);
                if (op == "IS NULL" || op == "IS NOT NULL") return lhs + " " + op;
                if (op == "BETWEEN" || op == "NOT BETWEEN") {
                    std::string lo = kids.size() > 1 ? operand(id, kids[1], true) : "";
                    std::string hi = kids.size() > 2 ? operand(id, kids[2], true) : "";
                    return lhs + " " + op + " " + lo + " AND " + hi;
                }
                // IN / NOT IN
                if (kids.size() == 2 && ast.node(kids[1]).kind == NodeKind::subquery) {
                    return lhs + " " + op + " " + render(kids[1]);
                }
                std::string out = lhs + " " + op + " (";
                for (std::size_t i = 1; i < kids.size(); ++i) {
                    if (i > 1) out += ", ";
                    out += render(kids[i]);
                }
                out += ")";
                return out;
            }
            case NodeKind::function_call: {
                if (n.attr("infix") == "1") {
                    if (kids.size() < 2) return kids.empty() ? "" : render(kids[0]);
                    return operand(id, kids[0], false) + " " + n.attr("name") + " " +
                           operand(id, kids[1], true);
                }
                if (n.attr("name") == "CAST") {
                    std::string out = "CAST(" + (kids.empty() ? "" : render(kids[0]));
                    out += " AS " + n.attr("cast_type") + ")";
                    return out;
                }
                std::string out = n.attr("name") + "(";
                if (n.attr("distinct") == "1") out += "DISTINCT ";
                for (std::size_t i = 0; i < kids.size(); ++i) {
                    if (i) out += ", ";
                    out += render(kids[i]);
                }
                out += ")";
                return out;
            }
            case NodeKind::column_ref: {
                std::string out;
                if (n.has_attr("table")) out += quote_ident(n.attr("table")) + ".";
                out += quote_ident(n.attr("column"));
                return out;
            }
            case NodeKind::table_ref: {
                std::string out = quote_ident(n.attr("table"));
                if (n.has_attr("alias")) out += " AS " + quote_ident(n.attr("alias"));
                return out;
            }
            case NodeKind::literal: {
                std::string type = n.attr("type");
                if (type == "string") return quote_string(n.attr("value"));
                if (type == "null") return "NULL";
                return n.attr("value");
            }
            case NodeKind::modifier:
                return n.attr("keyword");
            case NodeKind::star: {
                if (n.has_attr("table")) return quote_ident(n.attr("table")) + ".*";
                return "*";
            }
        }
        return "";
    }

    std::string render_item(NodeId id) const {
        std::string out = render(id);
        const AstNode& n = ast.node(id);
        // subquery atoms render their own alias
        if (n.kind != NodeKind::subquery && n.kind != NodeKind::table_ref && n.has_attr("alias")) {
            out += " AS " + quote_ident(n.attr("alias"));
        }
        return out;
    }
};

}  // namespace

std::string flatten_node(const SqlAst& ast, NodeId id) {
    Flattener f{ast};
    return f.render(id);
}

std::string flatten_ast(const SqlAst& ast) {
    if (ast.node_count() == 0) return "";
    return flatten_node(ast, ast.root());
}

std::string flatten_fragment(const SqlAst& ast, const AstFragment& fragment) {
    if (fragment.empty()) return "";
    return flatten_node(ast, *fragment.root);
}

bool structurally_equal(const SqlAst& a, NodeId na, const SqlAst& b, NodeId nb) {
    const AstNode& x = a.node(na);
    const AstNode& y = b.node(nb);
    if (x.kind != y.kind || x.attrs != y.attrs) return false;
    const auto& xk = a.children(na);
    const auto& yk = b.children(nb);
    if (xk.size() != yk.size()) return false;
    for (std::size_t i = 0; i < xk.size(); ++i) {
        if (!structurally_equal(a, xk[i], b, yk[i])) return false;
    }
    return true;
}

bool structurally_equal(const SqlAst& a, const SqlAst& b) {
    if (a.node_count() == 0 || b.node_count() == 0) return a.node_count() == b.node_count();
    return structurally_equal(a, a.root(), b, b.root());
}

bool is_clause_kind(NodeKind kind) {
    switch (kind) {
        case NodeKind::select_clause:
        case NodeKind::from_item:
        case NodeKind::where_clause:
        case NodeKind::group_by:
        case NodeKind::having:
        case NodeKind::order_by:
        case NodeKind::limit:
            return true;
        default:
            return false;
    }
}

AstFragment minimal_enclosing_subtree(const SqlAst& ast, const std::set<NodeId>& node_ids) {
    AstFragment fragment;
    if (node_ids.empty()) return fragment;
    for (NodeId id : node_ids) {
        if (!ast.valid_id(id)) throw UnknownNode(id);
    }

    // lowest common ancestor via depth-aligned parent walks
    auto depth_of = [&](NodeId id) {
        std::size_t d = 0;
        NodeId cur = id;
        while (auto p = ast.parent(cur)) {
            cur = *p;
            ++d;
        }
        return d;
    };
    auto it = node_ids.begin();
    NodeId lca = *it;
    std::size_t lca_depth = depth_of(lca);
    for (++it; it != node_ids.end(); ++it) {
        NodeId other = *it;
        std::size_t od = depth_of(other);
        while (od > lca_depth) {
            other = *ast.parent(other);
            --od;
        }
        while (lca_depth > od) {
            lca = *ast.parent(lca);
            --lca_depth;
        }
        while (lca != other) {
            lca = *ast.parent(lca);
            other = *ast.parent(other);
            --lca_depth;
        }
    }

    // extend upward to the nearest clause-kind ancestor
    NodeId anchor = lca;
    NodeId cur = lca;
    bool found_clause = is_clause_kind(ast.node(cur).kind);
    while (!found_clause) {
        auto p = ast.parent(cur);
        if (!p) break;
        cur = *p;
        if (is_clause_kind(ast.node(cur).kind)) {
            anchor = cur;
            found_clause = true;
        }
    }
    if (!found_clause) anchor = ast.root();

    fragment.root = anchor;
    fragment.nodes = ast.preorder_from(anchor);
    return fragment;
}

std::vector<std::pair<std::string, std::string>> table_alias_map(const SqlAst& ast) {
    std::vector<std::pair<std::string, std::string>> out;
    for (NodeId id : ast.preorder()) {
        const AstNode& n = ast.node(id);
        if (n.kind != NodeKind::table_ref) continue;
        std::string table = n.attr("table");
        out.emplace_back(lower(table), table);
        if (n.has_attr("alias")) out.emplace_back(lower(n.attr("alias")), table);
    }
    return out;
}

std::string resolve_qualifier(const SqlAst& ast, const std::string& qualifier) {
    auto aliases = table_alias_map(ast);
    if (qualifier.empty()) {
        std::string only;
        for (const auto& [key, table] : aliases) {
            if (only.empty()) {
                only = table;
            } else if (lower(only) != lower(table)) {
                return "";
            }
        }
        return only;
    }
    std::string key = lower(qualifier);
    for (const auto& [k, table] : aliases) {
        if (k == key) return table;
    }
    return "";
}

std::vector<SchemaReference> collect_schema_references(const SqlAst& ast) {
    std::vector<SchemaReference> out;
    if (ast.node_count() == 0) return out;

    auto nearest_clause = [&](NodeId id) -> NodeKind {
        NodeId cur = id;
        while (auto p = ast.parent(cur)) {
            cur = *p;
            if (is_clause_kind(ast.node(cur).kind)) return ast.node(cur).kind;
        }
        return NodeKind::subquery;
    };

    for (NodeId id : ast.preorder()) {
        const AstNode& n = ast.node(id);
        if (n.kind == NodeKind::table_ref) {
            SchemaReference ref;
            ref.node_id = id;
            ref.kind = RefKind::table;
            ref.name = n.attr("table");
            out.push_back(std::move(ref));
        } else if (n.kind == NodeKind::column_ref) {
            SchemaReference ref;
            ref.node_id = id;
            ref.kind = RefKind::column;
            ref.name = n.attr("column");
            if (n.has_attr("table")) ref.qualifier = n.attr("table");
            out.push_back(std::move(ref));
        } else if (n.kind == NodeKind::literal) {
            // only predicate-anchored literals are schema references; bare
            // select items like SELECT 1 are not
            auto parent = ast.parent(id);
            if (!parent) continue;
            const AstNode& pn = ast.node(*parent);
            if (pn.kind != NodeKind::comparison && pn.kind != NodeKind::predicate) continue;
            SchemaReference ref;
            ref.node_id = id;
            ref.kind = RefKind::literal;
            ref.name = n.attr("value");
            // find a sibling column_ref to anchor the predicate context
            for (NodeId sib : ast.children(*parent)) {
                if (sib == id) continue;
                const AstNode& sn = ast.node(sib);
                if (sn.kind != NodeKind::column_ref) continue;
                PredicateContext ctx;
                ctx.column = sn.attr("column");
                ctx.table = resolve_qualifier(ast, sn.attr("table"));
                ctx.op = pn.attr("op");
                ctx.clause = nearest_clause(*parent);
                ref.predicate_context = std::move(ctx);
                break;
            }
            out.push_back(std::move(ref));
        }
    }
    return out;
}

std::string render_ast_tree(const SqlAst& ast) {
    std::ostringstream out;
    out << "ast/1\n";
    if (ast.node_count() == 0) return out.str();

    auto walk = [&](auto&& self, NodeId id, int depth) -> void {
        const AstNode& n = ast.node(id);
        for (int i = 0; i < depth; ++i) out << "  ";
        out << node_kind_name(n.kind) << " [" << n.span.first << ".." << n.span.last << "]";
        for (const auto& [key, value] : n.attrs) out << " " << key << "=" << value;
        out << "\n";
        for (NodeId kid : ast.children(id)) self(self, kid, depth + 1);
    };
    walk(walk, ast.root(), 0);
    return out.str();
}

}  // namespace sqlrefine
