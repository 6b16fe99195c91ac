#include "date/rule_io.hpp"

#include "date/error.hpp"

#include <cctype>

namespace date {

namespace {

bool plain_identifier(const std::string& name) {
    if (name.empty() || !(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
    for (char c : name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
    }
    static const char* reserved[] = {"AND", "OR", "TRUE", "and", "or", "true"};
    for (auto r : reserved) {
        if (name == r) return false;
    }
    return true;
}

std::string quote_token(const std::string& token) {
    std::string out = "\"";
    for (char c : token) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::string to_text(const Predicate& p) {
    std::string name = plain_identifier(p.attribute) ? p.attribute : "`" + p.attribute + "`";
    std::string constant = p.constant.is_numeric() ? format_number(p.constant.number()) : quote_token(p.constant.token());
    return name + " " + std::string(op_symbol(p.op)) + " " + constant;
}

std::string to_text(const Conjunction& c) {
    if (c.empty()) return "TRUE";
    std::string out = "(";
    for (std::size_t i = 0; i < c.predicates().size(); ++i) {
        if (i) out += " AND ";
        out += to_text(c.predicates()[i]);
    }
    return out + ")";
}

std::string to_text(const Dgr& r) {
    if (r.is_identity()) return "TRUE";
    std::string out;
    for (std::size_t i = 0; i < r.clauses().size(); ++i) {
        if (i) out += " OR ";
        out += to_text(r.clauses()[i]);
    }
    return out;
}

// ---------------------------------------------------------------- parser

namespace {

enum class Tok { LParen, RParen, And, Or, True, Name, Number, String, Op, End };

struct Token {
    Tok kind;
    std::string text;
};

class Lexer {
public:
    explicit Lexer(std::string_view s) : s_(s) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            if (i_ >= s_.size()) break;
            out.push_back(next());
        }
        out.push_back({Tok::End, ""});
        return out;
    }

private:
    void skip_space() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }

    bool starts(std::string_view lit) const { return s_.substr(i_, lit.size()) == lit; }

    Token next() {
        char c = s_[i_];
        if (c == '(') return ++i_, Token{Tok::LParen, "("};
        if (c == ')') return ++i_, Token{Tok::RParen, ")"};
        if (starts("&&")) return i_ += 2, Token{Tok::And, "AND"};
        if (starts("||")) return i_ += 2, Token{Tok::Or, "OR"};
        for (std::string_view op : {">=", "<=", "!=", "<>", "==", "≥", "≤", "≠", ">", "<", "="}) {
            if (starts(op)) {
                i_ += op.size();
                return {Tok::Op, std::string(op)};
            }
        }
        if (c == '"' || c == '\'') return quoted(c, Tok::String);
        if (c == '`') return quoted('`', Tok::Name);
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return word();
        throw ParseError("unexpected character '" + std::string(1, c) + "' in rule text");
    }

    Token quoted(char q, Tok kind) {
        std::string out;
        ++i_;
        while (i_ < s_.size() && s_[i_] != q) {
            if (s_[i_] == '\\' && i_ + 1 < s_.size()) ++i_;
            out.push_back(s_[i_++]);
        }
        if (i_ >= s_.size()) throw ParseError("unterminated quoted text in rule");
        ++i_;
        return {kind, out};
    }

    Token number() {
        std::size_t start = i_;
        if (s_[i_] == '-' || s_[i_] == '+') ++i_;
        while (i_ < s_.size()) {
            char c = s_[i_];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                ++i_;
            } else if ((c == 'e' || c == 'E') && i_ + 1 < s_.size()) {
                ++i_;
                if (s_[i_] == '-' || s_[i_] == '+') ++i_;
            } else {
                break;
            }
        }
        std::string text(s_.substr(start, i_ - start));
        if (!parse_number(text)) throw ParseError("malformed number '" + text + "' in rule");
        return {Tok::Number, text};
    }

    Token word() {
        std::size_t start = i_;
        while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' || s_[i_] == '.')) ++i_;
        std::string w(s_.substr(start, i_ - start));
        std::string upper;
        for (char c : w) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        if (upper == "AND") return {Tok::And, w};
        if (upper == "OR") return {Tok::Or, w};
        if (upper == "TRUE") return {Tok::True, w};
        return {Tok::Name, w};
    }

    std::string_view s_;
    std::size_t i_ = 0;
};

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

    Dgr parse() {
        if (peek().kind == Tok::True && t_[pos_ + 1].kind == Tok::End) return Dgr::identity();
        std::vector<Conjunction> clauses;
        clauses.push_back(clause());
        while (peek().kind == Tok::Or) {
            ++pos_;
            clauses.push_back(clause());
        }
        expect(Tok::End, "end of rule");
        return Dgr(std::move(clauses));
    }

private:
    const Token& peek() const { return t_[pos_]; }

    void expect(Tok kind, const char* what) {
        if (peek().kind != kind) throw ParseError(std::string("expected ") + what + " near '" + peek().text + "'");
        ++pos_;
    }

    Conjunction clause() {
        std::vector<Predicate> preds;
        term(preds);
        while (peek().kind == Tok::And) {
            ++pos_;
            term(preds);
        }
        return Conjunction(std::move(preds));
    }

    void term(std::vector<Predicate>& preds) {
        if (peek().kind == Tok::LParen) {
            ++pos_;
            term(preds);
            while (peek().kind == Tok::And) {
                ++pos_;
                term(preds);
            }
            if (peek().kind == Tok::Or) throw ParseError("rule is not in disjunctive normal form");
            expect(Tok::RParen, "')'");
            return;
        }
        if (peek().kind == Tok::True) {
            ++pos_;
            return;
        }
        if (peek().kind != Tok::Name) throw ParseError("expected attribute name near '" + peek().text + "'");
        Predicate p;
        p.attribute = peek().text;
        ++pos_;
        if (peek().kind != Tok::Op) throw ParseError("expected comparison operator after '" + p.attribute + "'");
        p.op = op_from_symbol(peek().text);
        ++pos_;
        const auto& v = peek();
        if (v.kind == Tok::Number) p.constant = Value(*parse_number(v.text));
        else if (v.kind == Tok::String || v.kind == Tok::Name) p.constant = Value(v.text);
        else throw ParseError("expected constant after operator near '" + v.text + "'");
        ++pos_;
        preds.push_back(std::move(p));
    }

    std::vector<Token> t_;
    std::size_t pos_ = 0;
};

}  // namespace

Dgr parse_dgr(std::string_view text) { return Parser(Lexer(text).run()).parse(); }

// ---------------------------------------------------------------- JSON

nlohmann::json to_json(const Value& v) {
    if (v.is_numeric()) return v.number();
    return v.token();
}

Value value_from_json(const nlohmann::json& j) {
    if (j.is_number()) return Value(j.get<double>());
    if (j.is_string()) return Value(j.get<std::string>());
    throw ParseError("value must be a number or a string");
}

nlohmann::json to_json(const Predicate& p) {
    return {{"attribute", p.attribute}, {"op", std::string(op_symbol(p.op))}, {"value", to_json(p.constant)}};
}

Predicate predicate_from_json(const nlohmann::json& j) {
    try {
        return Predicate{j.at("attribute").get<std::string>(), op_from_symbol(j.at("op").get<std::string>()),
                         value_from_json(j.at("value"))};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed predicate JSON: ") + e.what());
    }
}

nlohmann::json to_json(const Dgr& r) {
    nlohmann::json clauses = nlohmann::json::array();
    for (const auto& c : r.clauses()) {
        nlohmann::json preds = nlohmann::json::array();
        for (const auto& p : c.predicates()) preds.push_back(to_json(p));
        clauses.push_back(std::move(preds));
    }
    return {{"clauses", clauses}};
}

Dgr dgr_from_json(const nlohmann::json& j) {
    if (!j.contains("clauses") || !j["clauses"].is_array()) throw ParseError("rule JSON needs a 'clauses' array");
    std::vector<Conjunction> clauses;
    for (const auto& c : j["clauses"]) {
        std::vector<Predicate> preds;
        for (const auto& p : c) preds.push_back(predicate_from_json(p));
        clauses.emplace_back(std::move(preds));
    }
    return Dgr(std::move(clauses));
}

}  // namespace date
