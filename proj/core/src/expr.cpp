#include "clairaut/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

namespace clairaut {

namespace {

const char* kFunctionNames[] = {"sin", "cos", "exp", "log", "sqrt"};

bool is_function_name(std::string_view s) {
    for (const char* f : kFunctionNames)
        if (s == f) return true;
    return false;
}

bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // trim to the shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[40];
        std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
        if (std::strtod(shorter, nullptr) == v) return shorter;
    }
    return buf;
}

}  // namespace

// --- SymbolTable -------------------------------------------------------

SymbolTable SymbolTable::make(std::vector<std::string> coordinates,
                              std::vector<std::pair<std::string, double>> parameters) {
    SymbolTable t;
    t.n_ = static_cast<int>(coordinates.size());
    t.names_.push_back("t");

    std::set<std::string> taken{"t", "d", "sin", "cos", "exp", "log", "sqrt"};
    auto claim = [&taken](const std::string& name, const char* what) {
        if (!is_identifier(name))
            throw ModelFileError(std::string(what) + " name \"" + name + "\" is not a valid identifier");
        if (!taken.insert(name).second)
            throw ModelFileError(std::string(what) + " name \"" + name + "\" collides with an existing symbol");
    };

    for (const auto& c : coordinates) claim(c, "coordinate");
    for (const auto& c : coordinates) claim("p_" + c, "derived momentum");
    for (const auto& [p, v] : parameters) {
        (void)v;
        claim(p, "parameter");
    }

    for (const auto& c : coordinates) t.names_.push_back(c);
    for (const auto& c : coordinates) t.names_.push_back("d(" + c + ")");
    for (const auto& c : coordinates) t.names_.push_back("p_" + c);
    for (auto& [p, v] : parameters) {
        t.names_.push_back(p);
        t.parameter_values_.push_back(v);
    }
    t.coordinate_names_ = std::move(coordinates);
    return t;
}

SymbolKind SymbolTable::kind(int id) const {
    if (id == 0) return SymbolKind::time;
    if (id <= n_) return SymbolKind::coordinate;
    if (id <= 2 * n_) return SymbolKind::velocity;
    if (id <= 3 * n_) return SymbolKind::momentum;
    return SymbolKind::parameter;
}

int SymbolTable::coordinate_index(int id) const {
    switch (kind(id)) {
        case SymbolKind::coordinate: return id - 1;
        case SymbolKind::velocity: return id - 1 - n_;
        case SymbolKind::momentum: return id - 1 - 2 * n_;
        default: return -1;
    }
}

std::string SymbolTable::display(int id) const { return names_[static_cast<size_t>(id)]; }

std::optional<int> SymbolTable::find(std::string_view name) const {
    for (int id = 0; id < size(); ++id) {
        if (kind(id) == SymbolKind::velocity) continue;  // spelled d(..), handled by the parser
        if (names_[static_cast<size_t>(id)] == name) return id;
    }
    return std::nullopt;
}

// --- Expression construction --------------------------------------------

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

NodePtr make_const(double v) {
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::constant;
    n->value = v;
    return n;
}

NodePtr make_symbol(int id) {
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::symbol;
    n->symbol = id;
    return n;
}

NodePtr make_unary(ExprOp op, NodePtr a) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->lhs = std::move(a);
    return n;
}

NodePtr make_binary(ExprOp op, NodePtr a, NodePtr b) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == ExprOp::constant && n->value == v; }

}  // namespace

Expression::Expression() : node_(make_const(0.0)) {}

Expression Expression::constant(double value) { return Expression(make_const(value)); }

Expression Expression::symbol(int id) { return Expression(make_symbol(id)); }

Expression Expression::neg(Expression a) {
    const NodePtr& n = a.node_;
    if (n->op == ExprOp::constant) return constant(-n->value);
    if (n->op == ExprOp::neg) return Expression(n->lhs);
    return Expression(make_unary(ExprOp::neg, n));
}

Expression Expression::add(Expression a, Expression b) {
    if (a.node_->op == ExprOp::constant && b.node_->op == ExprOp::constant)
        return constant(a.node_->value + b.node_->value);
    if (is_const(a.node_, 0.0)) return b;
    if (is_const(b.node_, 0.0)) return a;
    return Expression(make_binary(ExprOp::add, a.node_, b.node_));
}

Expression Expression::sub(Expression a, Expression b) {
    if (a.node_->op == ExprOp::constant && b.node_->op == ExprOp::constant)
        return constant(a.node_->value - b.node_->value);
    if (is_const(b.node_, 0.0)) return a;
    if (is_const(a.node_, 0.0)) return neg(std::move(b));
    return Expression(make_binary(ExprOp::sub, a.node_, b.node_));
}

Expression Expression::mul(Expression a, Expression b) {
    if (a.node_->op == ExprOp::constant && b.node_->op == ExprOp::constant)
        return constant(a.node_->value * b.node_->value);
    if (is_const(a.node_, 0.0) || is_const(b.node_, 0.0)) return constant(0.0);
    if (is_const(a.node_, 1.0)) return b;
    if (is_const(b.node_, 1.0)) return a;
    if (is_const(a.node_, -1.0)) return neg(std::move(b));
    if (is_const(b.node_, -1.0)) return neg(std::move(a));
    return Expression(make_binary(ExprOp::mul, a.node_, b.node_));
}

Expression Expression::div(Expression a, Expression b) {
    // constants fold only when the quotient is finite; a zero denominator is
    // kept in the tree so the domain error surfaces at evaluation
    if (a.node_->op == ExprOp::constant && b.node_->op == ExprOp::constant && b.node_->value != 0.0)
        return constant(a.node_->value / b.node_->value);
    if (is_const(b.node_, 1.0)) return a;
    if (is_const(a.node_, 0.0) && !is_const(b.node_, 0.0)) return constant(0.0);
    return Expression(make_binary(ExprOp::div, a.node_, b.node_));
}

Expression Expression::pow(Expression base, int exponent) {
    if (exponent == 0) return constant(1.0);
    if (exponent == 1) return base;
    if (base.node_->op == ExprOp::constant && (base.node_->value != 0.0 || exponent > 0))
        return constant(std::pow(base.node_->value, exponent));
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::pow;
    n->exponent = exponent;
    n->lhs = base.node_;
    return Expression(std::move(n));
}

Expression Expression::apply(ExprOp unary, Expression a) {
    switch (unary) {
        case ExprOp::neg: return neg(std::move(a));
        case ExprOp::sin:
            if (a.node_->op == ExprOp::constant) return constant(std::sin(a.node_->value));
            break;
        case ExprOp::cos:
            if (a.node_->op == ExprOp::constant) return constant(std::cos(a.node_->value));
            break;
        case ExprOp::exp:
            if (a.node_->op == ExprOp::constant) return constant(std::exp(a.node_->value));
            break;
        case ExprOp::log:
            if (a.node_->op == ExprOp::constant && a.node_->value > 0.0)
                return constant(std::log(a.node_->value));
            break;
        case ExprOp::sqrt:
            if (a.node_->op == ExprOp::constant && a.node_->value >= 0.0)
                return constant(std::sqrt(a.node_->value));
            break;
        default: break;
    }
    return Expression(make_unary(unary, a.node_));
}

// --- evaluation ----------------------------------------------------------

namespace {

std::string node_str(const ExprNode* n, const SymbolTable* table);

double powi(double base, int e) {
    double result = 1.0;
    double b = base;
    unsigned k = static_cast<unsigned>(e < 0 ? -e : e);
    while (k != 0) {
        if (k & 1u) result *= b;
        b *= b;
        k >>= 1;
    }
    return e < 0 ? 1.0 / result : result;
}

class TreeEvaluator {
public:
    explicit TreeEvaluator(const EvalContext& ctx) : ctx_(ctx) {}

    double run(const ExprNode* n) const {
        switch (n->op) {
            case ExprOp::constant: return n->value;
            case ExprOp::symbol: {
                if (!ctx_.bound(n->symbol))
                    throw UnboundSymbolError(ctx_.table().display(n->symbol));
                return ctx_.value(n->symbol);
            }
            case ExprOp::neg: return -run(n->lhs.get());
            case ExprOp::sin: return std::sin(run(n->lhs.get()));
            case ExprOp::cos: return std::cos(run(n->lhs.get()));
            case ExprOp::exp: return std::exp(run(n->lhs.get()));
            case ExprOp::log: {
                double a = run(n->lhs.get());
                if (!(a > 0.0)) throw DomainError("log of non-positive value", node_str(n, &ctx_.table()));
                return std::log(a);
            }
            case ExprOp::sqrt: {
                double a = run(n->lhs.get());
                if (a < 0.0) throw DomainError("sqrt of negative value", node_str(n, &ctx_.table()));
                return std::sqrt(a);
            }
            case ExprOp::add: return run(n->lhs.get()) + run(n->rhs.get());
            case ExprOp::sub: return run(n->lhs.get()) - run(n->rhs.get());
            case ExprOp::mul: return run(n->lhs.get()) * run(n->rhs.get());
            case ExprOp::div: {
                double b = run(n->rhs.get());
                if (b == 0.0) throw DomainError("division by zero", node_str(n, &ctx_.table()));
                return run(n->lhs.get()) / b;
            }
            case ExprOp::pow: {
                double a = run(n->lhs.get());
                if (a == 0.0 && n->exponent < 0)
                    throw DomainError("zero raised to a negative power", node_str(n, &ctx_.table()));
                return powi(a, n->exponent);
            }
        }
        return 0.0;
    }

private:
    const EvalContext& ctx_;
};

}  // namespace

double Expression::eval(const EvalContext& ctx) const { return TreeEvaluator(ctx).run(node_.get()); }

bool Expression::depends_on(int symbol_id) const {
    const ExprNode* stack[64];
    std::vector<const ExprNode*> deep;
    int top = 0;
    stack[top++] = node_.get();
    auto push = [&](const ExprNode* n) {
        if (top < 64) stack[top++] = n; else deep.push_back(n);
    };
    while (top > 0 || !deep.empty()) {
        const ExprNode* n;
        if (top > 0) n = stack[--top];
        else { n = deep.back(); deep.pop_back(); }
        if (n->op == ExprOp::symbol && n->symbol == symbol_id) return true;
        if (n->lhs) push(n->lhs.get());
        if (n->rhs) push(n->rhs.get());
    }
    return false;
}

std::vector<int> Expression::free_symbols() const {
    std::set<int> ids;
    std::vector<const ExprNode*> stack{node_.get()};
    while (!stack.empty()) {
        const ExprNode* n = stack.back();
        stack.pop_back();
        if (n->op == ExprOp::symbol) ids.insert(n->symbol);
        if (n->lhs) stack.push_back(n->lhs.get());
        if (n->rhs) stack.push_back(n->rhs.get());
    }
    return {ids.begin(), ids.end()};
}

// --- differentiation ------------------------------------------------------

Expression Expression::diff(int s) const {
    const ExprNode* n = node_.get();
    auto wrap = [](NodePtr p) { return Expression(std::move(p)); };
    switch (n->op) {
        case ExprOp::constant: return constant(0.0);
        case ExprOp::symbol: return constant(n->symbol == s ? 1.0 : 0.0);
        case ExprOp::neg: return neg(wrap(n->lhs).diff(s));
        case ExprOp::sin: return mul(apply(ExprOp::cos, wrap(n->lhs)), wrap(n->lhs).diff(s));
        case ExprOp::cos: return neg(mul(apply(ExprOp::sin, wrap(n->lhs)), wrap(n->lhs).diff(s)));
        case ExprOp::exp: return mul(wrap(node_), wrap(n->lhs).diff(s));
        case ExprOp::log: return div(wrap(n->lhs).diff(s), wrap(n->lhs));
        case ExprOp::sqrt:
            return div(wrap(n->lhs).diff(s), mul(constant(2.0), wrap(node_)));
        case ExprOp::add: return add(wrap(n->lhs).diff(s), wrap(n->rhs).diff(s));
        case ExprOp::sub: return sub(wrap(n->lhs).diff(s), wrap(n->rhs).diff(s));
        case ExprOp::mul:
            return add(mul(wrap(n->lhs).diff(s), wrap(n->rhs)),
                       mul(wrap(n->lhs), wrap(n->rhs).diff(s)));
        case ExprOp::div:
            return sub(div(wrap(n->lhs).diff(s), wrap(n->rhs)),
                       div(mul(wrap(n->lhs), wrap(n->rhs).diff(s)), pow(wrap(n->rhs), 2)));
        case ExprOp::pow:
            return mul(mul(constant(static_cast<double>(n->exponent)),
                           pow(wrap(n->lhs), n->exponent - 1)),
                       wrap(n->lhs).diff(s));
    }
    return constant(0.0);
}

// --- printing ---------------------------------------------------------------

namespace {

// precedence levels: add/sub 1, mul/div 2, neg 3, pow 4, atoms 5
int precedence(const ExprNode* n) {
    switch (n->op) {
        case ExprOp::add:
        case ExprOp::sub: return 1;
        case ExprOp::mul:
        case ExprOp::div: return 2;
        case ExprOp::neg: return 3;
        case ExprOp::pow: return 4;
        case ExprOp::constant: return n->value < 0.0 ? 3 : 5;
        default: return 5;
    }
}

void print_node(const ExprNode* n, const SymbolTable* table, std::string& out);

void print_child(const ExprNode* n, const SymbolTable* table, std::string& out, int min_prec) {
    if (precedence(n) < min_prec) {
        out += '(';
        print_node(n, table, out);
        out += ')';
    } else {
        print_node(n, table, out);
    }
}

void print_node(const ExprNode* n, const SymbolTable* table, std::string& out) {
    switch (n->op) {
        case ExprOp::constant: out += format_double(n->value); return;
        case ExprOp::symbol:
            out += table ? table->display(n->symbol) : ("#" + std::to_string(n->symbol));
            return;
        case ExprOp::neg:
            out += '-';
            print_child(n->lhs.get(), table, out, 3);
            return;
        case ExprOp::sin:
        case ExprOp::cos:
        case ExprOp::exp:
        case ExprOp::log:
        case ExprOp::sqrt: {
            const char* name = n->op == ExprOp::sin   ? "sin"
                               : n->op == ExprOp::cos ? "cos"
                               : n->op == ExprOp::exp ? "exp"
                               : n->op == ExprOp::log ? "log"
                                                      : "sqrt";
            out += name;
            out += '(';
            print_node(n->lhs.get(), table, out);
            out += ')';
            return;
        }
        case ExprOp::add:
            print_child(n->lhs.get(), table, out, 1);
            out += " + ";
            print_child(n->rhs.get(), table, out, 2);
            return;
        case ExprOp::sub:
            print_child(n->lhs.get(), table, out, 1);
            out += " - ";
            print_child(n->rhs.get(), table, out, 2);
            return;
        case ExprOp::mul:
            print_child(n->lhs.get(), table, out, 2);
            out += '*';
            print_child(n->rhs.get(), table, out, 3);
            return;
        case ExprOp::div:
            print_child(n->lhs.get(), table, out, 2);
            out += '/';
            print_child(n->rhs.get(), table, out, 3);
            return;
        case ExprOp::pow:
            print_child(n->lhs.get(), table, out, 5);
            out += '^';
            out += std::to_string(n->exponent);
            return;
    }
}

std::string node_str(const ExprNode* n, const SymbolTable* table) {
    std::string out;
    print_node(n, table, out);
    return out;
}

}  // namespace

std::string Expression::str(const SymbolTable& table) const { return node_str(node_.get(), &table); }

bool Expression::tree_equal(const Expression& a, const Expression& b) {
    struct Cmp {
        static bool eq(const ExprNode* x, const ExprNode* y) {
            if (x == y) return true;
            if (x->op != y->op) return false;
            switch (x->op) {
                case ExprOp::constant: return x->value == y->value;
                case ExprOp::symbol: return x->symbol == y->symbol;
                case ExprOp::pow:
                    return x->exponent == y->exponent && eq(x->lhs.get(), y->lhs.get());
                default:
                    if (static_cast<bool>(x->lhs) != static_cast<bool>(y->lhs)) return false;
                    if (static_cast<bool>(x->rhs) != static_cast<bool>(y->rhs)) return false;
                    if (x->lhs && !eq(x->lhs.get(), y->lhs.get())) return false;
                    if (x->rhs && !eq(x->rhs.get(), y->rhs.get())) return false;
                    return true;
            }
        }
    };
    return Cmp::eq(a.node_.get(), b.node_.get());
}

// --- EvalContext ------------------------------------------------------------

EvalContext::EvalContext(const SymbolTable& table)
    : table_(&table),
      values_(static_cast<size_t>(table.size()), 0.0),
      bound_(static_cast<size_t>(table.size()), 0) {
    for (int j = 0; j < table.parameter_count(); ++j) bind(table.parameter_id(j), table.parameter_value(j));
}

void EvalContext::bind(int id, double value) {
    values_[static_cast<size_t>(id)] = value;
    bound_[static_cast<size_t>(id)] = 1;
}

void EvalContext::bind_coordinates(std::span<const double> q) {
    for (int k = 0; k < table_->n() && k < static_cast<int>(q.size()); ++k)
        bind(table_->coordinate_id(k), q[static_cast<size_t>(k)]);
}

void EvalContext::bind_velocities(std::span<const double> v) {
    for (int k = 0; k < table_->n() && k < static_cast<int>(v.size()); ++k)
        bind(table_->velocity_id(k), v[static_cast<size_t>(k)]);
}

// --- parser -------------------------------------------------------------

namespace {

struct Token {
    enum Type { number, name, plus, minus, star, slash, caret, lparen, rparen, end } type;
    std::string text;
    double num = 0.0;
    int line = 1, column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }
    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) bump();
        tok_ = Token{Token::end, "", 0.0, line_, col_};
        if (pos_ >= src_.size()) return;
        char c = src_[pos_];
        tok_.line = line_;
        tok_.column = col_;
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && pos_ + 1 < src_.size() &&
                                                            std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            size_t start = pos_;
            while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) bump();
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                size_t mark = pos_;
                bump();
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) bump();
                if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
                } else {
                    // not an exponent after all (e.g. "2*exp(x)" tokenizes as 2, *, exp)
                    while (pos_ > mark) { --pos_; --col_; }
                }
            }
            tok_.type = Token::number;
            tok_.text = std::string(src_.substr(start, pos_ - start));
            tok_.num = std::strtod(tok_.text.c_str(), nullptr);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                bump();
            tok_.type = Token::name;
            tok_.text = std::string(src_.substr(start, pos_ - start));
            return;
        }
        bump();
        switch (c) {
            case '+': tok_.type = Token::plus; break;
            case '-': tok_.type = Token::minus; break;
            case '*': tok_.type = Token::star; break;
            case '/': tok_.type = Token::slash; break;
            case '^': tok_.type = Token::caret; break;
            case '(': tok_.type = Token::lparen; break;
            case ')': tok_.type = Token::rparen; break;
            default:
                throw SyntaxError(tok_.line, tok_.column,
                                  std::string("unexpected character '") + c + "'");
        }
        tok_.text = std::string(1, c);
    }

    void bump() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    std::string_view src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;
};

class Parser {
public:
    Parser(std::string_view src, const SymbolTable& table, SymbolMask allowed)
        : lex_(src), table_(table), allowed_(allowed) {}

    Expression run() {
        Expression e = parse_expr();
        const Token& t = lex_.peek();
        if (t.type != Token::end)
            throw SyntaxError(t.line, t.column, "unexpected trailing input \"" + t.text + "\"");
        return e;
    }

private:
    Expression parse_expr() {
        Expression e = parse_term();
        while (true) {
            const Token& t = lex_.peek();
            if (t.type == Token::plus) {
                lex_.take();
                e = Expression::add(std::move(e), parse_term());
            } else if (t.type == Token::minus) {
                lex_.take();
                e = Expression::sub(std::move(e), parse_term());
            } else {
                return e;
            }
        }
    }

    Expression parse_term() {
        Expression e = parse_base();
        while (true) {
            const Token& t = lex_.peek();
            if (t.type == Token::star) {
                lex_.take();
                e = Expression::mul(std::move(e), parse_base());
            } else if (t.type == Token::slash) {
                lex_.take();
                e = Expression::div(std::move(e), parse_base());
            } else {
                return e;
            }
        }
    }

    Expression parse_base() {
        if (lex_.peek().type == Token::minus) {
            lex_.take();
            return Expression::neg(parse_base());
        }
        Expression atom = parse_atom();
        if (lex_.peek().type != Token::caret) return atom;
        // exponents are integer literals; chains fold right-associatively
        std::vector<long long> exps;
        while (lex_.peek().type == Token::caret) {
            lex_.take();
            exps.push_back(parse_integer_exponent());
        }
        long long folded = exps.back();
        for (int i = static_cast<int>(exps.size()) - 2; i >= 0; --i) {
            long long base = exps[static_cast<size_t>(i)];
            long long r = 1;
            for (long long k = 0; k < folded; ++k) {
                r *= base;
                if (r > 1000000 || r < -1000000)
                    throw SyntaxError(lex_.peek().line, lex_.peek().column, "exponent out of range");
            }
            folded = r;
        }
        if (folded > 1000000 || folded < -1000000)
            throw SyntaxError(lex_.peek().line, lex_.peek().column, "exponent out of range");
        return Expression::pow(std::move(atom), static_cast<int>(folded));
    }

    long long parse_integer_exponent() {
        bool negative = false;
        if (lex_.peek().type == Token::minus) {
            lex_.take();
            negative = true;
        }
        Token t = lex_.take();
        if (t.type != Token::number)
            throw SyntaxError(t.line, t.column, "expected integer exponent, got \"" + t.text + "\"");
        double rounded = std::round(t.num);
        if (t.num != rounded || std::abs(t.num) > 1e6)
            throw SyntaxError(t.line, t.column, "exponent must be an integer, got \"" + t.text + "\"");
        long long k = static_cast<long long>(rounded);
        return negative ? -k : k;
    }

    Expression parse_atom() {
        Token t = lex_.take();
        switch (t.type) {
            case Token::number: return Expression::constant(t.num);
            case Token::lparen: {
                Expression e = parse_expr();
                expect_rparen();
                return e;
            }
            case Token::name: {
                if (t.text == "d" && lex_.peek().type == Token::lparen) {
                    lex_.take();
                    Token inner = lex_.take();
                    if (inner.type != Token::name)
                        throw SyntaxError(inner.line, inner.column, "expected coordinate name inside d(..)");
                    expect_rparen();
                    return velocity_symbol(inner);
                }
                if (is_function_name(t.text) && lex_.peek().type == Token::lparen) {
                    lex_.take();
                    Expression arg = parse_expr();
                    expect_rparen();
                    ExprOp op = t.text == "sin"   ? ExprOp::sin
                                : t.text == "cos" ? ExprOp::cos
                                : t.text == "exp" ? ExprOp::exp
                                : t.text == "log" ? ExprOp::log
                                                  : ExprOp::sqrt;
                    return Expression::apply(op, std::move(arg));
                }
                if (lex_.peek().type == Token::lparen)
                    throw UnknownSymbolError(
                        t.text, "unknown symbol \"" + t.text + "\" at " + std::to_string(t.line) + ":" +
                                    std::to_string(t.column) + " (not one of sin, cos, exp, log, sqrt, d)");
                return plain_symbol(t);
            }
            default:
                throw SyntaxError(t.line, t.column, "expected an operand, got \"" + t.text + "\"");
        }
    }

    Expression velocity_symbol(const Token& t) {
        for (int k = 0; k < table_.n(); ++k) {
            if (table_.coordinates()[static_cast<size_t>(k)] == t.text) {
                require_allowed(SymbolKind::velocity, "d(" + t.text + ")", t);
                return Expression::symbol(table_.velocity_id(k));
            }
        }
        throw UnknownSymbolError(t.text, "unknown coordinate \"" + t.text + "\" in d(..) at " +
                                             std::to_string(t.line) + ":" + std::to_string(t.column));
    }

    Expression plain_symbol(const Token& t) {
        auto id = table_.find(t.text);
        if (!id)
            throw UnknownSymbolError(t.text, "unknown symbol \"" + t.text + "\" at " +
                                                 std::to_string(t.line) + ":" + std::to_string(t.column));
        require_allowed(table_.kind(*id), t.text, t);
        return Expression::symbol(*id);
    }

    void require_allowed(SymbolKind k, const std::string& spelled, const Token& t) {
        if ((allowed_ & mask(k)) == 0)
            throw UnknownSymbolError(spelled, "symbol \"" + spelled + "\" is not permitted here (" +
                                                  std::to_string(t.line) + ":" + std::to_string(t.column) + ")");
    }

    void expect_rparen() {
        Token t = lex_.take();
        if (t.type != Token::rparen)
            throw SyntaxError(t.line, t.column, "expected ')', got \"" + t.text + "\"");
    }

    Lexer lex_;
    const SymbolTable& table_;
    SymbolMask allowed_;
};

}  // namespace

Expression parse(std::string_view source, const SymbolTable& table, SymbolMask allowed) {
    return Parser(source, table, allowed).run();
}

// --- CompiledExpr ---------------------------------------------------------

CompiledExpr::CompiledExpr(const Expression& e, const SymbolTable& table)
    : keep_alive_(e.node()), table_(&table) {
    // post-order flattening
    struct Frame {
        const ExprNode* node;
        bool expanded;
    };
    std::vector<Frame> stack{{e.node().get(), false}};
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        if (f.expanded) {
            code_.push_back({f.node->op, f.node->value, f.node->symbol, f.node->exponent, f.node});
            continue;
        }
        stack.push_back({f.node, true});
        if (f.node->rhs) stack.push_back({f.node->rhs.get(), false});
        if (f.node->lhs) stack.push_back({f.node->lhs.get(), false});
    }
    int depth = 0;
    for (const Instr& in : code_) {
        if (in.op == ExprOp::constant || in.op == ExprOp::symbol) ++depth;
        else if (in.op == ExprOp::add || in.op == ExprOp::sub || in.op == ExprOp::mul || in.op == ExprOp::div)
            --depth;
        max_stack_ = std::max(max_stack_, depth);
    }
}

double CompiledExpr::eval(std::span<const double> values) const {
    if (code_.empty()) return 0.0;
    double local[64] = {0.0};
    std::vector<double> heap;
    double* s = local;
    if (max_stack_ > 64) {
        heap.resize(static_cast<size_t>(max_stack_));
        s = heap.data();
    }
    int top = 0;
    for (const Instr& in : code_) {
        switch (in.op) {
            case ExprOp::constant: s[top++] = in.value; break;
            case ExprOp::symbol: s[top++] = values[static_cast<size_t>(in.symbol)]; break;
            case ExprOp::neg: s[top - 1] = -s[top - 1]; break;
            case ExprOp::sin: s[top - 1] = std::sin(s[top - 1]); break;
            case ExprOp::cos: s[top - 1] = std::cos(s[top - 1]); break;
            case ExprOp::exp: s[top - 1] = std::exp(s[top - 1]); break;
            case ExprOp::log:
                if (!(s[top - 1] > 0.0))
                    throw DomainError("log of non-positive value", node_str(in.origin, table_));
                s[top - 1] = std::log(s[top - 1]);
                break;
            case ExprOp::sqrt:
                if (s[top - 1] < 0.0)
                    throw DomainError("sqrt of negative value", node_str(in.origin, table_));
                s[top - 1] = std::sqrt(s[top - 1]);
                break;
            case ExprOp::add: --top; s[top - 1] += s[top]; break;
            case ExprOp::sub: --top; s[top - 1] -= s[top]; break;
            case ExprOp::mul: --top; s[top - 1] *= s[top]; break;
            case ExprOp::div:
                --top;
                if (s[top] == 0.0) throw DomainError("division by zero", node_str(in.origin, table_));
                s[top - 1] /= s[top];
                break;
            case ExprOp::pow:
                if (s[top - 1] == 0.0 && in.exponent < 0)
                    throw DomainError("zero raised to a negative power", node_str(in.origin, table_));
                s[top - 1] = powi(s[top - 1], in.exponent);
                break;
        }
    }
    return s[0];
}

Model make_model(std::string name, std::vector<std::string> coordinates,
                 std::string_view lagrangian_source,
                 std::vector<std::pair<std::string, double>> parameters) {
    Model m;
    m.name = std::move(name);
    m.symbols = SymbolTable::make(std::move(coordinates), std::move(parameters));
    m.lagrangian = parse(lagrangian_source, m.symbols, kLagrangianSymbols);
    return m;
}

}  // namespace clairaut
