#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clairaut/errors.hpp"

namespace clairaut {

enum class SymbolKind : unsigned {
    time = 1u << 0,
    coordinate = 1u << 1,
    velocity = 1u << 2,
    momentum = 1u << 3,
    parameter = 1u << 4,
};

using SymbolMask = unsigned;

constexpr SymbolMask mask(SymbolKind k) { return static_cast<SymbolMask>(k); }

/// Symbols admissible in a Lagrangian: L(q, v; parameters), no explicit time.
constexpr SymbolMask kLagrangianSymbols =
    mask(SymbolKind::coordinate) | mask(SymbolKind::velocity) | mask(SymbolKind::parameter);

/// Observables live on the restricted phase space (q, p_i).
constexpr SymbolMask kObservableSymbols =
    mask(SymbolKind::coordinate) | mask(SymbolKind::momentum) | mask(SymbolKind::parameter);

/// Gauge velocities may depend on time as well.
constexpr SymbolMask kGaugeSymbols = kObservableSymbols | mask(SymbolKind::time);

/// Ordered symbol namespace for one model: the reserved time symbol `t`,
/// n coordinates, their velocities (spelled `d(name)` in sources), their
/// momenta (spelled `p_name`), and named parameters with bound values.
/// Coordinate, velocity, momentum and parameter namespaces are disjoint by
/// construction; colliding names are rejected.
class SymbolTable {
public:
    SymbolTable() = default;  // empty table; populate via make()
    static SymbolTable make(std::vector<std::string> coordinates,
                            std::vector<std::pair<std::string, double>> parameters = {});

    int size() const { return static_cast<int>(names_.size()); }
    int n() const { return n_; }

    int time_id() const { return 0; }
    int coordinate_id(int k) const { return 1 + k; }
    int velocity_id(int k) const { return 1 + n_ + k; }
    int momentum_id(int k) const { return 1 + 2 * n_ + k; }
    int parameter_count() const { return static_cast<int>(parameter_values_.size()); }
    int parameter_id(int j) const { return 1 + 3 * n_ + j; }

    SymbolKind kind(int id) const;
    /// Position of a coordinate/velocity/momentum symbol within 0..n-1.
    int coordinate_index(int id) const;
    const std::string& name(int id) const { return names_[static_cast<size_t>(id)]; }
    /// Grammar spelling: `d(q1)` for velocities, the plain name otherwise.
    std::string display(int id) const;
    double parameter_value(int j) const { return parameter_values_[static_cast<size_t>(j)]; }

    /// Lookup by source spelling of plain identifiers (not the `d(..)` form).
    std::optional<int> find(std::string_view name) const;
    const std::vector<std::string>& coordinates() const { return coordinate_names_; }

private:
    int n_ = 0;
    std::vector<std::string> names_;          // indexed by symbol id
    std::vector<std::string> coordinate_names_;
    std::vector<double> parameter_values_;    // parameter j -> bound value
};

enum class ExprOp {
    constant,
    symbol,
    neg,
    sin,
    cos,
    exp,
    log,
    sqrt,
    add,
    sub,
    mul,
    div,
    pow,  // integer exponent
};

struct ExprNode {
    ExprOp op = ExprOp::constant;
    double value = 0.0;  // constant
    int symbol = -1;     // symbol id
    int exponent = 0;    // pow
    std::shared_ptr<const ExprNode> lhs;
    std::shared_ptr<const ExprNode> rhs;
};

class EvalContext;

/// Immutable expression tree over a SymbolTable. Construction applies light
/// simplification (constant folding, 0/1 identities) only; numeric equality
/// of expressions is decided by evaluation, not by tree comparison.
class Expression {
public:
    Expression();  // constant 0
    static Expression constant(double value);
    static Expression symbol(int id);

    static Expression add(Expression a, Expression b);
    static Expression sub(Expression a, Expression b);
    static Expression mul(Expression a, Expression b);
    static Expression div(Expression a, Expression b);
    static Expression neg(Expression a);
    static Expression pow(Expression base, int exponent);
    static Expression apply(ExprOp unary, Expression a);

    double eval(const EvalContext& ctx) const;
    Expression diff(int symbol_id) const;
    bool depends_on(int symbol_id) const;
    /// Collect the ids of all free symbols (sorted, unique).
    std::vector<int> free_symbols() const;

    /// Grammar-compatible rendering; parse(str(e)) rebuilds an equal tree.
    std::string str(const SymbolTable& table) const;

    static bool tree_equal(const Expression& a, const Expression& b);

    const ExprNode& root() const { return *node_; }
    const std::shared_ptr<const ExprNode>& node() const { return node_; }

private:
    explicit Expression(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
    std::shared_ptr<const ExprNode> node_;
};

inline Expression operator+(Expression a, Expression b) { return Expression::add(std::move(a), std::move(b)); }
inline Expression operator-(Expression a, Expression b) { return Expression::sub(std::move(a), std::move(b)); }
inline Expression operator*(Expression a, Expression b) { return Expression::mul(std::move(a), std::move(b)); }
inline Expression operator/(Expression a, Expression b) { return Expression::div(std::move(a), std::move(b)); }
inline Expression operator-(Expression a) { return Expression::neg(std::move(a)); }

/// Value assignment for evaluation. Parameters are bound to their table
/// defaults on construction; everything else starts unbound.
class EvalContext {
public:
    explicit EvalContext(const SymbolTable& table);

    void bind(int id, double value);
    void bind_time(double t) { bind(table_->time_id(), t); }
    void bind_coordinates(std::span<const double> q);
    void bind_velocities(std::span<const double> v);

    bool bound(int id) const { return bound_[static_cast<size_t>(id)] != 0; }
    double value(int id) const { return values_[static_cast<size_t>(id)]; }
    const SymbolTable& table() const { return *table_; }
    std::span<const double> values() const { return values_; }

private:
    const SymbolTable* table_;
    std::vector<double> values_;
    std::vector<unsigned char> bound_;
};

/// Parse `source` against `table`, admitting only symbols whose kind is in
/// `allowed`. Grammar: expr := term (('+'|'-') term)*; term := base
/// (('*'|'/') base)*; base := '-' base | atom ('^' integer)*; atom := number
/// | name | 'd(' name ')' | fn '(' expr ')' | '(' expr ')' with fn one of
/// sin, cos, exp, log, sqrt. '^' binds tighter than unary minus and is
/// right-associative.
Expression parse(std::string_view source, const SymbolTable& table,
                 SymbolMask allowed = kLagrangianSymbols);

/// Flattened form of an Expression for repeated evaluation. Evaluation is
/// pure and reentrant; contexts are not mutated.
class CompiledExpr {
public:
    CompiledExpr() = default;
    CompiledExpr(const Expression& e, const SymbolTable& table);

    /// `values` must cover every symbol id occurring in the expression.
    double eval(std::span<const double> values) const;
    double eval(const EvalContext& ctx) const { return eval(ctx.values()); }
    bool empty() const { return code_.empty(); }

private:
    struct Instr {
        ExprOp op;
        double value;
        int symbol;
        int exponent;
        const ExprNode* origin;
    };
    std::vector<Instr> code_;
    int max_stack_ = 0;
    std::shared_ptr<const ExprNode> keep_alive_;
    const SymbolTable* table_ = nullptr;
};

/// A named Lagrangian over its symbol table.
struct Model {
    std::string name;
    SymbolTable symbols;
    Expression lagrangian;
};

Model make_model(std::string name, std::vector<std::string> coordinates,
                 std::string_view lagrangian_source,
                 std::vector<std::pair<std::string, double>> parameters = {});

}  // namespace clairaut
