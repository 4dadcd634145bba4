#pragma once

#include <stdexcept>
#include <string>

namespace clairaut {

/// Exit-code groups used by the command-line tool. Every library error
/// belongs to exactly one group.
enum class ErrorCode {
    parse = 1,          // grammar, model file, unknown symbols
    rank = 2,           // Hessian rank / index split violations
    resolution = 3,     // Newton failures, velocity-dependence violations
    inconsistent = 4,   // unsolvable degenerate velocity systems
    verification = 5,   // failed verification checks
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// --- parse group ------------------------------------------------------

class SyntaxError : public Error {
public:
    SyntaxError(int line, int column, const std::string& what)
        : Error(ErrorCode::parse,
                "syntax error at " + std::to_string(line) + ":" +
                    std::to_string(column) + ": " + what),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

class UnknownSymbolError : public Error {
public:
    UnknownSymbolError(const std::string& token, const std::string& what)
        : Error(ErrorCode::parse, what), token_(token) {}

    const std::string& token() const noexcept { return token_; }

private:
    std::string token_;
};

class ModelFileError : public Error {
public:
    explicit ModelFileError(const std::string& what)
        : Error(ErrorCode::parse, what) {}
};

// --- evaluation -------------------------------------------------------

class UnboundSymbolError : public Error {
public:
    explicit UnboundSymbolError(const std::string& name)
        : Error(ErrorCode::resolution, "unbound symbol \"" + name + "\"") {}
};

class DomainError : public Error {
public:
    DomainError(const std::string& what, const std::string& subtree)
        : Error(ErrorCode::resolution, what + " in \"" + subtree + "\""),
          subtree_(subtree) {}

    const std::string& subtree() const noexcept { return subtree_; }

private:
    std::string subtree_;
};

// --- rank group -------------------------------------------------------

class RankNotConstantError : public Error {
public:
    explicit RankNotConstantError(const std::string& what)
        : Error(ErrorCode::rank, what) {}
};

class SplitUnstableError : public Error {
public:
    explicit SplitUnstableError(const std::string& what)
        : Error(ErrorCode::rank, what) {}
};

class ModelSingularError : public Error {
public:
    explicit ModelSingularError(const std::string& what)
        : Error(ErrorCode::rank, what) {}
};

// --- resolution group -------------------------------------------------

class NoConvergenceError : public Error {
public:
    NoConvergenceError(double best_residual, int iterations)
        : Error(ErrorCode::resolution,
                "velocity resolution did not converge after " +
                    std::to_string(iterations) +
                    " iterations (best residual " +
                    std::to_string(best_residual) + ")"),
          best_residual_(best_residual) {}

    double best_residual() const noexcept { return best_residual_; }

private:
    double best_residual_;
};

class SingularJacobianError : public Error {
public:
    explicit SingularJacobianError(const std::string& what)
        : Error(ErrorCode::resolution, what) {}
};

class DependenceOnVelocityError : public Error {
public:
    DependenceOnVelocityError(const std::string& quantity, double deviation)
        : Error(ErrorCode::resolution,
                quantity + " depends on unresolved velocities (probe deviation " +
                    std::to_string(deviation) + ")") {}
};

class MissingGaugeError : public Error {
public:
    explicit MissingGaugeError(const std::string& what)
        : Error(ErrorCode::resolution, what) {}
};

class TooFewSamplesError : public Error {
public:
    explicit TooFewSamplesError(const std::string& what)
        : Error(ErrorCode::resolution, what) {}
};

// --- inconsistent-system group -----------------------------------------

class InconsistentSystemError : public Error {
public:
    explicit InconsistentSystemError(const std::string& what)
        : Error(ErrorCode::inconsistent, what) {}
};

class FNotInvertibleError : public Error {
public:
    explicit FNotInvertibleError(const std::string& what)
        : Error(ErrorCode::inconsistent, what) {}
};

// --- verification group -------------------------------------------------

class CalibrationAmbiguousError : public Error {
public:
    explicit CalibrationAmbiguousError(const std::string& what)
        : Error(ErrorCode::verification, what) {}
};

class SupremumOnBoundaryError : public Error {
public:
    explicit SupremumOnBoundaryError(const std::string& what)
        : Error(ErrorCode::verification, what) {}
};

}  // namespace clairaut
