#pragma once

#include <stdexcept>
#include <string>

namespace thirdint {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unknown variable name, unbound symbol, or a symbol used where it is not allowed.
class SymbolError : public Error {
public:
    using Error::Error;
};

/// Evaluation failed: irrational value in exact mode, division by zero, domain violation.
class EvalError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class NonPolynomialError : public Error {
public:
    using Error::Error;
};

/// A point outside the stated domain of a coordinate chart.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Evaluation at a singular locus of a chart or of a potential.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Numerical integration ran into a movable pole.
class PoleError : public Error {
public:
    using Error::Error;
};

/// A precondition on numerical input is violated (inconsistent initial data, bad tolerance, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

} // namespace thirdint
