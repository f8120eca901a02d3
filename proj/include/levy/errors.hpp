#pragma once

#include <stdexcept>
#include <string>

namespace levy {

/// Coarse error classes. The CLI maps these onto process exit codes.
enum class ErrorCategory { config, numeric, hypothesis };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

#define LEVY_DEFINE_ERROR(Name, Category)                                     \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& what)                                \
            : Error(ErrorCategory::Category, std::string(#Name ": ") + what) {} \
    }

// measure
LEVY_DEFINE_ERROR(NonConvergentQuadrature, numeric);
LEVY_DEFINE_ERROR(DivergentTail, numeric);
LEVY_DEFINE_ERROR(ShellBudgetExceeded, numeric);
LEVY_DEFINE_ERROR(InvalidMeasure, config);
// kernel
LEVY_DEFINE_ERROR(DimensionMismatch, config);
LEVY_DEFINE_ERROR(GradientDependentKernel, config);
// local_op
LEVY_DEFINE_ERROR(AsymmetricHessian, numeric);
// exprlang
LEVY_DEFINE_ERROR(UnknownIdentifier, config);
LEVY_DEFINE_ERROR(ArityError, config);
LEVY_DEFINE_ERROR(DomainError, numeric);
LEVY_DEFINE_ERROR(UnboundVariable, config);
// grid
LEVY_DEFINE_ERROR(IndexOnBoxEdge, numeric);
LEVY_DEFINE_ERROR(InvalidDomain, config);
// nonlocal
LEVY_DEFINE_ERROR(QuadratureMismatch, config);
LEVY_DEFINE_ERROR(NonFiniteSample, numeric);
LEVY_DEFINE_ERROR(NonIntegrable, numeric);
// solver
LEVY_DEFINE_ERROR(UnboundedSearch, numeric);
LEVY_DEFINE_ERROR(CflViolation, numeric);
LEVY_DEFINE_ERROR(InvalidProblem, config);
// mc
LEVY_DEFINE_ERROR(UnsupportedConfiguration, config);
// cli
LEVY_DEFINE_ERROR(ConfigError, config);

#undef LEVY_DEFINE_ERROR

/// Parse failure with the byte offset into the source text and what the
/// parser was looking for at that point.
class SyntaxError : public Error {
public:
    SyntaxError(std::size_t position, std::string expected)
        : Error(ErrorCategory::config,
                "SyntaxError at position " + std::to_string(position) + ": expected " + expected),
          position_(position), expected_(std::move(expected)) {}

    [[nodiscard]] std::size_t position() const noexcept { return position_; }
    [[nodiscard]] const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t position_;
    std::string expected_;
};

/// A comparison or classification precondition failed. Distinct from a
/// comparison that ran and found a violation.
class HypothesisNotMet : public Error {
public:
    HypothesisNotMet(std::string hypothesis, const std::string& detail)
        : Error(ErrorCategory::hypothesis, "HypothesisNotMet [" + hypothesis + "]: " + detail),
          hypothesis_(std::move(hypothesis)) {}

    [[nodiscard]] const std::string& hypothesis() const noexcept { return hypothesis_; }

private:
    std::string hypothesis_;
};

}  // namespace levy
