#pragma once

#include <stdexcept>
#include <string>

namespace relent {

/// A model or plan violates one of its structural invariants. The message
/// names the first violated invariant.
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// The comparison measure assigns probability zero to an event the base
/// measure charges; the log-likelihood ratio (and any relative entropy
/// built from it) is infinite.
struct absolute_continuity_error : std::runtime_error {
    explicit absolute_continuity_error(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical routine failed to reach its accuracy target (singular solve,
/// non-convergent iteration, non-convex input, ...).
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// A quantity was requested outside its domain of definition, e.g. the
/// discrete waiting-time generating function at |p| >= 1 where it is +inf.
struct domain_error : std::runtime_error {
    explicit domain_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace relent
