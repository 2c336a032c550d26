#pragma once

#include <stdexcept>

namespace cqc {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An argument lies outside its documented domain.
struct ParameterError : Error {
    using Error::Error;
};

/// File-level failure: open, read, write, or parse.
struct IoError : Error {
    using Error::Error;
};

/// QBER is undefined because no key events occur (p_D1 = 0).
struct UndefinedQberError : Error {
    using Error::Error;
};

/// Observables are incompatible with the attack model (p_D3 > T/2 + p_e3).
struct InconsistentObservablesError : Error {
    using Error::Error;
};

/// A case has no single-click mass left after dropping multi-click outcomes.
struct DegenerateCaseError : Error {
    using Error::Error;
};

/// Dark counts dominate the key events, so the corruption bound does not apply.
struct DarkCountRegimeError : Error {
    using Error::Error;
};

/// Detector efficiency of zero suppresses the blocked-path statistics entirely.
struct SingularityError : Error {
    using Error::Error;
};

} // namespace cqc
