#pragma once

#include <stdexcept>
#include <string>

namespace lexbias {

/// Bad input: malformed files, unknown labels, violated preconditions.
/// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical failure that should not happen with sane settings
/// (non-finite loss, non-finite gradient). The CLI maps this to exit code 1.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace lexbias
