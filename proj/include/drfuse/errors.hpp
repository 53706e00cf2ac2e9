#pragma once

#include <stdexcept>
#include <string>

namespace drfuse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: non-finite entries, asymmetric matrices, out-of-range parameters.
class InputError : public Error {
public:
    using Error::Error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A matrix required to be positive (semi)definite is not.
class DefinitenessError : public Error {
public:
    using Error::Error;
};

/// Requested rank exceeds the available rank, or a map is rank deficient.
class RankError : public Error {
public:
    using Error::Error;
};

/// Problem has no informative content (e.g. zero rank).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an algorithm is violated.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Wire message byte count or header does not match the declared layout.
class FramingError : public Error {
public:
    using Error::Error;
};

/// Wire message decodes to an unsolvable or inconsistent payload.
class CorruptMessageError : public Error {
public:
    using Error::Error;
};

/// File could not be read or parsed.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace drfuse
