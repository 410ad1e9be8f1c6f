#pragma once

#include <stdexcept>
#include <string>

namespace cact {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand extents do not line up (matmul mismatch, bad reshape, empty input).
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed file content: bad magic, truncation, invalid JSON, out-of-range
// indices. Messages carry the byte offset where applicable.
class FormatError : public Error {
public:
    using Error::Error;
};

// Fewer than 3 distinct points were supplied for triangulation.
class TooFewPointsError : public Error {
public:
    using Error::Error;
};

// All triangulation input points are collinear.
class DegenerateGeometryError : public Error {
public:
    using Error::Error;
};

// A landmark set is missing points required by the embedding mode.
class InsufficientLandmarksError : public Error {
public:
    using Error::Error;
};

}  // namespace cact
