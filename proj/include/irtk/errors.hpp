#pragma once

#include <stdexcept>
#include <string>

namespace irtk {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file header or content that does not follow the declared format.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

// Input vector length does not match what a model or routine was built for.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Rank-deficient geometric configuration (collinear points, singular matrix).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

// A projective map sent the point to infinity.
class PointAtInfinityError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace irtk
