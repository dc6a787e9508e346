#pragma once

#include <stdexcept>
#include <string>

namespace styleopt {

/// Shapes that do not agree (dof, waypoint count, weight length, ...).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value outside its domain: non-finite numbers, bad counts, unknown enums.
class ValueError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Filesystem failures. The message always carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation issued out of order (e.g. a second batch while one is pending).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Lookup of something that does not exist (session, pair id).
class NotFoundError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace styleopt
