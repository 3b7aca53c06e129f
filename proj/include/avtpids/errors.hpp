#pragma once

#include <stdexcept>
#include <string>

namespace avtpids {

// Root of the library's exception hierarchy.  The CLI maps subclasses to
// distinct exit codes, so new error kinds should extend one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file or stream could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// A byte container (pcap, checkpoint, cache, replay set, report) violates
// its format: bad magic, unsupported version, inconsistent lengths.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A captured frame is too short to carry the headers it claims.
class MalformedFrameError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes or sizes do not line up for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A parameter value is outside its documented domain (bad window width,
// fraction outside [0,1], empty input where data is required, ...).
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

// An operation was called out of order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

// Training data contains windows labeled anomalous; models train on
// normal traffic only.
class ContaminationError : public Error {
 public:
  using Error::Error;
};

}  // namespace avtpids
