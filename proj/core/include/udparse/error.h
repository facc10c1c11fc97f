#ifndef UDPARSE_ERROR_H_
#define UDPARSE_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace udparse {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: malformed files, inconsistent annotations, empty corpora.
class DataError : public Error {
 public:
  using Error::Error;
};

// A CoNLL-U (or other line-oriented) input could not be parsed.
class ParseError : public DataError {
 public:
  ParseError(size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  size_t line() const { return line_; }

 private:
  size_t line_;
};

// Tensor shapes that do not fit the primitive they were passed to.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A forward pass produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A serialized artifact carries an unsupported format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace udparse

#endif  // UDPARSE_ERROR_H_
