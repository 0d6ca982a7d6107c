#ifndef FNCODE_ERROR_H_
#define FNCODE_ERROR_H_

#include <stdexcept>
#include <string>

namespace fncode {

// Bad caller input: shape mismatches, out-of-range coordinates, invalid
// configuration values.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FormatErrorKind {
  kBadMagic,
  kBadVersion,
  kTruncated,
  kOverflow,
  kBadValue,
  kTrailingBytes,
};

// A file was readable but its contents do not match the expected layout.
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, std::string field, const std::string& what)
      : std::runtime_error("format error in field '" + field + "': " + what),
        kind_(kind),
        field_(std::move(field)) {}

  FormatErrorKind kind() const { return kind_; }
  const std::string& field() const { return field_; }

 private:
  FormatErrorKind kind_;
  std::string field_;
};

// Numerically degenerate input, e.g. a zero-variance sample set.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes a warning line to stderr unless warnings are silenced.
void Warn(const std::string& message);
void SetWarningsEnabled(bool enabled);

}  // namespace fncode

#endif  // FNCODE_ERROR_H_
