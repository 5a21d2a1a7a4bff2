#pragma once

#include <stdexcept>
#include <string>

namespace cotdrive {

/// Base of every error thrown by the library. The kind string is stable and
/// is what the CLI prints in front of the message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define COTDRIVE_DEFINE_ERROR(Name, tag)                                  \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(tag, message) {}    \
  };

COTDRIVE_DEFINE_ERROR(SchemaError, "schema")
COTDRIVE_DEFINE_ERROR(IntegrityError, "integrity")
COTDRIVE_DEFINE_ERROR(ConfigError, "config")
COTDRIVE_DEFINE_ERROR(ArgumentError, "argument")
COTDRIVE_DEFINE_ERROR(ShapeError, "shape")
COTDRIVE_DEFINE_ERROR(InputError, "input")
COTDRIVE_DEFINE_ERROR(UndefinedMetricError, "undefined-metric")
COTDRIVE_DEFINE_ERROR(ScoringError, "scoring")
COTDRIVE_DEFINE_ERROR(ParseError, "parse")
COTDRIVE_DEFINE_ERROR(IoError, "io")
COTDRIVE_DEFINE_ERROR(DivergenceError, "divergence")
COTDRIVE_DEFINE_ERROR(SampleRejected, "sample-rejected")
COTDRIVE_DEFINE_ERROR(TeacherError, "teacher")

#undef COTDRIVE_DEFINE_ERROR

}  // namespace cotdrive
