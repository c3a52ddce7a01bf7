#pragma once

#include <stdexcept>
#include <string>

namespace argue {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ARGUE_DEFINE_ERROR(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

ARGUE_DEFINE_ERROR(ShapeError);
ARGUE_DEFINE_ERROR(ConfigError);
ARGUE_DEFINE_ERROR(IndexError);
ARGUE_DEFINE_ERROR(ModeError);
ARGUE_DEFINE_ERROR(IngestionError);
ARGUE_DEFINE_ERROR(SchemaError);
ARGUE_DEFINE_ERROR(FormatError);
ARGUE_DEFINE_ERROR(ProtocolError);
ARGUE_DEFINE_ERROR(MetricError);
ARGUE_DEFINE_ERROR(AttributeError);
ARGUE_DEFINE_ERROR(PersistenceError);
ARGUE_DEFINE_ERROR(ModelTypeError);

#undef ARGUE_DEFINE_ERROR

/// Error raised by the experiment pipeline; the message is prefixed with the stage.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

namespace detail {

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace detail
}  // namespace argue
