#pragma once

#include <stdexcept>
#include <string>

namespace astveil {

// Every failure raised by the library derives from Error so callers can
// catch the whole family at command boundaries.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ASTVEIL_DEFINE_ERROR(Name) \
  class Name : public Error {      \
   public:                         \
    using Error::Error;            \
  }

// code-graph
ASTVEIL_DEFINE_ERROR(UnsupportedLanguage);
ASTVEIL_DEFINE_ERROR(NonUtf8Input);
ASTVEIL_DEFINE_ERROR(EmptyGraph);
ASTVEIL_DEFINE_ERROR(SpanOutOfBounds);
ASTVEIL_DEFINE_ERROR(MalformedGraph);

// pattern-miner
ASTVEIL_DEFINE_ERROR(Disconnected);
ASTVEIL_DEFINE_ERROR(DegenerateClass);

// attack-synthesis
ASTVEIL_DEFINE_ERROR(NoInstanceFound);
ASTVEIL_DEFINE_ERROR(IndentationUnresolvable);

// meta-model
ASTVEIL_DEFINE_ERROR(LengthMismatch);
ASTVEIL_DEFINE_ERROR(EmptyTrainingSet);

// model-clients
ASTVEIL_DEFINE_ERROR(DegenerateLabels);
ASTVEIL_DEFINE_ERROR(Unavailable);
ASTVEIL_DEFINE_ERROR(MalformedResponse);

// cli / persistence
ASTVEIL_DEFINE_ERROR(ConfigError);
ASTVEIL_DEFINE_ERROR(FormatError);

#undef ASTVEIL_DEFINE_ERROR

}  // namespace astveil
