#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace koti {

/// Base of every error raised by the toolkit. `name()` is the stable error
/// identifier printed by the command-line tool.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& message)
      : std::runtime_error(message), name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define KOTI_DEFINE_ERROR(Type)                                  \
  class Type : public ::koti::Error {                            \
   public:                                                       \
    explicit Type(const std::string& message)                    \
        : ::koti::Error(#Type, message) {}                       \
  }

// text / prompt building
KOTI_DEFINE_ERROR(InvalidKeyword);
KOTI_DEFINE_ERROR(TokenizationFailure);
KOTI_DEFINE_ERROR(InputTooLong);
KOTI_DEFINE_ERROR(MalformedPrompt);

// task configuration / verbalizer
KOTI_DEFINE_ERROR(ConfigError);
KOTI_DEFINE_ERROR(LabelWordCollision);
KOTI_DEFINE_ERROR(NonFiniteLogit);

// scorers
KOTI_DEFINE_ERROR(WorkerProtocolError);
KOTI_DEFINE_ERROR(DivergenceDetected);
KOTI_DEFINE_ERROR(InvalidHyperParams);

// evaluation
KOTI_DEFINE_ERROR(InsufficientClassExamples);
KOTI_DEFINE_ERROR(SampleTooLarge);
KOTI_DEFINE_ERROR(EmptyEvaluation);
KOTI_DEFINE_ERROR(UnknownLabel);
KOTI_DEFINE_ERROR(AllTrialsFailed);

// datasets
KOTI_DEFINE_ERROR(ParseError);
KOTI_DEFINE_ERROR(DuplicateId);
KOTI_DEFINE_ERROR(InvalidSpec);
KOTI_DEFINE_ERROR(UnknownNoteId);
KOTI_DEFINE_ERROR(IoError);

#undef KOTI_DEFINE_ERROR

}  // namespace koti
