#pragma once

#include <stdexcept>
#include <string>

namespace sixdiff {

// Coarse failure class; the CLI maps each to a distinct exit code.
enum class ErrorCategory { kConfig, kData, kRuntime };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define SIXDIFF_DEFINE_ERROR(Name, Category)                     \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what)                       \
        : Error(ErrorCategory::Category, #Name ": " + what) {}   \
  }

SIXDIFF_DEFINE_ERROR(MalformedAddress, kData);
SIXDIFF_DEFINE_ERROR(MalformedPrefix, kData);
SIXDIFF_DEFINE_ERROR(MalformedResultLine, kData);
SIXDIFF_DEFINE_ERROR(EmptyCorpus, kData);
SIXDIFF_DEFINE_ERROR(EmptyCandidateSet, kData);
SIXDIFF_DEFINE_ERROR(CheckpointError, kData);
SIXDIFF_DEFINE_ERROR(InvalidSchedule, kConfig);
SIXDIFF_DEFINE_ERROR(InvalidWindow, kConfig);
SIXDIFF_DEFINE_ERROR(InvalidStride, kConfig);
SIXDIFF_DEFINE_ERROR(InvalidConfig, kConfig);
SIXDIFF_DEFINE_ERROR(StepOutOfRange, kRuntime);
SIXDIFF_DEFINE_ERROR(ShapeMismatch, kRuntime);
SIXDIFF_DEFINE_ERROR(NonFiniteLoss, kRuntime);
SIXDIFF_DEFINE_ERROR(ProberUnavailable, kRuntime);

#undef SIXDIFF_DEFINE_ERROR

}  // namespace sixdiff
