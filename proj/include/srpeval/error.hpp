#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace srpeval {

/// Coarse error classes. The CLI prints `error_class_name()` as its single-line
/// machine-parseable failure tag; the HTTP service maps classes to status codes.
enum class ErrorClass {
    InvalidArgument,
    NotFound,
    Duplicate,
    Validation,
    Io,
    CorruptRecord,
    UnreadableImage,
    UnsupportedMediaType,
    PromptFidelity,
    AuthFailure,
    RetryBudgetExhausted,
    MalformedReply,
    ReplayMiss,
    Parse,
    Config,
    MissingPrerequisite,
};

std::string_view error_class_name(ErrorClass c);

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
    ErrorClass error_class() const noexcept { return cls_; }

private:
    ErrorClass cls_;
};

}  // namespace srpeval
