#include "srpeval/error.hpp"

namespace srpeval {

std::string_view error_class_name(ErrorClass c) {
    switch (c) {
        case ErrorClass::InvalidArgument: return "invalid_argument";
        case ErrorClass::NotFound: return "not_found";
        case ErrorClass::Duplicate: return "duplicate";
        case ErrorClass::Validation: return "validation";
        case ErrorClass::Io: return "io";
        case ErrorClass::CorruptRecord: return "corrupt_record";
        case ErrorClass::UnreadableImage: return "unreadable_image";
        case ErrorClass::UnsupportedMediaType: return "unsupported_media_type";
        case ErrorClass::PromptFidelity: return "prompt_fidelity";
        case ErrorClass::AuthFailure: return "auth_failure";
        case ErrorClass::RetryBudgetExhausted: return "retry_budget_exhausted";
        case ErrorClass::MalformedReply: return "malformed_reply";
        case ErrorClass::ReplayMiss: return "replay_miss";
        case ErrorClass::Parse: return "parse";
        case ErrorClass::Config: return "config";
        case ErrorClass::MissingPrerequisite: return "missing_prerequisite";
    }
    return "unknown";
}

}  // namespace srpeval
