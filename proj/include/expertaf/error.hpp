#pragma once

#include <stdexcept>
#include <string>

namespace expertaf {

/// Base class for every failure raised by the library. `kind()` is the
/// machine-readable name written into error records by the CLI.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define EXPERTAF_DEFINE_ERROR(Name)                                          \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& what) : Error(#Name, what) {}       \
    };

EXPERTAF_DEFINE_ERROR(InvalidPose)
EXPERTAF_DEFINE_ERROR(DegenerateInput)
EXPERTAF_DEFINE_ERROR(ShapeMismatch)
EXPERTAF_DEFINE_ERROR(LengthMismatch)
EXPERTAF_DEFINE_ERROR(InvalidWindow)
EXPERTAF_DEFINE_ERROR(NoCandidateWindow)
EXPERTAF_DEFINE_ERROR(InvalidRecord)
EXPERTAF_DEFINE_ERROR(ServiceError)
EXPERTAF_DEFINE_ERROR(CorpusTooSmall)
EXPERTAF_DEFINE_ERROR(TokenOutOfRange)
EXPERTAF_DEFINE_ERROR(CodebookMismatch)
EXPERTAF_DEFINE_ERROR(MissingModality)
EXPERTAF_DEFINE_ERROR(EmptyResults)
EXPERTAF_DEFINE_ERROR(EmptyHypothesis)
EXPERTAF_DEFINE_ERROR(EmptyInput)
EXPERTAF_DEFINE_ERROR(ConfigError)
EXPERTAF_DEFINE_ERROR(IoError)
EXPERTAF_DEFINE_ERROR(FormatError)

#undef EXPERTAF_DEFINE_ERROR

} // namespace expertaf
