#pragma once

#include <stdexcept>
#include <string>

namespace rarelab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define RARELAB_DEFINE_ERROR(Name)                     \
    class Name : public Error {                        \
    public:                                            \
        explicit Name(const std::string& what)         \
            : Error(std::string(#Name ": ") + what) {} \
    }

RARELAB_DEFINE_ERROR(InvalidOperator);
RARELAB_DEFINE_ERROR(DimensionMismatch);
RARELAB_DEFINE_ERROR(NonConvergence);
RARELAB_DEFINE_ERROR(SignError);
RARELAB_DEFINE_ERROR(DegenerateGap);
RARELAB_DEFINE_ERROR(DimTooLarge);
RARELAB_DEFINE_ERROR(ZeroDelta);
RARELAB_DEFINE_ERROR(BadParam);
RARELAB_DEFINE_ERROR(NoContraction);
RARELAB_DEFINE_ERROR(NotInDomain);
RARELAB_DEFINE_ERROR(Overflow);
RARELAB_DEFINE_ERROR(ScaleTooCoarse);
RARELAB_DEFINE_ERROR(ExpansionTooWeak);
RARELAB_DEFINE_ERROR(Inconsistent);
RARELAB_DEFINE_ERROR(EmptyLanguage);
RARELAB_DEFINE_ERROR(Undecidable);
RARELAB_DEFINE_ERROR(IoError);

#undef RARELAB_DEFINE_ERROR

/// Configuration problem, tagged with the offending field path (e.g. "ladder.count").
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error("ConfigError at '" + field + "': " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace rarelab
