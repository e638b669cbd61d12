#pragma once

#include <stdexcept>
#include <string>

namespace mcontrol {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define MCONTROL_DEFINE_ERROR(Name)                               \
    class Name : public Error {                                   \
    public:                                                       \
        explicit Name(const std::string& what) : Error(what) {}   \
    }

MCONTROL_DEFINE_ERROR(DimensionMismatch);
MCONTROL_DEFINE_ERROR(NonPositiveHorizon);
MCONTROL_DEFINE_ERROR(DuplicateEigenvalueWithinBranch);
MCONTROL_DEFINE_ERROR(AmbiguousOverlap);
MCONTROL_DEFINE_ERROR(NearResonance);
MCONTROL_DEFINE_ERROR(ToleranceNotReached);
MCONTROL_DEFINE_ERROR(EigensolverFailure);
MCONTROL_DEFINE_ERROR(SingularGram);
MCONTROL_DEFINE_ERROR(ZeroCoefficient);
MCONTROL_DEFINE_ERROR(ParseError);
MCONTROL_DEFINE_ERROR(ValidationError);

#undef MCONTROL_DEFINE_ERROR

} // namespace mcontrol
