#pragma once

#include <stdexcept>
#include <string>

namespace shearlab {

/// Base class for every error raised by the library. `code()` is used by the
/// CLI to map failures onto distinct process exit statuses.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what, int code = 1)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)), code_(code) {}

    const std::string& kind() const noexcept { return kind_; }
    int code() const noexcept { return code_; }

private:
    std::string kind_;
    int code_;
};

#define SHEARLAB_DEFINE_ERROR(Name, Code)                                        \
    class Name : public Error {                                                  \
    public:                                                                      \
        explicit Name(const std::string& what) : Error(#Name, what, Code) {}     \
    }

// profiles
SHEARLAB_DEFINE_ERROR(InvalidParams, 10);
SHEARLAB_DEFINE_ERROR(UnsupportedFamily, 11);
SHEARLAB_DEFINE_ERROR(SingularDerivative, 12);
SHEARLAB_DEFINE_ERROR(DegenerateProfile, 13);
// timescales
SHEARLAB_DEFINE_ERROR(NoEnhancement, 20);
SHEARLAB_DEFINE_ERROR(BracketFailure, 21);
SHEARLAB_DEFINE_ERROR(StepExitsDomain, 22);
SHEARLAB_DEFINE_ERROR(UnsupportedProfile, 23);
// pde / sde / coupling
SHEARLAB_DEFINE_ERROR(ResolutionError, 30);
SHEARLAB_DEFINE_ERROR(CFLError, 31);
SHEARLAB_DEFINE_ERROR(SingularProfileResolution, 32);
SHEARLAB_DEFINE_ERROR(SolveFailure, 33);
// measures
SHEARLAB_DEFINE_ERROR(ShapeMismatch, 40);
SHEARLAB_DEFINE_ERROR(MarginalMismatch, 41);
SHEARLAB_DEFINE_ERROR(UnderSampled, 42);
// ratefit
SHEARLAB_DEFINE_ERROR(WindowNotReached, 50);
SHEARLAB_DEFINE_ERROR(InsufficientData, 51);
// cli
SHEARLAB_DEFINE_ERROR(ConfigError, 60);

#undef SHEARLAB_DEFINE_ERROR

} // namespace shearlab
