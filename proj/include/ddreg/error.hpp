#pragma once

#include <stdexcept>
#include <string>

namespace ddreg {

enum class Errc {
    InvalidParam,
    SingularTransform,
    RoleMismatch,
    NotSimilarity,
    SizeMismatch,
    ConstantImage,
    OutOfSupport,
    InvalidThreshold,
    NotEnoughMatches,
    DegenerateGeometry,
    NoMatches,
    EmptyBatch,
    Io,
    Format,
};

const char *errc_name(Errc code) noexcept;

// All library failures are reported through this type; `code()` carries the
// category so callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string &what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

inline const char *errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::InvalidParam: return "InvalidParam";
    case Errc::SingularTransform: return "SingularTransform";
    case Errc::RoleMismatch: return "RoleMismatch";
    case Errc::NotSimilarity: return "NotSimilarity";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::ConstantImage: return "ConstantImage";
    case Errc::OutOfSupport: return "OutOfSupport";
    case Errc::InvalidThreshold: return "InvalidThreshold";
    case Errc::NotEnoughMatches: return "NotEnoughMatches";
    case Errc::DegenerateGeometry: return "DegenerateGeometry";
    case Errc::NoMatches: return "NoMatches";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::Io: return "Io";
    case Errc::Format: return "Format";
    }
    return "Unknown";
}

} // namespace ddreg
