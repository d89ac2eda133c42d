#pragma once

#include <stdexcept>
#include <string>

namespace vflrecon {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct RankDeficient : Error {
    using Error::Error;
};

struct DimensionCap : Error {
    using Error::Error;
};

struct IndexOutOfRange : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct InvalidArchitecture : Error {
    using Error::Error;
};

struct NotOrthogonal : Error {
    using Error::Error;
};

struct NonFiniteLoss : Error {
    using Error::Error;
};

struct NoBinaryFeatures : Error {
    using Error::Error;
};

struct InvalidConfig : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace vflrecon
