#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace underband {

inline constexpr const char* kVersion = "1.0.0";

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgumentError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct FormatError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgumentError(msg);
}

inline void require_dims(bool cond, const std::string& msg) {
    if (!cond) throw DimensionError(msg);
}

// 17 significant digits: lossless round trip for IEEE doubles.
inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// Uniform draw on [0, 1) with 53 bits from a raw 64-bit generator word;
// avoids the implementation-defined std::uniform_real_distribution sequence.
inline double uniform01(std::uint64_t word) {
    return static_cast<double>(word >> 11) * 0x1.0p-53;
}

}  // namespace underband
