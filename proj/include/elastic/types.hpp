#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace elastic {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<std::int32_t, 3>;

/// Threads available to parallel loops (1 without OpenMP).
inline int max_threads() noexcept
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

/// Malformed mesh data: bad indices, repeated face vertices, missing texture.
class MeshError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Mesh file could not be parsed. `line()` is 1-based, 0 when unknown.
class ParseError : public MeshError {
  public:
    ParseError(const std::string& what, std::size_t line)
        : MeshError(line ? what + " (line " + std::to_string(line) + ")" : what)
        , line_(line)
    {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Two arguments that must share combinatorics (or field shapes) do not.
class ShapeMismatchError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// The objective is not finite at the starting point.
class OptimizationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace elastic
