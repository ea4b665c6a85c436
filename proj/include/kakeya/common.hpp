#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace kakeya {

inline constexpr const char* kVersion = "0.1.0";

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;

template <int D>
using IVec = Eigen::Matrix<std::int64_t, D, 1>;

// Thrown when an operation is called with parameters outside its contract.
struct parameter_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when the grid resolution or bounding box cannot support an operation.
struct configuration_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown on degenerate geometry (parallel axes in a wedge-point query).
struct degenerate_geometry_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kPi = 3.14159265358979323846;

// Surface measure of S^{d-1} for d in {2,3}.
template <int D>
constexpr double sphere_measure() {
  static_assert(D == 2 || D == 3, "only d in {2,3} supported");
  return D == 2 ? 2.0 * kPi : 4.0 * kPi;
}

// Lebesgue measure of a d-ball of radius r.
template <int D>
constexpr double ball_volume(double r) {
  static_assert(D == 2 || D == 3);
  return D == 2 ? kPi * r * r : 4.0 / 3.0 * kPi * r * r * r;
}

inline double log2_inv(double delta) { return std::log2(1.0 / delta); }

}  // namespace kakeya
