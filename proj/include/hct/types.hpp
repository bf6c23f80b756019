#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <stdexcept>
#include <string>

namespace hct {

using cplx = std::complex<double>;
using Eigen::Index;
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;
using Point = std::array<double, 2>;

#define HCT_ERROR(Name)                                   \
  struct Name : std::runtime_error {                      \
    explicit Name(const std::string& m) : std::runtime_error(m) {} \
  };

HCT_ERROR(ConfigError)
HCT_ERROR(ResolutionError)
HCT_ERROR(DomainError)
HCT_ERROR(DegenerateStateError)
HCT_ERROR(TrackingError)
HCT_ERROR(StatisticsError)
HCT_ERROR(CoverageError)
HCT_ERROR(ArgumentError)
HCT_ERROR(ResourceError)

#undef HCT_ERROR

}  // namespace hct
