#pragma once

#include <Eigen/Dense>

#include <string>

#include "bimc/error.hpp"

namespace bimc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// The rare-event set Y = [lower, upper] in output space.
class TargetInterval {
 public:
  TargetInterval(double lower, double upper) : lower_(lower), upper_(upper) {
    if (!(lower < upper)) {
      throw InvalidArgument("target interval requires lower < upper, got [" +
                            std::to_string(lower) + ", " + std::to_string(upper) + "]");
    }
  }

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  double width() const noexcept { return upper_ - lower_; }
  double midpoint() const noexcept { return 0.5 * (lower_ + upper_); }
  bool contains(double y) const noexcept { return y >= lower_ && y <= upper_; }

  friend bool operator==(const TargetInterval&, const TargetInterval&) = default;

 private:
  double lower_;
  double upper_;
};

}  // namespace bimc
