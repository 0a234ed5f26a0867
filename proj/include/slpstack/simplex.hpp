#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "slpstack/error.hpp"

namespace slpstack {

/// A point on the probability simplex: SLP mixture weights.
class WeightVector {
 public:
  static constexpr double kTolerance = 1e-9;

  WeightVector() = default;
  explicit WeightVector(std::vector<double> w) : w_(std::move(w)) {
    double s = 0.0;
    for (double x : w_) {
      if (!(x >= 0.0)) fail(ErrorCode::InvalidArgument, "negative or NaN weight");
      s += x;
    }
    if (std::abs(s - 1.0) > kTolerance)
      fail(ErrorCode::InvalidArgument, "weights sum to " + std::to_string(s) + ", not 1");
  }

  /// Renormalizes a non-negative vector onto the simplex.
  static WeightVector normalized(std::vector<double> w) {
    double s = 0.0;
    for (double x : w) s += x;
    if (!(s > 0.0)) fail(ErrorCode::InvalidArgument, "cannot normalize a zero vector");
    for (double& x : w) x /= s;
    return WeightVector(std::move(w));
  }

  static WeightVector uniform(std::size_t k) { return WeightVector(std::vector<double>(k, 1.0 / k)); }

  static WeightVector one_hot(std::size_t k, std::size_t i) {
    std::vector<double> w(k, 0.0);
    w.at(i) = 1.0;
    return WeightVector(std::move(w));
  }

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  const std::vector<double>& values() const { return w_; }
  auto begin() const { return w_.begin(); }
  auto end() const { return w_.end(); }

  double max() const {
    double m = 0.0;
    for (double x : w_) m = x > m ? x : m;
    return m;
  }

 private:
  std::vector<double> w_;
};

}  // namespace slpstack
