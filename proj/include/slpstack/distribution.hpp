#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "slpstack/error.hpp"
#include "slpstack/numeric.hpp"
#include "slpstack/random.hpp"

namespace slpstack {

/// A raw random draw: continuous sites hold doubles, discrete sites int64.
using Value = std::variant<double, std::int64_t>;

inline double as_real(const Value& v) {
  return std::visit([](auto x) { return static_cast<double>(x); }, v);
}

inline bool is_integer(const Value& v) { return std::holds_alternative<std::int64_t>(v); }

namespace dist {

struct Normal {
  double mean;
  double sd;
};
struct Gamma {
  double shape;
  double rate;
};
struct InverseGamma {
  double shape;
  double scale;
};
struct Exponential {
  double rate;
};
struct Uniform {
  double lo;
  double hi;
};
struct Bernoulli {
  double p;
};
struct Categorical {
  std::vector<double> probs;
};
struct DiscreteUniform {
  std::int64_t lo;
  std::int64_t hi;
};

}  // namespace dist

/// Closed set of primitive distributions. Construction validates parameters,
/// so a live Distribution always has a well-defined log density.
class Distribution {
 public:
  using Variant = std::variant<dist::Normal, dist::Gamma, dist::InverseGamma, dist::Exponential,
                               dist::Uniform, dist::Bernoulli, dist::Categorical,
                               dist::DiscreteUniform>;

  static Distribution normal(double mean, double sd) { return Distribution(dist::Normal{mean, sd}); }
  static Distribution gamma(double shape, double rate) {
    return Distribution(dist::Gamma{shape, rate});
  }
  static Distribution inverse_gamma(double shape, double scale) {
    return Distribution(dist::InverseGamma{shape, scale});
  }
  static Distribution exponential(double rate) { return Distribution(dist::Exponential{rate}); }
  static Distribution uniform(double lo, double hi) { return Distribution(dist::Uniform{lo, hi}); }
  static Distribution bernoulli(double p) { return Distribution(dist::Bernoulli{p}); }
  static Distribution categorical(std::vector<double> probs) {
    return Distribution(dist::Categorical{std::move(probs)});
  }
  static Distribution discrete_uniform(std::int64_t lo, std::int64_t hi) {
    return Distribution(dist::DiscreteUniform{lo, hi});
  }

  explicit Distribution(Variant v) : v_(std::move(v)) { validate(); }

  const Variant& variant() const { return v_; }

  bool is_discrete() const {
    return std::holds_alternative<dist::Bernoulli>(v_) ||
           std::holds_alternative<dist::Categorical>(v_) ||
           std::holds_alternative<dist::DiscreteUniform>(v_);
  }

  /// Support of a discrete distribution in natural index order.
  std::vector<std::int64_t> support() const {
    std::vector<std::int64_t> out;
    if (const auto* b = std::get_if<dist::Bernoulli>(&v_)) {
      out = {0, 1};
      (void)b;
    } else if (const auto* c = std::get_if<dist::Categorical>(&v_)) {
      out.resize(c->probs.size());
      std::iota(out.begin(), out.end(), std::int64_t{0});
    } else if (const auto* u = std::get_if<dist::DiscreteUniform>(&v_)) {
      for (std::int64_t i = u->lo; i <= u->hi; ++i) out.push_back(i);
    } else {
      fail(ErrorCode::NonDiscreteBranch, "support() on continuous distribution " + describe());
    }
    return out;
  }

  double log_density(double x) const {
    return std::visit([x](const auto& d) { return log_density_impl(d, x); }, v_);
  }
  double log_density(const Value& x) const { return log_density(as_real(x)); }

  Value sample(Rng& rng) const {
    return std::visit([&rng](const auto& d) -> Value { return sample_impl(d, rng); }, v_);
  }

  std::string describe() const {
    std::ostringstream os;
    std::visit(
        [&os](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, dist::Normal>) os << "Normal(" << d.mean << "," << d.sd << ")";
          if constexpr (std::is_same_v<T, dist::Gamma>) os << "Gamma(" << d.shape << "," << d.rate << ")";
          if constexpr (std::is_same_v<T, dist::InverseGamma>)
            os << "InverseGamma(" << d.shape << "," << d.scale << ")";
          if constexpr (std::is_same_v<T, dist::Exponential>) os << "Exponential(" << d.rate << ")";
          if constexpr (std::is_same_v<T, dist::Uniform>) os << "Uniform(" << d.lo << "," << d.hi << ")";
          if constexpr (std::is_same_v<T, dist::Bernoulli>) os << "Bernoulli(" << d.p << ")";
          if constexpr (std::is_same_v<T, dist::Categorical>) os << "Categorical[" << d.probs.size() << "]";
          if constexpr (std::is_same_v<T, dist::DiscreteUniform>)
            os << "DiscreteUniform(" << d.lo << "," << d.hi << ")";
        },
        v_);
    return os.str();
  }

 private:
  void validate() const {
    auto bad = [this](const char* why) { fail(ErrorCode::InvalidArgument, describe() + ": " + why); };
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, dist::Normal>) {
            if (!(d.sd > 0) || !std::isfinite(d.mean) || !std::isfinite(d.sd)) bad("sd must be > 0");
          } else if constexpr (std::is_same_v<T, dist::Gamma>) {
            if (!(d.shape > 0) || !(d.rate > 0)) bad("shape and rate must be > 0");
          } else if constexpr (std::is_same_v<T, dist::InverseGamma>) {
            if (!(d.shape > 0) || !(d.scale > 0)) bad("shape and scale must be > 0");
          } else if constexpr (std::is_same_v<T, dist::Exponential>) {
            if (!(d.rate > 0)) bad("rate must be > 0");
          } else if constexpr (std::is_same_v<T, dist::Uniform>) {
            if (!(d.lo < d.hi)) bad("need lo < hi");
          } else if constexpr (std::is_same_v<T, dist::Bernoulli>) {
            if (!(d.p >= 0 && d.p <= 1)) bad("p outside [0,1]");
          } else if constexpr (std::is_same_v<T, dist::Categorical>) {
            if (d.probs.empty()) bad("empty probability vector");
            double s = 0.0;
            for (double p : d.probs) {
              if (!(p >= 0)) bad("negative probability");
              s += p;
            }
            if (std::abs(s - 1.0) > 1e-12) bad("probabilities do not sum to 1");
          } else if constexpr (std::is_same_v<T, dist::DiscreteUniform>) {
            if (d.lo > d.hi) bad("need lo <= hi");
          }
        },
        v_);
  }

  static bool integral(double x) { return std::isfinite(x) && x == std::floor(x); }

  static double log_density_impl(const dist::Normal& d, double x) { return log_normal_pdf(x, d.mean, d.sd); }
  static double log_density_impl(const dist::Gamma& d, double x) {
    if (!(x > 0)) return kNegInf;
    return d.shape * std::log(d.rate) - std::lgamma(d.shape) + (d.shape - 1.0) * std::log(x) - d.rate * x;
  }
  static double log_density_impl(const dist::InverseGamma& d, double x) {
    if (!(x > 0)) return kNegInf;
    return d.shape * std::log(d.scale) - std::lgamma(d.shape) - (d.shape + 1.0) * std::log(x) -
           d.scale / x;
  }
  static double log_density_impl(const dist::Exponential& d, double x) {
    if (!(x >= 0)) return kNegInf;
    return std::log(d.rate) - d.rate * x;
  }
  static double log_density_impl(const dist::Uniform& d, double x) {
    if (!(x >= d.lo && x <= d.hi)) return kNegInf;
    return -std::log(d.hi - d.lo);
  }
  static double log_density_impl(const dist::Bernoulli& d, double x) {
    if (x == 1.0) return std::log(d.p);
    if (x == 0.0) return std::log1p(-d.p);
    return kNegInf;
  }
  static double log_density_impl(const dist::Categorical& d, double x) {
    if (!integral(x) || x < 0 || x >= static_cast<double>(d.probs.size())) return kNegInf;
    return std::log(d.probs[static_cast<std::size_t>(x)]);
  }
  static double log_density_impl(const dist::DiscreteUniform& d, double x) {
    if (!integral(x) || x < static_cast<double>(d.lo) || x > static_cast<double>(d.hi)) return kNegInf;
    return -std::log(static_cast<double>(d.hi - d.lo + 1));
  }

  static Value sample_impl(const dist::Normal& d, Rng& rng) {
    return std::normal_distribution<double>(d.mean, d.sd)(rng);
  }
  static Value sample_impl(const dist::Gamma& d, Rng& rng) {
    return std::gamma_distribution<double>(d.shape, 1.0 / d.rate)(rng);
  }
  static Value sample_impl(const dist::InverseGamma& d, Rng& rng) {
    return 1.0 / std::gamma_distribution<double>(d.shape, 1.0 / d.scale)(rng);
  }
  static Value sample_impl(const dist::Exponential& d, Rng& rng) {
    return std::exponential_distribution<double>(d.rate)(rng);
  }
  static Value sample_impl(const dist::Uniform& d, Rng& rng) {
    return std::uniform_real_distribution<double>(d.lo, d.hi)(rng);
  }
  static Value sample_impl(const dist::Bernoulli& d, Rng& rng) {
    return std::int64_t{std::bernoulli_distribution(d.p)(rng) ? 1 : 0};
  }
  static Value sample_impl(const dist::Categorical& d, Rng& rng) {
    return static_cast<std::int64_t>(
        std::discrete_distribution<std::int64_t>(d.probs.begin(), d.probs.end())(rng));
  }
  static Value sample_impl(const dist::DiscreteUniform& d, Rng& rng) {
    return std::uniform_int_distribution<std::int64_t>(d.lo, d.hi)(rng);
  }

  Variant v_;
};

}  // namespace slpstack
