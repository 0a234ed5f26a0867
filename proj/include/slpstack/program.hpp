#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slpstack/distribution.hpp"
#include "slpstack/error.hpp"
#include "slpstack/random.hpp"
#include "slpstack/trace.hpp"

namespace slpstack {

struct BranchPin {
  Address address;
  std::int64_t value = 0;
};
using BranchPins = std::vector<BranchPin>;

enum class SiteKind { Continuous, Discrete, Branch };

/// Effect handler seen by a program. A program issues `sample`, `branch`,
/// `observe` and `factor` effects; the concrete handler decides where latent
/// values come from (prior draws, a replay map, an enumeration prefix) and
/// records the resulting trace.
class Handler {
 public:
  virtual ~Handler() = default;
  Handler(const Handler&) = delete;
  Handler& operator=(const Handler&) = delete;

  /// Continuous latent site.
  double sample(std::string_view name, const Distribution& d) {
    return sample_at(next_address(name), d);
  }
  double sample(const Address& a, const Distribution& d) {
    claim_explicit(a);
    return sample_at(a, d);
  }

  /// Discrete latent site that does not influence control flow.
  std::int64_t sample_discrete(std::string_view name, const Distribution& d) {
    if (!d.is_discrete()) fail(ErrorCode::InvalidArgument, "sample_discrete needs a discrete distribution");
    const Address a = next_address(name);
    return std::get<std::int64_t>(record(a, d, provide(a, d, SiteKind::Discrete, nullptr), false));
  }

  /// Discrete latent site annotated as branching: its value selects the SLP.
  std::int64_t branch(std::string_view name, const Distribution& d) {
    if (!d.is_discrete())
      fail(ErrorCode::NonDiscreteBranch, "branching site '" + std::string(name) + "' has continuous " +
                                             d.describe());
    const Address a = next_address(name);
    const std::int64_t* pinned = nullptr;
    if (pins_) {
      if (branch_count_ < pins_->size() && (*pins_)[branch_count_].address == a)
        pinned = &(*pins_)[branch_count_].value;
      else
        pin_violation("unexpected branching site " + a.str());
    }
    ++branch_count_;
    return std::get<std::int64_t>(record(a, d, provide(a, d, SiteKind::Branch, pinned), true));
  }

  void observe(std::string_view name, const Distribution& d, double value) {
    trace_.push_observation(next_address(name), d.log_density(value));
  }

  /// Arbitrary log-weight term, recorded like an observation.
  void factor(std::string_view name, double log_weight) {
    trace_.push_observation(next_address(name), log_weight);
  }

  /// Programs may skip computing their predictive return vector when false.
  bool wants_return() const { return wants_return_; }

  const Trace& trace() const { return trace_; }

 protected:
  Handler(std::shared_ptr<const BranchPins> pins, bool wants_return)
      : pins_(std::move(pins)), wants_return_(wants_return) {}

  virtual Value provide(const Address& a, const Distribution& d, SiteKind kind, const std::int64_t* pinned) = 0;

  virtual void pin_violation(const std::string& what) { fail(ErrorCode::PathUnrealizable, what); }

  /// Called once after the program returns.
  void complete(std::vector<double> ret) {
    if (pins_ && branch_count_ != pins_->size())
      pin_violation("run visited " + std::to_string(branch_count_) + " branching sites, path pins " +
                    std::to_string(pins_->size()));
    trace_.return_value = std::move(ret);
  }

  Trace take_trace() { return std::move(trace_); }
  std::size_t branch_count() const { return branch_count_; }

 private:
  struct Counter {
    std::string name;
    std::uint32_t next = 0;
    std::vector<std::uint32_t> explicit_used;
  };

  Counter& counter(std::string_view name) {
    for (auto& c : counters_)
      if (c.name == name) return c;
    validate_site_name(name);
    counters_.push_back({std::string(name), 0, {}});
    return counters_.back();
  }

  Address next_address(std::string_view name) {
    Counter& c = counter(name);
    const std::uint32_t occ = c.next++;
    for (auto u : c.explicit_used)
      if (u == occ) fail(ErrorCode::DuplicateAddress, "address " + c.name + ":" + std::to_string(occ) + " reused");
    return Address{c.name, occ};
  }

  void claim_explicit(const Address& a) {
    Counter& c = counter(a.name);
    if (a.occurrence < c.next) fail(ErrorCode::DuplicateAddress, "address " + a.str() + " reused");
    for (auto u : c.explicit_used)
      if (u == a.occurrence) fail(ErrorCode::DuplicateAddress, "address " + a.str() + " reused");
    c.explicit_used.push_back(a.occurrence);
  }

  double sample_at(const Address& a, const Distribution& d) {
    if (d.is_discrete())
      fail(ErrorCode::InvalidArgument, "sample() needs a continuous distribution at " + a.str() +
                                           "; use branch() or sample_discrete()");
    return std::get<double>(record(a, d, provide(a, d, SiteKind::Continuous, nullptr), false));
  }

  const Value& record(const Address& a, const Distribution& d, Value v, bool branching) {
    const double lp = d.log_density(v);
    trace_.records.push_back({a, std::move(v), lp, branching});
    return trace_.records.back().value;
  }

  std::shared_ptr<const BranchPins> pins_;
  bool wants_return_;
  std::size_t branch_count_ = 0;
  std::vector<Counter> counters_;
  Trace trace_;
};

using Evaluator = std::function<std::vector<double>(Handler&)>;

/// A generative program: a deterministic function of its handler's decisions.
/// Programs are immutable values; conditioning produces a new program that
/// shares the evaluator.
class Program {
 public:
  Program(std::string name, Evaluator eval)
      : name_(std::move(name)), eval_(std::make_shared<const Evaluator>(std::move(eval))) {}

  const std::string& name() const { return name_; }
  std::vector<double> operator()(Handler& h) const { return (*eval_)(h); }

  const std::shared_ptr<const BranchPins>& pins() const { return pins_; }
  bool is_conditioned() const { return static_cast<bool>(pins_); }

  Program with_pins(BranchPins pins) const {
    Program p = *this;
    p.pins_ = std::make_shared<const BranchPins>(std::move(pins));
    return p;
  }

 private:
  std::string name_;
  std::shared_ptr<const Evaluator> eval_;
  std::shared_ptr<const BranchPins> pins_;
};

namespace detail {

class ForwardHandler final : public Handler {
 public:
  ForwardHandler(const Program& p, Rng& rng, bool wants_return) : Handler(p.pins(), wants_return), rng_(rng) {}

  Trace run(const Program& p) {
    complete(p(*this));
    return take_trace();
  }

 protected:
  Value provide(const Address&, const Distribution& d, SiteKind, const std::int64_t* pinned) override {
    if (pinned) return *pinned;
    return d.sample(rng_);
  }

 private:
  Rng& rng_;
};

class ReplayHandler final : public Handler {
 public:
  ReplayHandler(const Program& p, const ValueMap& values, bool wants_return)
      : Handler(p.pins(), wants_return), values_(values) {}

  /// Returns nullopt when the values lie outside the support selected by the
  /// program's branch pins.
  std::optional<Trace> run(const Program& p) {
    complete(p(*this));
    if (outside_) return std::nullopt;
    if (used_ != values_.size())
      fail(ErrorCode::PathMismatch, std::to_string(values_.size() - used_) + " supplied value(s) never visited");
    return take_trace();
  }

 protected:
  Value provide(const Address& a, const Distribution& d, SiteKind kind, const std::int64_t* pinned) override {
    const auto it = values_.find(a);
    if (it == values_.end()) fail(ErrorCode::PathMismatch, "no value supplied for " + a.str());
    ++used_;
    if (kind == SiteKind::Continuous) return as_real(it->second);
    const double x = as_real(it->second);
    if (x != std::floor(x)) fail(ErrorCode::PathMismatch, "non-integer value for discrete site " + a.str());
    const auto v = static_cast<std::int64_t>(x);
    if (kind == SiteKind::Branch && pinned && *pinned != v) outside_ = true;
    (void)d;
    return v;
  }

  void pin_violation(const std::string&) override { outside_ = true; }

 private:
  const ValueMap& values_;
  std::size_t used_ = 0;
  bool outside_ = false;
};

}  // namespace detail

/// Simulates the program from its prior (branch pins respected).
inline Trace run_forward(const Program& program, Rng& rng, bool wants_return = true) {
  detail::ForwardHandler h(program, rng, wants_return);
  return h.run(program);
}

inline Trace run_forward(const Program& program, std::uint64_t seed, bool wants_return = true) {
  Rng rng(seed);
  return run_forward(program, rng, wants_return);
}

/// Re-executes the program with every latent value taken from `values`.
/// Returns nullopt when the point is outside a conditioned program's SLP.
inline std::optional<Trace> replay_trace(const Program& program, const ValueMap& values, bool wants_return = true) {
  detail::ReplayHandler h(program, values, wants_return);
  return h.run(program);
}

struct ReplayResult {
  double log_prior_sum = 0.0;
  std::vector<std::pair<Address, double>> log_lik_terms;
  std::vector<double> return_value;

  double total() const {
    double s = log_prior_sum;
    for (const auto& [a, l] : log_lik_terms) s += l;
    return s;
  }
};

/// Unnormalized log density decomposition at `values`: the sum of prior
/// terms for every latent draw and the individual observation terms.
inline ReplayResult replay_log_density(const Program& program, const ValueMap& values) {
  auto trace = replay_trace(program, values, true);
  if (!trace) return {kNegInf, {}, {}};
  return {trace->log_prior_sum(), trace->log_likelihood_terms(), std::move(trace->return_value)};
}

/// Total log density only; -inf outside the program's support.
inline double log_density(const Program& program, const ValueMap& values) {
  auto trace = replay_trace(program, values, false);
  return trace ? trace->log_density() : kNegInf;
}

/// Pins every branching site of `path`; the resulting program's support is
/// the SLP's parameter space.
inline Program condition_on_path(const Program& program, const AddressPath& path) {
  BranchPins pins;
  for (auto& [a, v] : path.branches()) pins.push_back({a, v});
  return program.with_pins(std::move(pins));
}

}  // namespace slpstack
