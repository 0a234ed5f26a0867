#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "slpstack/program.hpp"

namespace slpstack {

struct Enumeration {
  std::vector<AddressPath> paths;
  /// True when the search stopped at max_slps with unexplored prefixes left.
  bool truncated = false;
};

namespace detail {

struct ExpandSignal {
  std::vector<std::int64_t> support;
};

/// Runs the program with branch decisions taken from a prefix; the first
/// branching site past the prefix aborts the run with its support.
class EnumerationHandler final : public Handler {
 public:
  EnumerationHandler(const Program& p, const std::vector<std::int64_t>& prefix, Rng& rng)
      : Handler(p.pins(), false), prefix_(prefix), rng_(rng) {}

  Trace run(const Program& p) {
    complete(p(*this));
    return take_trace();
  }

 protected:
  Value provide(const Address&, const Distribution& d, SiteKind kind, const std::int64_t* pinned) override {
    if (kind != SiteKind::Branch) return d.sample(rng_);
    if (pinned) return *pinned;
    const std::size_t i = branch_count() - 1;
    if (i < prefix_.size()) return prefix_[i];
    ExpandSignal sig;
    for (std::int64_t v : d.support())
      if (d.log_density(static_cast<double>(v)) > kNegInf) sig.support.push_back(v);
    throw sig;
  }

 private:
  const std::vector<std::int64_t>& prefix_;
  Rng& rng_;
};

}  // namespace detail

/// Breadth-first enumeration of straight-line programs.
///
/// Each queue entry is a prefix of branching decisions. Popping a prefix
/// re-executes the program; if the run reaches a branching site past the
/// prefix, one child per support value (in the distribution's index order)
/// is appended to the queue, otherwise the run's address path is a complete
/// SLP. Non-branching draws come from the prior. Every complete path is
/// re-run `detection_runs` times with fresh draws: a different address path
/// under identical branch decisions means some control-flow site is missing
/// its branching annotation.
inline Enumeration enumerate_slps(const Program& program, std::size_t max_slps, std::uint64_t seed = 0,
                                  int detection_runs = 2) {
  if (max_slps == 0) fail(ErrorCode::InvalidArgument, "max_slps must be positive");
  Rng rng(derive_seed(seed, "enumerate", 0));
  Enumeration out;
  std::deque<std::vector<std::int64_t>> queue;
  queue.emplace_back();
  while (!queue.empty()) {
    if (out.paths.size() >= max_slps) {
      out.truncated = true;
      break;
    }
    std::vector<std::int64_t> prefix = std::move(queue.front());
    queue.pop_front();
    try {
      detail::EnumerationHandler h(program, prefix, rng);
      const AddressPath path = h.run(program).path();
      for (int r = 0; r < detection_runs; ++r) {
        detail::EnumerationHandler again(program, prefix, rng);
        AddressPath other;
        try {
          other = again.run(program).path();
        } catch (const detail::ExpandSignal&) {
          fail(ErrorCode::UnannotatedBranchSuspected,
               "identical branch decisions reached a new branching site; path " + path.key());
        }
        if (other != path)
          fail(ErrorCode::UnannotatedBranchSuspected,
               "identical branch decisions gave paths " + path.key() + " and " + other.key());
      }
      out.paths.push_back(path);
    } catch (const detail::ExpandSignal& sig) {
      for (std::int64_t v : sig.support) {
        auto child = prefix;
        child.push_back(v);
        queue.push_back(std::move(child));
      }
    }
  }
  return out;
}

}  // namespace slpstack
