#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "slpstack/error.hpp"
#include "slpstack/simplex.hpp"
#include "slpstack/trace.hpp"

namespace slpstack {

/// Normalized weighted posterior samples (uniform 1/S for unweighted schemes).
struct WeightedSamples {
  static constexpr double kTolerance = 1e-10;

  std::vector<Trace> traces;
  std::vector<double> weights;

  static WeightedSamples uniform(std::vector<Trace> traces) {
    WeightedSamples s;
    const double w = traces.empty() ? 0.0 : 1.0 / static_cast<double>(traces.size());
    s.weights.assign(traces.size(), w);
    s.traces = std::move(traces);
    return s;
  }

  std::size_t size() const { return traces.size(); }
  bool empty() const { return traces.empty(); }

  void validate() const {
    if (traces.size() != weights.size())
      fail(ErrorCode::InvalidArgument, "trace/weight length mismatch");
    if (traces.empty()) return;
    double s = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) fail(ErrorCode::InvalidArgument, "negative or NaN sample weight");
      s += w;
    }
    if (std::abs(s - 1.0) > kTolerance)
      fail(ErrorCode::InvalidArgument, "sample weights sum to " + std::to_string(s));
  }
};

struct SlpGroup {
  AddressPath path;
  std::vector<std::size_t> indices;  // I_k, 0-based sample indices
  double mass = 0.0;                 // V_k
};

/// Partition of a sample set by address path. Group position is the SlpId.
struct SlpTable {
  std::vector<SlpGroup> groups;
  std::vector<std::size_t> slp_of_sample;

  std::size_t size() const { return groups.size(); }

  std::optional<std::size_t> find(const AddressPath& path) const {
    for (std::size_t k = 0; k < groups.size(); ++k)
      if (groups[k].path == path) return k;
    return std::nullopt;
  }

  std::vector<double> masses() const {
    std::vector<double> m;
    m.reserve(groups.size());
    for (const auto& g : groups) m.push_back(g.mass);
    return m;
  }
};

/// Groups samples by address path. With `order` given (an enumeration), SLP
/// ids follow it and enumerated-but-unvisited SLPs are kept as empty groups;
/// paths outside `order` are appended by first appearance.
inline SlpTable partition(const WeightedSamples& samples, const std::vector<AddressPath>& order = {}) {
  samples.validate();
  SlpTable table;
  std::unordered_map<std::string, std::size_t> ids;
  for (const auto& p : order) {
    if (ids.emplace(p.key(), table.groups.size()).second) table.groups.push_back({p, {}, 0.0});
  }
  table.slp_of_sample.resize(samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    AddressPath path = samples.traces[s].path();
    auto [it, inserted] = ids.emplace(path.key(), table.groups.size());
    if (inserted) table.groups.push_back({std::move(path), {}, 0.0});
    auto& g = table.groups[it->second];
    g.indices.push_back(s);
    g.mass += samples.weights[s];
    table.slp_of_sample[s] = it->second;
  }
  return table;
}

/// Moves SLP mass from V_k to w_k while keeping within-SLP relative weights:
/// omega_s = w_{k(s)} v_s / V_{k(s)}.
inline WeightedSamples reweight(const WeightedSamples& samples, const SlpTable& table, const WeightVector& w) {
  if (w.size() != table.size())
    fail(ErrorCode::InvalidArgument, "weight vector has " + std::to_string(w.size()) + " entries for " +
                                         std::to_string(table.size()) + " SLPs");
  for (std::size_t k = 0; k < table.size(); ++k)
    if (w[k] > 0.0 && !(table.groups[k].mass > 0.0))
      fail(ErrorCode::ZeroMassSlp, "SLP " + std::to_string(k) + " has weight " + std::to_string(w[k]) +
                                       " but no sample mass");
  WeightedSamples out;
  out.traces = samples.traces;
  out.weights.resize(samples.size());
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto& g = table.groups[k];
    for (std::size_t s : g.indices) out.weights[s] = w[k] == 0.0 ? 0.0 : w[k] * samples.weights[s] / g.mass;
  }
  return out;
}

}  // namespace slpstack
