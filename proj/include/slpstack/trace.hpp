#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slpstack/distribution.hpp"
#include "slpstack/error.hpp"

namespace slpstack {

/// Lexical site label plus per-execution visit counter.
struct Address {
  std::string name;
  std::uint32_t occurrence = 0;

  auto operator<=>(const Address&) const = default;
  bool operator==(const Address&) const = default;

  std::string str() const { return name + ":" + std::to_string(occurrence); }

  static Address parse(std::string_view s) {
    const auto colon = s.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == s.size())
      fail(ErrorCode::InvalidArgument, "malformed address '" + std::string(s) + "'");
    Address a{std::string(s.substr(0, colon)), 0};
    try {
      a.occurrence = static_cast<std::uint32_t>(std::stoul(std::string(s.substr(colon + 1))));
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, "malformed address occurrence in '" + std::string(s) + "'");
    }
    return a;
  }
};

inline void validate_site_name(std::string_view name) {
  if (name.empty() || name.find_first_of(":=") != std::string_view::npos)
    fail(ErrorCode::InvalidArgument, "site name must be non-empty without ':' or '=': '" +
                                         std::string(name) + "'");
}

using ValueMap = std::map<Address, Value>;

/// One latent site on an address path. Branching sites carry their value, so
/// two SLPs that visit the same addresses but branch differently stay distinct.
struct PathEntry {
  Address address;
  std::optional<std::int64_t> branch_value;

  bool operator==(const PathEntry&) const = default;
  auto operator<=>(const PathEntry&) const = default;

  std::string str() const {
    return branch_value ? address.str() + "=" + std::to_string(*branch_value) : address.str();
  }

  static PathEntry parse(std::string_view s) {
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) return {Address::parse(s), std::nullopt};
    PathEntry e{Address::parse(s.substr(0, eq)), std::nullopt};
    try {
      e.branch_value = std::stoll(std::string(s.substr(eq + 1)));
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, "malformed branch value in '" + std::string(s) + "'");
    }
    return e;
  }
};

class AddressPath {
 public:
  AddressPath() = default;
  explicit AddressPath(std::vector<PathEntry> entries) : entries_(std::move(entries)) {}

  const std::vector<PathEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// The branching decisions in visitation order.
  std::vector<std::pair<Address, std::int64_t>> branches() const {
    std::vector<std::pair<Address, std::int64_t>> out;
    for (const auto& e : entries_)
      if (e.branch_value) out.emplace_back(e.address, *e.branch_value);
    return out;
  }

  std::vector<std::string> to_strings() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.str());
    return out;
  }

  static AddressPath from_strings(const std::vector<std::string>& items) {
    std::vector<PathEntry> entries;
    entries.reserve(items.size());
    for (const auto& s : items) entries.push_back(PathEntry::parse(s));
    return AddressPath(std::move(entries));
  }

  /// Canonical string form; equal paths have equal keys.
  std::string key() const {
    std::string k;
    for (const auto& e : entries_) {
      k += e.str();
      k += ';';
    }
    return k;
  }

  bool operator==(const AddressPath&) const = default;
  auto operator<=>(const AddressPath&) const = default;

 private:
  std::vector<PathEntry> entries_;
};

struct SampleRecord {
  Address address;
  Value value;
  double log_prior_term = 0.0;
  bool is_branching = false;
};

/// Contiguous run of observation addresses name:first .. name:first+count-1.
struct ObservationRun {
  std::string name;
  std::uint32_t first = 0;
  std::uint32_t count = 0;
  bool operator==(const ObservationRun&) const = default;
};

/// One program execution. Latent draws live in `records`; each observe
/// statement contributes one entry to `log_lik`, addressed through
/// `observation_runs` (run-length encoded to keep large datasets cheap).
struct Trace {
  std::vector<SampleRecord> records;
  std::vector<ObservationRun> observation_runs;
  std::vector<double> log_lik;
  std::vector<double> return_value;

  double log_prior_sum() const {
    double s = 0.0;
    for (const auto& r : records) s += r.log_prior_term;
    return s;
  }
  double log_lik_sum() const {
    double s = 0.0;
    for (double l : log_lik) s += l;
    return s;
  }
  double log_density() const { return log_prior_sum() + log_lik_sum(); }

  AddressPath path() const {
    std::vector<PathEntry> entries;
    entries.reserve(records.size());
    for (const auto& r : records) {
      PathEntry e{r.address, std::nullopt};
      if (r.is_branching) e.branch_value = std::get<std::int64_t>(r.value);
      entries.push_back(std::move(e));
    }
    return AddressPath(std::move(entries));
  }

  ValueMap values() const {
    ValueMap m;
    for (const auto& r : records) m.emplace(r.address, r.value);
    return m;
  }

  std::vector<std::pair<Address, double>> log_likelihood_terms() const {
    std::vector<std::pair<Address, double>> out;
    out.reserve(log_lik.size());
    std::size_t i = 0;
    for (const auto& run : observation_runs)
      for (std::uint32_t j = 0; j < run.count; ++j) out.emplace_back(Address{run.name, run.first + j}, log_lik[i++]);
    return out;
  }

  void push_observation(const Address& a, double ll) {
    if (!observation_runs.empty()) {
      auto& last = observation_runs.back();
      if (last.name == a.name && last.first + last.count == a.occurrence) {
        ++last.count;
        log_lik.push_back(ll);
        return;
      }
    }
    observation_runs.push_back({a.name, a.occurrence, 1});
    log_lik.push_back(ll);
  }

  bool operator==(const Trace& o) const {
    if (records.size() != o.records.size()) return false;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& a = records[i];
      const auto& b = o.records[i];
      if (a.address != b.address || a.value != b.value || a.is_branching != b.is_branching) return false;
      if (std::bit_cast<std::uint64_t>(a.log_prior_term) != std::bit_cast<std::uint64_t>(b.log_prior_term))
        return false;
    }
    return observation_runs == o.observation_runs && log_lik == o.log_lik && return_value == o.return_value;
  }
};

}  // namespace slpstack
