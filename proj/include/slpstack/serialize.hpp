#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "slpstack/error.hpp"
#include "slpstack/partition.hpp"
#include "slpstack/psis.hpp"
#include "slpstack/trace.hpp"

namespace slpstack {

using Json = nlohmann::json;

// JSON has no non-finite numbers; they travel as the strings "inf", "-inf", "nan".
inline Json real_to_json(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline double real_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  fail(ErrorCode::Io, "expected a real number, got " + j.dump());
}

inline Json reals_to_json(std::span<const double> xs) {
  Json a = Json::array();
  for (double x : xs) a.push_back(real_to_json(x));
  return a;
}

inline std::vector<double> reals_from_json(const Json& j) {
  std::vector<double> out;
  for (const auto& e : j) out.push_back(real_from_json(e));
  return out;
}

inline Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Eigen::VectorXd row = m.row(r).transpose();
    rows.push_back(reals_to_json(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(r)].size()) != cols) fail(ErrorCode::Io, "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = real_from_json(j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
  }
  return m;
}

/// Trace plus its sample weight. Latent values are keyed by "name:occ";
/// observation terms keep their run-length addressing.
inline Json trace_to_json(const Trace& t, double weight) {
  Json values = Json::object();
  Json sites = Json::array();
  for (const auto& r : t.records) {
    values[r.address.str()] = std::holds_alternative<double>(r.value) ? real_to_json(std::get<double>(r.value))
                                                                       : Json(std::get<std::int64_t>(r.value));
    sites.push_back({r.address.str(), real_to_json(r.log_prior_term), r.is_branching});
  }
  Json runs = Json::array();
  for (const auto& run : t.observation_runs) runs.push_back({run.name, run.first, run.count});
  return {{"path", t.path().to_strings()},
          {"values", std::move(values)},
          {"sites", std::move(sites)},
          {"log_prior", real_to_json(t.log_prior_sum())},
          {"log_lik_terms", reals_to_json(t.log_lik)},
          {"lik_sites", std::move(runs)},
          {"return", reals_to_json(t.return_value)},
          {"weight", real_to_json(weight)}};
}

inline std::pair<Trace, double> trace_from_json(const Json& j) {
  Trace t;
  const auto& values = j.at("values");
  for (const auto& site : j.at("sites")) {
    SampleRecord r;
    r.address = Address::parse(site.at(0).get<std::string>());
    const Json& v = values.at(site.at(0).get<std::string>());
    if (v.is_number_integer())
      r.value = v.get<std::int64_t>();
    else
      r.value = real_from_json(v);
    r.log_prior_term = real_from_json(site.at(1));
    r.is_branching = site.at(2).get<bool>();
    t.records.push_back(std::move(r));
  }
  for (const auto& run : j.at("lik_sites"))
    t.observation_runs.push_back({run.at(0).get<std::string>(), run.at(1).get<std::uint32_t>(),
                                  run.at(2).get<std::uint32_t>()});
  t.log_lik = reals_from_json(j.at("log_lik_terms"));
  t.return_value = reals_from_json(j.at("return"));
  std::size_t n = 0;
  for (const auto& run : t.observation_runs) n += run.count;
  if (n != t.log_lik.size()) fail(ErrorCode::Io, "observation runs do not match likelihood terms");
  return {std::move(t), real_from_json(j.at("weight"))};
}

/// One JSON trace per line.
inline void write_samples_ndjson(const std::string& file, const WeightedSamples& s) {
  std::ofstream out(file);
  if (!out) fail(ErrorCode::Io, "cannot write " + file);
  for (std::size_t i = 0; i < s.size(); ++i) out << trace_to_json(s.traces[i], s.weights[i]).dump() << '\n';
  if (!out) fail(ErrorCode::Io, "write failed for " + file);
}

inline WeightedSamples read_samples_ndjson(const std::string& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::Io, "cannot read " + file);
  WeightedSamples s;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      fail(ErrorCode::Io, file + ": " + e.what());
    }
    auto [t, w] = trace_from_json(j);
    s.traces.push_back(std::move(t));
    s.weights.push_back(w);
  }
  return s;
}

inline Json slp_table_to_json(const SlpTable& table) {
  Json slps = Json::array();
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto& g = table.groups[k];
    slps.push_back({{"id", k}, {"path", g.path.to_strings()}, {"mass", g.mass}, {"n", g.indices.size()}});
  }
  return {{"slps", std::move(slps)}};
}

inline Json loo_to_json(const LooMatrix& loo) {
  return {{"loo", matrix_to_json(loo.log_rho_loo)},
          {"khat", matrix_to_json(loo.khat)},
          {"n_bad_khat", loo.n_bad_khat},
          {"diagnostics", loo.diagnostics}};
}

inline LooMatrix loo_from_json(const Json& j) {
  LooMatrix loo;
  loo.log_rho_loo = matrix_from_json(j.at("loo"));
  loo.khat = matrix_from_json(j.at("khat"));
  loo.n_bad_khat = j.at("n_bad_khat").get<std::size_t>();
  if (j.contains("diagnostics")) loo.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
  return loo;
}

inline Json read_json_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::Io, "cannot read " + file);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorCode::Io, file + ": " + e.what());
  }
}

inline void write_json_file(const std::string& file, const Json& j) {
  std::ofstream out(file);
  if (!out) fail(ErrorCode::Io, "cannot write " + file);
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::Io, "write failed for " + file);
}

}  // namespace slpstack
