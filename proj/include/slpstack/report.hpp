#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "slpstack/error.hpp"
#include "slpstack/experiment.hpp"
#include "slpstack/numeric.hpp"
#include "slpstack/serialize.hpp"

namespace slpstack {

inline constexpr double kCollapseThreshold = 0.9;
inline constexpr int kHistogramBins = 10;

struct MethodSummary {
  std::string method;
  std::size_t n_ok = 0;
  double median_lppd = std::numeric_limits<double>::quiet_NaN();
  double median_lppd_diff = std::numeric_limits<double>::quiet_NaN();
  /// Fraction of datasets whose weights put more than 0.9 on one SLP.
  double collapse_fraction = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> mean_weights;
  std::vector<double> median_weights;
  /// Counts of the first SLP's weight in 10 equal bins over [0, 1].
  std::vector<std::size_t> first_weight_histogram;
};

inline std::vector<double> finite_only(const std::vector<double>& xs) {
  std::vector<double> out;
  std::copy_if(xs.begin(), xs.end(), std::back_inserter(out), [](double x) { return std::isfinite(x); });
  return out;
}

inline std::vector<MethodSummary> summarize(const ExperimentReport& report) {
  std::vector<MethodSummary> out;
  const std::size_t kk = report.num_slps();
  for (const auto& m : report.methods) {
    MethodSummary s;
    s.method = m;
    s.median_lppd = median(finite_only(report.column(&DatasetResult::lppd, m)));
    s.median_lppd_diff = median(finite_only(report.column(&DatasetResult::lppd_diff, m)));
    std::vector<std::vector<double>> per_slp(kk);
    std::size_t collapsed = 0;
    s.first_weight_histogram.assign(kHistogramBins, 0);
    for (const auto& d : report.datasets) {
      if (d.failed) continue;
      const auto it = d.weights.find(m);
      if (it == d.weights.end() || it->second.size() != kk) continue;
      ++s.n_ok;
      const auto& w = it->second;
      if (*std::max_element(w.begin(), w.end()) > kCollapseThreshold) ++collapsed;
      for (std::size_t k = 0; k < kk; ++k) per_slp[k].push_back(w[k]);
      const int bin = std::min(kHistogramBins - 1, static_cast<int>(w[0] * kHistogramBins));
      ++s.first_weight_histogram[static_cast<std::size_t>(bin)];
    }
    if (s.n_ok > 0) {
      s.collapse_fraction = static_cast<double>(collapsed) / static_cast<double>(s.n_ok);
      for (const auto& v : per_slp) {
        s.mean_weights.push_back(mean(v));
        s.median_weights.push_back(median(v));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline double parse_real(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    fail(ErrorCode::Io, "not a number: '" + s + "'");
  }
}

/// Long-format weights table: dataset,method,slp,weight.
inline std::string weights_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "dataset,method,slp,weight\n";
  for (const auto& d : report.datasets)
    for (const auto& m : report.methods) {
      const auto it = d.weights.find(m);
      for (std::size_t k = 0; k < report.num_slps(); ++k) {
        const double w = it == d.weights.end() || d.failed ? std::numeric_limits<double>::quiet_NaN() : it->second.at(k);
        os << d.index << ',' << m << ',' << k << ',' << format_real(w) << '\n';
      }
    }
  return os.str();
}

/// dataset,method,lppd,lppd_diff,loo_objective.
inline std::string lppd_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "dataset,method,lppd,lppd_diff,loo_objective\n";
  auto get = [](const std::map<std::string, double>& m, const std::string& k) {
    const auto it = m.find(k);
    return it == m.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
  };
  for (const auto& d : report.datasets)
    for (const auto& m : report.methods)
      os << d.index << ',' << m << ',' << format_real(get(d.lppd, m)) << ',' << format_real(get(d.lppd_diff, m))
         << ',' << format_real(get(d.loo_objective, m)) << '\n';
  return os.str();
}

inline std::string summary_csv(const std::vector<MethodSummary>& summary) {
  std::ostringstream os;
  os << "method,n_ok,median_lppd,median_lppd_diff,collapse_fraction";
  for (int b = 0; b < kHistogramBins; ++b) os << ",w1_bin" << b;
  os << '\n';
  for (const auto& s : summary) {
    os << s.method << ',' << s.n_ok << ',' << format_real(s.median_lppd) << ',' << format_real(s.median_lppd_diff)
       << ',' << format_real(s.collapse_fraction);
    for (auto c : s.first_weight_histogram) os << ',' << c;
    os << '\n';
  }
  return os.str();
}

inline Json summary_to_json(const std::vector<MethodSummary>& summary) {
  Json out = Json::array();
  for (const auto& s : summary)
    out.push_back({{"method", s.method},
                   {"n_ok", s.n_ok},
                   {"median_lppd", real_to_json(s.median_lppd)},
                   {"median_lppd_diff", real_to_json(s.median_lppd_diff)},
                   {"collapse_fraction", real_to_json(s.collapse_fraction)},
                   {"mean_weights", reals_to_json(s.mean_weights)},
                   {"median_weights", reals_to_json(s.median_weights)},
                   {"first_weight_histogram", s.first_weight_histogram}});
  return out;
}

inline Json report_to_json(const ExperimentReport& report) {
  const auto& c = report.config;
  Json datasets = Json::array();
  for (const auto& d : report.datasets) {
    Json w = Json::object(), lp = Json::object(), diff = Json::object(), loo = Json::object();
    for (const auto& [k, v] : d.weights) w[k] = reals_to_json(v);
    for (const auto& [k, v] : d.lppd) lp[k] = real_to_json(v);
    for (const auto& [k, v] : d.lppd_diff) diff[k] = real_to_json(v);
    for (const auto& [k, v] : d.loo_objective) loo[k] = real_to_json(v);
    datasets.push_back({{"index", d.index},
                        {"failed", d.failed},
                        {"failure", d.failure},
                        {"weights", w},
                        {"lppd", lp},
                        {"lppd_diff", diff},
                        {"loo_objective", loo},
                        {"log_Z", reals_to_json(d.log_Z)},
                        {"log_Z_se", reals_to_json(d.log_Z_se)},
                        {"analytic_log_Z", reals_to_json(d.analytic_log_Z)},
                        {"ess", reals_to_json(d.ess)},
                        {"acceptance", reals_to_json(d.acceptance)},
                        {"n_bad_khat", d.n_bad_khat},
                        {"warnings", d.warnings}});
  }
  return {{"experiment", c.experiment},
          {"n_train", c.n_train},
          {"n_test", c.n_test},
          {"n_datasets", c.n_datasets},
          {"seed", c.seed},
          {"beta_grid", reals_to_json(c.beta_grid)},
          {"budget",
           {{"mcmc_steps_per_slp", c.budget.mcmc_steps_per_slp},
            {"burn_in", c.budget.burn_in},
            {"is_proposals_per_slp", c.budget.is_proposals_per_slp}}},
          {"methods", report.methods},
          {"slp_paths", report.slp_paths},
          {"truncated", report.truncated},
          {"datasets", std::move(datasets)}};
}

inline ExperimentReport report_from_json(const Json& j) {
  ExperimentReport r;
  r.config.experiment = j.at("experiment").get<std::string>();
  r.config.n_train = j.at("n_train").get<std::size_t>();
  r.config.n_test = j.at("n_test").get<std::size_t>();
  r.config.n_datasets = j.at("n_datasets").get<std::size_t>();
  r.config.seed = j.at("seed").get<std::uint64_t>();
  r.config.beta_grid = reals_from_json(j.at("beta_grid"));
  const Json& b = j.at("budget");
  r.config.budget.mcmc_steps_per_slp = b.at("mcmc_steps_per_slp").get<std::size_t>();
  r.config.budget.burn_in = b.at("burn_in").get<std::size_t>();
  r.config.budget.is_proposals_per_slp = b.at("is_proposals_per_slp").get<std::size_t>();
  r.methods = j.at("methods").get<std::vector<std::string>>();
  r.slp_paths = j.at("slp_paths").get<std::vector<std::string>>();
  r.truncated = j.at("truncated").get<bool>();
  for (const auto& dj : j.at("datasets")) {
    DatasetResult d;
    d.index = dj.at("index").get<std::size_t>();
    d.failed = dj.at("failed").get<bool>();
    d.failure = dj.at("failure").get<std::string>();
    for (const auto& [k, v] : dj.at("weights").items()) d.weights[k] = reals_from_json(v);
    for (const auto& [k, v] : dj.at("lppd").items()) d.lppd[k] = real_from_json(v);
    for (const auto& [k, v] : dj.at("lppd_diff").items()) d.lppd_diff[k] = real_from_json(v);
    for (const auto& [k, v] : dj.at("loo_objective").items()) d.loo_objective[k] = real_from_json(v);
    d.log_Z = reals_from_json(dj.at("log_Z"));
    d.log_Z_se = reals_from_json(dj.at("log_Z_se"));
    d.analytic_log_Z = reals_from_json(dj.at("analytic_log_Z"));
    d.ess = reals_from_json(dj.at("ess"));
    d.acceptance = reals_from_json(dj.at("acceptance"));
    d.n_bad_khat = dj.at("n_bad_khat").get<std::size_t>();
    d.warnings = dj.at("warnings").get<std::vector<std::string>>();
    r.datasets.push_back(std::move(d));
  }
  return r;
}

/// Splits a CSV file (no quoting) into header-keyed rows.
inline std::vector<std::map<std::string, std::string>> read_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(in, line)) return rows;
  header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) fail(ErrorCode::Io, "CSV row has " + std::to_string(cells.size()) + " cells");
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_text_file(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) fail(ErrorCode::Io, "cannot write " + file.string());
  out << text;
  if (!out) fail(ErrorCode::Io, "write failed for " + file.string());
}

/// Writes weights.csv, lppd.csv, summary.csv, summary.json and report.json into `dir`.
inline void report_emit(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  const auto summary = summarize(report);
  write_text_file(dir / "weights.csv", weights_csv(report));
  write_text_file(dir / "lppd.csv", lppd_csv(report));
  write_text_file(dir / "summary.csv", summary_csv(summary));
  write_json_file((dir / "summary.json").string(), summary_to_json(summary));
  write_json_file((dir / "report.json").string(), report_to_json(report));
}

}  // namespace slpstack
