#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slpstack/enumerate.hpp"
#include "slpstack/error.hpp"
#include "slpstack/inference.hpp"
#include "slpstack/models.hpp"
#include "slpstack/psis.hpp"
#include "slpstack/random.hpp"
#include "slpstack/weighting.hpp"

namespace slpstack {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"bma", "bma-analytic", "equal", "stack-val", "stack-loo", "pac"};
  return m;
}

/// "inf" for +infinity, otherwise the shortest %g rendering.
inline std::string format_beta(double beta) {
  if (std::isinf(beta)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", beta);
  return buf;
}

inline std::string pac_label(double beta) { return "pac:beta=" + format_beta(beta); }

struct ExperimentConfig {
  std::string experiment = "distinct";
  std::size_t n_train = 200;
  std::size_t n_test = 1000;
  std::size_t n_datasets = 100;
  std::vector<std::string> methods{"bma", "bma-analytic", "equal", "stack-val", "stack-loo", "pac"};
  std::vector<double> beta_grid{1e-3, 0.1, 1.0, 10.0, kInf};
  std::uint64_t seed = 0;
  std::size_t max_slps = 128;
  BudgetConfig budget{.proposal = IsProposalKind::MomentMatched};
  /// Worker threads across datasets; each dataset's SLPs run sequentially.
  unsigned threads = 1;

  void validate() const {
    if (n_train < 2) fail(ErrorCode::InvalidArgument, "n_train must be >= 2");
    if (n_test == 0 || n_datasets == 0) fail(ErrorCode::InvalidArgument, "n_test and n_datasets must be >= 1");
    if (methods.empty()) fail(ErrorCode::InvalidArgument, "methods must be non-empty");
    for (const auto& m : methods)
      if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
        fail(ErrorCode::InvalidArgument, "unknown method '" + m + "'");
    for (double b : beta_grid)
      if (!(b > 0)) fail(ErrorCode::InvalidArgument, "beta values must be > 0");
    budget.validate();
  }

  bool wants(std::string_view m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }

  /// Report column labels in fixed order; stack-loo is always present since
  /// LPPD differences are measured against it.
  std::vector<std::string> method_labels() const {
    std::vector<std::string> out;
    for (const auto& m : known_methods()) {
      if (m == "pac") {
        if (wants("pac"))
          for (double b : beta_grid) out.push_back(pac_label(b));
      } else if (m == "stack-loo" || wants(m)) {
        out.push_back(m);
      }
    }
    return out;
  }
};

struct DatasetResult {
  std::size_t index = 0;
  bool failed = false;
  std::string failure;
  std::map<std::string, std::vector<double>> weights;
  std::map<std::string, double> lppd;
  std::map<std::string, double> lppd_diff;
  /// LOO stacking objective of each method's weights on the training data.
  std::map<std::string, double> loo_objective;
  std::vector<double> log_Z, log_Z_se, analytic_log_Z, ess, acceptance;
  std::size_t n_bad_khat = 0;
  std::vector<std::string> warnings;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<std::string> methods;
  std::vector<std::string> slp_paths;
  bool truncated = false;
  std::vector<DatasetResult> datasets;

  std::size_t num_slps() const { return slp_paths.size(); }

  /// Per-dataset values of one metric for a method; failed datasets give NaN.
  std::vector<double> column(const std::map<std::string, double> DatasetResult::*metric,
                             const std::string& method) const {
    std::vector<double> out;
    for (const auto& d : datasets) {
      const auto& m = d.*metric;
      const auto it = m.find(method);
      out.push_back(d.failed || it == m.end() ? std::numeric_limits<double>::quiet_NaN() : it->second);
    }
    return out;
  }
};

namespace detail {

struct SlpRows {
  Eigen::MatrixXd predictive;  // K x L over the program's evaluation points
  LooMatrix loo;
  std::vector<SlpEstimate> summaries;  // samples released
};

/// Runs local inference on each SLP and keeps only the predictive and LOO
/// rows, so at most one SLP's samples are alive at a time.
inline SlpRows infer_rows(const Program& program, const std::vector<AddressPath>& paths, std::size_t n_eval,
                          std::size_t n_obs, const BudgetConfig& budget) {
  SlpRows out;
  out.predictive.resize(static_cast<Eigen::Index>(paths.size()), static_cast<Eigen::Index>(n_eval));
  std::vector<LooRow> loo_rows;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    SlpEstimate est = run_slp(program, paths[k], k, budget);
    out.predictive.row(static_cast<Eigen::Index>(k)) = predictive_row(est.samples, n_eval).transpose();
    loo_rows.push_back(n_obs > 0 ? loo_row(est.samples, n_obs) : LooRow{});
    est.samples = {};
    out.summaries.push_back(std::move(est));
  }
  if (n_obs > 0) out.loo = assemble_loo(std::move(loo_rows), n_obs);
  return out;
}

}  // namespace detail

/// One replicate: generate train and test data, run DCC, weight the SLPs
/// with every requested method and score the mixtures on the test set.
inline DatasetResult run_dataset(const ModelSpec& spec, const ExperimentConfig& cfg, std::size_t index,
                                 const std::vector<AddressPath>& paths) {
  DatasetResult r;
  r.index = index;
  try {
    const Dataset train = spec.generate(cfg.n_train, derive_seed(cfg.seed, "train", index));
    const Dataset test = spec.generate(cfg.n_test, derive_seed(cfg.seed, "test", index));
    BudgetConfig budget = cfg.budget;
    budget.seed = derive_seed(cfg.seed, "infer", index);
    const std::size_t kk = paths.size();

    const detail::SlpRows full =
        detail::infer_rows(spec.program(train, test), paths, cfg.n_test, cfg.n_train, budget);
    std::vector<bool> has_samples(kk);
    for (std::size_t k = 0; k < kk; ++k) {
      const auto& s = full.summaries[k];
      has_samples[k] = !s.failed;
      r.log_Z.push_back(s.log_Z);
      r.log_Z_se.push_back(s.log_Z_se);
      r.ess.push_back(s.ess);
      r.acceptance.push_back(s.acceptance_rate);
      if (s.failed) r.warnings.push_back("SLP " + std::to_string(k) + " failed: " + s.failure);
      for (const auto& d : s.diagnostics) r.warnings.push_back("SLP " + std::to_string(k) + ": " + d);
    }
    r.n_bad_khat = full.loo.n_bad_khat;
    const PredictiveMatrix test_m{full.predictive, {}};
    const PredictiveMatrix loo_m = full.loo.as_predictive();

    std::map<std::string, WeightVector> w;
    std::map<std::string, const PredictiveMatrix*> scored_on;
    w["stack-loo"] = loo_stacking_weights(full.loo).w;
    if (cfg.wants("bma")) w["bma"] = bma_weights(r.log_Z);
    if (cfg.wants("bma-analytic") && spec.analytic_log_Z) {
      r.analytic_log_Z = spec.analytic_log_Z(train);
      w["bma-analytic"] = bma_weights(r.analytic_log_Z);
    }
    if (cfg.wants("equal")) w["equal"] = equal_weights(kk, has_samples);
    if (cfg.wants("pac"))
      for (double b : cfg.beta_grid) w[pac_label(b)] = optimize_pac(loo_m, PacConfig{b, std::nullopt}).w;

    PredictiveMatrix val_test_m;
    if (cfg.wants("stack-val")) {
      const auto half = static_cast<Eigen::Index>(cfg.n_train / 2);
      const auto rest = static_cast<Eigen::Index>(cfg.n_train) - half;
      const Dataset eval = Dataset::concat(train.rows(half, rest), test);
      BudgetConfig val_budget = budget;
      val_budget.seed = derive_seed(cfg.seed, "infer-val", index);
      const detail::SlpRows split = detail::infer_rows(spec.program(train.rows(0, half), eval), paths,
                                                       eval.size(), 0, val_budget);
      const PredictiveMatrix all{split.predictive, {}};
      w["stack-val"] = optimize_stacking(all.columns(0, rest)).w;
      val_test_m = all.columns(rest, static_cast<Eigen::Index>(cfg.n_test));
      scored_on["stack-val"] = &val_test_m;
    }

    for (const auto& [label, wv] : w) {
      r.weights[label] = wv.values();
      const auto it = scored_on.find(label);
      r.lppd[label] = lppd(it == scored_on.end() ? test_m : *it->second, wv);
      r.loo_objective[label] = stacking_objective(wv, loo_m);
    }
    for (const auto& [label, v] : r.lppd) r.lppd_diff[label] = lppd_diff(v, r.lppd.at("stack-loo"));
    for (const auto& d : full.loo.diagnostics) r.warnings.push_back(d);
  } catch (const Error& e) {
    r.failed = true;
    r.failure = e.what();
  }
  return r;
}

/// Replicates an experiment over cfg.n_datasets regenerated datasets. Every
/// dataset draws from RNG streams derived from (seed, index), so reports are
/// bit-identical for a fixed seed regardless of thread count. The grammar
/// fixture only enumerates.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const ModelSpec spec = builtin_model(cfg.experiment);
  ExperimentReport report;
  report.config = cfg;
  report.config.experiment = spec.name;
  const Dataset probe = spec.generate(std::max<std::size_t>(cfg.n_train, 2), derive_seed(cfg.seed, "train", 0));
  const Enumeration en = enumerate_slps(spec.program(probe, probe), cfg.max_slps, cfg.seed);
  report.truncated = en.truncated;
  for (const auto& p : en.paths) report.slp_paths.push_back(p.key());
  if (spec.name == "pcfg-enum") return report;

  report.methods = cfg.method_labels();
  if (!spec.analytic_log_Z) std::erase(report.methods, std::string("bma-analytic"));
  report.datasets.resize(cfg.n_datasets);
  parallel_for(cfg.n_datasets, cfg.threads,
               [&](std::size_t i) { report.datasets[i] = run_dataset(spec, cfg, i, en.paths); });
  return report;
}

}  // namespace slpstack
