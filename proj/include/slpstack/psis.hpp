#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slpstack/error.hpp"
#include "slpstack/numeric.hpp"
#include "slpstack/partition.hpp"
#include "slpstack/weighting.hpp"

namespace slpstack {

/// Generalized Pareto fit; k > 0 is a heavy tail.
struct GpdFit {
  double k = 0.0;
  double sigma = 1.0;
};

inline constexpr double kBadKhat = 0.7;
inline constexpr std::size_t kMinTailSamples = 5;

namespace detail {

/// Zhang-Stephens empirical-Bayes GPD estimate on ascending data with a
/// weakly informative shrinkage of k toward 0.5. Returns k = +inf when the
/// estimate is undefined.
inline GpdFit gpd_fit_sorted(std::span<const double> x) {
  const std::size_t n = x.size();
  constexpr double prior = 3.0;
  const std::size_t m = 30 + static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  const double xstar = x[static_cast<std::size_t>(std::floor(static_cast<double>(n) / 4.0 + 0.5)) - 1];
  std::vector<double> theta(m), log_lik(m);
  for (std::size_t j = 0; j < m; ++j) {
    theta[j] = 1.0 / x[n - 1] + (1.0 - std::sqrt(static_cast<double>(m) / (static_cast<double>(j) + 0.5))) / prior / xstar;
    double kk = 0.0;
    for (double xi : x) kk += std::log1p(-theta[j] * xi);
    kk /= static_cast<double>(n);
    const double l = static_cast<double>(n) * (std::log(-theta[j] / kk) - kk - 1.0);
    log_lik[j] = std::isnan(l) ? kNegInf : l;
  }
  const double lse = logsumexp(log_lik);
  if (lse == kNegInf || std::isnan(lse)) return {kInf, 0.0};
  double theta_hat = 0.0;
  for (std::size_t j = 0; j < m; ++j) theta_hat += theta[j] * std::exp(log_lik[j] - lse);
  double k = 0.0;
  for (double xi : x) k += std::log1p(-theta_hat * xi);
  k /= static_cast<double>(n);
  const double sigma = -k / theta_hat;
  k = (k * static_cast<double>(n) + 0.5 * 10.0) / (static_cast<double>(n) + 10.0);
  if (std::isnan(k) || std::isnan(sigma)) return {kInf, 0.0};
  return {k, sigma};
}

/// GPD quantile function.
inline double gpd_quantile(double p, double k, double sigma) {
  if (std::abs(k) < 1e-12) return -sigma * std::log1p(-p);
  return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

}  // namespace detail

/// Fits a generalized Pareto distribution to positive exceedances.
inline GpdFit fit_gpd(std::vector<double> exceedances) {
  if (exceedances.size() < kMinTailSamples)
    fail(ErrorCode::TooFewTailSamples, "need at least 5 exceedances, got " + std::to_string(exceedances.size()));
  for (double x : exceedances)
    if (!(x > 0.0) || !std::isfinite(x)) fail(ErrorCode::InvalidArgument, "exceedances must be finite and > 0");
  std::sort(exceedances.begin(), exceedances.end());
  if (exceedances.front() == exceedances.back())
    fail(ErrorCode::InvalidArgument, "constant exceedances admit no GPD fit");
  return detail::gpd_fit_sorted(exceedances);
}

struct SmoothedWeights {
  std::vector<double> log_weights;
  double khat = kInf;
};

inline std::size_t psis_tail_length(std::size_t s) {
  const double n = static_cast<double>(s);
  return static_cast<std::size_t>(std::ceil(std::min(0.2 * n, 3.0 * std::sqrt(n))));
}

/// Pareto-smoothed importance weights. The largest M log ratios are replaced
/// by GPD order-statistic quantiles, capped at the raw maximum; the rest are
/// unchanged. With fewer than 5 tail draws, a constant
/// tail or an undefined fit, raw ratios are returned with khat = +inf.
inline SmoothedWeights psis_smooth(std::span<const double> log_ratios) {
  const std::size_t s = log_ratios.size();
  SmoothedWeights out;
  out.log_weights.assign(log_ratios.begin(), log_ratios.end());
  const std::size_t m = psis_tail_length(s);
  if (s == 0 || m < kMinTailSamples || m >= s) return out;
  const double max_lr = *std::max_element(out.log_weights.begin(), out.log_weights.end());
  if (!std::isfinite(max_lr)) return out;
  std::vector<std::size_t> order(s);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.log_weights[a] < out.log_weights[b]; });
  // Work relative to the maximum so exp() cannot overflow.
  const double cutoff = out.log_weights[order[s - m - 1]] - max_lr;
  if (!std::isfinite(cutoff)) return out;
  const double exp_cutoff = std::exp(cutoff);
  std::vector<double> tail(m);
  for (std::size_t j = 0; j < m; ++j) tail[j] = std::exp(out.log_weights[order[s - m + j]] - max_lr) - exp_cutoff;
  if (tail.front() == tail.back()) return out;
  const GpdFit fit = detail::gpd_fit_sorted(tail);
  if (!std::isfinite(fit.k)) return out;
  for (std::size_t j = 0; j < m; ++j) {
    const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(m);
    const double q = detail::gpd_quantile(p, fit.k, fit.sigma) + exp_cutoff;
    out.log_weights[order[s - m + j]] = std::min(std::log(q), 0.0) + max_lr;
  }
  out.khat = fit.k;
  return out;
}

/// Leave-one-out log predictive densities: K x N entries
/// log rho_k(y_i | y_-i) with their Pareto shape diagnostics.
struct LooMatrix {
  Eigen::MatrixXd log_rho_loo;
  Eigen::MatrixXd khat;
  std::size_t n_bad_khat = 0;
  std::vector<std::string> diagnostics;

  std::size_t num_slps() const { return static_cast<std::size_t>(log_rho_loo.rows()); }
  std::size_t num_obs() const { return static_cast<std::size_t>(log_rho_loo.cols()); }
  PredictiveMatrix as_predictive() const { return {log_rho_loo, {}}; }
};

struct LooRow {
  Eigen::VectorXd log_rho_loo;
  Eigen::VectorXd khat;
  std::vector<std::string> diagnostics;
};

/// One SLP's LOO row from an S x N matrix of per-datum log-likelihoods and
/// the samples' log weights (log v_s; zeros for uniform draws). Raw ratios
/// are v_s / g(y_i | theta_s).
inline LooRow loo_row(const Eigen::MatrixXd& log_lik, std::span<const double> log_v) {
  const auto s = log_lik.rows(), n = log_lik.cols();
  if (static_cast<std::size_t>(s) != log_v.size()) fail(ErrorCode::InvalidArgument, "log weight length mismatch");
  LooRow row{Eigen::VectorXd::Constant(n, kNegInf), Eigen::VectorXd::Constant(n, kInf), {}};
  if (s == 0) {
    row.diagnostics.push_back("no samples; LOO row is -inf");
    return row;
  }
  const bool raw_only = static_cast<std::size_t>(s) < kMinTailSamples;
  if (raw_only)
    row.diagnostics.push_back("only " + std::to_string(s) + " samples; using unsmoothed importance ratios");
  std::vector<double> lr(static_cast<std::size_t>(s)), num(static_cast<std::size_t>(s));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < s; ++j) lr[static_cast<std::size_t>(j)] = log_v[static_cast<std::size_t>(j)] - log_lik(j, i);
    SmoothedWeights sw;
    if (raw_only) {
      sw.log_weights = lr;
    } else {
      sw = psis_smooth(lr);
    }
    for (Eigen::Index j = 0; j < s; ++j) num[static_cast<std::size_t>(j)] = sw.log_weights[static_cast<std::size_t>(j)] + log_lik(j, i);
    row.log_rho_loo(i) = logsumexp(num) - logsumexp(sw.log_weights);
    row.khat(i) = sw.khat;
  }
  return row;
}

/// Per-datum log-likelihood matrix (S x N) of a sample set; every trace must
/// carry the same number of observation terms.
inline Eigen::MatrixXd log_lik_matrix(const std::vector<Trace>& traces) {
  if (traces.empty()) return {};
  const std::size_t n = traces.front().log_lik.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(traces.size()), static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < traces.size(); ++s) {
    if (traces[s].log_lik.size() != n)
      fail(ErrorCode::MissingLikelihoodTerms, "trace " + std::to_string(s) + " has " +
                                                  std::to_string(traces[s].log_lik.size()) +
                                                  " likelihood terms, expected " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i)
      out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = traces[s].log_lik[i];
  }
  return out;
}

inline LooRow loo_row(const WeightedSamples& local, std::size_t n_obs) {
  if (local.empty()) return loo_row(Eigen::MatrixXd(0, static_cast<Eigen::Index>(n_obs)), {});
  const Eigen::MatrixXd ll = log_lik_matrix(local.traces);
  if (static_cast<std::size_t>(ll.cols()) != n_obs)
    fail(ErrorCode::MissingLikelihoodTerms,
         "samples carry " + std::to_string(ll.cols()) + " likelihood terms, expected " + std::to_string(n_obs));
  std::vector<double> log_v(local.size());
  for (std::size_t s = 0; s < local.size(); ++s) log_v[s] = std::log(local.weights[s]);
  return loo_row(ll, log_v);
}

inline LooMatrix assemble_loo(std::vector<LooRow> rows, std::size_t n_obs) {
  LooMatrix out;
  const auto n = static_cast<Eigen::Index>(n_obs);
  out.log_rho_loo.resize(static_cast<Eigen::Index>(rows.size()), n);
  out.khat.resize(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].log_rho_loo.size() != n) fail(ErrorCode::MissingLikelihoodTerms, "LOO rows differ in length");
    out.log_rho_loo.row(static_cast<Eigen::Index>(k)) = rows[k].log_rho_loo.transpose();
    out.khat.row(static_cast<Eigen::Index>(k)) = rows[k].khat.transpose();
    for (auto& d : rows[k].diagnostics) out.diagnostics.push_back("SLP " + std::to_string(k) + ": " + d);
  }
  for (Eigen::Index k = 0; k < out.khat.rows(); ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      if (out.khat(k, i) > kBadKhat && out.log_rho_loo(k, i) > kNegInf) ++out.n_bad_khat;
  if (out.n_bad_khat > 0)
    out.diagnostics.push_back(std::to_string(out.n_bad_khat) + " LOO entries with khat > 0.7");
  return out;
}

/// LOO matrix from per-SLP log-likelihood matrices (S_k x N, uniform weights).
inline LooMatrix psis_loo_matrix(const std::vector<Eigen::MatrixXd>& per_slp_log_lik) {
  if (per_slp_log_lik.empty()) return {};
  const auto n = per_slp_log_lik.front().cols();
  std::vector<LooRow> rows;
  for (const auto& ll : per_slp_log_lik) {
    if (ll.cols() != n) fail(ErrorCode::MissingLikelihoodTerms, "SLPs disagree on the number of observations");
    rows.push_back(loo_row(ll, std::vector<double>(static_cast<std::size_t>(ll.rows()), 0.0)));
  }
  return assemble_loo(std::move(rows), static_cast<std::size_t>(n));
}

namespace detail {

inline std::size_t common_obs_count(const std::vector<const Trace*>& traces) {
  std::optional<std::size_t> n;
  for (const Trace* t : traces) {
    if (!n) n = t->log_lik.size();
    else if (*n != t->log_lik.size())
      fail(ErrorCode::MissingLikelihoodTerms, "traces disagree on the number of likelihood terms");
  }
  return n.value_or(0);
}

}  // namespace detail

/// LOO matrix from a full-program sample set partitioned into SLPs; the
/// within-SLP weights v_s / V_k define each row's importance base.
inline LooMatrix psis_loo_matrix(const WeightedSamples& samples, const SlpTable& table) {
  std::vector<const Trace*> all;
  for (const auto& t : samples.traces) all.push_back(&t);
  const std::size_t n = detail::common_obs_count(all);
  std::vector<LooRow> rows;
  for (const auto& g : table.groups) {
    WeightedSamples local;
    for (std::size_t s : g.indices) {
      local.traces.push_back(samples.traces[s]);
      local.weights.push_back(samples.weights[s] / g.mass);
    }
    rows.push_back(loo_row(local, n));
  }
  return assemble_loo(std::move(rows), n);
}

/// LOO matrix from per-SLP results (anything with a `.samples` member).
template <class Estimates>
LooMatrix psis_loo_matrix(const Estimates& estimates) {
  std::vector<const Trace*> all;
  for (const auto& e : estimates)
    for (const auto& t : e.samples.traces) all.push_back(&t);
  const std::size_t n = detail::common_obs_count(all);
  std::vector<LooRow> rows;
  for (const auto& e : estimates) rows.push_back(loo_row(e.samples, n));
  return assemble_loo(std::move(rows), n);
}

/// Stacking weights maximizing the LOO objective (1/N) sum_i log sum_k w_k rho_k(y_i | y_-i).
inline OptimizedWeights loo_stacking_weights(const LooMatrix& loo) {
  OptimizedWeights out = optimize_stacking(loo.as_predictive());
  out.diagnostics.insert(out.diagnostics.end(), loo.diagnostics.begin(), loo.diagnostics.end());
  return out;
}

}  // namespace slpstack
