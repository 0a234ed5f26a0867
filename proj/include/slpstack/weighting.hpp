#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slpstack/error.hpp"
#include "slpstack/numeric.hpp"
#include "slpstack/optimize.hpp"
#include "slpstack/partition.hpp"
#include "slpstack/random.hpp"
#include "slpstack/simplex.hpp"

namespace slpstack {

/// K x L matrix of per-SLP log predictive densities at L evaluation points.
/// Entries are finite or -inf, never NaN.
struct PredictiveMatrix {
  Eigen::MatrixXd log_rho;
  std::vector<std::size_t> slp_ids;

  std::size_t num_slps() const { return static_cast<std::size_t>(log_rho.rows()); }
  std::size_t n_val() const { return static_cast<std::size_t>(log_rho.cols()); }

  /// True when row k has at least one finite entry.
  bool represented(std::size_t k) const {
    return (log_rho.row(static_cast<Eigen::Index>(k)).array() > kNegInf).any();
  }

  PredictiveMatrix columns(Eigen::Index first, Eigen::Index count) const {
    return {log_rho.middleCols(first, count), slp_ids};
  }
};

/// log sum_s (v_s / V) exp(return_s[l]) over a (possibly unnormalized)
/// weighted sample set; all -inf when the set is empty.
inline Eigen::VectorXd predictive_row(const std::vector<Trace>& traces, std::span<const double> weights,
                                      std::size_t n_points) {
  Eigen::VectorXd row = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_points), kNegInf);
  double total = 0.0;
  for (double w : weights) total += w;
  if (traces.empty() || !(total > 0.0)) return row;
  std::vector<LogSumExp> acc(n_points);
  for (std::size_t s = 0; s < traces.size(); ++s) {
    const auto& ret = traces[s].return_value;
    if (ret.size() != n_points)
      fail(ErrorCode::InconsistentReturnLength, "sample return vector has length " + std::to_string(ret.size()) +
                                                    ", expected " + std::to_string(n_points));
    if (weights[s] <= 0.0) continue;
    const double lw = std::log(weights[s] / total);
    for (std::size_t l = 0; l < n_points; ++l) acc[l].add(lw + (std::isnan(ret[l]) ? kNegInf : ret[l]));
  }
  for (std::size_t l = 0; l < n_points; ++l) row(static_cast<Eigen::Index>(l)) = acc[l].value();
  return row;
}

inline Eigen::VectorXd predictive_row(const WeightedSamples& local, std::size_t n_points) {
  return predictive_row(local.traces, local.weights, n_points);
}

namespace detail {

template <class Range>
std::size_t common_return_length(const Range& sample_sets) {
  std::optional<std::size_t> n;
  for (const auto& set : sample_sets)
    for (const auto& t : set) {
      if (!n) n = t.return_value.size();
      else if (*n != t.return_value.size())
        fail(ErrorCode::InconsistentReturnLength, "traces disagree on return vector length");
    }
  return n.value_or(0);
}

}  // namespace detail

/// Predictive matrix from a full-program sample set partitioned into SLPs.
inline PredictiveMatrix predictive_matrix(const WeightedSamples& samples, const SlpTable& table) {
  const std::size_t n = detail::common_return_length(std::vector<std::span<const Trace>>{samples.traces});
  PredictiveMatrix m;
  m.log_rho.resize(static_cast<Eigen::Index>(table.size()), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < table.size(); ++k) {
    std::vector<Trace> traces;
    std::vector<double> weights;
    for (std::size_t s : table.groups[k].indices) {
      traces.push_back(samples.traces[s]);
      weights.push_back(samples.weights[s]);
    }
    m.log_rho.row(static_cast<Eigen::Index>(k)) = predictive_row(traces, weights, n).transpose();
    m.slp_ids.push_back(k);
  }
  return m;
}

/// Predictive matrix from per-SLP results (anything with `.slp_id` and a
/// `.samples` WeightedSamples member, e.g. SlpEstimate).
template <class Estimates>
PredictiveMatrix predictive_matrix(const Estimates& estimates) {
  std::vector<std::span<const Trace>> sets;
  for (const auto& e : estimates) sets.emplace_back(e.samples.traces);
  const std::size_t n = detail::common_return_length(sets);
  PredictiveMatrix m;
  m.log_rho.resize(static_cast<Eigen::Index>(sets.size()), static_cast<Eigen::Index>(n));
  Eigen::Index k = 0;
  for (const auto& e : estimates) {
    m.log_rho.row(k++) = predictive_row(e.samples, n).transpose();
    m.slp_ids.push_back(e.slp_id);
  }
  return m;
}

namespace detail {

inline void check_dims(const WeightVector& w, const PredictiveMatrix& m) {
  if (w.size() != m.num_slps())
    fail(ErrorCode::InvalidArgument, "weight vector has " + std::to_string(w.size()) + " entries for " +
                                         std::to_string(m.num_slps()) + " SLPs");
}

/// Mean over columns of logsumexp_k(log w_k + a_kl); fills the gradient
/// with respect to w when requested.
inline double mixture_log_score(const Eigen::MatrixXd& a, const Eigen::VectorXd& w, Eigen::VectorXd* grad) {
  const Eigen::Index kk = a.rows(), ll = a.cols();
  if (grad) grad->setZero(kk);
  if (ll == 0) return 0.0;
  Eigen::VectorXd log_w(kk);
  for (Eigen::Index k = 0; k < kk; ++k) log_w(k) = w(k) > 0.0 ? std::log(w(k)) : kNegInf;
  double total = 0.0;
  for (Eigen::Index l = 0; l < ll; ++l) {
    double m = kNegInf;
    for (Eigen::Index k = 0; k < kk; ++k) m = std::max(m, log_w(k) + a(k, l));
    if (m == kNegInf) {
      if (grad) grad->setConstant(kInf);
      return kNegInf;
    }
    double s = 0.0;
    for (Eigen::Index k = 0; k < kk; ++k) s += std::exp(log_w(k) + a(k, l) - m);
    const double lse = m + std::log(s);
    total += lse;
    if (grad)
      for (Eigen::Index k = 0; k < kk; ++k) (*grad)(k) += std::exp(a(k, l) - lse);
  }
  if (grad) *grad /= static_cast<double>(ll);
  return total / static_cast<double>(ll);
}

}  // namespace detail

/// (1/L) sum_l log sum_k w_k rho_k(y_l), computed in log space. -inf when
/// some evaluation point gets zero density under the mixture.
inline double stacking_objective(const WeightVector& w, const PredictiveMatrix& m) {
  detail::check_dims(w, m);
  const Eigen::Map<const Eigen::VectorXd> wv(w.values().data(), static_cast<Eigen::Index>(w.size()));
  return detail::mixture_log_score(m.log_rho, wv, nullptr);
}

/// Held-out average log predictive density of the w-mixture.
inline double lppd(const PredictiveMatrix& m_test, const WeightVector& w) { return stacking_objective(w, m_test); }

/// LPPD difference of a method relative to the stacking baseline.
inline double lppd_diff(double lppd_other, double lppd_stacking) { return lppd_other - lppd_stacking; }

/// Regularization toward a reference weighting: beta = +inf disables it.
struct PacConfig {
  double beta = kInf;
  std::optional<WeightVector> reference;  // uniform over represented SLPs when empty

  void validate() const {
    if (!(beta > 0)) fail(ErrorCode::InvalidArgument, "beta must be > 0");
  }
};

/// KL(w || r) with 0 log 0 = 0; +inf when w_k > 0 = r_k.
inline double kl_divergence(const WeightVector& w, const WeightVector& r) {
  if (w.size() != r.size()) fail(ErrorCode::InvalidArgument, "KL operands differ in length");
  double kl = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] == 0.0) continue;
    if (r[k] == 0.0) return kInf;
    kl += w[k] * std::log(w[k] / r[k]);
  }
  return kl;
}

inline WeightVector equal_weights(std::size_t k, const std::vector<bool>& has_samples = {}) {
  if (k == 0) fail(ErrorCode::InvalidArgument, "no SLPs");
  if (!has_samples.empty() && has_samples.size() != k) fail(ErrorCode::InvalidArgument, "mask length mismatch");
  std::vector<double> w(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) w[i] = has_samples.empty() || has_samples[i] ? 1.0 : 0.0;
  return WeightVector::normalized(std::move(w));
}

inline std::vector<bool> represented_slps(const PredictiveMatrix& m) {
  std::vector<bool> mask(m.num_slps());
  for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = m.represented(k);
  return mask;
}

inline WeightVector default_reference(const PredictiveMatrix& m) {
  const auto mask = represented_slps(m);
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    fail(ErrorCode::Infeasible, "no SLP has a finite predictive density");
  return equal_weights(m.num_slps(), mask);
}

inline double pac_objective(const WeightVector& w, const PredictiveMatrix& m, const PacConfig& cfg) {
  cfg.validate();
  const double stack = stacking_objective(w, m);
  if (std::isinf(cfg.beta)) return stack;
  const WeightVector r = cfg.reference ? *cfg.reference : default_reference(m);
  const double kl = kl_divergence(w, r);
  if (std::isinf(kl)) return kNegInf;
  return stack - kl / (cfg.beta * static_cast<double>(std::max<std::size_t>(m.n_val(), 1)));
}

/// BMA weights: softmax of log Z; -inf entries get weight 0.
inline WeightVector bma_weights(std::span<const double> log_zs) {
  for (double z : log_zs)
    if (std::isnan(z) || z == kInf) fail(ErrorCode::InvalidArgument, "log Z must be finite or -inf");
  if (logsumexp(log_zs) == kNegInf) fail(ErrorCode::Infeasible, "every log Z is -inf");
  return WeightVector::normalized(softmax(log_zs));
}

struct OptimizedWeights {
  WeightVector w;
  double objective = kNegInf;
  /// Frank-Wolfe duality gap max_k g_k - <w, g>; bounds the distance to the
  /// optimum from above for these concave objectives.
  double gap = kInf;
  std::vector<std::string> diagnostics;
};

namespace detail {

/// Maximizes mixture_log_score(a, w) - c KL(w || r) over the simplex, where
/// a holds only active rows and usable columns and r > 0 on every row.
/// Softmax-reparameterized BFGS from the reference point plus 5 seeded random
/// restarts, then exponentiated-gradient polishing until the Frank-Wolfe gap
/// certifies optimality.
inline Eigen::VectorXd maximize_on_simplex(const Eigen::MatrixXd& a, const Eigen::VectorXd& r, double c,
                                           double* gap_out) {
  const Eigen::Index kk = a.rows();
  if (kk == 1) {
    if (gap_out) *gap_out = 0.0;
    return Eigen::VectorXd::Ones(1);
  }
  const Eigen::VectorXd log_r = r.array().log();
  auto objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd* g) {
    double v = mixture_log_score(a, w, g);
    if (c > 0.0) {
      double kl = 0.0;
      for (Eigen::Index k = 0; k < kk; ++k) {
        const double lw = w(k) > 0.0 ? std::log(w(k)) : kNegInf;
        if (w(k) > 0.0) kl += w(k) * (lw - log_r(k));
        if (g) (*g)(k) -= c * (lw - log_r(k) + 1.0);
      }
      v -= c * kl;
    }
    return v;
  };
  auto softmax_of = [](const Eigen::VectorXd& z) {
    const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
    return Eigen::VectorXd(e / e.sum());
  };
  const SmoothObjective neg = [&](const Eigen::VectorXd& z, Eigen::VectorXd& grad_z) {
    const Eigen::VectorXd w = softmax_of(z);
    Eigen::VectorXd g(kk);
    const double v = objective(w, &g);
    if (!std::isfinite(v)) {
      grad_z.setZero(kk);
      return kInf;
    }
    // d/dz_i of F(softmax(z)) = w_i (g_i - <w, g>), with g_i finite wherever w_i > 0.
    double wg = 0.0;
    for (Eigen::Index k = 0; k < kk; ++k)
      if (w(k) > 0.0) wg += w(k) * g(k);
    grad_z.resize(kk);
    for (Eigen::Index k = 0; k < kk; ++k) grad_z(k) = w(k) > 0.0 ? -w(k) * (g(k) - wg) : 0.0;
    return -v;
  };

  Rng rng(0x5eed);
  std::normal_distribution<double> normal(0.0, 2.0);
  Eigen::VectorXd best_w = softmax_of(log_r);
  double best = objective(best_w, nullptr);
  for (int start = 0; start < 6; ++start) {
    Eigen::VectorXd z0 = log_r;
    if (start > 0)
      for (Eigen::Index k = 0; k < kk; ++k) z0(k) = normal(rng);
    const BfgsResult res = minimize_bfgs(neg, z0);
    const Eigen::VectorXd w = softmax_of(res.x);
    const double v = objective(w, nullptr);
    if (v > best) {
      best = v;
      best_w = w;
    }
  }

  // Exponentiated-gradient polish with backtracking; monotone in the objective.
  Eigen::VectorXd w = best_w;
  Eigen::VectorXd g(kk);
  double v = objective(w, &g);
  double gap = kInf;
  double eta = 1.0;
  for (int it = 0; it < 5000; ++it) {
    double wg = 0.0, gmax = kNegInf;
    for (Eigen::Index k = 0; k < kk; ++k) {
      if (w(k) > 0.0) wg += w(k) * g(k);
      if (std::isfinite(g(k))) gmax = std::max(gmax, g(k));
    }
    gap = gmax - wg;
    if (!(gap > 1e-10)) break;
    bool improved = false;
    for (int ls = 0; ls < 50; ++ls) {
      Eigen::VectorXd lw(kk);
      for (Eigen::Index k = 0; k < kk; ++k)
        lw(k) = w(k) > 0.0 ? std::log(w(k)) + eta * (g(k) - gmax) : kNegInf;
      const Eigen::VectorXd cand = softmax_of(lw);
      Eigen::VectorXd g_cand(kk);
      const double v_cand = objective(cand, &g_cand);
      if (v_cand >= v) {
        improved = v_cand > v;
        w = cand;
        v = v_cand;
        g = g_cand;
        eta *= 2.0;
        break;
      }
      eta *= 0.5;
    }
    if (!improved) break;
  }
  if (gap_out) *gap_out = gap;
  return w;
}

inline OptimizedWeights optimize_weights(const PredictiveMatrix& m, const WeightVector* reference, double c) {
  const std::size_t kk = m.num_slps();
  if (kk == 0) fail(ErrorCode::Infeasible, "empty predictive matrix");
  std::vector<Eigen::Index> rows;
  for (std::size_t k = 0; k < kk; ++k) {
    if (!m.represented(k)) continue;
    if (reference && (*reference)[k] == 0.0) continue;
    rows.push_back(static_cast<Eigen::Index>(k));
  }
  if (rows.empty()) fail(ErrorCode::Infeasible, "every column is -inf for every SLP");
  OptimizedWeights out;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index l = 0; l < m.log_rho.cols(); ++l) {
    bool usable = false;
    for (Eigen::Index k : rows) usable = usable || m.log_rho(k, l) > kNegInf;
    if (usable) cols.push_back(l);
  }
  if (cols.empty() && m.log_rho.cols() > 0) fail(ErrorCode::Infeasible, "every column is -inf for every SLP");
  if (cols.size() != static_cast<std::size_t>(m.log_rho.cols()))
    out.diagnostics.push_back(std::to_string(static_cast<std::size_t>(m.log_rho.cols()) - cols.size()) +
                              " evaluation points have zero density under every SLP");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  Eigen::VectorXd r(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j)
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m.log_rho(rows[i], cols[j]);
    r(static_cast<Eigen::Index>(i)) = reference ? (*reference)[static_cast<std::size_t>(rows[i])] : 1.0;
  }
  r /= r.sum();
  const Eigen::VectorXd w_active = maximize_on_simplex(a, r, c, &out.gap);
  std::vector<double> w(kk, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i)
    w[static_cast<std::size_t>(rows[i])] = w_active(static_cast<Eigen::Index>(i));
  out.w = WeightVector::normalized(std::move(w));
  return out;
}

}  // namespace detail

/// Stacking weights: argmax of the stacking objective over the simplex.
/// SLPs with no finite predictive density get weight 0.
inline OptimizedWeights optimize_stacking(const PredictiveMatrix& m) {
  OptimizedWeights out = detail::optimize_weights(m, nullptr, 0.0);
  out.objective = stacking_objective(out.w, m);
  return out;
}

/// Stacking objective regularized by -(1 / (beta L)) KL(w || r).
inline OptimizedWeights optimize_pac(const PredictiveMatrix& m, const PacConfig& cfg) {
  cfg.validate();
  if (cfg.reference && cfg.reference->size() != m.num_slps())
    fail(ErrorCode::InvalidArgument, "reference has wrong length");
  const WeightVector r = cfg.reference ? *cfg.reference : default_reference(m);
  const double c = std::isinf(cfg.beta) ? 0.0 : 1.0 / (cfg.beta * static_cast<double>(std::max<std::size_t>(m.n_val(), 1)));
  OptimizedWeights out = detail::optimize_weights(m, &r, c);
  out.objective = pac_objective(out.w, m, cfg);
  return out;
}

}  // namespace slpstack
