#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "slpstack/enumerate.hpp"
#include "slpstack/error.hpp"
#include "slpstack/numeric.hpp"
#include "slpstack/partition.hpp"
#include "slpstack/program.hpp"
#include "slpstack/random.hpp"

namespace slpstack {

enum class MhKernel {
  /// One Gaussian random-walk update per continuous site per step; each
  /// site's scale adapts toward 0.44 acceptance during burn-in.
  SingleSite,
  /// One joint Gaussian update per step; a shared multiplier on the
  /// per-site scales adapts toward 0.234 acceptance.
  Joint,
};

enum class IsProposalKind { Prior, MomentMatched };

/// Per-SLP computational budget; "uniform" allocation means every SLP gets
/// identical step counts.
struct BudgetConfig {
  std::size_t mcmc_steps_per_slp = 1000;
  std::size_t burn_in = 400;
  std::size_t is_proposals_per_slp = 5000;
  std::uint64_t seed = 0;
  MhKernel kernel = MhKernel::SingleSite;
  IsProposalKind proposal = IsProposalKind::Prior;
  /// Covariance multiplier applied to moment-matched IS proposals.
  double proposal_inflation = 2.0;
  unsigned threads = 1;

  void validate() const {
    if (mcmc_steps_per_slp == 0 || is_proposals_per_slp == 0)
      fail(ErrorCode::InvalidArgument, "mcmc_steps_per_slp and is_proposals_per_slp must be >= 1");
    if (!(proposal_inflation > 0)) fail(ErrorCode::InvalidArgument, "proposal_inflation must be > 0");
  }
};

struct MhResult {
  WeightedSamples samples;
  double acceptance_rate = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

inline double safe_log_density(const Program& p, const ValueMap& values) {
  try {
    return log_density(p, values);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::PathMismatch || e.code() == ErrorCode::PathUnrealizable) return kNegInf;
    throw;
  }
}

inline std::vector<Address> continuous_sites(const Trace& t) {
  std::vector<Address> out;
  for (const auto& r : t.records)
    if (!r.is_branching && std::holds_alternative<double>(r.value)) out.push_back(r.address);
  return out;
}

inline bool has_free_discrete_sites(const Trace& t) {
  for (const auto& r : t.records)
    if (!r.is_branching && std::holds_alternative<std::int64_t>(r.value)) return true;
  return false;
}

}  // namespace detail

/// Adaptive random-walk Metropolis-Hastings inside one SLP.
///
/// The chain starts from the best of up to 50 finite-density prior draws
/// (InitFailure if 1000 draws give none). Only continuous sites move; branch
/// sites stay pinned and free discrete sites keep their initial values.
/// Scales adapt by Robbins-Monro on the log scale during burn-in only, so the
/// retained chain is a valid fixed-kernel MH chain. Returned samples are
/// uniformly weighted and carry return vectors.
inline MhResult mh_within_slp(const Program& local, const BudgetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  std::optional<Trace> init;
  double init_lp = kNegInf;
  int finite_draws = 0;
  for (int attempt = 0; attempt < 1000 && finite_draws < 50; ++attempt) {
    Trace t = run_forward(local, rng, false);
    const double lp = t.log_density();
    if (!std::isfinite(lp)) continue;
    ++finite_draws;
    if (lp > init_lp) {
      init_lp = lp;
      init = std::move(t);
    }
  }
  if (!init) fail(ErrorCode::InitFailure, "no finite-density initialization in 1000 prior draws of " + local.name());

  const std::vector<Address> sites = detail::continuous_sites(*init);
  const std::size_t d = sites.size();
  ValueMap state = init->values();
  double lp = init_lp;
  std::vector<double> x(d);
  for (std::size_t j = 0; j < d; ++j) x[j] = std::get<double>(state.at(sites[j]));

  std::vector<double> log_scale(d);
  for (std::size_t j = 0; j < d; ++j) log_scale[j] = std::log(0.1 * std::max(1.0, std::abs(x[j])));
  double log_joint = std::log(2.38 / std::sqrt(static_cast<double>(std::max<std::size_t>(d, 1))));
  const bool joint = cfg.kernel == MhKernel::Joint && d > 1;
  const double target = joint ? 0.234 : 0.44;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::size_t accepted = 0, proposed = 0;
  auto set = [&](std::size_t j, double v) { state[sites[j]] = v; };
  auto accept = [&](double lp_new) {
    const double u = unif(rng);
    return std::isfinite(lp_new) && (lp_new >= lp || std::log(u) < lp_new - lp);
  };

  std::vector<Trace> kept;
  kept.reserve(cfg.mcmc_steps_per_slp);
  std::optional<Trace> current_full;  // trace with return vector for the current state
  const std::size_t total = cfg.burn_in + cfg.mcmc_steps_per_slp;
  for (std::size_t step = 0; step < total; ++step) {
    const bool burning = step < cfg.burn_in;
    const double gain = std::pow(static_cast<double>(step) + 1.0, -0.6);
    bool moved = false;
    if (d == 0) {
      // nothing to move
    } else if (joint) {
      std::vector<double> prev = x;
      for (std::size_t j = 0; j < d; ++j) {
        x[j] += std::exp(log_joint + log_scale[j]) * normal(rng);
        set(j, x[j]);
      }
      const double lp_new = detail::safe_log_density(local, state);
      const bool ok = accept(lp_new);
      if (ok) {
        lp = lp_new;
        moved = true;
      } else {
        x = prev;
        for (std::size_t j = 0; j < d; ++j) set(j, x[j]);
      }
      if (!burning) {
        ++proposed;
        accepted += ok;
      } else {
        log_joint += gain * ((ok ? 1.0 : 0.0) - target);
      }
    } else {
      for (std::size_t j = 0; j < d; ++j) {
        const double old = x[j];
        x[j] = old + std::exp(log_scale[j]) * normal(rng);
        set(j, x[j]);
        const double lp_new = detail::safe_log_density(local, state);
        const bool ok = accept(lp_new);
        if (ok) {
          lp = lp_new;
          moved = true;
        } else {
          x[j] = old;
          set(j, old);
        }
        if (!burning) {
          ++proposed;
          accepted += ok;
        } else {
          log_scale[j] += gain * ((ok ? 1.0 : 0.0) - target);
        }
      }
    }
    if (burning) continue;
    if (moved || !current_full) current_full = replay_trace(local, state, true);
    kept.push_back(*current_full);
  }

  MhResult out;
  out.samples = WeightedSamples::uniform(std::move(kept));
  out.acceptance_rate = d == 0 ? 1.0 : static_cast<double>(accepted) / static_cast<double>(std::max<std::size_t>(proposed, 1));
  if (out.acceptance_rate < 0.01)
    out.warnings.push_back("AllProposalsRejected: acceptance rate " + std::to_string(out.acceptance_rate));
  return out;
}

inline MhResult mh_within_slp(const Program& local, const BudgetConfig& cfg) {
  return mh_within_slp(local, cfg, cfg.seed);
}

/// Importance proposal: either the program's own prior or a multivariate
/// Gaussian over the continuous sites with every other site held fixed.
struct PriorProposal {};

struct GaussianProposal {
  std::vector<Address> sites;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  ValueMap fixed;  // branch values (and any other non-continuous sites)
};

using Proposal = std::variant<PriorProposal, GaussianProposal>;

/// Gaussian fitted to the weighted mean/covariance of local samples, with the
/// covariance scaled by `inflation`. Returns nullopt when the samples do not
/// share one set of continuous sites or carry free discrete sites.
inline std::optional<GaussianProposal> fit_moment_matched(const WeightedSamples& samples, double inflation) {
  if (samples.empty()) return std::nullopt;
  const Trace& first = samples.traces.front();
  if (detail::has_free_discrete_sites(first)) return std::nullopt;
  GaussianProposal g;
  g.sites = detail::continuous_sites(first);
  for (const auto& r : first.records)
    if (r.is_branching) g.fixed.emplace(r.address, r.value);
  const auto d = static_cast<Eigen::Index>(g.sites.size());
  g.mean = Eigen::VectorXd::Zero(d);
  g.cov = Eigen::MatrixXd::Zero(d, d);
  if (d == 0) return g;
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(samples.size()), d);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& t = samples.traces[s];
    if (detail::continuous_sites(t) != g.sites) return std::nullopt;
    Eigen::Index j = 0;
    for (const auto& r : t.records)
      if (!r.is_branching) xs(static_cast<Eigen::Index>(s), j++) = std::get<double>(r.value);
  }
  const Eigen::Map<const Eigen::VectorXd> w(samples.weights.data(), static_cast<Eigen::Index>(samples.size()));
  g.mean = xs.transpose() * w;
  const Eigen::MatrixXd centered = xs.rowwise() - g.mean.transpose();
  g.cov = centered.transpose() * w.asDiagonal() * centered;
  for (Eigen::Index j = 0; j < d; ++j)
    g.cov(j, j) = std::max(g.cov(j, j), 1e-10 * (1.0 + g.mean(j) * g.mean(j)));
  g.cov *= inflation;
  return g;
}

struct IsEstimate {
  double log_Z = kNegInf;
  double log_Z_se = kInf;
  double ess = 0.0;
  /// ESS below 10: the estimate is unreliable.
  bool degenerate = true;
};

/// Summarizes importance log-weights: log of the mean weight, delta-method
/// standard error of that log, and ESS.
inline IsEstimate summarize_log_weights(std::span<const double> log_w) {
  IsEstimate out;
  const std::size_t n = log_w.size();
  if (n == 0) return out;
  const double lse = logsumexp(log_w);
  out.log_Z = lse - std::log(static_cast<double>(n));
  if (lse == kNegInf) return out;
  double m = kNegInf;
  for (double v : log_w) m = std::max(m, v);
  double sum = 0.0, sum_sq = 0.0;
  for (double v : log_w) {
    const double w = std::exp(v - m);
    sum += w;
    sum_sq += w * w;
  }
  out.ess = sum * sum / sum_sq;
  if (n > 1) {
    const double nn = static_cast<double>(n);
    const double mu = sum / nn;
    const double var = std::max(0.0, (sum_sq - nn * mu * mu) / (nn - 1.0));
    out.log_Z_se = std::sqrt(var / nn) / mu;
  }
  out.degenerate = out.ess < 10.0;
  return out;
}

/// Importance-sampling estimate of the log local normalization constant.
inline IsEstimate estimate_log_Z_is(const Program& local, const Proposal& proposal, std::size_t n,
                                    std::uint64_t seed) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "need at least one proposal");
  Rng rng(seed);
  std::vector<double> log_w(n);
  if (std::holds_alternative<PriorProposal>(proposal)) {
    const bool conditioned = local.is_conditioned();
    for (std::size_t i = 0; i < n; ++i) {
      const Trace t = run_forward(local, rng, false);
      double lw = t.log_lik_sum();
      if (conditioned)
        for (const auto& r : t.records)
          if (r.is_branching) lw += r.log_prior_term;
      log_w[i] = std::isnan(lw) ? kNegInf : lw;
    }
    return summarize_log_weights(log_w);
  }
  const auto& g = std::get<GaussianProposal>(proposal);
  const auto d = static_cast<Eigen::Index>(g.sites.size());
  Eigen::MatrixXd cov = g.cov;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  for (double jitter = 1e-12; llt.info() != Eigen::Success && jitter < 1.0; jitter *= 10) {
    cov = g.cov + jitter * Eigen::MatrixXd::Identity(d, d);
    llt.compute(cov);
  }
  if (llt.info() != Eigen::Success) fail(ErrorCode::InvalidArgument, "proposal covariance not PD");
  const Eigen::MatrixXd lower = llt.matrixL();
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  std::normal_distribution<double> normal(0.0, 1.0);
  ValueMap values = g.fixed;
  Eigen::VectorXd z(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
    const Eigen::VectorXd x = g.mean + lower * z;
    for (Eigen::Index j = 0; j < d; ++j) values[g.sites[static_cast<std::size_t>(j)]] = x(j);
    const double log_q = -static_cast<double>(d) * kLogSqrt2Pi - 0.5 * log_det - 0.5 * z.squaredNorm();
    const double lp = detail::safe_log_density(local, values);
    log_w[i] = std::isnan(lp) ? kNegInf : lp - log_q;
  }
  return summarize_log_weights(log_w);
}

/// Monte Carlo estimate of the prior probability of each enumerated path;
/// runs whose path is not enumerated are pooled into `other`.
struct PathProbabilities {
  std::vector<double> prob;
  double other = 0.0;
};

inline PathProbabilities estimate_prior_path_prob(const Program& program, const std::vector<AddressPath>& paths,
                                                  std::size_t n, std::uint64_t seed) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "n must be >= 1");
  std::map<std::string, std::size_t> ids;
  for (std::size_t k = 0; k < paths.size(); ++k) ids.emplace(paths[k].key(), k);
  PathProbabilities out;
  out.prob.assign(paths.size(), 0.0);
  Rng rng(seed);
  const double inc = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = ids.find(run_forward(program, rng, false).path().key());
    if (it == ids.end())
      out.other += inc;
    else
      out.prob[it->second] += inc;
  }
  return out;
}

/// Result of local inference on one SLP.
struct SlpEstimate {
  std::size_t slp_id = 0;
  AddressPath path;
  WeightedSamples samples;  // normalized within the SLP
  double log_Z = kNegInf;
  double log_Z_se = kInf;
  double acceptance_rate = 0.0;
  double ess = 0.0;
  bool failed = false;
  std::string failure;
  std::vector<std::string> diagnostics;
};

/// Local inference for one SLP: condition, run MH, then estimate log Z by
/// importance sampling with the configured proposal.
inline SlpEstimate run_slp(const Program& program, const AddressPath& path, std::size_t slp_id,
                           const BudgetConfig& cfg) {
  SlpEstimate est;
  est.slp_id = slp_id;
  est.path = path;
  const std::uint64_t slp_seed = derive_seed(cfg.seed, slp_id);
  try {
    const Program local = condition_on_path(program, path);
    MhResult mh = mh_within_slp(local, cfg, derive_seed(slp_seed, "mh", 0));
    est.acceptance_rate = mh.acceptance_rate;
    est.diagnostics = std::move(mh.warnings);
    Proposal proposal = PriorProposal{};
    if (cfg.proposal == IsProposalKind::MomentMatched) {
      if (auto g = fit_moment_matched(mh.samples, cfg.proposal_inflation))
        proposal = std::move(*g);
      else
        est.diagnostics.push_back("moment-matched proposal unavailable; using prior");
    }
    const IsEstimate is =
        estimate_log_Z_is(local, proposal, cfg.is_proposals_per_slp, derive_seed(slp_seed, "is", 0));
    est.log_Z = is.log_Z;
    est.log_Z_se = is.log_Z_se;
    est.ess = is.ess;
    if (is.degenerate) est.diagnostics.push_back("DegenerateWeights: ess " + std::to_string(is.ess));
    est.samples = std::move(mh.samples);
  } catch (const Error& e) {
    est.failed = true;
    est.failure = e.what();
    est.log_Z = kNegInf;
    est.samples = {};
  }
  return est;
}

/// Runs `task(i)` for i in [0, n) on up to `threads` workers. Each task
/// writes only its own slot, so results are independent of scheduling.
template <class Task>
void parallel_for(std::size_t n, unsigned threads, Task&& task) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) task(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct DccResult {
  std::vector<SlpEstimate> slps;
  bool truncated = false;
  std::vector<std::string> warnings;
};

/// Divide-conquer-combine: enumerate SLPs, then run identical-budget local
/// inference on each with an RNG stream derived from (cfg.seed, slp id).
inline DccResult dcc_run(const Program& program, std::size_t max_slps, const BudgetConfig& cfg) {
  cfg.validate();
  const Enumeration en = enumerate_slps(program, max_slps, cfg.seed);
  DccResult out;
  out.truncated = en.truncated;
  if (en.truncated)
    out.warnings.push_back("enumeration truncated at " + std::to_string(max_slps) + " SLPs");
  out.slps.resize(en.paths.size());
  parallel_for(en.paths.size(), cfg.threads,
               [&](std::size_t k) { out.slps[k] = run_slp(program, en.paths[k], k, cfg); });
  return out;
}

}  // namespace slpstack
