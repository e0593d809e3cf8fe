// Copyright 2026 The FedSampling Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Privacy-preserving estimation of the total sample count.
//
// Each client clips its size to n = min(|D|, M - 1) and reports it with
// probability alpha; otherwise it reports an integer drawn uniformly from
// {1, ..., M - 1}. The server inverts the mixture:
//
//   N_est = (R - (1 - alpha) * M * H / 2) / alpha,   R = sum of reports,
//
// which is unbiased for the clipped total. With
// alpha = (e^eps - 1) / (e^eps + M - 2) the report satisfies eps-LDP over
// outputs {1, ..., M - 1}.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "fedsampling/data.hpp"
#include "fedsampling/error.hpp"
#include "fedsampling/rng.hpp"

namespace fedsampling {

inline double alpha_for_budget(double epsilon, std::int64_t M) {
  detail::require(epsilon > 0.0, "alpha_for_budget: epsilon must be > 0");
  detail::require(M >= 2, "alpha_for_budget: M must be >= 2");
  const double e = std::exp(epsilon);
  if (!std::isfinite(e)) return 1.0;
  return std::expm1(epsilon) / (e + static_cast<double>(M - 2));
}

// The e^eps implied by a truth probability: ((M - 2) alpha + 1) / (1 - alpha).
inline double budget_ratio(double alpha, std::int64_t M) {
  return (static_cast<double>(M - 2) * alpha + 1.0) / (1.0 - alpha);
}

struct LdpConfig {
  double epsilon = 3.0;
  std::int64_t M = 300;
  double alpha = 0.0;
  // Report max(n, 1) for truthful responses so a zero-size client is not
  // distinguishable from the fake-response support.
  bool strict_nonzero = false;

  static LdpConfig from_budget(double epsilon, std::int64_t M, bool strict_nonzero = false) {
    return {epsilon, M, alpha_for_budget(epsilon, M), strict_nonzero};
  }

  // Direct truth probability, for the degenerate regimes used in testing.
  // epsilon is set to the implied budget (infinite when alpha = 1).
  static LdpConfig from_alpha(double alpha, std::int64_t M, bool strict_nonzero = false) {
    detail::require(alpha >= 0.0 && alpha <= 1.0, "LdpConfig: alpha must be in [0, 1]");
    detail::require(M >= 2, "LdpConfig: M must be >= 2");
    const double eps = alpha >= 1.0 ? std::numeric_limits<double>::infinity() : std::log(budget_ratio(alpha, M));
    return {eps, M, alpha, strict_nonzero};
  }

  void validate() const {
    detail::require(M >= 2, "ldp: M must be >= 2");
    detail::require(alpha >= 0.0 && alpha <= 1.0, "ldp: alpha must be in [0, 1]");
    detail::require(epsilon > 0.0, "ldp: epsilon must be > 0");
  }
};

inline std::int64_t clip_size(std::int64_t n, std::int64_t M) {
  detail::require(n >= 0, "clip_size: n must be >= 0");
  detail::require(M >= 2, "clip_size: M must be >= 2");
  return std::min(n, M - 1);
}

struct SizeResponse {
  std::int64_t value = 0;
  bool truthful = false;  // simulator bookkeeping only
};

// Draw order per call is fixed: the truth coin, then the fake value, so the
// number of stream draws does not depend on the outcome.
inline SizeResponse randomize_response(std::int64_t n_clipped, const LdpConfig& cfg, RandomStream& stream) {
  detail::require(n_clipped >= 0 && n_clipped <= cfg.M - 1, "randomize_response: n_clipped outside [0, M-1]");
  const bool truthful = stream.bernoulli(cfg.alpha);
  const std::int64_t fake = stream.uniform_int(1, cfg.M - 1);
  if (!truthful) return {fake, false};
  return {cfg.strict_nonzero ? std::max<std::int64_t>(n_clipped, 1) : n_clipped, true};
}

// Raw unbiased estimate; may be <= 0 under heavy randomization. Clamping is
// the sampler's concern.
inline double estimate_total(std::int64_t response_sum, std::size_t num_clients, const LdpConfig& cfg) {
  detail::require(num_clients >= 1, "estimate_total: need at least one client");
  detail::require(cfg.alpha > 0.0, "estimate_total: alpha = 0 leaves the estimator undefined");
  const double offset = (1.0 - cfg.alpha) * static_cast<double>(cfg.M) * static_cast<double>(num_clients) / 2.0;
  return (static_cast<double>(response_sum) - offset) / cfg.alpha;
}

struct LdpRatioCheck {
  double analytic_ratio = 0.0;
  double e_epsilon = 0.0;
  bool satisfies = false;
  // A truthful zero-size report of 0 lies outside the fake support, so
  // output 0 has an unbounded likelihood ratio unless strict_nonzero is set.
  bool zero_output_unbounded = false;
};

// Worst-case likelihood ratio over outputs y in {1..M-1} and input pairs in
// {0..M-1}. For a given y the largest probability is the truthful match
// alpha + (1 - alpha)/(M - 1) and the smallest is a non-match
// (1 - alpha)/(M - 1); a non-matching input always exists.
inline LdpRatioCheck verify_ldp_ratio(const LdpConfig& cfg) {
  detail::require(cfg.M >= 2, "verify_ldp_ratio: M must be >= 2");
  detail::require(cfg.alpha < 1.0, "verify_ldp_ratio: alpha = 1 gives an infinite ratio");
  const double m1 = static_cast<double>(cfg.M - 1);
  const double p_match = cfg.alpha + (1.0 - cfg.alpha) / m1;
  const double p_nonmatch = (1.0 - cfg.alpha) / m1;
  LdpRatioCheck out;
  out.analytic_ratio = p_match / p_nonmatch;
  out.e_epsilon = std::exp(cfg.epsilon);
  out.satisfies = out.analytic_ratio <= out.e_epsilon * (1.0 + 1e-9) + 1e-9;
  out.zero_output_unbounded = !cfg.strict_nonzero && cfg.alpha > 0.0;
  return out;
}

// Client size law for the estimator bench. Sizes are one fixed population per
// H: lognormal weights allocated by largest remainder to total
// round(mean_size * H), or every client at exactly mean_size.
struct SizeLaw {
  enum class Kind { kLognormal, kConstant } kind = Kind::kLognormal;
  double sigma = 1.0;
  double mean_size = 2.0;
};

inline std::vector<std::size_t> draw_sizes(const SizeLaw& law, std::size_t num_clients, RandomStream& stream) {
  detail::require(num_clients >= 1, "draw_sizes: need at least one client");
  detail::require(law.mean_size >= 0.0, "draw_sizes: mean_size must be >= 0");
  if (law.kind == SizeLaw::Kind::kConstant) {
    return std::vector<std::size_t>(num_clients, static_cast<std::size_t>(std::llround(law.mean_size)));
  }
  std::vector<double> logw(num_clients);
  for (auto& lw : logw) lw = law.sigma * stream.standard_normal();
  const double mx = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(num_clients);
  for (std::size_t c = 0; c < num_clients; ++c) w[c] = std::exp(logw[c] - mx);
  const auto total = static_cast<std::size_t>(std::llround(law.mean_size * static_cast<double>(num_clients)));
  return allocate_proportional(total, w);
}

// One estimate per trial for a fixed size population. Client c in trial t uses
// stream (seed, [("trial", t), ("client", c)]) under `base`.
inline std::vector<double> simulate_estimates(const std::vector<std::size_t>& sizes, const LdpConfig& cfg,
                                              std::size_t trials, const StreamKey& base) {
  std::vector<double> out;
  out.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    const StreamKey trial_key = base.child("trial", t);
    std::int64_t sum = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      auto stream = derive(trial_key.child("client", c));
      sum += randomize_response(clip_size(static_cast<std::int64_t>(sizes[c]), cfg.M), cfg, stream).value;
    }
    out.push_back(estimate_total(sum, sizes.size(), cfg));
  }
  return out;
}

struct EstimatorBenchRow {
  std::size_t num_clients = 0;
  std::size_t true_total = 0;     // N
  std::size_t clipped_total = 0;  // sum of min(|D_c|, M - 1)
  std::size_t trials = 0;
  std::size_t nonpositive = 0;  // trials with N_est <= 0, excluded below
  double mean_estimate = 0.0;   // over all trials
  double sd_estimate = 0.0;     // over all trials, n - 1 denominator
  double mse_prob = 0.0;        // E[(K/N_est - K/N)^2] over positive trials
  double mean_scaled_k = 0.0;   // E[N K / N_est] over positive trials
};

inline std::vector<EstimatorBenchRow> bench_estimator_mse(const std::vector<std::size_t>& client_counts,
                                                          const LdpConfig& cfg, const SizeLaw& law, std::size_t K,
                                                          std::size_t trials, std::uint64_t seed) {
  detail::require(trials >= 30, "bench_estimator_mse: need at least 30 trials");
  detail::require(K >= 1, "bench_estimator_mse: K must be >= 1");
  std::vector<EstimatorBenchRow> rows;
  for (std::size_t H : client_counts) {
    auto size_stream = derive(seed, {{"bench_sizes", H}});
    const auto sizes = draw_sizes(law, H, size_stream);
    EstimatorBenchRow row;
    row.num_clients = H;
    row.trials = trials;
    row.true_total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    for (auto s : sizes) row.clipped_total += static_cast<std::size_t>(clip_size(static_cast<std::int64_t>(s), cfg.M));
    detail::require(row.true_total > 0, "bench_estimator_mse: simulated population is empty");
    const auto est = simulate_estimates(sizes, cfg, trials, StreamKey{seed, {{"bench_trials", H}}});

    double sum = 0.0;
    for (double e : est) sum += e;
    row.mean_estimate = sum / static_cast<double>(trials);
    double ss = 0.0;
    for (double e : est) ss += (e - row.mean_estimate) * (e - row.mean_estimate);
    row.sd_estimate = std::sqrt(ss / static_cast<double>(trials - 1));

    const double N = static_cast<double>(row.true_total);
    const double kd = static_cast<double>(K);
    const double p_true = kd / N;
    double se = 0.0, scaled = 0.0;
    std::size_t used = 0;
    for (double e : est) {
      if (e <= 0.0) {
        ++row.nonpositive;
        continue;
      }
      const double diff = kd / e - p_true;
      se += diff * diff;
      scaled += N * kd / e;
      ++used;
    }
    if (used > 0) {
      row.mse_prob = se / static_cast<double>(used);
      row.mean_scaled_k = scaled / static_cast<double>(used);
    } else {
      row.mse_prob = std::numeric_limits<double>::quiet_NaN();
      row.mean_scaled_k = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fedsampling
