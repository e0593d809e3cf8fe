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

// Participant selection: per-sample Bernoulli selection at rate K / N_est,
// uniform and size-weighted client sampling, and a fixed-rate per-sample
// selection.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fedsampling/error.hpp"
#include "fedsampling/rng.hpp"

namespace fedsampling {

enum class Strategy { kFedSampling, kUniformClient, kWeightedClient, kFixedRatio, kCentralized };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kFedSampling: return "fedsampling";
    case Strategy::kUniformClient: return "uniform_client";
    case Strategy::kWeightedClient: return "weighted_client";
    case Strategy::kFixedRatio: return "fixed_ratio";
    case Strategy::kCentralized: return "centralized";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "fedsampling") return Strategy::kFedSampling;
  if (s == "uniform_client") return Strategy::kUniformClient;
  if (s == "weighted_client") return Strategy::kWeightedClient;
  if (s == "fixed_ratio") return Strategy::kFixedRatio;
  if (s == "centralized") return Strategy::kCentralized;
  throw InvalidArgument("unknown strategy: " + s);
}

struct ClientSamplingParams {
  std::size_t clients_per_round = 10;  // m
  std::size_t local_epochs = 1;
  std::size_t batch_size = 0;  // 0 = whole local dataset
  double server_lr = 1.0;

  bool operator==(const ClientSamplingParams&) const = default;
};

struct SamplingPlan {
  Strategy strategy = Strategy::kFedSampling;
  std::size_t K = 2048;        // fedsampling, centralized
  ClientSamplingParams client;  // uniform_client, weighted_client
  double ratio = 0.01;          // fixed_ratio

  void validate(std::size_t num_clients) const {
    switch (strategy) {
      case Strategy::kFedSampling:
      case Strategy::kCentralized:
        detail::require(K >= 1, "plan: K must be >= 1");
        break;
      case Strategy::kUniformClient:
      case Strategy::kWeightedClient:
        detail::require(client.clients_per_round >= 1, "plan: clients_per_round must be >= 1");
        detail::require(client.clients_per_round <= num_clients, "plan: clients_per_round exceeds client count");
        detail::require(client.local_epochs >= 1, "plan: local_epochs must be >= 1");
        detail::require(client.server_lr > 0.0, "plan: server_lr must be > 0");
        break;
      case Strategy::kFixedRatio:
        detail::require(ratio > 0.0 && ratio <= 1.0, "plan: ratio must be in (0, 1]");
        break;
    }
  }
};

// Per-sample inclusion probability broadcast to clients. The estimate is
// floored at 1 and the ratio clamped to [0, 1].
inline double fedsampling_probability(std::size_t K, double n_est) {
  detail::require(K >= 1, "fedsampling_probability: K must be >= 1");
  const double p = static_cast<double>(K) / std::max(n_est, 1.0);
  return std::clamp(p, 0.0, 1.0);
}

// Independent Bernoulli(p) per local index; one draw per index in order.
inline std::vector<std::size_t> bernoulli_select(std::size_t client_size, double p, RandomStream& stream) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < client_size; ++i)
    if (stream.bernoulli(p)) out.push_back(i);
  return out;
}

inline std::vector<std::size_t> fedsampling_select(std::size_t client_size, std::size_t K, double n_est,
                                                   RandomStream& stream) {
  return bernoulli_select(client_size, fedsampling_probability(K, n_est), stream);
}

inline std::vector<std::size_t> fixed_ratio_select(std::size_t client_size, double r, RandomStream& stream) {
  detail::require(r > 0.0 && r <= 1.0, "fixed_ratio_select: r must be in (0, 1]");
  return bernoulli_select(client_size, r, stream);
}

// m distinct clients uniformly without replacement (partial Fisher-Yates),
// returned in ascending id order.
inline std::vector<std::size_t> uniform_client_select(std::size_t num_clients, std::size_t m, RandomStream& stream) {
  detail::require(m >= 1, "uniform_client_select: m must be >= 1");
  detail::require(m <= num_clients, "uniform_client_select: m exceeds client count");
  std::vector<std::size_t> ids(num_clients);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    const auto j = static_cast<std::size_t>(
        stream.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(num_clients - 1)));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace detail {

// Fenwick tree over non-negative weights supporting prefix-sum search.
class WeightTree {
 public:
  explicit WeightTree(const std::vector<double>& w) : tree_(w.size() + 1, 0.0), weights_(w) {
    for (std::size_t i = 0; i < w.size(); ++i) add(i, w[i]);
  }

  void remove(std::size_t i) {
    add(i, -weights_[i]);
    weights_[i] = 0.0;
  }

  // Smallest index whose inclusive prefix sum exceeds target.
  std::size_t find(double target) const {
    std::size_t pos = 0;
    std::size_t step = std::bit_floor(tree_.size() - 1);
    for (; step > 0; step >>= 1) {
      if (pos + step < tree_.size() && tree_[pos + step] <= target) {
        pos += step;
        target -= tree_[pos];
      }
    }
    return pos;  // zero-based index
  }

  double weight(std::size_t i) const { return weights_[i]; }

  double total() const {
    double s = 0.0;
    for (std::size_t i = tree_.size() - 1; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  void add(std::size_t i, double v) {
    for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1)) tree_[k] += v;
  }

  std::vector<double> tree_;
  std::vector<double> weights_;
};

}  // namespace detail

// m distinct clients drawn sequentially with probability proportional to size
// among those not yet chosen. Returned in ascending id order.
inline std::vector<std::size_t> weighted_client_select(const std::vector<std::size_t>& sizes, std::size_t m,
                                                       RandomStream& stream) {
  detail::require(m >= 1, "weighted_client_select: m must be >= 1");
  const auto nonzero = static_cast<std::size_t>(std::count_if(sizes.begin(), sizes.end(), [](auto s) { return s > 0; }));
  detail::require(nonzero > 0, "weighted_client_select: all client sizes are zero");
  detail::require(nonzero >= m, "weighted_client_select: fewer than m clients hold data");

  std::vector<double> w(sizes.begin(), sizes.end());
  detail::WeightTree tree(w);
  std::vector<std::size_t> chosen;
  chosen.reserve(m);
  while (chosen.size() < m) {
    const double total = tree.total();
    std::size_t i = tree.find(stream.uniform_unit() * total);
    // Guard against floating drift landing on an exhausted slot.
    if (i >= sizes.size() || tree.weight(i) <= 0.0) {
      i = sizes.size();
      for (std::size_t k = 0; k < sizes.size(); ++k) {
        if (tree.weight(k) > 0.0) {
          i = k;
          break;
        }
      }
    }
    chosen.push_back(i);
    tree.remove(i);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace fedsampling
