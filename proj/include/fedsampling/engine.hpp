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

// Round-based federated training.
//
// Client-side and server-side code are kept apart by the message types they
// exchange: the server only ever sees SizeReport values and UpdateReport
// vectors. Client sizes, selection sets and the truth coin of each report are
// tallied in ClientTally, which feeds the simulator-only fields of RoundLog.
//
// Updates are descent deltas (negative loss gradients), so every strategy
// applies params += lr * aggregate.
//
// Randomness keys, all under the run's master seed:
//   ("init", 0)                                        initial parameters
//   ("round", t) ("client", c) ("purpose", kResponse)  size report
//   ("round", t) ("client", c) ("purpose", kSelect)    local sample selection
//   ("round", t) ("client", c) ("purpose", kLocal)     local SGD shuffling
//   ("round", t) ("server", 0)                         client selection
//   ("round", t) ("central", 0)                        centralized selection

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsampling/data.hpp"
#include "fedsampling/error.hpp"
#include "fedsampling/ldp.hpp"
#include "fedsampling/log.hpp"
#include "fedsampling/model.hpp"
#include "fedsampling/rng.hpp"
#include "fedsampling/sampling.hpp"

namespace fedsampling {

enum Purpose : std::uint64_t { kResponse = 0, kSelect = 1, kLocal = 2 };

struct SizeReport {
  std::int64_t value = 0;
};

struct UpdateReport {
  ParamVector update;
};

struct RoundPlan {
  ParamVector params_snapshot;
  std::size_t K = 0;
  double n_est = 0.0;
};

struct ClientTally {
  std::size_t truthful = 0;
  std::size_t selected = 0;
  std::size_t participants = 0;
  double loss_sum = 0.0;
};

// Pluggable server step. Only the plain additive step is provided.
class ServerOptimizer {
 public:
  virtual ~ServerOptimizer() = default;
  virtual void apply(ParamVector& params, const ParamVector& aggregate, double lr) = 0;
};

class AdditiveStep final : public ServerOptimizer {
 public:
  void apply(ParamVector& params, const ParamVector& aggregate, double lr) override { params.axpy(lr, aggregate); }
};

struct ServerState {
  ParamVector params;
  std::size_t round = 0;
  double eta = 0.05;
  LdpConfig ldp = LdpConfig::from_budget(3.0, 300);
  SamplingPlan plan;
};

struct RoundLog {
  std::size_t round = 0;
  double n_est = 0.0;
  bool estimator_failed = false;  // N_est <= 0, selection saturated
  std::size_t participants = 0;
  std::size_t effective_samples = 0;
  double train_loss = 0.0;  // mean loss over the samples used this round
  // Simulator-side ground truth; never reaches the server code path.
  std::size_t n_true = 0;
  std::size_t responses_truthful = 0;
};

class RoundContext {
 public:
  explicit RoundContext(std::uint64_t seed, std::size_t round) : round_(KeyPrefix(seed).child("round", round)) {}

  RandomStream client(std::size_t c, Purpose purpose) const {
    return round_.child("client", c).child("purpose", purpose).stream();
  }
  RandomStream server() const { return round_.child("server", 0).stream(); }
  RandomStream central() const { return round_.child("central", 0).stream(); }

 private:
  KeyPrefix round_;
};

// Adds scale * (-grad) over the chosen samples into out, in index order.
// Returns summed loss.
inline double add_descent_delta(const ParamVector& params, const std::vector<Sample>& samples,
                                const std::vector<std::size_t>& indices, double scale, ParamVector& out) {
  return accumulate_gradients(params, samples, indices, -scale, out);
}

inline ParamVector aggregate_updates(const std::vector<UpdateReport>& reports, std::span<const std::size_t> order,
                                     const ModelSpec& shape) {
  ParamVector sum = ParamVector::zeros(shape);
  for (std::size_t i : order) sum.axpy(1.0, reports[i].update);
  return sum;
}

inline ParamVector aggregate_updates(const std::vector<UpdateReport>& reports, const ModelSpec& shape) {
  std::vector<std::size_t> order(reports.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return aggregate_updates(reports, order, shape);
}

namespace client {

inline SizeReport respond_size(const ClientDataset& data, const LdpConfig& ldp, RandomStream& stream,
                               ClientTally& tally) {
  const auto r = randomize_response(clip_size(static_cast<std::int64_t>(data.size()), ldp.M), ldp, stream);
  tally.truthful += r.truthful;
  return {r.value};
}

// G_c = -(1/K) * sum of per-sample gradients over the locally selected set.
// An empty selection yields the zero update.
inline UpdateReport fedsampling_update(const RoundPlan& plan, const ClientDataset& data, RandomStream& stream,
                                       ClientTally& tally) {
  const auto chosen = fedsampling_select(data.size(), plan.K, plan.n_est, stream);
  UpdateReport rep{ParamVector::zeros(plan.params_snapshot.shape)};
  tally.loss_sum += add_descent_delta(plan.params_snapshot, data.samples, chosen, 1.0 / static_cast<double>(plan.K),
                                      rep.update);
  tally.selected += chosen.size();
  ++tally.participants;
  return rep;
}

// G_c = -(1/|S_c|) * sum of gradients; no report when nothing was selected.
inline std::optional<UpdateReport> fixed_ratio_update(const ParamVector& params, const ClientDataset& data, double r,
                                                      RandomStream& stream, ClientTally& tally) {
  const auto chosen = fixed_ratio_select(data.size(), r, stream);
  if (chosen.empty()) return std::nullopt;
  UpdateReport rep{ParamVector::zeros(params.shape)};
  tally.loss_sum += add_descent_delta(params, data.samples, chosen, 1.0 / static_cast<double>(chosen.size()), rep.update);
  tally.selected += chosen.size();
  ++tally.participants;
  return rep;
}

// Local minibatch SGD from the broadcast params; returns final - broadcast.
inline UpdateReport local_sgd_update(const ParamVector& params, const ClientDataset& data, double lr,
                                     const ClientSamplingParams& cs, RandomStream& stream, ClientTally& tally) {
  ParamVector local = params;
  ++tally.participants;
  if (data.size() > 0) {
    const std::size_t batch = cs.batch_size == 0 ? data.size() : std::min(cs.batch_size, data.size());
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    ParamVector grad = ParamVector::zeros(params.shape);
    std::vector<std::size_t> idx;
    for (std::size_t e = 0; e < cs.local_epochs; ++e) {
      stream.shuffle(order);
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t end = std::min(order.size(), start + batch);
        idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
        std::fill(grad.values.begin(), grad.values.end(), 0.0);
        const double loss = add_descent_delta(local, data.samples, idx, 1.0 / static_cast<double>(idx.size()), grad);
        local.axpy(lr, grad);
        if (e == 0) tally.loss_sum += loss;
      }
    }
    tally.selected += data.size();
  }
  UpdateReport rep{std::move(local)};
  rep.update.axpy(-1.0, params);
  return rep;
}

}  // namespace client

namespace server {

inline double estimate_from_reports(const std::vector<SizeReport>& reports, const LdpConfig& ldp) {
  std::int64_t sum = 0;
  for (const auto& r : reports) sum += r.value;
  return estimate_total(sum, reports.size(), ldp);
}

inline void check_finite(const ParamVector& v, const char* what, std::size_t round) {
  if (!v.all_finite())
    throw NumericalError(std::string(what) + ": non-finite aggregate update in round " + std::to_string(round));
}

}  // namespace server

namespace detail {

inline std::size_t total_size(const std::vector<ClientDataset>& clients) {
  std::size_t n = 0;
  for (const auto& c : clients) n += c.size();
  return n;
}

inline AdditiveStep& default_optimizer() {
  static AdditiveStep step;
  return step;
}

inline void finish_log(RoundLog& log, const ClientTally& tally) {
  log.participants = tally.participants;
  log.effective_samples = tally.selected;
  log.responses_truthful = tally.truthful;
  log.train_loss = tally.selected ? tally.loss_sum / static_cast<double>(tally.selected) : 0.0;
}

}  // namespace detail

// One FedSampling round: size query, estimate, broadcast (K, N_est), local
// Bernoulli selection with normalised gradients, additive aggregation in
// client order.
inline RoundLog run_round_fedsampling(ServerState& state, const std::vector<ClientDataset>& clients,
                                      std::uint64_t seed, ServerOptimizer& opt = detail::default_optimizer()) {
  detail::require(!clients.empty(), "run_round_fedsampling: no clients");
  detail::require(state.plan.K >= 1, "run_round_fedsampling: K must be >= 1");
  const std::size_t t = state.round + 1;
  const RoundContext ctx(seed, t);
  ClientTally tally;

  std::vector<SizeReport> sizes;
  sizes.reserve(clients.size());
  for (std::size_t c = 0; c < clients.size(); ++c) {
    auto stream = ctx.client(c, kResponse);
    sizes.push_back(client::respond_size(clients[c], state.ldp, stream, tally));
  }
  const double n_est = server::estimate_from_reports(sizes, state.ldp);

  RoundLog log;
  log.round = t;
  log.n_est = n_est;
  log.n_true = detail::total_size(clients);
  if (n_est <= 0.0) {
    log.estimator_failed = true;
    log_warn("round " + std::to_string(t) + ": non-positive size estimate " + std::to_string(n_est) +
             ", selection saturates at p = 1");
  }

  const RoundPlan plan{state.params, state.plan.K, n_est};
  std::vector<UpdateReport> updates;
  updates.reserve(clients.size());
  for (std::size_t c = 0; c < clients.size(); ++c) {
    auto stream = ctx.client(c, kSelect);
    updates.push_back(client::fedsampling_update(plan, clients[c], stream, tally));
  }

  const ParamVector agg = aggregate_updates(updates, state.params.shape);
  server::check_finite(agg, "run_round_fedsampling", t);
  opt.apply(state.params, agg, state.eta);
  server::check_finite(state.params, "run_round_fedsampling", t);
  state.round = t;
  detail::finish_log(log, tally);
  return log;
}

enum class ClientSamplingMode { kUniform, kWeighted };

// FedAvg-style round: m clients (uniform or size-weighted), local SGD at
// rate eta, server applies server_lr * mean(delta).
inline RoundLog run_round_client_sampling(ServerState& state, const std::vector<ClientDataset>& clients,
                                          ClientSamplingMode mode, const ClientSamplingParams& cs, std::uint64_t seed,
                                          ServerOptimizer& opt = detail::default_optimizer()) {
  detail::require(!clients.empty(), "run_round_client_sampling: no clients");
  detail::require(cs.clients_per_round >= 1 && cs.clients_per_round <= clients.size(),
                  "run_round_client_sampling: clients_per_round must be in [1, H]");
  const std::size_t t = state.round + 1;
  const RoundContext ctx(seed, t);
  auto server_stream = ctx.server();

  std::vector<std::size_t> chosen;
  if (mode == ClientSamplingMode::kUniform) {
    chosen = uniform_client_select(clients.size(), cs.clients_per_round, server_stream);
  } else {
    // Size-weighted selection is the baseline that discloses sizes.
    std::vector<std::size_t> sizes(clients.size());
    for (std::size_t c = 0; c < clients.size(); ++c) sizes[c] = clients[c].size();
    chosen = weighted_client_select(sizes, cs.clients_per_round, server_stream);
  }

  ClientTally tally;
  std::vector<UpdateReport> updates;
  updates.reserve(chosen.size());
  for (std::size_t c : chosen) {
    auto stream = ctx.client(c, kLocal);
    updates.push_back(client::local_sgd_update(state.params, clients[c], state.eta, cs, stream, tally));
  }
  ParamVector agg = aggregate_updates(updates, state.params.shape);
  for (auto& v : agg.values) v /= static_cast<double>(chosen.size());
  server::check_finite(agg, "run_round_client_sampling", t);
  opt.apply(state.params, agg, cs.server_lr);
  server::check_finite(state.params, "run_round_client_sampling", t);
  state.round = t;

  RoundLog log;
  log.round = t;
  log.n_true = detail::total_size(clients);
  detail::finish_log(log, tally);
  return log;
}

// Naive fixed-rate round: per-client averaged gradients, unweighted mean over
// the clients that selected anything.
inline RoundLog run_round_fixed_ratio(ServerState& state, const std::vector<ClientDataset>& clients, double r,
                                      std::uint64_t seed, ServerOptimizer& opt = detail::default_optimizer()) {
  detail::require(r > 0.0 && r <= 1.0, "run_round_fixed_ratio: r must be in (0, 1]");
  const std::size_t t = state.round + 1;
  const RoundContext ctx(seed, t);
  ClientTally tally;
  std::vector<UpdateReport> updates;
  for (std::size_t c = 0; c < clients.size(); ++c) {
    auto stream = ctx.client(c, kSelect);
    if (auto rep = client::fixed_ratio_update(state.params, clients[c], r, stream, tally)) updates.push_back(std::move(*rep));
  }
  RoundLog log;
  log.round = t;
  log.n_true = detail::total_size(clients);
  if (updates.empty()) {
    log_info("round " + std::to_string(t) + ": no participating clients, parameters unchanged");
  } else {
    ParamVector agg = aggregate_updates(updates, state.params.shape);
    for (auto& v : agg.values) v /= static_cast<double>(updates.size());
    server::check_finite(agg, "run_round_fixed_ratio", t);
    opt.apply(state.params, agg, state.eta);
    server::check_finite(state.params, "run_round_fixed_ratio", t);
  }
  state.round = t;
  detail::finish_log(log, tally);
  return log;
}

// Centralized step: each pooled sample kept with probability p = K / N,
// params += eta * (-(1/K) * sum of gradients).
inline RoundLog run_round_centralized(ServerState& state, const std::vector<Sample>& pooled, std::uint64_t seed) {
  detail::require(state.plan.K >= 1 && state.plan.K <= pooled.size(), "run_round_centralized: need 1 <= K <= n");
  const std::size_t t = state.round + 1;
  const RoundContext ctx(seed, t);
  auto stream = ctx.central();
  const double p = static_cast<double>(state.plan.K) / static_cast<double>(pooled.size());
  const auto chosen = bernoulli_select(pooled.size(), p, stream);
  ParamVector delta = ParamVector::zeros(state.params.shape);
  const double loss = add_descent_delta(state.params, pooled, chosen, 1.0 / static_cast<double>(state.plan.K), delta);
  server::check_finite(delta, "run_round_centralized", t);
  state.params.axpy(state.eta, delta);
  state.round = t;
  RoundLog log;
  log.round = t;
  log.n_true = pooled.size();
  log.n_est = static_cast<double>(pooled.size());
  log.participants = 1;
  log.effective_samples = chosen.size();
  log.train_loss = chosen.empty() ? 0.0 : loss / static_cast<double>(chosen.size());
  return log;
}

struct MetricsRecord {
  std::size_t round = 0;
  double train_loss = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double eval_loss = 0.0;
  std::size_t samples_used = 0;
  double n_est = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

struct TrainConfig {
  ModelSpec model;
  SamplingPlan plan;
  LdpConfig ldp = LdpConfig::from_budget(3.0, 300);
  double eta = 0.05;
  std::size_t rounds = 0;
  std::size_t eval_every = 1;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<MetricsRecord> history;
  std::vector<RoundLog> rounds;
  ServerState final_state;
};

inline std::vector<Sample> pool_clients(const std::vector<ClientDataset>& clients) {
  std::vector<Sample> pooled;
  pooled.reserve(detail::total_size(clients));
  for (const auto& c : clients) pooled.insert(pooled.end(), c.samples.begin(), c.samples.end());
  return pooled;
}

inline ParamVector initial_params(const ModelSpec& spec, std::uint64_t seed) {
  auto stream = derive(seed, {{"init", 0}});
  return init_params(spec, stream);
}

// Runs cfg.rounds rounds of cfg.plan.strategy, evaluating on eval_set every
// eval_every rounds and after the last round.
inline TrainResult train(const TrainConfig& cfg, const std::vector<ClientDataset>& clients, const Dataset& eval_set,
                         ServerOptimizer& opt = detail::default_optimizer()) {
  cfg.model.validate();
  cfg.ldp.validate();
  cfg.plan.validate(clients.size());
  detail::require(cfg.eta > 0.0, "train: eta must be > 0");
  detail::require(cfg.eval_every >= 1, "train: eval_every must be >= 1");
  detail::require(!clients.empty(), "train: no clients");
  detail::require(!eval_set.empty(), "train: evaluation set is empty");

  TrainResult res;
  ServerState& st = res.final_state;
  st.params = initial_params(cfg.model, cfg.seed);
  st.eta = cfg.eta;
  st.ldp = cfg.ldp;
  st.plan = cfg.plan;

  std::vector<Sample> pooled;
  if (cfg.plan.strategy == Strategy::kCentralized) pooled = pool_clients(clients);

  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    RoundLog log;
    switch (cfg.plan.strategy) {
      case Strategy::kFedSampling:
        log = run_round_fedsampling(st, clients, cfg.seed, opt);
        break;
      case Strategy::kUniformClient:
        log = run_round_client_sampling(st, clients, ClientSamplingMode::kUniform, cfg.plan.client, cfg.seed, opt);
        break;
      case Strategy::kWeightedClient:
        log = run_round_client_sampling(st, clients, ClientSamplingMode::kWeighted, cfg.plan.client, cfg.seed, opt);
        break;
      case Strategy::kFixedRatio:
        log = run_round_fixed_ratio(st, clients, cfg.plan.ratio, cfg.seed, opt);
        break;
      case Strategy::kCentralized:
        log = run_round_centralized(st, pooled, cfg.seed);
        break;
    }
    res.rounds.push_back(log);
    if (t % cfg.eval_every == 0 || t == cfg.rounds) {
      const auto m = evaluate(st.params, eval_set);
      res.history.push_back({t, log.train_loss, m.accuracy, m.macro_f1, m.mean_loss, log.effective_samples, log.n_est});
    }
  }
  return res;
}

// Centralized baseline on a pooled dataset, evaluated on eval_set (or on the
// training data when eval_set is empty).
inline std::vector<MetricsRecord> run_centralized(const Dataset& dataset, const ModelSpec& spec, double eta,
                                                  std::size_t K, std::size_t rounds, std::uint64_t seed,
                                                  const Dataset& eval_set = {}, std::size_t eval_every = 1) {
  detail::require(K >= 1 && K <= dataset.size(), "run_centralized: need 1 <= K <= n");
  TrainConfig cfg;
  cfg.model = spec;
  cfg.plan.strategy = Strategy::kCentralized;
  cfg.plan.K = K;
  cfg.eta = eta;
  cfg.rounds = rounds;
  cfg.eval_every = eval_every;
  cfg.seed = seed;
  std::vector<ClientDataset> one{{0, dataset.samples}};
  return train(cfg, one, eval_set.empty() ? dataset : eval_set).history;
}

inline void save_state(const std::string& path, const ServerState& state) {
  write_checkpoint(path, state.params, state.round);
}

// Restores params and round; eta, ldp and plan come from the run config.
inline void load_state(const std::string& path, ServerState& state) {
  auto ck = read_checkpoint(path, state.params.shape.init_scale);
  state.params = std::move(ck.params);
  state.round = static_cast<std::size_t>(ck.round);
}

}  // namespace fedsampling
