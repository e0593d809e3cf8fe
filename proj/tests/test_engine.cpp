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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "fedsampling/engine.hpp"
#include "test_util.hpp"

namespace fs = fedsampling;

namespace {

const fs::ModelSpec kSpec{fs::ModelKind::kLinear, 3, 2, 0, 1.0};

std::vector<fs::Sample> random_samples(std::size_t n, std::uint64_t seed, std::size_t dim = 3, std::size_t L = 2) {
  auto st = fs::derive(seed, {{"samples", 0}});
  fs::Dataset ds = fs::make_synthetic_classification(n, dim, L, 2.0, st);
  return ds.samples;
}

std::vector<fs::ClientDataset> split(const std::vector<fs::Sample>& all, const std::vector<std::size_t>& sizes) {
  std::vector<fs::ClientDataset> out;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    fs::ClientDataset cd{c, {}};
    for (std::size_t k = 0; k < sizes[c]; ++k) cd.samples.push_back(all[pos++]);
    out.push_back(std::move(cd));
  }
  return out;
}

fs::ServerState make_state(const fs::ModelSpec& spec, fs::Strategy strategy, std::size_t K, double alpha = 1.0,
                           std::int64_t M = 300) {
  fs::ServerState st;
  st.params = fs::initial_params(spec, 99);
  st.eta = 0.05;
  st.ldp = alpha >= 1.0 ? fs::LdpConfig::from_alpha(1.0, M) : fs::LdpConfig::from_alpha(alpha, M);
  st.plan.strategy = strategy;
  st.plan.K = K;
  return st;
}

// -(1/scale) * sum of gradients over samples, the centralized descent delta.
fs::ParamVector centralized_delta(const fs::ParamVector& params, const std::vector<fs::Sample>& samples, double scale) {
  auto d = fs::ParamVector::zeros(params.shape);
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  fs::add_descent_delta(params, samples, idx, 1.0 / scale, d);
  return d;
}

double max_diff(const fs::ParamVector& a, const fs::ParamVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace

TEST(ServerView, ReportsCarryNoPrivateFields) {
  // The server-side functions see only these payloads.
  static_assert(sizeof(fs::SizeReport) == sizeof(std::int64_t));
  static_assert(std::is_same_v<decltype(fs::SizeReport::value), std::int64_t>);
  static_assert(std::is_same_v<decltype(fs::UpdateReport::update), fs::ParamVector>);
  SUCCEED();
}

TEST(FedSamplingRound, CollapsesToCentralizedStep) {
  const auto samples = random_samples(37, 1);
  const auto clients = split(samples, {37});
  auto st = make_state(kSpec, fs::Strategy::kFedSampling, 37);
  const auto before = st.params;
  const auto log = fs::run_round_fedsampling(st, clients, 5);
  EXPECT_EQ(log.n_est, 37.0);
  EXPECT_EQ(log.effective_samples, 37u);
  auto want = before;
  want.axpy(st.eta, centralized_delta(before, samples, 37.0));
  EXPECT_LE(max_diff(st.params, want), 1e-12);

  // The centralized round with K = N selects everything too.
  auto cst = make_state(kSpec, fs::Strategy::kCentralized, 37);
  fs::run_round_centralized(cst, samples, 5);
  EXPECT_LE(max_diff(cst.params, st.params), 1e-12);
}

TEST(FedSamplingRound, TwoClientsMatchBatchGradient) {
  const auto samples = random_samples(2, 2);
  const auto clients = split(samples, {1, 1});
  auto st = make_state(kSpec, fs::Strategy::kFedSampling, 2);
  const fs::RoundPlan plan{st.params, 2, 2.0};
  std::vector<fs::UpdateReport> reports;
  fs::ClientTally tally;
  for (std::size_t c = 0; c < 2; ++c) {
    auto s = fs::derive(1, {{"c", c}});
    reports.push_back(fs::client::fedsampling_update(plan, clients[c], s, tally));
  }
  const auto agg = fs::aggregate_updates(reports, kSpec);
  EXPECT_LE(max_diff(agg, centralized_delta(st.params, samples, 2.0)), 1e-12);
  EXPECT_EQ(tally.selected, 2u);
}

TEST(FedSamplingRound, EmptySelectionIsIdentity) {
  const auto samples = random_samples(40, 3);
  const auto clients = split(samples, {10, 10, 20});
  auto st = make_state(kSpec, fs::Strategy::kFedSampling, 1);
  const fs::RoundPlan plan{st.params, 1, 1e300};
  std::vector<fs::UpdateReport> reports;
  fs::ClientTally tally;
  for (std::size_t c = 0; c < clients.size(); ++c) {
    auto s = fs::derive(1, {{"c", c}});
    reports.push_back(fs::client::fedsampling_update(plan, clients[c], s, tally));
  }
  EXPECT_EQ(tally.selected, 0u);
  EXPECT_EQ(tally.participants, 3u);
  auto after = st.params;
  fs::AdditiveStep().apply(after, fs::aggregate_updates(reports, kSpec), st.eta);
  EXPECT_EQ(after, st.params);

  // Every client empty: estimate is 0, flagged, params unchanged.
  std::vector<fs::ClientDataset> empty(4);
  auto st2 = make_state(kSpec, fs::Strategy::kFedSampling, 8);
  const auto before = st2.params;
  const auto log = fs::run_round_fedsampling(st2, empty, 1);
  EXPECT_TRUE(log.estimator_failed);
  EXPECT_EQ(st2.params, before);
  EXPECT_EQ(st2.round, 1u);
}

TEST(FedSamplingRound, AccurateEstimateAveragesK) {
  const auto samples = random_samples(3000, 4);
  std::vector<std::size_t> sizes(30);
  for (std::size_t c = 0; c < 30; ++c) sizes[c] = 10 + 5 * c;  // 10..155, total 2475
  auto clients = split(samples, sizes);
  auto st = make_state(kSpec, fs::Strategy::kFedSampling, 200);
  std::vector<double> eff;
  for (int t = 0; t < 300; ++t) {
    const auto log = fs::run_round_fedsampling(st, clients, 7);
    EXPECT_EQ(log.n_est, 2475.0);
    EXPECT_EQ(log.n_true, 2475u);
    EXPECT_EQ(log.responses_truthful, 30u);
    eff.push_back(static_cast<double>(log.effective_samples));
  }
  const auto m = fstest::mean_se(eff);
  EXPECT_LE(std::abs(m.mean - 200.0), 3.0 * m.se);
  EXPECT_EQ(st.round, 300u);
}

TEST(FedSamplingRound, NoisyEstimateStillFiniteAndMonotoneRound) {
  const auto samples = random_samples(2000, 5);
  std::vector<std::size_t> sizes(1000, 2);
  auto clients = split(samples, sizes);
  auto st = make_state(kSpec, fs::Strategy::kFedSampling, 256, fs::alpha_for_budget(3.0, 300));
  for (std::size_t t = 1; t <= 20; ++t) {
    fs::run_round_fedsampling(st, clients, 8);
    EXPECT_EQ(st.round, t);
    EXPECT_TRUE(st.params.all_finite());
  }
}

TEST(FedSamplingRound, NonFiniteUpdateAborts) {
  const auto samples = random_samples(10, 6);
  auto clients = split(samples, {10});
  auto st = make_state(kSpec, fs::Strategy::kFedSampling, 10);
  std::fill(st.params.values.begin(), st.params.values.end(), 1e308);
  EXPECT_THROW(fs::run_round_fedsampling(st, clients, 1), fs::NumericalError);
  auto bad = fs::ParamVector::zeros(kSpec);
  bad.values[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(fs::server::check_finite(bad, "test", 1), fs::NumericalError);
}

TEST(FedSamplingRound, RejectsBadInputs) {
  auto st = make_state(kSpec, fs::Strategy::kFedSampling, 0);
  std::vector<fs::ClientDataset> clients(2);
  EXPECT_THROW(fs::run_round_fedsampling(st, clients, 1), fs::InvalidArgument);
  st.plan.K = 1;
  EXPECT_THROW(fs::run_round_fedsampling(st, {}, 1), fs::InvalidArgument);
}

TEST(Aggregation, OrderIndependentWithinRounding) {
  std::vector<fs::UpdateReport> reps;
  auto st = fs::derive(3, {{"agg", 0}});
  for (int i = 0; i < 500; ++i) {
    auto p = fs::ParamVector::zeros(kSpec);
    for (auto& v : p.values) v = st.standard_normal() * std::pow(10.0, st.uniform_int(-3, 3));
    reps.push_back({p});
  }
  std::vector<std::size_t> order(reps.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto fwd = fs::aggregate_updates(reps, order, kSpec);
  std::reverse(order.begin(), order.end());
  const auto rev = fs::aggregate_updates(reps, order, kSpec);
  EXPECT_LT(max_diff(fwd, rev), 1e-9);
  st.shuffle(order);
  EXPECT_LT(max_diff(fwd, fs::aggregate_updates(reps, order, kSpec)), 1e-9);
}

TEST(ClientSamplingRound, SingleClientIsLocalSgd) {
  const auto samples = random_samples(20, 7);
  auto clients = split(samples, {20});
  auto st = make_state(kSpec, fs::Strategy::kUniformClient, 1);
  fs::ClientSamplingParams cs{1, 3, 5, 1.0};
  const auto before = st.params;
  fs::run_round_client_sampling(st, clients, fs::ClientSamplingMode::kUniform, cs, 11);

  // Replay the same shuffles with the same stream.
  auto stream = fs::RoundContext(11, 1).client(0, fs::kLocal);
  auto local = before;
  std::vector<std::size_t> order(20);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int e = 0; e < 3; ++e) {
    stream.shuffle(order);
    for (std::size_t b = 0; b < 20; b += 5) {
      auto g = fs::ParamVector::zeros(kSpec);
      std::vector<std::size_t> idx(order.begin() + b, order.begin() + b + 5);
      for (auto i : idx) g.axpy(1.0, fs::loss_and_grad(local, samples[i]).grad);
      local.axpy(-st.eta / 5.0, g);
    }
  }
  EXPECT_LE(max_diff(st.params, local), 1e-12);
}

TEST(ClientSamplingRound, FullBatchAllClientsMatchesCentralized) {
  const auto samples = random_samples(60, 8);
  auto clients = split(samples, {15, 15, 15, 15});
  auto st = make_state(kSpec, fs::Strategy::kUniformClient, 1);
  fs::ClientSamplingParams cs{4, 1, 0, 1.0};
  const auto before = st.params;
  fs::run_round_client_sampling(st, clients, fs::ClientSamplingMode::kUniform, cs, 3);
  auto want = before;
  want.axpy(st.eta, centralized_delta(before, samples, 60.0));
  EXPECT_LE(max_diff(st.params, want), 1e-10);

  // The weighted mode with every client chosen is the same step.
  auto st2 = make_state(kSpec, fs::Strategy::kWeightedClient, 1);
  fs::run_round_client_sampling(st2, clients, fs::ClientSamplingMode::kWeighted, cs, 3);
  EXPECT_LE(max_diff(st2.params, want), 1e-10);
}

TEST(ClientSamplingRound, SelectionFollowsSampler) {
  const auto samples = random_samples(4, 9);
  auto clients = split(samples, {2, 1, 1});
  fs::ClientSamplingParams cs{1, 1, 0, 1.0};
  const int rounds = 20000;
  std::vector<double> picks(3, 0.0);
  auto st = make_state(kSpec, fs::Strategy::kWeightedClient, 1);
  for (int t = 0; t < rounds; ++t) {
    const auto log = fs::run_round_client_sampling(st, clients, fs::ClientSamplingMode::kWeighted, cs, 4);
    // Client 0 is the only one holding two samples.
    picks[log.effective_samples == 2 ? 0 : 1] += 1.0;
  }
  EXPECT_LE(std::abs(picks[0] / rounds - 0.5), 3.0 * std::sqrt(0.25 / rounds));
}

TEST(ClientSamplingRound, RejectsTooManyClients) {
  std::vector<fs::ClientDataset> clients(3);
  auto st = make_state(kSpec, fs::Strategy::kUniformClient, 1);
  EXPECT_THROW(fs::run_round_client_sampling(st, clients, fs::ClientSamplingMode::kUniform, {4, 1, 0, 1.0}, 1),
               fs::InvalidArgument);
}

TEST(FixedRatioRound, EqualSizesMatchFedSamplingAfterRescale) {
  const auto samples = random_samples(40, 10);
  auto clients = split(samples, {10, 10, 10, 10});
  auto fr = make_state(kSpec, fs::Strategy::kFixedRatio, 1);
  const auto before = fr.params;
  fs::run_round_fixed_ratio(fr, clients, 1.0, 2);
  auto fsm = make_state(kSpec, fs::Strategy::kFedSampling, 40);  // p = 1
  fs::run_round_fedsampling(fsm, clients, 2);
  // Fixed-ratio step: -(eta / N) sum g. FedSampling: -(eta / K) sum g with K = N.
  EXPECT_LE(max_diff(fr.params, fsm.params), 1e-12);

  // With K = 20 and N_est = 20 every sample is still selected and the
  // FedSampling delta is N / K times the fixed-ratio one.
  const fs::RoundPlan plan{before, 20, 20.0};
  std::vector<fs::UpdateReport> reps;
  fs::ClientTally tally;
  for (std::size_t c = 0; c < 4; ++c) {
    auto s = fs::derive(1, {{"c", c}});
    reps.push_back(fs::client::fedsampling_update(plan, clients[c], s, tally));
  }
  auto scaled = fs::aggregate_updates(reps, kSpec);
  for (auto& v : scaled.values) v *= 20.0 / 40.0;
  auto fr_delta = fr.params;
  fr_delta.axpy(-1.0, before);
  for (auto& v : fr_delta.values) v /= fr.eta;
  EXPECT_LE(max_diff(scaled, fr_delta), 1e-12);
}

TEST(FixedRatioRound, BiasedOnUnevenClients) {
  const auto samples = random_samples(4, 11);
  auto clients = split(samples, {2, 1, 1});
  auto fr = make_state(kSpec, fs::Strategy::kFixedRatio, 1);
  const auto before = fr.params;
  fs::run_round_fixed_ratio(fr, clients, 1.0, 1);
  auto fsm = make_state(kSpec, fs::Strategy::kFedSampling, 4);
  fs::run_round_fedsampling(fsm, clients, 1);
  auto want = before;
  want.axpy(fr.eta, centralized_delta(before, samples, 4.0));
  EXPECT_LE(max_diff(fsm.params, want), 1e-12);
  EXPECT_GT(max_diff(fr.params, want), 1e-6);

  // Effective per-sample weights {1/2, 1/2, 1, 1} / 3.
  auto manual = fs::ParamVector::zeros(kSpec);
  const double w[4] = {1.0 / 6, 1.0 / 6, 1.0 / 3, 1.0 / 3};
  for (int i = 0; i < 4; ++i) manual.axpy(-w[i], fs::loss_and_grad(before, samples[i]).grad);
  auto expect = before;
  expect.axpy(fr.eta, manual);
  EXPECT_LE(max_diff(fr.params, expect), 1e-12);
}

TEST(FixedRatioRound, NoParticipantsIsIdentity) {
  const auto samples = random_samples(3, 12);
  auto clients = split(samples, {1, 1, 1});
  auto st = make_state(kSpec, fs::Strategy::kFixedRatio, 1);
  const auto before = st.params;
  const auto log = fs::run_round_fixed_ratio(st, clients, 1e-12, 1);
  EXPECT_EQ(log.participants, 0u);
  EXPECT_EQ(st.params, before);
  EXPECT_EQ(st.round, 1u);
  EXPECT_THROW(fs::run_round_fixed_ratio(st, clients, 0.0, 1), fs::InvalidArgument);
}

TEST(Centralized, LossDecreasesOnSeparableData) {
  auto s = fs::derive(13, {{"data", 0}});
  const auto ds = fs::make_synthetic_classification(2000, 3, 2, 4.0, s);
  const auto hist = fs::run_centralized(ds, kSpec, 0.5, 256, 10, 1);
  ASSERT_EQ(hist.size(), 10u);
  EXPECT_LT(hist.back().eval_loss, hist.front().eval_loss);
  EXPECT_THROW(fs::run_centralized(ds, kSpec, 0.5, 2001, 1, 1), fs::InvalidArgument);
}

TEST(Centralized, KEqualsNIsFullBatch) {
  const auto samples = random_samples(25, 14);
  auto st = make_state(kSpec, fs::Strategy::kCentralized, 25);
  const auto before = st.params;
  const auto log = fs::run_round_centralized(st, samples, 1);
  EXPECT_EQ(log.effective_samples, 25u);
  auto want = before;
  want.axpy(st.eta, centralized_delta(before, samples, 25.0));
  EXPECT_LE(max_diff(st.params, want), 1e-12);
}

TEST(Train, ZeroRoundsAndDeterminism) {
  auto s = fs::derive(15, {{"data", 0}});
  const auto ds = fs::make_synthetic_classification(400, 3, 2, 2.0, s);
  auto p = fs::derive(15, {{"part", 0}});
  const auto clients = fs::partition_lognormal(ds, 100, 2.0, 4.0, p);
  fs::TrainConfig cfg;
  cfg.model = kSpec;
  cfg.plan.K = 64;
  cfg.rounds = 0;
  cfg.seed = 3;
  const auto r0 = fs::train(cfg, clients, ds);
  EXPECT_TRUE(r0.history.empty());
  EXPECT_EQ(r0.final_state.params, fs::initial_params(kSpec, 3));

  cfg.rounds = 7;
  cfg.eval_every = 3;
  for (auto strat : {fs::Strategy::kFedSampling, fs::Strategy::kUniformClient, fs::Strategy::kWeightedClient,
                     fs::Strategy::kFixedRatio, fs::Strategy::kCentralized}) {
    cfg.plan.strategy = strat;
    cfg.plan.client.clients_per_round = 10;
    cfg.plan.ratio = 0.2;
    const auto a = fs::train(cfg, clients, ds);
    const auto b = fs::train(cfg, clients, ds);
    ASSERT_EQ(a.history.size(), 3u);  // rounds 3, 6, 7
    EXPECT_EQ(a.history[0].round, 3u);
    EXPECT_EQ(a.history[2].round, 7u);
    EXPECT_EQ(a.history, b.history) << fs::to_string(strat);
    EXPECT_EQ(a.final_state.params, b.final_state.params);
  }
}

TEST(Train, RejectsInvalidConfig) {
  std::vector<fs::ClientDataset> clients(2);
  fs::Dataset eval{3, 2, {{{0, 0, 0}, 0, 0}}};
  fs::TrainConfig cfg;
  cfg.model = kSpec;
  cfg.eta = 0.0;
  EXPECT_THROW(fs::train(cfg, clients, eval), fs::InvalidArgument);
  cfg.eta = 0.1;
  EXPECT_THROW(fs::train(cfg, clients, fs::Dataset{3, 2, {}}), fs::InvalidArgument);
}

TEST(State, CheckpointRoundTrip) {
  auto st = make_state(kSpec, fs::Strategy::kFedSampling, 1);
  st.round = 42;
  const auto path = (std::filesystem::temp_directory_path() / "fs_state.bin").string();
  fs::save_state(path, st);
  auto other = make_state(kSpec, fs::Strategy::kFedSampling, 1);
  other.params = fs::ParamVector::zeros(kSpec);
  fs::load_state(path, other);
  EXPECT_EQ(other.params, st.params);
  EXPECT_EQ(other.round, 42u);
  std::filesystem::remove(path);
}
