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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "fedsampling/model.hpp"
#include "gradcheck.hpp"

namespace fs = fedsampling;

namespace {

const fs::ModelSpec kLinear{fs::ModelKind::kLinear, 3, 2, 0, 1.0};
const fs::ModelSpec kMlp{fs::ModelKind::kMlp, 4, 3, 5, 1.0};

fs::Sample sample(std::vector<double> x, std::size_t y) { return {std::move(x), y, 0}; }

}  // namespace

TEST(ModelSpec, Validation) {
  EXPECT_NO_THROW(kLinear.validate());
  EXPECT_THROW((fs::ModelSpec{fs::ModelKind::kMlp, 3, 2, 0, 1.0}.validate()), fs::InvalidArgument);
  EXPECT_THROW((fs::ModelSpec{fs::ModelKind::kLinear, 0, 2, 0, 1.0}.validate()), fs::InvalidArgument);
  EXPECT_THROW((fs::ModelSpec{fs::ModelKind::kLinear, 3, 1, 0, 1.0}.validate()), fs::InvalidArgument);
  EXPECT_EQ(fs::parse_model_kind("mlp"), fs::ModelKind::kMlp);
  EXPECT_THROW(fs::parse_model_kind("cnn"), fs::InvalidArgument);
}

TEST(InitParams, ShapeAndZeroScale) {
  EXPECT_EQ(fs::param_count(kLinear), 8u);
  EXPECT_EQ(fs::param_count(kMlp), 4u * 5 + 5 + 3 * 5 + 3);
  auto s = fs::derive(1, {{"init", 0}});
  auto spec = kMlp;
  spec.init_scale = 0.0;
  const auto p = fs::init_params(spec, s);
  for (double v : p.values) EXPECT_EQ(v, 0.0);
}

TEST(InitParams, DeterministicAndScaled) {
  auto a = fs::derive(4, {{"init", 0}});
  auto b = fs::derive(4, {{"init", 0}});
  fs::ModelSpec big{fs::ModelKind::kLinear, 400, 50, 0, 2.0};
  const auto pa = fs::init_params(big, a);
  EXPECT_EQ(pa, fs::init_params(big, b));
  // Weight variance init_scale^2 / fan_in, biases zero.
  double ss = 0.0;
  const std::size_t nw = 400 * 50;
  for (std::size_t i = 0; i < nw; ++i) ss += pa.values[i] * pa.values[i];
  const double var = ss / nw, want = 4.0 / 400.0;
  EXPECT_NEAR(var, want, 4.0 * want * std::sqrt(2.0 / nw));
  for (std::size_t i = nw; i < pa.size(); ++i) EXPECT_EQ(pa.values[i], 0.0);
}

TEST(Loss, ZeroParamsGiveLogL) {
  for (std::size_t L : {2u, 3u, 10u}) {
    fs::ModelSpec spec{fs::ModelKind::kLinear, 3, L, 0, 1.0};
    const auto r = fs::loss_and_grad(fs::ParamVector::zeros(spec), sample({1.0, -2.0, 0.5}, 1));
    EXPECT_NEAR(r.loss, std::log(static_cast<double>(L)), 1e-15);
  }
  fs::ModelSpec mlp{fs::ModelKind::kMlp, 3, 4, 6, 1.0};
  EXPECT_NEAR(fs::loss_and_grad(fs::ParamVector::zeros(mlp), sample({1, 2, 3}, 0)).loss, std::log(4.0), 1e-15);
}

TEST(Loss, ConfidentCorrectLogitLowersLoss) {
  auto p = fs::ParamVector::zeros(kLinear);
  const auto s = sample({1.0, 0.0, 0.0}, 0);
  p.values[0] = 1.0;  // W[0][0]: logit of the correct class is 1
  const double l1 = fs::loss_and_grad(p, s).loss;
  p.values[0] = 2.0;
  const double l2 = fs::loss_and_grad(p, s).loss;
  EXPECT_LT(l2, l1);
}

TEST(Loss, StableForLargeLogits) {
  auto p = fs::ParamVector::zeros(kLinear);
  p.values[0] = 1000.0;
  const auto r = fs::loss_and_grad(p, sample({1.0, 0.0, 0.0}, 1));
  EXPECT_NEAR(r.loss, 1000.0, 1e-9);
  EXPECT_TRUE(r.grad.all_finite());
}

TEST(Loss, NonFiniteLossIsAnError) {
  auto p = fs::ParamVector::zeros(kLinear);
  p.values[0] = 1e308;
  EXPECT_THROW(fs::loss_and_grad(p, sample({10.0, 0.0, 0.0}, 1)), fs::NumericalError);
  p.values[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fs::loss_and_grad(p, sample({1.0, 0.0, 0.0}, 1)), fs::NumericalError);
}

TEST(Loss, RejectsBadSample) {
  const auto p = fs::ParamVector::zeros(kLinear);
  EXPECT_THROW(fs::loss_and_grad(p, sample({1.0, 2.0}, 0)), fs::InvalidArgument);
  EXPECT_THROW(fs::loss_and_grad(p, sample({1.0, 2.0, 3.0}, 2)), fs::InvalidArgument);
}

TEST(Gradient, FiniteDifferencesLinear) {
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto in = fstest::random_instance(kLinear, 100, i);
    const auto chk = fstest::finite_difference_check(in.params, in.sample);
    EXPECT_LT(chk.max_abs, 1e-6);
    EXPECT_LT(chk.rel, 1e-6);
  }
}

TEST(Gradient, FiniteDifferencesMlp) {
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto in = fstest::random_instance(kMlp, 200, i);
    const auto chk = fstest::finite_difference_check(in.params, in.sample);
    EXPECT_LT(chk.max_abs, 1e-6);
    EXPECT_LT(chk.rel, 1e-6);
  }
}

TEST(Gradient, PureFunction) {
  const auto in = fstest::random_instance(kMlp, 3, 0);
  const auto a = fs::loss_and_grad(in.params, in.sample);
  const auto b = fs::loss_and_grad(in.params, in.sample);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.grad, b.grad);
}

TEST(Gradient, SumOfPerSampleGradients) {
  const auto in = fstest::random_instance(kMlp, 5, 0);
  std::vector<fs::Sample> samples;
  auto st = fs::derive(5, {{"samples", 0}});
  for (int i = 0; i < 20; ++i) {
    fs::Sample s;
    s.features.resize(4);
    for (auto& x : s.features) x = st.standard_normal();
    s.label = static_cast<std::size_t>(i % 3);
    samples.push_back(s);
  }
  auto manual = fs::ParamVector::zeros(kMlp);
  double manual_loss = 0.0;
  for (const auto& s : samples) {
    const auto r = fs::loss_and_grad(in.params, s);
    manual.axpy(1.0, r.grad);
    manual_loss += r.loss;
  }
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto acc = fs::ParamVector::zeros(kMlp);
  const double loss = fs::accumulate_gradients(in.params, samples, idx, 1.0, acc);
  EXPECT_NEAR(loss, manual_loss, 1e-10);
  for (std::size_t i = 0; i < acc.size(); ++i) EXPECT_NEAR(acc.values[i], manual.values[i], 1e-10);
}

TEST(Evaluate, AllCorrect) {
  auto p = fs::ParamVector::zeros(kLinear);
  p.values[0] = 1.0;   // class 0 scores x0
  p.values[4] = 1.0;   // class 1 scores x1
  fs::Dataset ds{3, 2, {sample({1, 0, 0}, 0), sample({0, 1, 0}, 1), sample({2, 1, 0}, 0)}};
  const auto m = fs::evaluate(p, ds);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.macro_f1, 1.0);
}

TEST(Evaluate, AllClassZeroOnBalancedBinary) {
  auto p = fs::ParamVector::zeros(kLinear);
  p.values[6] = 1.0;  // bias of class 0
  fs::Dataset ds{3, 2, {}};
  for (int i = 0; i < 10; ++i) ds.samples.push_back(sample({0, 0, 0}, static_cast<std::size_t>(i % 2)));
  const auto m = fs::evaluate(p, ds);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  // Class 0: P = 0.5, R = 1, F1 = 2/3. Class 1: F1 = 0.
  EXPECT_NEAR(m.macro_f1, 1.0 / 3.0, 1e-15);
}

TEST(Evaluate, MacroF1AgainstConfusionMatrix) {
  // Independent per-class precision / recall formulation.
  auto st = fs::derive(9, {{"f1", 0}});
  const std::size_t L = 4, n = 500;
  std::vector<std::size_t> y(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<std::size_t>(st.uniform_int(0, L - 1));
    p[i] = st.bernoulli(0.6) ? y[i] : static_cast<std::size_t>(st.uniform_int(0, L - 1));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < L; ++k) {
    double tp = 0, pred_k = 0, true_k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += (y[i] == k && p[i] == k);
      pred_k += p[i] == k;
      true_k += y[i] == k;
    }
    const double prec = pred_k ? tp / pred_k : 0.0, rec = true_k ? tp / true_k : 0.0;
    sum += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  }
  EXPECT_NEAR(fs::macro_f1(y, p, L), sum / L, 1e-12);
}

TEST(Evaluate, SingleSample) {
  auto p = fs::ParamVector::zeros(kLinear);
  p.values[6] = 1.0;
  fs::Dataset ds{3, 2, {sample({0, 0, 0}, 0)}};
  const auto m = fs::evaluate(p, ds);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.macro_f1, 1.0);
  EXPECT_GE(m.mean_loss, 0.0);
}

TEST(Evaluate, EmptyRejected) {
  EXPECT_THROW(fs::evaluate(fs::ParamVector::zeros(kLinear), fs::Dataset{3, 2, {}}), fs::InvalidArgument);
}

TEST(Checkpoint, RoundTrip) {
  auto st = fs::derive(1, {{"init", 0}});
  const auto p = fs::init_params(kMlp, st);
  const auto path = (std::filesystem::temp_directory_path() / "fs_test_ckpt.bin").string();
  fs::write_checkpoint(path, p, 17);
  EXPECT_EQ(std::filesystem::file_size(path), 56u + 8u * p.size());
  const auto ck = fs::read_checkpoint(path);
  EXPECT_EQ(ck.round, 17u);
  EXPECT_EQ(ck.params, p);
  // Header bytes are little-endian.
  std::ifstream in(path, std::ios::binary);
  char buf[12];
  in.read(buf, 12);
  EXPECT_EQ(std::string(buf, 4), "FSPV");
  EXPECT_EQ(buf[4], 1);
  EXPECT_EQ(buf[8], 1);  // mlp
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto path = (std::filesystem::temp_directory_path() / "fs_test_bad.bin").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE....";
  }
  EXPECT_THROW(fs::read_checkpoint(path), fs::IoError);
  auto p = fs::ParamVector::zeros(kLinear);
  fs::write_checkpoint(path, p, 0);
  std::filesystem::resize_file(path, 60);
  EXPECT_THROW(fs::read_checkpoint(path), fs::IoError);
  std::filesystem::remove(path);
  EXPECT_THROW(fs::read_checkpoint(path), fs::IoError);
}
