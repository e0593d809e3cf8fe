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

// fedsim: command-line front end.
//
//   fedsim run             --config FILE | --preset NAME  [--seed S] [--out DIR] [--set key=value]...
//   fedsim sweep           --config FILE | --preset NAME  [--out DIR] [--set key=value]...
//   fedsim ldp-check       --epsilon 3 --M 300 [--format table|json|both]
//   fedsim estimator-bench --H 100,1000,10000 [--epsilon 3] [--M 300] [--K 2048] [--trials 100]
//
// Errors go to stderr as one JSON object {"error": ..., "kind": ...} and the
// exit code is nonzero.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedsampling/harness.hpp"
#include "fedsampling/ldp.hpp"
#include "fedsampling/log.hpp"
#include "fedsampling/presets.hpp"

namespace fs = fedsampling;
using nlohmann::json;

namespace {

int fail(const std::string& kind, const std::string& what, int code = 2) {
  std::cerr << json{{"error", what}, {"kind", kind}}.dump() << '\n';
  return code;
}

struct Source {
  std::string config;
  std::string preset;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool print_config = false;
};

void add_source_flags(CLI::App* cmd, Source& src) {
  cmd->add_option("--config", src.config, "Experiment file (TOML subset)");
  cmd->add_option("--preset", src.preset, "Built-in preset: imbalanced, sigma-sweep, noniid, privacy-tradeoff");
  cmd->add_option("--set", src.overrides, "Override a config key, e.g. --set train.K=512");
  cmd->add_option("--out", src.out, "Output directory (defaults to experiment.out)");
  cmd->add_flag("--print-config", src.print_config, "Print the resolved config and exit");
}

fs::SweepSpec resolve(const Source& src) {
  if (src.config.empty() == src.preset.empty())
    throw fs::InvalidArgument("exactly one of --config or --preset is required");
  fs::SweepSpec spec = src.config.empty() ? fs::preset(src.preset) : fs::load_sweep(src.config);
  for (const auto& o : src.overrides) spec.base = fs::apply_override(spec.base, o);
  if (src.seed) spec.base.seeds = {*src.seed};
  if (!src.out.empty()) spec.base.out = src.out;
  return spec;
}

void print_ldp(double epsilon, std::int64_t M, const std::string& format) {
  const auto cfg = fs::LdpConfig::from_budget(epsilon, M);
  json j = {{"epsilon", epsilon}, {"M", M}, {"alpha", cfg.alpha}};
  bool pass = false;
  if (cfg.alpha < 1.0) {
    const auto chk = fs::verify_ldp_ratio(cfg);
    pass = chk.satisfies;
    j["analytic_ratio"] = chk.analytic_ratio;
    j["e_epsilon"] = chk.e_epsilon;
    j["zero_output_unbounded"] = chk.zero_output_unbounded;
  } else {
    j["analytic_ratio"] = nullptr;
    j["e_epsilon"] = std::exp(epsilon);
  }
  j["pass"] = pass;
  if (format != "json") {
    std::printf("%-10s %-8s %-12s %-16s %-16s %s\n", "epsilon", "M", "alpha", "ratio", "e^epsilon", "result");
    std::printf("%-10.6g %-8lld %-12.6f %-16.10g %-16.10g %s\n", epsilon, static_cast<long long>(M), cfg.alpha,
                j["analytic_ratio"].is_null() ? NAN : j["analytic_ratio"].get<double>(), std::exp(epsilon),
                pass ? "pass" : "fail");
  }
  if (format != "table") std::cout << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated data-sampling simulator"};
  app.require_subcommand(1);
  std::string log_level = "error";
  app.add_option("--log-level", log_level, "debug, info, warn, error, off");

  Source run_src;
  auto* run = app.add_subcommand("run", "Run one experiment over its seeds");
  add_source_flags(run, run_src);
  std::uint64_t seed_flag = 0;
  auto* seed_opt = run->add_option("--seed", seed_flag, "Run a single master seed instead of experiment.seeds");

  Source sweep_src;
  auto* sweep = app.add_subcommand("sweep", "Run a one- or two-axis grid of experiments");
  add_source_flags(sweep, sweep_src);

  double ldp_eps = 3.0;
  std::int64_t ldp_m = 300;
  std::string ldp_format = "both";
  auto* ldp = app.add_subcommand("ldp-check", "Truth probability and worst-case likelihood ratio");
  ldp->add_option("--epsilon", ldp_eps, "Privacy budget");
  ldp->add_option("--M", ldp_m, "Size threshold");
  ldp->add_option("--format", ldp_format, "table, json or both")->check(CLI::IsMember({"table", "json", "both"}));

  std::vector<std::size_t> bench_h{100, 1000, 10000};
  double bench_eps = 3.0, bench_sigma = 1.0, bench_mean = 2.0;
  std::int64_t bench_m = 300;
  std::size_t bench_k = 2048, bench_trials = 100;
  std::uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("estimator-bench", "Monte Carlo MSE of the sampling probability");
  bench->add_option("--H", bench_h, "Client counts")->delimiter(',');
  bench->add_option("--epsilon", bench_eps, "Privacy budget");
  bench->add_option("--M", bench_m, "Size threshold");
  bench->add_option("--K", bench_k, "Desired samples per round");
  bench->add_option("--trials", bench_trials, "Trials per client count (>= 30)");
  bench->add_option("--sigma", bench_sigma, "Log-normal sigma of client sizes");
  bench->add_option("--mean-size", bench_mean, "Mean client size");
  bench->add_option("--seed", bench_seed, "Master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (log_level == "debug") fs::set_log_level(fs::LogLevel::kDebug);
    else if (log_level == "info") fs::set_log_level(fs::LogLevel::kInfo);
    else if (log_level == "warn") fs::set_log_level(fs::LogLevel::kWarn);
    else if (log_level == "error") fs::set_log_level(fs::LogLevel::kError);
    else if (log_level == "off") fs::set_log_level(fs::LogLevel::kOff);
    else return fail("usage", "unknown log level: " + log_level);

    if (*run) {
      if (*seed_opt) run_src.seed = seed_flag;
      auto spec = resolve(run_src);
      if (!spec.axes.empty()) fs::log_info("run: ignoring sweep axes, running the base config");
      if (run_src.print_config) {
        std::cout << fs::serialize_config(spec.base);
        return 0;
      }
      const auto res = fs::run_experiment(spec.base, spec.base.out);
      json summary = {{"out", spec.base.out}, {"seeds", spec.base.seeds}};
      if (!res.aggregate.empty()) {
        const auto& last = res.aggregate.back();
        summary["final_round"] = last.round;
        summary["accuracy_mean"] = last.accuracy.mean;
        summary["accuracy_std"] = last.accuracy.sd;
        summary["macro_f1_mean"] = last.macro_f1.mean;
      }
      std::cout << summary.dump() << '\n';
      return 0;
    }
    if (*sweep) {
      auto spec = resolve(sweep_src);
      if (sweep_src.print_config) {
        std::cout << fs::toml::serialize(fs::sweep_to_table(spec));
        return 0;
      }
      const auto res = fs::run_sweep(spec, spec.base.out);
      std::cout << json{{"out", spec.base.out}, {"points", res.points.size()}}.dump() << '\n';
      return 0;
    }
    if (*ldp) {
      print_ldp(ldp_eps, ldp_m, ldp_format);
      return 0;
    }
    if (*bench) {
      fs::SizeLaw law;
      law.sigma = bench_sigma;
      law.mean_size = bench_mean;
      const auto cfg = fs::LdpConfig::from_budget(bench_eps, bench_m);
      const auto rows = fs::bench_estimator_mse(bench_h, cfg, law, bench_k, bench_trials, bench_seed);
      std::printf("%-8s %-10s %-10s %-12s %-14s %-14s %-12s %s\n", "H", "N", "nonpos", "mse(p)", "mean(N_est)",
                  "sd(N_est)", "mean(NK/N~)", "trend");
      json arr = json::array();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const char* trend = i == 0 ? "-" : (r.mse_prob < rows[i - 1].mse_prob ? "down" : "not-down");
        std::printf("%-8zu %-10zu %-10zu %-12.6g %-14.6g %-14.6g %-12.6g %s\n", r.num_clients, r.true_total,
                    r.nonpositive, r.mse_prob, r.mean_estimate, r.sd_estimate, r.mean_scaled_k, trend);
        arr.push_back({{"H", r.num_clients}, {"N", r.true_total}, {"trials", r.trials}, {"nonpositive", r.nonpositive},
                       {"mse_prob", r.mse_prob}, {"mean_estimate", r.mean_estimate}, {"sd_estimate", r.sd_estimate},
                       {"mean_scaled_k", r.mean_scaled_k}});
      }
      std::cout << json{{"epsilon", bench_eps}, {"M", bench_m}, {"alpha", cfg.alpha}, {"K", bench_k}, {"rows", arr}}.dump()
                << '\n';
      return 0;
    }
  } catch (const fs::IoError& e) {
    return fail("io", e.what());
  } catch (const fs::InvalidArgument& e) {
    return fail("invalid_argument", e.what());
  } catch (const fs::NumericalError& e) {
    return fail("numerical", e.what(), 3);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 4);
  }
  return 0;
}
