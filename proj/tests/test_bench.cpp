#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include "convbf/bench.hpp"
#include "convbf/export.hpp"

using namespace convbf;

namespace {

Trajectory line_truth(std::vector<double> xs) {
  Trajectory t;
  for (double x : xs) t.states.push_back(Vector::Constant(1, x));
  for (std::size_t i = 1; i < xs.size(); ++i) t.measurements.push_back(Vector::Zero(1));
  return t;
}

ExperimentConfig small_config(FilterKind f, System s = System::wiener, MismatchCase c = MismatchCase::none) {
  ExperimentConfig cfg;
  cfg.system = s;
  cfg.mismatch = c;
  cfg.filter = f;
  cfg.runs = 8;
  cfg.steps = 20;
  cfg.particles = 100;
  return cfg;
}

}  // namespace

TEST(Rmse, HandValues) {
  const Trajectory t = line_truth({0.0, 1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(rmse(t, {Vector::Constant(1, 1.0), Vector::Constant(1, 2.0), Vector::Constant(1, 3.0)}), 0.0);
  EXPECT_DOUBLE_EQ(rmse(t, {Vector::Constant(1, 2.0), Vector::Constant(1, 3.0), Vector::Constant(1, 4.0)}), 1.0);

  Trajectory two;
  two.states = {Vector::Zero(2), Vector::Zero(2), Vector::Zero(2)};
  two.measurements = {Vector::Zero(1), Vector::Zero(1)};
  Vector e1(2), e2(2);
  e1 << 3.0, 4.0;
  e2 << 0.0, 0.0;
  EXPECT_NEAR(rmse(two, {e1, e2}), 3.5355339059327378, 1e-15);
  EXPECT_THROW(rmse(t, {Vector::Zero(1)}), InputError);
}

TEST(Summarize, QuartilesOfOneToFour) {
  const RmseSummary s = summarize({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.q1, 1.75);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.q3, 3.25);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.max, 4.0);
  EXPECT_EQ(s.failed_runs, 0u);
}

TEST(Summarize, OrderingInvariantsAndPermutation) {
  std::mt19937_64 rng(3);
  std::vector<double> xs(37);
  for (auto& x : xs) x = std::exponential_distribution<double>(1.0)(rng);
  const RmseSummary a = summarize(xs);
  EXPECT_LE(a.min, a.q1);
  EXPECT_LE(a.q1, a.median);
  EXPECT_LE(a.median, a.q3);
  EXPECT_LE(a.q3, a.max);
  EXPECT_GE(a.mean, a.min);
  EXPECT_LE(a.mean, a.max);
  std::shuffle(xs.begin(), xs.end(), rng);
  const RmseSummary b = summarize(xs);
  EXPECT_EQ(a.q1, b.q1);
  EXPECT_EQ(a.median, b.median);
  EXPECT_EQ(a.q3, b.q3);
  EXPECT_EQ(a.min, b.min);
  EXPECT_EQ(a.max, b.max);
}

TEST(Summarize, FailedRunsAndEmptyInput) {
  const RmseSummary s = summarize({1.0, std::nan(""), 3.0});
  EXPECT_EQ(s.failed_runs, 1u);
  EXPECT_DOUBLE_EQ(s.median, 2.0);
  EXPECT_THROW(summarize({}), InputError);
}

TEST(Experiment, SameConfigIsBitIdentical) {
  for (auto f : {FilterKind::kf, FilterKind::ukf, FilterKind::pf}) {
    const auto cfg = small_config(f, System::sequence, MismatchCase::case_b_measurement);
    EXPECT_EQ(run_experiment(cfg), run_experiment(cfg)) << to_string(f);
  }
}

TEST(Experiment, ParallelMatchesSerial) {
  auto cfg = small_config(FilterKind::convpf, System::reactor, MismatchCase::case_a_transition);
  cfg.alpha = ExponentialThreshold(0.05);
  cfg.runs = 12;
  EXPECT_EQ(run_experiment(cfg, 1), run_experiment(cfg, 4));
}

TEST(Experiment, DifferentSeedsDiffer) {
  auto a = small_config(FilterKind::kf);
  auto b = a;
  b.seed = 43;
  EXPECT_NE(run_experiment(a).per_run_rmse, run_experiment(b).per_run_rmse);
}

TEST(Experiment, NoiselessTruthGivesZeroKalmanError) {
  auto cfg = small_config(FilterKind::kf);
  cfg.noiseless_truth = true;
  const RmseSummary s = run_experiment(cfg);
  EXPECT_LT(s.max, 1e-12);
}

TEST(Experiment, ConvKfBeatsKfUnderMeasurementOutliers) {
  auto kf = small_config(FilterKind::kf, System::wiener, MismatchCase::case_b_measurement);
  kf.runs = 100;
  kf.steps = 40;
  auto conv = kf;
  conv.filter = FilterKind::convkf;
  conv.beta = ExponentialThreshold(0.01);
  EXPECT_LT(run_experiment(conv, 0).mean, run_experiment(kf, 0).mean);
}

TEST(Compatibility, EveryPairIsDecided) {
  for (auto s : kAllSystems) {
    for (auto c : {MismatchCase::none, MismatchCase::case_a_transition, MismatchCase::case_b_measurement}) {
      for (auto f : kAllFilters) {
        auto cfg = small_config(f, s, c);
        cfg.alpha = ExponentialThreshold(0.05);
        cfg.beta = ExponentialThreshold(0.005);
        const auto reason = incompatibility(cfg);
        if (reason) {
          EXPECT_FALSE(reason->empty());
          EXPECT_THROW(run_experiment(cfg), ConfigError);
        }
      }
    }
  }
}

TEST(Compatibility, RejectsDegenerateSettings) {
  auto cfg = small_config(FilterKind::pf);
  cfg.particles = 1;
  EXPECT_THROW(require_compatible(cfg), ConfigError);
  cfg = small_config(FilterKind::kf);
  cfg.runs = 0;
  EXPECT_THROW(require_compatible(cfg), ConfigError);
  EXPECT_THROW(parse_system("pendulum"), ConfigError);
  EXPECT_THROW(parse_filter("kalman"), ConfigError);
}

TEST(Parse, NamesRoundTrip) {
  for (auto f : kAllFilters) EXPECT_EQ(parse_filter(to_string(f)), f);
  for (auto s : kAllSystems) EXPECT_EQ(parse_system(to_string(s)), s);
  EXPECT_FALSE(parse_threshold("off").enabled());
  EXPECT_DOUBLE_EQ(parse_threshold("0.05").rate(), 0.05);
}

TEST(Export, CsvLayout) {
  auto cfg = small_config(FilterKind::kf);
  cfg.runs = 100;
  const std::string csv = to_csv({{cfg, run_experiment(cfg)}});
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 101u);
  EXPECT_EQ(lines[0], kCsvHeader);
  EXPECT_EQ(lines[1].rfind("0,wiener,none,kf,-,-,100,42,", 0), 0u) << lines[1];
}

TEST(Export, JsonRoundTrip) {
  auto cfg = small_config(FilterKind::ukf, System::sequence);
  const CampaignResult r{cfg, run_experiment(cfg)};
  const nlohmann::json j = nlohmann::json::parse(render({r}, ExportFormat::json));
  EXPECT_EQ(summary_from_json(j), r.summary);
  for (const char* key : {"mean", "median", "q1", "q3", "min", "max", "failed_runs"}) {
    EXPECT_TRUE(j.at("summary").contains(key)) << key;
  }
  EXPECT_EQ(j.at("summary").size(), 7u);
  EXPECT_EQ(j.at("config").at("alpha"), "off");
}

TEST(Export, NanIsNullInJson) {
  RmseSummary s = summarize({1.0, std::nan("")});
  const nlohmann::json j = to_json({small_config(FilterKind::kf), s});
  EXPECT_TRUE(j.at("per_run_rmse")[1].is_null());
  EXPECT_EQ(summary_from_json(j), s);
}

TEST(Export, UnwritablePathIsIoError) {
  const auto cfg = small_config(FilterKind::kf);
  EXPECT_THROW(export_results({{cfg, summarize({1.0})}}, ExportFormat::csv, "/nonexistent-dir/x/out.csv"), IoError);
}

TEST(Sweep, ExpandsCrossProduct) {
  const auto configs = expand_sweep(small_config(FilterKind::kf), {FilterKind::convkf, FilterKind::convukf},
                                    {ExponentialThreshold(0.05), ExponentialThreshold(0.5)},
                                    {ExponentialThreshold::disabled()});
  EXPECT_EQ(configs.size(), 4u);
  EXPECT_THROW(expand_sweep(small_config(FilterKind::kf), {}, {ExponentialThreshold(1.0)}, {ExponentialThreshold(1.0)}),
               ConfigError);
}
