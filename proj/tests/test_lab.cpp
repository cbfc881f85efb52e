#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "nesylab/lab.hpp"

using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
using namespace nesylab;

namespace {

// A hand-rolled dataset small enough to train in milliseconds. Source
// pools come from the synthetic digits; examples reference them directly.
data::TrafficDataset tiny_dataset(std::uint64_t seed, int train_per_config = 2,
                                  int test_per_config = 1) {
  const data::SynthDigits digits = data::synth_digits(6, seed);
  data::TrafficDataset ds;
  ds.zeros =
      std::make_shared<const std::vector<data::MnistImage>>(digits.zeros);
  ds.ones = std::make_shared<const std::vector<data::MnistImage>>(digits.ones);
  ds.seed = seed;

  Rng rng(seed_mix(seed, 99));
  auto add = [&](std::vector<data::TrafficExample>& dst, int config) {
    data::TrafficExample e;
    e.config = config;
    e.y = config == 3 ? 0 : 1;
    e.red_source = static_cast<std::uint32_t>(rng.index(6));
    e.green_source = static_cast<std::uint32_t>(rng.index(6));
    dst.push_back(e);
  };
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < train_per_config; ++i) add(ds.train, c);
    for (int i = 0; i < test_per_config; ++i) add(ds.test, c);
  }
  return ds;
}

lab::Trajectory crafted(lab::LossKind kind, std::vector<int> steps,
                        std::vector<lab::ProbGrid> probs) {
  lab::Trajectory t;
  t.loss_kind = kind;
  t.steps = std::move(steps);
  t.probs = std::move(probs);
  return t;
}

lab::ProbGrid uniform_grid(double v) {
  lab::ProbGrid g{};
  for (auto& row : g) row.fill(v);
  return g;
}

}  // namespace

TEST_CASE("a run with no epochs records exactly the initial state") {
  const data::TrafficDataset ds = tiny_dataset(11);
  for (const lab::LossKind kind :
       {lab::LossKind::kSemantic, lab::LossKind::kTruncatedSemantic,
        lab::LossKind::kDisjunctive}) {
    lab::RunConfig cfg;
    cfg.loss_kind = kind;
    cfg.epochs = 0;
    const lab::TrainResult r = lab::train_run(cfg, ds, 5);
    REQUIRE(r.trajectory.record_count() == 1);
    REQUIRE(r.trajectory.steps == std::vector<int>{0});
    REQUIRE(r.trajectory.loss_kind == kind);
    REQUIRE(r.trajectory.run_seed == 5);
    if (kind == lab::LossKind::kDisjunctive) {
      REQUIRE(r.joint_net.has_value());
      REQUIRE_FALSE(r.red_net.has_value());
      REQUIRE_FALSE(r.trajectory.red_digit_accuracy.has_value());
    } else {
      REQUIRE(r.red_net.has_value());
      REQUIRE(r.green_net.has_value());
      REQUIRE_FALSE(r.joint_net.has_value());
      REQUIRE(r.trajectory.red_digit_accuracy.has_value());
      REQUIRE(r.trajectory.green_digit_accuracy.has_value());
      REQUIRE(*r.trajectory.red_digit_accuracy >= 0.0);
      REQUIRE(*r.trajectory.red_digit_accuracy <= 1.0);
    }
  }
}

TEST_CASE("zero learning rate keeps the evaluation constant") {
  const data::TrafficDataset ds = tiny_dataset(12);
  lab::RunConfig cfg;
  cfg.lr = 0.0;
  cfg.epochs = 2;
  cfg.batch_size = 3;
  const lab::TrainResult r = lab::train_run(cfg, ds, 3);
  // 8 train examples in batches of 3 make 3 updates per epoch
  REQUIRE(r.trajectory.record_count() == 7);
  for (std::size_t i = 1; i < r.trajectory.record_count(); ++i) {
    REQUIRE(r.trajectory.probs[i] == r.trajectory.probs[0]);
  }
}

TEST_CASE("evaluations follow the configured cadence") {
  const data::TrafficDataset ds = tiny_dataset(13);
  lab::RunConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 2;  // 4 updates over the 8 train examples

  cfg.eval_every = 2;
  REQUIRE(lab::train_run(cfg, ds, 1).trajectory.steps ==
          std::vector<int>{0, 2, 4});

  cfg.eval_every = 3;
  REQUIRE(lab::train_run(cfg, ds, 1).trajectory.steps ==
          std::vector<int>{0, 3});
}

TEST_CASE("recorded distributions sum to one per partition") {
  const data::TrafficDataset ds = tiny_dataset(14);
  for (const lab::LossKind kind :
       {lab::LossKind::kSemantic, lab::LossKind::kDisjunctive}) {
    lab::RunConfig cfg;
    cfg.loss_kind = kind;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    const lab::TrainResult r = lab::train_run(cfg, ds, 21);
    for (const lab::ProbGrid& rec : r.trajectory.probs) {
      for (int p = 0; p < 4; ++p) {
        double total = 0.0;
        for (int w = 0; w < 4; ++w) {
          REQUIRE(rec[p][w] >= 0.0);
          total += rec[p][w];
        }
        REQUIRE(total == Approx(1.0).margin(1e-9));
      }
    }
  }
}

TEST_CASE("identical seeds reproduce a run bit for bit") {
  const data::TrafficDataset ds = tiny_dataset(15);
  for (const lab::LossKind kind :
       {lab::LossKind::kSemantic, lab::LossKind::kDisjunctive}) {
    lab::RunConfig cfg;
    cfg.loss_kind = kind;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    const lab::TrainResult a = lab::train_run(cfg, ds, 77);
    const lab::TrainResult b = lab::train_run(cfg, ds, 77);
    REQUIRE(a.trajectory.steps == b.trajectory.steps);
    REQUIRE(a.trajectory.probs == b.trajectory.probs);
    REQUIRE(a.trajectory.red_digit_accuracy ==
            b.trajectory.red_digit_accuracy);

    const lab::TrainResult c = lab::train_run(cfg, ds, 78);
    REQUIRE(a.trajectory.probs != c.trajectory.probs);
  }
}

TEST_CASE("a non-finite loss aborts the run with context") {
  data::TrafficDataset ds = tiny_dataset(16);
  // poison one extra pool image and point a train example at it; the test
  // split stays clean so the initial evaluation works
  std::vector<data::MnistImage> zeros = *ds.zeros;
  data::MnistImage bad;
  bad.pixels = ad::Tensor({1, 28, 28});
  for (double& v : bad.pixels.data) v = std::nan("");
  bad.digit_label = 0;
  zeros.push_back(bad);
  ds.zeros =
      std::make_shared<const std::vector<data::MnistImage>>(std::move(zeros));
  data::TrafficExample e;
  e.config = 1;  // red off: the red image comes from the zeros pool
  e.y = 1;
  e.red_source = 6;
  e.green_source = 0;
  ds.train.assign(8, e);

  lab::RunConfig cfg;
  cfg.epochs = 1;
  REQUIRE_THROWS_WITH(lab::train_run(cfg, ds, 1),
                      ContainsSubstring("non-finite loss"));
}

TEST_CASE("bad run configurations are rejected") {
  const data::TrafficDataset ds = tiny_dataset(17);
  lab::RunConfig cfg;
  cfg.batch_size = 0;
  REQUIRE_THROWS_AS(lab::train_run(cfg, ds, 1), std::invalid_argument);
  cfg = {};
  cfg.eval_every = 0;
  REQUIRE_THROWS_AS(lab::train_run(cfg, ds, 1), std::invalid_argument);
  cfg = {};
  cfg.lr = -0.1;
  REQUIRE_THROWS_AS(lab::train_run(cfg, ds, 1), std::invalid_argument);
  cfg = {};
  cfg.epochs = -1;
  REQUIRE_THROWS_AS(lab::train_run(cfg, ds, 1), std::invalid_argument);

  data::TrafficDataset missing = ds;
  missing.test.erase(
      std::remove_if(missing.test.begin(), missing.test.end(),
                     [](const data::TrafficExample& x) { return x.config == 2; }),
      missing.test.end());
  REQUIRE_THROWS_AS(lab::train_run({}, missing, 1), std::invalid_argument);
}

TEST_CASE("aggregation matches the two-run worked example") {
  const std::vector<lab::Trajectory> runs = {
      crafted(lab::LossKind::kSemantic, {0}, {uniform_grid(0.4)}),
      crafted(lab::LossKind::kSemantic, {0}, {uniform_grid(0.6)})};
  const lab::AggregateTrajectory agg = lab::aggregate_runs(runs);
  REQUIRE(agg.steps == std::vector<int>{0});
  for (int p = 0; p < 4; ++p) {
    for (int w = 0; w < 4; ++w) {
      REQUIRE(agg.mean[0][p][w] == Approx(0.5).margin(1e-15));
      // 1.96 * sd(0.4, 0.6) / sqrt(2)
      REQUIRE(agg.ci95[0][p][w] == Approx(0.196).margin(1e-12));
    }
  }
}

TEST_CASE("aggregation interval degenerates without spread") {
  const lab::Trajectory one =
      crafted(lab::LossKind::kSemantic, {0, 5}, {uniform_grid(0.3),
                                                 uniform_grid(0.7)});
  const lab::AggregateTrajectory single = lab::aggregate_runs({one});
  REQUIRE(single.ci95[0][0][0] == 0.0);
  REQUIRE(single.ci95[1][3][3] == 0.0);
  REQUIRE(single.mean[1][2][1] == 0.7);

  const lab::AggregateTrajectory same = lab::aggregate_runs({one, one, one});
  REQUIRE(same.ci95[0][0][0] == 0.0);
  REQUIRE(same.mean[0][0][0] == 0.3);
}

TEST_CASE("aggregation rejects inconsistent inputs") {
  REQUIRE_THROWS_AS(lab::aggregate_runs({}), std::invalid_argument);
  const lab::Trajectory a =
      crafted(lab::LossKind::kSemantic, {0}, {uniform_grid(0.5)});
  const lab::Trajectory b = crafted(lab::LossKind::kSemantic, {0, 1},
                                    {uniform_grid(0.5), uniform_grid(0.5)});
  REQUIRE_THROWS_AS(lab::aggregate_runs({a, b}), std::invalid_argument);
  const lab::Trajectory c =
      crafted(lab::LossKind::kSemantic, {2}, {uniform_grid(0.5)});
  REQUIRE_THROWS_AS(lab::aggregate_runs({a, c}), std::invalid_argument);
}

TEST_CASE("output ranking orders by probability mass") {
  lab::ProbGrid g{};
  g[0] = {120.0, 40.1, 12.3, 0.0};
  lab::Trajectory t = crafted(lab::LossKind::kDisjunctive, {0}, {g});
  REQUIRE(lab::rank_ds_outputs(t) == std::array<int, 3>{0, 1, 2});

  // spread over records and satisfying partitions: sums (5, 9, 2)
  lab::ProbGrid g1{}, g2{};
  g1[0] = {2.0, 4.0, 1.0, 0.0};
  g1[1] = {1.0, 2.0, 0.0, 0.0};
  g2[2] = {2.0, 3.0, 1.0, 0.0};
  t = crafted(lab::LossKind::kDisjunctive, {0, 1}, {g1, g2});
  REQUIRE(lab::rank_ds_outputs(t) == std::array<int, 3>{1, 0, 2});
}

TEST_CASE("output ranking breaks ties by index and ignores the violating "
          "partition") {
  lab::Trajectory t =
      crafted(lab::LossKind::kDisjunctive, {0}, {uniform_grid(0.25)});
  REQUIRE(lab::rank_ds_outputs(t) == std::array<int, 3>{0, 1, 2});

  lab::ProbGrid g{};
  g[0] = {1.0, 2.0, 0.0, 0.0};
  g[3] = {100.0, 0.0, 0.0, 0.0};  // mass here must not count
  t = crafted(lab::LossKind::kDisjunctive, {0}, {g});
  REQUIRE(lab::rank_ds_outputs(t) == std::array<int, 3>{1, 0, 2});

  t.loss_kind = lab::LossKind::kSemantic;
  REQUIRE_THROWS_AS(lab::rank_ds_outputs(t), std::invalid_argument);
}

TEST_CASE("applying a ranking permutes the first three worlds only") {
  lab::ProbGrid g{};
  for (int p = 0; p < 4; ++p) g[p] = {0.1, 0.6, 0.2, 0.1};
  const lab::Trajectory t = crafted(lab::LossKind::kDisjunctive, {4}, {g});
  const lab::Trajectory ranked = lab::apply_output_ranking(t);
  REQUIRE(ranked.steps == t.steps);
  for (int p = 0; p < 4; ++p) {
    REQUIRE(ranked.probs[0][p][0] == 0.6);
    REQUIRE(ranked.probs[0][p][1] == 0.2);
    REQUIRE(ranked.probs[0][p][2] == 0.1);
    REQUIRE(ranked.probs[0][p][3] == 0.1);
  }
}

TEST_CASE("bias detection requires one world collapsed on every partition") {
  // ten records; only the final one is in the tail at the default fraction
  std::vector<lab::ProbGrid> recs(10, uniform_grid(0.25));
  lab::ProbGrid last{};
  for (int p = 0; p < 4; ++p) last[p] = {0.97, 0.01, 0.01, 0.01};
  recs.back() = last;
  lab::Trajectory t = crafted(lab::LossKind::kTruncatedSemantic,
                              {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, recs);

  const lab::BiasReport r = lab::detect_deterministic_bias(t);
  REQUIRE(r.biased);
  REQUIRE(r.biased_world == 0);
  REQUIRE(r.cells[2][0].collapsed_to_one);
  REQUIRE(r.cells[1][1].collapsed_to_zero);
  REQUIRE(r.cells[0][0].tail_mean == Approx(0.97));

  // one partition short of collapse
  recs.back()[2] = {0.90, 0.05, 0.04, 0.01};
  t.probs = recs;
  const lab::BiasReport partial = lab::detect_deterministic_bias(t);
  REQUIRE_FALSE(partial.biased);
  REQUIRE(partial.biased_world == -1);

  const std::string text = lab::bias_report_text(r);
  REQUIRE_THAT(text, ContainsSubstring("deterministic bias: yes, world w0"));
  REQUIRE_THAT(lab::bias_report_text(partial),
               ContainsSubstring("deterministic bias: no"));
}

TEST_CASE("bias detection tail and tolerance behave as configured") {
  // four records, tail fraction 0.5: the tail means average the last two
  std::vector<lab::ProbGrid> recs = {uniform_grid(0.0), uniform_grid(0.0),
                                     uniform_grid(0.9), uniform_grid(1.0)};
  const lab::Trajectory t =
      crafted(lab::LossKind::kSemantic, {0, 1, 2, 3}, recs);
  const lab::BiasReport r = lab::detect_deterministic_bias(t, 0.5, 0.06);
  REQUIRE(r.cells[0][0].tail_mean == Approx(0.95));
  REQUIRE(r.cells[0][0].collapsed_to_one);

  // 0.96 is within the default 0.05 of one; 0.94 is not
  const lab::Trajectory hi =
      crafted(lab::LossKind::kSemantic, {0}, {uniform_grid(0.96)});
  REQUIRE(lab::detect_deterministic_bias(hi).cells[0][0].collapsed_to_one);
  const lab::Trajectory lo =
      crafted(lab::LossKind::kSemantic, {0}, {uniform_grid(0.94)});
  REQUIRE_FALSE(lab::detect_deterministic_bias(lo).cells[0][0].collapsed_to_one);

  lab::Trajectory empty;
  REQUIRE_THROWS_AS(lab::detect_deterministic_bias(empty),
                    std::invalid_argument);
}

TEST_CASE("trajectory CSV round trips bit for bit") {
  lab::ProbGrid g1{}, g2{};
  for (int p = 0; p < 4; ++p) {
    for (int w = 0; w < 4; ++w) {
      g1[p][w] = 1.0 / (3 + p + w);
      g2[p][w] = 1.0 / (7 + p * w);
    }
  }
  const std::vector<lab::Trajectory> runs = {
      crafted(lab::LossKind::kSemantic, {0, 10}, {g1, g2}),
      crafted(lab::LossKind::kSemantic, {0, 10}, {g2, g1})};

  const std::string csv = lab::trajectory_csv(runs);
  REQUIRE_THAT(csv, ContainsSubstring("run,step,partition,world,prob\n"));

  const std::vector<lab::Trajectory> back = lab::parse_trajectory_csv(csv);
  REQUIRE(back.size() == 2);
  for (std::size_t r = 0; r < 2; ++r) {
    REQUIRE(back[r].steps == runs[r].steps);
    REQUIRE(back[r].probs == runs[r].probs);
  }
}

TEST_CASE("trajectory CSV lays out rows in a fixed order") {
  const std::vector<lab::Trajectory> runs = {
      crafted(lab::LossKind::kSemantic, {3}, {uniform_grid(0.25)})};
  const std::string csv = lab::trajectory_csv(runs);
  REQUIRE_THAT(csv, ContainsSubstring("0,3,nn,w0,0.25\n0,3,nn,w1,0.25\n"));
  REQUIRE_THAT(csv, ContainsSubstring("0,3,ng,w0,0.25\n"));
  REQUIRE_THAT(csv, ContainsSubstring("0,3,rg,w3,0.25\n"));
  // header plus 16 cells
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  REQUIRE(lines == 17);
}

TEST_CASE("malformed trajectory CSV is rejected") {
  const std::vector<lab::Trajectory> runs = {
      crafted(lab::LossKind::kSemantic, {0}, {uniform_grid(0.25)})};
  const std::string good = lab::trajectory_csv(runs);

  REQUIRE_THROWS_AS(lab::parse_trajectory_csv(""), std::invalid_argument);
  REQUIRE_THROWS_AS(lab::parse_trajectory_csv("step,partition\n"),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(
      lab::parse_trajectory_csv(good + "0,0,nn,w0,0.25\n"),
      std::invalid_argument);  // duplicate cell
  REQUIRE_THROWS_AS(
      lab::parse_trajectory_csv(good.substr(0, good.size() - 16)),
      std::invalid_argument);  // last cell missing
  REQUIRE_THROWS_AS(
      lab::parse_trajectory_csv(std::string(lab::kTrajectoryHeader) +
                                "\n0,0,xx,w0,0.25\n"),
      std::invalid_argument);
  REQUIRE_THROWS_AS(
      lab::parse_trajectory_csv(std::string(lab::kTrajectoryHeader) +
                                "\n0,0,nn,w9,0.25\n"),
      std::invalid_argument);
  REQUIRE_THROWS_AS(
      lab::parse_trajectory_csv(std::string(lab::kTrajectoryHeader) +
                                "\n0,0,nn,w0,abc\n"),
      std::invalid_argument);
  REQUIRE_THROWS_AS(
      lab::parse_trajectory_csv(std::string(lab::kTrajectoryHeader) +
                                "\n1,0,nn,w0,0.25\n"),
      std::invalid_argument);  // runs must start at 0
}

TEST_CASE("aggregate CSV carries mean and interval columns") {
  const std::vector<lab::Trajectory> runs = {
      crafted(lab::LossKind::kSemantic, {0}, {uniform_grid(0.4)}),
      crafted(lab::LossKind::kSemantic, {0}, {uniform_grid(0.6)})};
  const std::string csv = lab::aggregate_csv(lab::aggregate_runs(runs));
  REQUIRE_THAT(csv, ContainsSubstring("step,partition,world,mean,ci95\n"));
  REQUIRE_THAT(csv, ContainsSubstring("0,nn,w0,0.5,0.19"));
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  REQUIRE(lines == 17);
}

TEST_CASE("one gradient step moves acceptable outputs apart") {
  const lab::CheckResult res = lab::wta_step_check(50, 2024);
  REQUIRE(res.trials == 50);
  REQUIRE(res.comparisons > 0);
  REQUIRE(res.passed());
  REQUIRE_THAT(lab::check_report_text(res), ContainsSubstring("theorem2: pass"));
}

TEST_CASE("a crafted trial matches hand-computed ratio movement") {
  // z = (0.3, 0.1, -0.2, 0); outputs 0 and 1 acceptable
  lab::WtaTrial trial;
  trial.weights = ad::Tensor({4, 2}, {0.3, 0.0,   //
                                      0.1, 0.0,   //
                                      -0.2, 0.0,  //
                                      0.0, 0.0});
  trial.bias = ad::Tensor({4});
  trial.input = ad::Tensor({2}, {1.0, 0.0});
  trial.acceptable = {1, 1, 0, 0};

  // independent softmax and gradient arithmetic
  const double z[4] = {0.3, 0.1, -0.2, 0.0};
  double expz[4], total = 0.0;
  for (int i = 0; i < 4; ++i) {
    expz[i] = std::exp(z[i]);
    total += expz[i];
  }
  double q[4];
  for (int i = 0; i < 4; ++i) q[i] = expz[i] / total;
  const double s = q[0] + q[1];
  // d(-log s)/dz_j = q_j - q_j * [j acceptable] / s
  double znew[4];
  for (int j = 0; j < 4; ++j) {
    const double g = q[j] - (j < 2 ? q[j] / s : 0.0);
    // both the first weight column and the bias shift z_j by -lr * g
    znew[j] = z[j] - 2.0 * trial.lr * g;
  }
  const double before = z[0] - z[1];
  const double after = znew[0] - znew[1];
  REQUIRE(after > before);  // the leader pulls away

  lab::CheckResult res;
  res.suite = "theorem2";
  lab::wta_check_trial(trial, res);
  REQUIRE(res.comparisons == 1);
  REQUIRE(res.violations == 0);
}

TEST_CASE("symmetric acceptable outputs stay tied") {
  lab::WtaTrial trial;
  trial.weights = ad::Tensor({4, 2}, {0.4, -0.3,  //
                                      0.4, -0.3,  //
                                      0.1, 0.2,   //
                                      -0.5, 0.0});
  trial.bias = ad::Tensor({4}, {0.2, 0.2, 0.0, -0.1});
  trial.input = ad::Tensor({2}, {0.7, -0.4});
  trial.acceptable = {1, 1, 0, 0};

  lab::CheckResult res;
  lab::wta_check_trial(trial, res);
  // the only acceptable pair is an exact tie, so nothing is comparable
  REQUIRE(res.comparisons == 0);
  REQUIRE(res.violations == 0);
}

TEST_CASE("exact semantic loss agrees with disjunctive supervision") {
  const lab::CheckResult res = lab::sl_ds_equivalence_check(150, 6, 7);
  REQUIRE(res.trials == 150);
  REQUIRE(res.comparisons > 150);
  REQUIRE(res.passed());
  REQUIRE(res.max_delta < 1e-9);

  REQUIRE_THROWS_AS(lab::sl_ds_equivalence_check(1, 0, 7),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(lab::sl_ds_equivalence_check(1, 9, 7),
                    std::invalid_argument);
}

TEST_CASE("the gradient suite passes on primitives and pipelines") {
  const lab::CheckResult res = lab::gradient_suite(1, 31);
  REQUIRE(res.passed());
  REQUIRE(res.comparisons > 100);
  REQUIRE(res.max_delta < 1e-3);
}

TEST_CASE("the counting oracle suite passes") {
  const lab::CheckResult res = lab::wmc_oracle_suite(100, 5);
  REQUIRE(res.trials == 100);
  REQUIRE(res.passed());
  REQUIRE(res.max_delta <= 1e-12);
}

TEST_CASE("experiments rebuild the dataset per run and aggregate") {
  const data::SynthDigits digits = data::synth_digits(8, 3);
  auto zeros =
      std::make_shared<const std::vector<data::MnistImage>>(digits.zeros);
  auto ones =
      std::make_shared<const std::vector<data::MnistImage>>(digits.ones);

  lab::RunConfig cfg;
  cfg.runs = 2;
  cfg.epochs = 0;
  cfg.seed = 42;
  std::vector<int> seen;
  const lab::ExperimentResult res = lab::run_experiment(
      cfg, zeros, ones,
      [&seen](int run, const lab::TrainResult&) { seen.push_back(run); });
  REQUIRE(seen == std::vector<int>{0, 1});
  REQUIRE(res.runs.size() == 2);
  REQUIRE(res.aggregate.steps == std::vector<int>{0});
  // distinct run seeds give distinct initializations
  REQUIRE(res.runs[0].trajectory.probs != res.runs[1].trajectory.probs);
  REQUIRE(res.runs[0].trajectory.run_seed != res.runs[1].trajectory.run_seed);
}

TEST_CASE("loss kind names round trip") {
  using lab::LossKind;
  REQUIRE(lab::parse_loss_kind("semantic") == LossKind::kSemantic);
  REQUIRE(lab::parse_loss_kind("truncated") == LossKind::kTruncatedSemantic);
  REQUIRE(lab::parse_loss_kind("truncated_semantic") ==
          LossKind::kTruncatedSemantic);
  REQUIRE(lab::parse_loss_kind("disjunctive") == LossKind::kDisjunctive);
  REQUIRE_THROWS_AS(lab::parse_loss_kind("swish"), std::invalid_argument);
  for (const LossKind k : {LossKind::kSemantic, LossKind::kTruncatedSemantic,
                           LossKind::kDisjunctive}) {
    REQUIRE(lab::parse_loss_kind(lab::loss_kind_name(k)) == k);
  }
}
