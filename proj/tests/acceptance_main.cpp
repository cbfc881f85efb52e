// Acceptance gate: one pass/fail line per criterion, thresholds pinned
// below. Exit status 0 only when every criterion holds.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "nesylab/lab.hpp"

using namespace nesylab;

namespace {

constexpr int kEquivalenceTrials = 1000;
constexpr int kEquivalenceMaxVars = 8;
constexpr int kWtaTrials = 1000;
constexpr int kGradientInstances = 10;
constexpr int kOracleFormulas = 500;
constexpr double kSuiteBudgetSeconds = 30.0;

constexpr int kDeskRuns = 5;
constexpr int kDeskEpochs = 5;
// The winner's takeover time is long-tailed in the initialization draw; a
// near-tied draw can need several times the updates of a typical one.
constexpr int kWtaEpochs = 25;
constexpr int kDeskEvalEvery = 10;
constexpr int kSynthPerClass = 512;

constexpr double kTopOutputFloor = 0.8;
constexpr double kOtherOutputCeil = 0.1;
constexpr double kViolatingOutputFloor = 0.8;
constexpr double kTrueWorldFloor = 0.9;
constexpr double kDigitAccuracyFloor = 0.95;
constexpr double kBiasTailFraction = 0.1;
constexpr double kBiasTol = 0.05;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool criterion(int number, const char* label, bool ok,
               const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", number,
              label, detail.c_str());
  std::fflush(stdout);
  return ok;
}

struct Pools {
  std::shared_ptr<const std::vector<data::MnistImage>> zeros;
  std::shared_ptr<const std::vector<data::MnistImage>> ones;
  std::string source;
};

Pools synthetic_pools(std::uint64_t seed) {
  data::SynthDigits d = data::synth_digits(kSynthPerClass, seed);
  Pools p;
  p.zeros =
      std::make_shared<const std::vector<data::MnistImage>>(std::move(d.zeros));
  p.ones =
      std::make_shared<const std::vector<data::MnistImage>>(std::move(d.ones));
  char buf[64];
  std::snprintf(buf, sizeof(buf), "synthetic digits (%d per class)",
                kSynthPerClass);
  p.source = buf;
  return p;
}

// Real digit images when NESYLAB_DATA_DIR points at IDX files, otherwise
// the synthetic pool, mirroring the CLI's resolution order.
Pools acceptance_pools(std::uint64_t seed) {
  const char* env = std::getenv("NESYLAB_DATA_DIR");
  if (env != nullptr && *env != '\0') {
    const std::filesystem::path dir(env);
    const auto images = dir / "train-images-idx3-ubyte";
    const auto labels = dir / "train-labels-idx1-ubyte";
    std::error_code ec;
    if (std::filesystem::exists(images, ec) &&
        std::filesystem::exists(labels, ec)) {
      const std::vector<data::MnistImage> all =
          data::load_idx(images.string(), labels.string());
      auto [zeros, ones] = data::split_zeros_ones(all);
      Pools p;
      p.zeros = std::make_shared<const std::vector<data::MnistImage>>(
          std::move(zeros));
      p.ones = std::make_shared<const std::vector<data::MnistImage>>(
          std::move(ones));
      p.source = "mnist (" + dir.string() + ")";
      return p;
    }
  }
  return synthetic_pools(seed_mix(seed, 0x5D));
}

lab::RunConfig desk_config(lab::LossKind kind, std::uint64_t seed) {
  lab::RunConfig cfg;
  cfg.loss_kind = kind;
  cfg.runs = kDeskRuns;
  cfg.epochs = kDeskEpochs;
  cfg.eval_every = kDeskEvalEvery;
  cfg.seed = seed;
  return cfg;
}

bool check_suite(int number, const char* label, const lab::CheckResult& r,
                 double elapsed, bool timed) {
  char buf[160];
  bool ok = r.passed();
  if (timed) {
    ok = ok && elapsed < kSuiteBudgetSeconds;
    std::snprintf(buf, sizeof(buf),
                  "%ld trials, %ld violations, max delta %.3g, %.1f s < %.0f s",
                  r.trials, r.violations, r.max_delta, elapsed,
                  kSuiteBudgetSeconds);
  } else {
    std::snprintf(buf, sizeof(buf),
                  "%ld trials, %ld comparisons, %ld violations, max delta %.3g",
                  r.trials, r.comparisons, r.violations, r.max_delta);
  }
  if (!r.counterexamples.empty()) {
    std::printf("  counterexample: %s\n", r.counterexamples[0].c_str());
  }
  return criterion(number, label, ok, buf);
}

struct CollapseStats {
  double top_min = 1.0;      // smallest top-ranked mean over satisfying parts
  double other_max = 0.0;    // largest non-top satisfying mean
  double violating = 0.0;    // fourth output on the violating partition
  bool ok = false;
};

CollapseStats collapse_stats(const lab::ExperimentResult& res) {
  std::vector<lab::Trajectory> ranked;
  ranked.reserve(res.runs.size());
  for (const lab::TrainResult& run : res.runs) {
    ranked.push_back(lab::apply_output_ranking(run.trajectory));
  }
  const lab::AggregateTrajectory agg = lab::aggregate_runs(ranked);
  const lab::ProbGrid& fin = agg.mean.back();

  CollapseStats s;
  for (int p = 0; p < 3; ++p) {
    s.top_min = std::min(s.top_min, fin[p][0]);
    s.other_max = std::max({s.other_max, fin[p][1], fin[p][2]});
  }
  s.violating = fin[3][3];
  s.ok = s.top_min >= kTopOutputFloor && s.other_max <= kOtherOutputCeil &&
         s.violating >= kViolatingOutputFloor;
  return s;
}

}  // namespace

int main() {
  bool all = true;
  const Pools pools = acceptance_pools(7);
  std::printf("digit source: %s\n", pools.source.c_str());
  std::fflush(stdout);

  {
    const auto t0 = Clock::now();
    const lab::CheckResult r =
        lab::sl_ds_equivalence_check(kEquivalenceTrials, kEquivalenceMaxVars, 11);
    all &= check_suite(1, "semantic loss equals disjunctive supervision", r,
                       seconds_since(t0), true);
  }
  {
    const auto t0 = Clock::now();
    const lab::CheckResult r = lab::wta_step_check(kWtaTrials, 22);
    all &= check_suite(2, "gradient step preserves winner ordering", r,
                       seconds_since(t0), true);
  }
  {
    const lab::CheckResult r = lab::gradient_suite(kGradientInstances, 33);
    all &= check_suite(3, "gradients match finite differences", r, 0.0, false);
  }
  {
    const lab::CheckResult r = lab::wmc_oracle_suite(kOracleFormulas, 44);
    all &= check_suite(4, "wmc matches enumerated world masses", r, 0.0, false);
  }

  {
    auto cfg = desk_config(lab::LossKind::kDisjunctive, 1001);
    cfg.epochs = kWtaEpochs;
    const CollapseStats main_run =
        collapse_stats(lab::run_experiment(cfg, pools.zeros, pools.ones));

    const Pools synth = synthetic_pools(seed_mix(4004, 0x5D));
    auto variant_cfg = cfg;
    variant_cfg.seed = 4004;
    const CollapseStats variant = collapse_stats(
        lab::run_experiment(variant_cfg, synth.zeros, synth.ones));

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "top min %.3f >= %.1f, other max %.3f <= %.1f, violating "
                  "%.3f >= %.1f; synthetic variant %.3f/%.3f/%.3f",
                  main_run.top_min, kTopOutputFloor, main_run.other_max,
                  kOtherOutputCeil, main_run.violating, kViolatingOutputFloor,
                  variant.top_min, variant.other_max, variant.violating);
    all &= criterion(5, "disjunctive training collapses to one winner",
                     main_run.ok && variant.ok, buf);
  }

  {
    const auto cfg = desk_config(lab::LossKind::kSemantic, 2002);
    const lab::ExperimentResult res =
        lab::run_experiment(cfg, pools.zeros, pools.ones);
    const lab::ProbGrid& fin = res.aggregate.mean.back();

    double true_min = 1.0;
    for (int p = 0; p < 4; ++p) true_min = std::min(true_min, fin[p][p]);
    double red_acc = 0.0;
    double green_acc = 0.0;
    bool have_acc = true;
    for (const lab::TrainResult& run : res.runs) {
      have_acc = have_acc && run.trajectory.red_digit_accuracy.has_value() &&
                 run.trajectory.green_digit_accuracy.has_value();
      if (!have_acc) break;
      red_acc += *run.trajectory.red_digit_accuracy;
      green_acc += *run.trajectory.green_digit_accuracy;
    }
    red_acc /= cfg.runs;
    green_acc /= cfg.runs;

    const bool ok = true_min >= kTrueWorldFloor && have_acc &&
                    red_acc >= kDigitAccuracyFloor &&
                    green_acc >= kDigitAccuracyFloor;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "true-world min %.3f >= %.1f, digit accuracy %.3f/%.3f >= "
                  "%.2f",
                  true_min, kTrueWorldFloor, red_acc, green_acc,
                  kDigitAccuracyFloor);
    all &= criterion(6, "semantic training recovers the true world", ok, buf);
  }

  {
    const auto cfg = desk_config(lab::LossKind::kTruncatedSemantic, 3003);
    const lab::ExperimentResult res =
        lab::run_experiment(cfg, pools.zeros, pools.ones);

    int biased = 0;
    int world_counts[4] = {0, 0, 0, 0};
    for (const lab::TrainResult& run : res.runs) {
      const lab::BiasReport rep = lab::detect_deterministic_bias(
          run.trajectory, kBiasTailFraction, kBiasTol);
      if (rep.biased) {
        ++biased;
        ++world_counts[rep.biased_world];
      }
    }
    std::string worlds;
    for (int w = 0; w < 4; ++w) {
      if (world_counts[w] == 0) continue;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%sw%d x%d", worlds.empty() ? "" : ", ",
                    w, world_counts[w]);
      worlds += buf;
    }
    if (worlds.empty()) worlds = "none";
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "biased %d/%d runs, collapsed world %s; both-off expected, "
                  "not asserted",
                  biased, cfg.runs, worlds.c_str());
    all &= criterion(7, "truncated training shows deterministic bias",
                     biased == cfg.runs, buf);
  }

  {
    auto cfg = desk_config(lab::LossKind::kTruncatedSemantic, 5005);
    cfg.runs = 2;
    cfg.epochs = 1;
    const lab::ExperimentResult a =
        lab::run_experiment(cfg, pools.zeros, pools.ones);
    const lab::ExperimentResult b =
        lab::run_experiment(cfg, pools.zeros, pools.ones);
    const std::string csv_a = lab::trajectory_csv(lab::trajectories(a.runs));
    const std::string csv_b = lab::trajectory_csv(lab::trajectories(b.runs));
    const bool ok = !csv_a.empty() && csv_a == csv_b;
    char buf[96];
    std::snprintf(buf, sizeof(buf),
                  "%zu-byte trajectory CSV identical across reruns",
                  csv_a.size());
    all &= criterion(8, "identical seeds give identical trajectories", ok, buf);
  }

  {
    const data::TrafficDataset ds =
        data::build_traffic_dataset(pools.zeros, pools.ones, seed_mix(9009, 0));
    int test_per_config[4] = {0, 0, 0, 0};
    for (const data::TrafficExample& e : ds.test) ++test_per_config[e.config];
    long negatives = 0;
    for (const data::TrafficExample& e : ds.train) negatives += e.y == 0;
    const double frac =
        static_cast<double>(negatives) / static_cast<double>(ds.train.size());

    const bool ok = ds.train.size() == 3200 && ds.test.size() == 200 &&
                    test_per_config[0] == 50 && test_per_config[1] == 50 &&
                    test_per_config[2] == 50 && test_per_config[3] == 50 &&
                    frac == 0.5;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "%zu train / %zu test, test per config %d/%d/%d/%d, train "
                  "negative fraction %.3f",
                  ds.train.size(), ds.test.size(), test_per_config[0],
                  test_per_config[1], test_per_config[2], test_per_config[3],
                  frac);
    all &= criterion(9, "dataset matches the stated contract", ok, buf);
  }

  std::printf("acceptance: %s\n", all ? "all criteria passed" : "FAILED");
  return all ? 0 : 1;
}
