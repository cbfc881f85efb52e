#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nesylab/config.hpp"
#include "nesylab/io.hpp"
#include "nesylab/lab.hpp"

namespace {

using namespace nesylab;

constexpr const char* kDataDirEnv = "NESYLAB_DATA_DIR";

std::vector<double> parse_prob_list(const std::string& csv) {
  std::vector<double> out;
  for (const std::string& field : lab::detail::split(csv, ',')) {
    out.push_back(lab::detail::parse_double(field, "probability"));
  }
  return out;
}

int cmd_wmc(const std::string& formula_text, const std::string& probs_text) {
  const logic::Formula f = logic::parse(formula_text);
  const logic::BernoulliVector p{parse_prob_list(probs_text)};
  std::printf("%g\n", logic::wmc(f, p));
  return 0;
}

int cmd_check(const std::string& suite, std::optional<int> trials,
              std::uint64_t seed) {
  lab::CheckResult res;
  if (suite == "theorem1") {
    res = lab::sl_ds_equivalence_check(trials.value_or(1000), 8, seed);
  } else if (suite == "theorem2") {
    res = lab::wta_step_check(trials.value_or(1000), seed);
  } else if (suite == "gradients") {
    res = lab::gradient_suite(trials.value_or(10), seed);
  } else if (suite == "oracle") {
    res = lab::wmc_oracle_suite(trials.value_or(500), seed);
  } else {
    throw CLI::ValidationError(
        "--suite must be one of theorem1, theorem2, gradients, oracle");
  }
  std::fputs(lab::check_report_text(res).c_str(), stdout);
  return res.passed() ? 0 : 1;
}

struct DigitPools {
  std::shared_ptr<const std::vector<data::MnistImage>> zeros;
  std::shared_ptr<const std::vector<data::MnistImage>> ones;
  std::string source;
};

DigitPools load_pools(bool synthetic, int synthetic_count,
                      const std::string& data_dir, std::uint64_t seed) {
  DigitPools pools;
  if (synthetic) {
    data::SynthDigits d =
        data::synth_digits(synthetic_count, seed_mix(seed, 0x5D));
    pools.zeros = std::make_shared<const std::vector<data::MnistImage>>(
        std::move(d.zeros));
    pools.ones = std::make_shared<const std::vector<data::MnistImage>>(
        std::move(d.ones));
    pools.source = "synthetic digits (" + std::to_string(synthetic_count) +
                   " per class)";
    return pools;
  }
  std::string dir = data_dir;
  if (dir.empty()) {
    if (const char* env = std::getenv(kDataDirEnv)) dir = env;
  }
  if (dir.empty()) {
    throw std::invalid_argument(
        std::string("no digit images: pass --data DIR, set ") + kDataDirEnv +
        ", or use --synthetic");
  }
  const std::string images = dir + "/train-images-idx3-ubyte";
  const std::string labels = dir + "/train-labels-idx1-ubyte";
  const std::vector<data::MnistImage> all = data::load_idx(images, labels);
  auto [zeros, ones] = data::split_zeros_ones(all);
  pools.zeros = std::make_shared<const std::vector<data::MnistImage>>(
      std::move(zeros));
  pools.ones =
      std::make_shared<const std::vector<data::MnistImage>>(std::move(ones));
  pools.source = images + " (" + std::to_string(pools.zeros->size()) +
                 " zeros, " + std::to_string(pools.ones->size()) + " ones)";
  return pools;
}

models::Checkpoint make_checkpoint(const lab::RunConfig& cfg, int run_index,
                                   const lab::TrainResult& r) {
  models::Checkpoint c;
  c.meta["loss_kind"] = lab::loss_kind_name(cfg.loss_kind);
  c.meta["run_index"] = std::to_string(run_index);
  c.meta["run_seed"] = std::to_string(r.trajectory.run_seed);
  models::NamedParams named;
  if (r.joint_net) {
    c.meta["shared_encoder"] = r.joint_net->shared_encoder ? "true" : "false";
    named = models::named_params(*r.joint_net, "joint.");
  } else {
    c.meta["binary_head"] = lab::binary_head_name(r.red_net->head);
    named = models::named_params(*r.red_net, "red.");
    for (auto& [name, tensor] : models::named_params(*r.green_net, "green.")) {
      named.emplace_back(name, tensor);
    }
  }
  for (const auto& [name, tensor] : named) c.tensors.emplace_back(name, *tensor);
  return c;
}

int cmd_train(const lab::RunConfig& cfg, const DigitPools& pools,
              const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::printf("digit source: %s\n", pools.source.c_str());

  const lab::ExperimentResult res = lab::run_experiment(
      cfg, pools.zeros, pools.ones,
      [&](int run, const lab::TrainResult& r) {
        char name[32];
        std::snprintf(name, sizeof(name), "run_%03d.ckpt", run);
        models::save_checkpoint(make_checkpoint(cfg, run, r),
                                out_dir + "/" + name);
        std::printf("run %d/%d seed %llu: %zu records", run + 1, cfg.runs,
                    static_cast<unsigned long long>(r.trajectory.run_seed),
                    r.trajectory.record_count());
        if (r.trajectory.red_digit_accuracy) {
          std::printf(", digit accuracy %.4f/%.4f",
                      *r.trajectory.red_digit_accuracy,
                      *r.trajectory.green_digit_accuracy);
        }
        std::printf("\n");
        std::fflush(stdout);
      });

  const std::vector<lab::Trajectory> trajs = lab::trajectories(res.runs);
  write_file_atomic(out_dir + "/trajectory.csv", lab::trajectory_csv(trajs));
  write_file_atomic(out_dir + "/aggregate.csv",
                    lab::aggregate_csv(res.aggregate));
  write_file_atomic(out_dir + "/config.txt", lab::run_config_text(cfg));

  if (cfg.loss_kind == lab::LossKind::kDisjunctive) {
    // align the emergent output order across runs before averaging
    std::vector<lab::Trajectory> ranked;
    ranked.reserve(trajs.size());
    for (const lab::Trajectory& t : trajs) {
      ranked.push_back(lab::apply_output_ranking(t));
    }
    write_file_atomic(out_dir + "/aggregate_ranked.csv",
                      lab::aggregate_csv(lab::aggregate_runs(ranked)));
  } else {
    std::string acc = "run,red_accuracy,green_accuracy\n";
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      acc += std::to_string(i);
      acc += ',';
      acc += lab::fmt_double(*trajs[i].red_digit_accuracy);
      acc += ',';
      acc += lab::fmt_double(*trajs[i].green_digit_accuracy);
      acc += '\n';
    }
    write_file_atomic(out_dir + "/digit_accuracy.csv", acc);
  }
  std::printf("wrote %s/trajectory.csv and aggregate.csv\n", out_dir.c_str());
  return 0;
}

int cmd_report(const std::string& dir) {
  const std::vector<lab::Trajectory> trajs =
      lab::parse_trajectory_csv(read_file(dir + "/trajectory.csv"));
  write_file_atomic(dir + "/aggregate.csv",
                    lab::aggregate_csv(lab::aggregate_runs(trajs)));

  std::string bias;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    bias += "run " + std::to_string(i) + "\n";
    bias += lab::bias_report_text(lab::detect_deterministic_bias(trajs[i]));
  }
  write_file_atomic(dir + "/bias.txt", bias);
  std::fputs(bias.c_str(), stdout);
  std::printf("recomputed %s/aggregate.csv from %zu runs\n", dir.c_str(),
              trajs.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weighted-model-counting losses on the traffic-light task"};
  app.require_subcommand(1);

  auto* wmc = app.add_subcommand(
      "wmc", "evaluate the weighted model count of a formula");
  std::string formula_text, probs_text;
  wmc->add_option("--formula", formula_text, "propositional formula")
      ->required();
  wmc->add_option("--probs", probs_text,
                  "comma-separated per-variable probabilities")
      ->required();

  auto* train = app.add_subcommand("train", "run a training experiment");
  std::string config_path, out_dir = "out", data_dir, loss_name;
  bool synthetic = false;
  int synthetic_count = 512;
  std::optional<double> lr_flag;
  std::optional<int> batch_flag, epochs_flag, runs_flag, eval_every_flag;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> head_flag, shared_flag;
  train->add_option("--loss", loss_name,
                    "semantic, truncated, or disjunctive");
  train->add_option("--config", config_path, "key = value settings file");
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--data", data_dir, "directory with IDX digit files");
  train->add_flag("--synthetic", synthetic,
                  "use generated digits instead of image files");
  train->add_option("--synthetic-count", synthetic_count,
                    "generated images per class");
  train->add_option("--lr", lr_flag, "learning rate");
  train->add_option("--batch-size", batch_flag, "minibatch size");
  train->add_option("--epochs", epochs_flag, "training epochs");
  train->add_option("--runs", runs_flag, "independent runs");
  train->add_option("--eval-every", eval_every_flag,
                    "updates between evaluations");
  train->add_option("--seed", seed_flag, "experiment seed");
  train->add_option("--binary-head", head_flag,
                    "two_unit_normalized or single_logit");
  train->add_option("--shared-encoder", shared_flag,
                    "true or false (joint net only)");

  auto* check = app.add_subcommand("check", "run a verification suite");
  std::string suite;
  std::optional<int> trials;
  std::uint64_t check_seed = 0;
  check->add_option("--suite", suite,
                    "theorem1, theorem2, gradients, or oracle")
      ->required();
  check->add_option("--trials", trials, "trial or instance count");
  check->add_option("--seed", check_seed, "suite seed");

  auto* report = app.add_subcommand(
      "report", "recompute aggregates and bias reports from trajectory.csv");
  std::string report_dir;
  report->add_option("--dir", report_dir, "directory with trajectory.csv")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (wmc->parsed()) return cmd_wmc(formula_text, probs_text);
    if (check->parsed()) return cmd_check(suite, trials, check_seed);
    if (report->parsed()) return cmd_report(report_dir);

    // train: config file first, then flag overrides
    lab::RunConfig cfg;
    if (!config_path.empty()) {
      cfg = lab::parse_run_config(read_file(config_path), cfg);
    }
    if (!loss_name.empty()) cfg.loss_kind = lab::parse_loss_kind(loss_name);
    if (lr_flag) cfg.lr = *lr_flag;
    if (batch_flag) cfg.batch_size = *batch_flag;
    if (epochs_flag) cfg.epochs = *epochs_flag;
    if (runs_flag) cfg.runs = *runs_flag;
    if (eval_every_flag) cfg.eval_every = *eval_every_flag;
    if (seed_flag) cfg.seed = *seed_flag;
    if (head_flag) cfg.binary_head = lab::parse_binary_head(*head_flag);
    if (shared_flag) {
      cfg.shared_encoder =
          lab::detail::parse_bool(*shared_flag, "shared_encoder");
    }
    lab::validate(cfg);

    const DigitPools pools =
        load_pools(synthetic, synthetic_count, data_dir, cfg.seed);
    return cmd_train(cfg, pools, out_dir);
  } catch (const logic::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
