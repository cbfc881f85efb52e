#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nesylab/autodiff.hpp"
#include "nesylab/data.hpp"
#include "nesylab/logic.hpp"
#include "nesylab/models.hpp"
#include "nesylab/optim.hpp"
#include "nesylab/rng.hpp"
#include "nesylab/tensor.hpp"
#include "nesylab/trajectory.hpp"

namespace nesylab::lab {

struct RunConfig {
  LossKind loss_kind = LossKind::kSemantic;
  double lr = 0.001;
  int batch_size = 32;
  int epochs = 5;
  int runs = 20;
  int eval_every = 1;  // in optimizer updates
  std::uint64_t seed = 0;
  models::BinaryHead binary_head = models::BinaryHead::kTwoUnitNormalized;
  bool shared_encoder = true;
};

inline void validate(const RunConfig& cfg) {
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) {
    throw std::invalid_argument("lr must be finite and non-negative");
  }
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (cfg.runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (cfg.eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
}

// Nets are populated per loss kind: the factorized losses train one digit
// net per light, disjunctive supervision trains the joint net.
struct TrainResult {
  Trajectory trajectory;
  std::optional<models::BinaryDigitNet> red_net;
  std::optional<models::BinaryDigitNet> green_net;
  std::optional<models::JointWorldNet> joint_net;
};

// One training run: minibatch Adam over the train split with an evaluation
// record before the first update and after every eval_every-th one.
// Identical (config, dataset, run_seed) triples give bit-identical results.
inline TrainResult train_run(const RunConfig& cfg,
                             const data::TrafficDataset& dataset,
                             std::uint64_t run_seed) {
  validate(cfg);
  if (cfg.epochs > 0 && dataset.train.empty()) {
    throw std::invalid_argument("cannot train on an empty train split");
  }
  std::array<std::vector<const data::TrafficExample*>, 4> test_by_config;
  for (const data::TrafficExample& e : dataset.test) {
    test_by_config[static_cast<std::size_t>(e.config)].push_back(&e);
  }
  for (int c = 0; c < 4; ++c) {
    if (test_by_config[static_cast<std::size_t>(c)].empty()) {
      throw std::invalid_argument(
          "test split must cover every light configuration; config " +
          std::to_string(c) + " is missing");
    }
  }

  const models::ClassSpec spec = models::traffic_class_spec();
  const bool factorized = cfg.loss_kind != LossKind::kDisjunctive;

  Rng init_rng(seed_mix(run_seed, 0xA1));
  Rng order_rng(seed_mix(run_seed, 0xB2));

  TrainResult result;
  std::vector<ad::Tensor*> params;
  if (factorized) {
    result.red_net.emplace(cfg.binary_head);
    result.green_net.emplace(cfg.binary_head);
    models::init_params(init_rng, *result.red_net);
    models::init_params(init_rng, *result.green_net);
    params = result.red_net->params();
    for (ad::Tensor* p : result.green_net->params()) params.push_back(p);
  } else {
    result.joint_net.emplace(cfg.shared_encoder);
    models::init_params(init_rng, *result.joint_net);
    params = result.joint_net->params();
  }

  ad::AdamState opt;
  opt.lr = cfg.lr;

  Trajectory& traj = result.trajectory;
  traj.loss_kind = cfg.loss_kind;
  traj.run_seed = run_seed;

  auto evaluate = [&](int step) {
    ProbGrid rec{};
    for (int c = 0; c < 4; ++c) {
      const auto& group = test_by_config[static_cast<std::size_t>(c)];
      for (const data::TrafficExample* e : group) {
        std::vector<double> q;
        if (factorized) {
          const double pr = models::binary_digit_forward(
              *result.red_net, dataset.red_image(*e).pixels);
          const double pg = models::binary_digit_forward(
              *result.green_net, dataset.green_image(*e).pixels);
          q = models::factorized_world_probs(pr, pg);
        } else {
          q = models::joint_world_forward(*result.joint_net,
                                          dataset.red_image(*e).pixels,
                                          dataset.green_image(*e).pixels);
        }
        for (int w = 0; w < 4; ++w) rec[c][w] += q[static_cast<std::size_t>(w)];
      }
      for (int w = 0; w < 4; ++w) {
        rec[c][w] /= static_cast<double>(group.size());
      }
    }
    traj.steps.push_back(step);
    traj.probs.push_back(rec);
  };

  evaluate(0);

  std::vector<std::uint32_t> order(dataset.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = static_cast<std::uint32_t>(i);
  }

  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  int updates = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t bsz = std::min(batch, order.size() - start);

      ad::Tape t;
      models::BinaryNodes red_nodes{}, green_nodes{};
      models::JointNodes joint_nodes{};
      std::vector<int> param_ids;
      if (factorized) {
        red_nodes = models::bind(t, *result.red_net);
        green_nodes = models::bind(t, *result.green_net);
        param_ids = models::param_nodes(red_nodes);
        for (int id : models::param_nodes(green_nodes)) param_ids.push_back(id);
      } else {
        joint_nodes = models::bind(t, *result.joint_net);
        param_ids = models::param_nodes(joint_nodes, cfg.shared_encoder);
      }

      auto abort_run = [&](const std::string& why) {
        char msg[224];
        std::snprintf(msg, sizeof(msg),
                      "non-finite loss (%s) at update %d (epoch %d, %s, "
                      "run seed %llu)",
                      why.c_str(), updates + 1, epoch,
                      loss_kind_name(cfg.loss_kind),
                      static_cast<unsigned long long>(run_seed));
        return std::runtime_error(msg);
      };

      int loss_sum = -1;
      try {
        for (std::size_t i = 0; i < bsz; ++i) {
          const data::TrafficExample& e = dataset.train[order[start + i]];
          int sample = -1;
          if (factorized) {
            const int pr = models::binary_forward_node(
                t, red_nodes, cfg.binary_head,
                t.leaf(dataset.red_image(e).pixels));
            const int pg = models::binary_forward_node(
                t, green_nodes, cfg.binary_head,
                t.leaf(dataset.green_image(e).pixels));
            if (cfg.loss_kind == LossKind::kSemantic) {
              sample = models::semantic_loss_node(t, spec, e.y, {pr, pg});
            } else if (e.y == 1) {
              // truncated loss: negatives contribute exactly zero
              sample = models::semantic_loss_node(t, spec, 1, {pr, pg});
            }
          } else {
            const int q = models::joint_forward_node(
                t, joint_nodes, t.leaf(dataset.red_image(e).pixels),
                t.leaf(dataset.green_image(e).pixels));
            sample = models::disjunctive_supervision_loss_node(
                t, q, spec.table.betas[static_cast<std::size_t>(e.y)]);
          }
          if (sample >= 0) {
            loss_sum = loss_sum < 0 ? sample : t.add(loss_sum, sample);
          }
        }
      } catch (const std::domain_error& e) {
        // the probability floor lifts every real input above zero, so a
        // domain error from the forward graph means a value went NaN
        throw abort_run(e.what());
      }

      // A truncated batch of negatives only has no loss node; its gradient
      // is zero but the optimizer still steps.
      if (loss_sum >= 0) {
        const int loss =
            t.scalar_mul(1.0 / static_cast<double>(bsz), loss_sum);
        const double v = t.value(loss).data[0];
        if (!std::isfinite(v)) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "value %g", v);
          throw abort_run(buf);
        }
        t.backward(loss);
      }

      std::vector<const ad::Tensor*> grads;
      grads.reserve(param_ids.size());
      for (int id : param_ids) grads.push_back(&t.grad(id));
      ad::adam_step(opt, params, grads);

      ++updates;
      if (updates % cfg.eval_every == 0) evaluate(updates);
    }
  }

  if (factorized) {
    std::size_t red_ok = 0, green_ok = 0;
    for (const data::TrafficExample& e : dataset.test) {
      const data::MnistImage& ri = dataset.red_image(e);
      const data::MnistImage& gi = dataset.green_image(e);
      const bool red_on =
          models::binary_digit_forward(*result.red_net, ri.pixels) > 0.5;
      const bool green_on =
          models::binary_digit_forward(*result.green_net, gi.pixels) > 0.5;
      if (red_on == (ri.digit_label == 1)) ++red_ok;
      if (green_on == (gi.digit_label == 1)) ++green_ok;
    }
    const double n = static_cast<double>(dataset.test.size());
    traj.red_digit_accuracy = static_cast<double>(red_ok) / n;
    traj.green_digit_accuracy = static_cast<double>(green_ok) / n;
  }
  return result;
}

struct ExperimentResult {
  RunConfig config;
  std::vector<TrainResult> runs;
  AggregateTrajectory aggregate;
};

inline std::vector<Trajectory> trajectories(
    const std::vector<TrainResult>& runs) {
  std::vector<Trajectory> out;
  out.reserve(runs.size());
  for (const TrainResult& r : runs) out.push_back(r.trajectory);
  return out;
}

// Repeated runs from decorrelated per-run seeds; the dataset is rebuilt for
// every run from its run seed.
inline ExperimentResult run_experiment(
    const RunConfig& cfg,
    std::shared_ptr<const std::vector<data::MnistImage>> zeros,
    std::shared_ptr<const std::vector<data::MnistImage>> ones,
    const std::function<void(int, const TrainResult&)>& per_run = {}) {
  validate(cfg);
  ExperimentResult out;
  out.config = cfg;
  for (int r = 0; r < cfg.runs; ++r) {
    const std::uint64_t run_seed =
        seed_mix(cfg.seed, static_cast<std::uint64_t>(r));
    const data::TrafficDataset ds =
        data::build_traffic_dataset(zeros, ones, run_seed);
    TrainResult tr = train_run(cfg, ds, run_seed);
    if (per_run) per_run(r, tr);
    out.runs.push_back(std::move(tr));
  }
  out.aggregate = aggregate_runs(trajectories(out.runs));
  return out;
}

// --- check suites ---

inline constexpr double kTheorem1Tol = 1e-9;
inline constexpr double kWtaTieTol = 1e-9;
inline constexpr double kOracleComplementTol = 1e-12;
inline constexpr double kGradTol = 1e-3;
inline constexpr double kGradStep = 1e-5;

struct CheckResult {
  std::string suite;
  long trials = 0;
  long comparisons = 0;
  long violations = 0;
  double max_delta = 0.0;
  std::vector<std::string> counterexamples;

  bool passed() const { return violations == 0; }
};

namespace detail {

inline void add_counterexample(CheckResult& res, std::string text) {
  if (res.counterexamples.size() < 10) {
    res.counterexamples.push_back(std::move(text));
  }
}

}  // namespace detail

inline std::string check_report_text(const CheckResult& r) {
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "%s: %s (%ld trials, %ld comparisons, %ld violations, "
                "max delta %.3g)\n",
                r.suite.c_str(), r.passed() ? "pass" : "FAIL", r.trials,
                r.comparisons, r.violations, r.max_delta);
  std::string out = buf;
  for (const std::string& c : r.counterexamples) {
    out += "  counterexample: ";
    out += c;
    out += '\n';
  }
  return out;
}

// Random DNF partitions: the exact-enumeration semantic loss must agree
// with disjunctive supervision on the induced world distribution for every
// class whose world set is non-empty.
inline CheckResult sl_ds_equivalence_check(int n_trials, int max_vars,
                                           std::uint64_t seed) {
  if (max_vars < 1 || max_vars > 8) {
    throw std::invalid_argument("max_vars must be in [1, 8]");
  }
  Rng rng(seed);
  CheckResult res;
  res.suite = "theorem1";
  for (int trial = 0; trial < n_trials; ++trial) {
    const std::size_t n = 1 + rng.index(static_cast<std::size_t>(max_vars));
    const std::size_t worlds = std::size_t{1} << n;
    const std::size_t k = 1 + rng.index(std::min<std::size_t>(4, worlds));

    std::vector<std::size_t> label(worlds);
    for (std::size_t& l : label) l = rng.index(k);

    std::vector<std::string> vars;
    for (std::size_t i = 0; i < n; ++i) vars.push_back("x" + std::to_string(i));
    std::vector<logic::Formula> classes;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<std::uint8_t> member(worlds);
      for (std::size_t m = 0; m < worlds; ++m) member[m] = label[m] == c;
      classes.push_back(logic::dnf_for_worlds(member, vars));
    }
    const models::ClassSpec spec = models::make_class_spec(classes, vars);

    logic::BernoulliVector p;
    for (std::size_t i = 0; i < n; ++i) p.probs.push_back(rng.uniform());
    const std::vector<double> q = logic::world_distribution(p);

    for (std::size_t y = 0; y < k; ++y) {
      bool empty = true;
      for (std::uint8_t b : spec.table.betas[y]) empty = empty && !b;
      if (empty) continue;  // zero mass in every world; the loss is undefined
      const double sl = models::semantic_loss(spec, static_cast<int>(y), p);
      const double ds =
          models::disjunctive_supervision_loss(q, spec.table.betas[y]);
      const double delta = std::abs(sl - ds);
      ++res.comparisons;
      if (delta > res.max_delta) res.max_delta = delta;
      if (!(delta < kTheorem1Tol)) {
        ++res.violations;
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "trial %d: n=%zu class %zu: |%.17g - %.17g| = %.3g",
                      trial, n, y, sl, ds, delta);
        detail::add_counterexample(res, buf);
      }
    }
    ++res.trials;
  }
  return res;
}

struct WtaTrial {
  ad::Tensor weights;  // [4, d]
  ad::Tensor bias;     // [4]
  ad::Tensor input;    // [d]
  std::vector<std::uint8_t> acceptable;
  double lr = 0.01;
};

// One plain gradient step on the disjunctive loss of a linear softmax
// layer: for acceptable outputs m, n the probability ratio p(m)/p(n) must
// move toward the currently larger one. Near-ties are skipped.
inline void wta_check_trial(const WtaTrial& trial, CheckResult& res) {
  ad::Tape t;
  const int w = t.leaf(trial.weights);
  const int b = t.leaf(trial.bias);
  const int x = t.leaf(trial.input);
  const int z = t.add(t.matmul(w, x), b);
  const int q = t.softmax(z);
  t.backward(models::disjunctive_supervision_loss_node(t, q, trial.acceptable));

  const std::vector<double>& p = t.value(q).data;
  const std::vector<double>& z0 = t.value(z).data;
  const ad::Tensor& gw = t.grad(w);
  const ad::Tensor& gb = t.grad(b);

  const std::size_t d = trial.input.shape[0];
  const std::size_t outs = trial.bias.shape[0];
  std::vector<double> z1(outs);
  for (std::size_t m = 0; m < outs; ++m) {
    double acc = trial.bias.data[m] - trial.lr * gb.data[m];
    for (std::size_t i = 0; i < d; ++i) {
      acc += (trial.weights.data[m * d + i] - trial.lr * gw.data[m * d + i]) *
             trial.input.data[i];
    }
    z1[m] = acc;
  }

  for (std::size_t m = 0; m < outs; ++m) {
    for (std::size_t n = m + 1; n < outs; ++n) {
      if (!trial.acceptable[m] || !trial.acceptable[n]) continue;
      const double gap = p[m] - p[n];
      if (std::abs(gap) <= kWtaTieTol) continue;
      // p(m)/p(n) = exp(z_m - z_n), so compare logit gaps directly
      const double before = z0[m] - z0[n];
      const double after = z1[m] - z1[n];
      ++res.comparisons;
      const bool ok = gap > 0.0 ? after > before : after < before;
      if (!ok) {
        ++res.violations;
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "outputs %zu,%zu: p=(%.6g,%.6g) logit gap %.17g -> %.17g",
                      m, n, p[m], p[n], before, after);
        detail::add_counterexample(res, buf);
      }
    }
  }
}

inline CheckResult wta_step_check(int n_trials, std::uint64_t seed) {
  Rng rng(seed);
  CheckResult res;
  res.suite = "theorem2";
  const std::size_t d = 6;
  for (int trial = 0; trial < n_trials; ++trial) {
    WtaTrial tr;
    tr.weights = ad::Tensor({4, d});
    for (double& v : tr.weights.data) v = rng.uniform(-0.5, 0.5);
    tr.bias = ad::Tensor({4});
    for (double& v : tr.bias.data) v = rng.uniform(-0.5, 0.5);
    tr.input = ad::Tensor({d});
    for (double& v : tr.input.data) v = rng.uniform(-1.0, 1.0);

    // 2 or 3 acceptable outputs; with all four acceptable the loss is
    // constant zero and nothing moves
    tr.acceptable.assign(4, 0);
    std::vector<std::uint32_t> idx{0, 1, 2, 3};
    rng.shuffle(idx);
    const std::size_t count = 2 + rng.index(2);
    for (std::size_t i = 0; i < count; ++i) tr.acceptable[idx[i]] = 1;

    wta_check_trial(tr, res);
    ++res.trials;
  }
  return res;
}

namespace detail {

inline double rel_err(double a, double b) {
  double den = std::abs(a);
  if (std::abs(b) > den) den = std::abs(b);
  if (den < 1e-6) den = 1e-6;
  return std::abs(a - b) / den;
}

using TapeBuild = std::function<int(ad::Tape&, const std::vector<int>&)>;

// Central differences against the tape gradient, every coordinate of every
// input.
inline void fd_check_inputs(const char* name, const TapeBuild& build,
                            const std::vector<ad::Tensor>& inputs,
                            CheckResult& res) {
  ad::Tape t;
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (const ad::Tensor& in : inputs) ids.push_back(t.leaf(in));
  t.backward(build(t, ids));

  auto value = [&build](const std::vector<ad::Tensor>& xs) {
    ad::Tape tt;
    std::vector<int> xid;
    xid.reserve(xs.size());
    for (const ad::Tensor& in : xs) xid.push_back(tt.leaf(in));
    return tt.value(build(tt, xid)).data[0];
  };

  std::vector<ad::Tensor> xs = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const ad::Tensor& g = t.grad(ids[i]);
    for (std::size_t j = 0; j < inputs[i].data.size(); ++j) {
      const double orig = xs[i].data[j];
      xs[i].data[j] = orig + kGradStep;
      const double hi = value(xs);
      xs[i].data[j] = orig - kGradStep;
      const double lo = value(xs);
      xs[i].data[j] = orig;
      const double fd = (hi - lo) / (2.0 * kGradStep);
      const double err = rel_err(g.data[j], fd);
      ++res.comparisons;
      if (err > res.max_delta) res.max_delta = err;
      if (!(err < kGradTol)) {
        ++res.violations;
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "%s input %zu coord %zu: tape %.10g vs fd %.10g",
                      name, i, j, g.data[j], fd);
        add_counterexample(res, buf);
      }
    }
  }
  ++res.trials;
}

inline ad::Tensor rand_tensor(Rng& rng, std::vector<std::size_t> shape,
                              double lo, double hi) {
  ad::Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// both signs, magnitude in [margin, 1]; keeps relu and clamp kinks at a
// safe distance from the finite-difference probes
inline ad::Tensor rand_tensor_off_zero(Rng& rng, std::vector<std::size_t> shape,
                                       double margin) {
  ad::Tensor t(std::move(shape));
  for (double& v : t.data) {
    const double mag = rng.uniform(margin, 1.0);
    v = rng.index(2) == 0 ? mag : -mag;
  }
  return t;
}

// entries of every 2x2 window separated enough that the argmax is stable
// under the probe step
inline ad::Tensor rand_pool_input(Rng& rng, std::vector<std::size_t> shape) {
  while (true) {
    ad::Tensor t = rand_tensor(rng, shape, -1.0, 1.0);
    const std::size_t h = t.shape[1], w = t.shape[2];
    bool ok = true;
    for (std::size_t c = 0; c < t.shape[0] && ok; ++c) {
      for (std::size_t r = 0; r + 1 < h && ok; r += 2) {
        for (std::size_t col = 0; col + 1 < w && ok; col += 2) {
          const double* base = t.data.data() + (c * h + r) * w + col;
          const double vals[4] = {base[0], base[1], base[w], base[w + 1]};
          for (int a = 0; a < 4 && ok; ++a) {
            for (int b = a + 1; b < 4; ++b) {
              if (std::abs(vals[a] - vals[b]) < 1e-3) {
                ok = false;
                break;
              }
            }
          }
        }
      }
    }
    if (ok) return t;
  }
}

// Pipeline inputs are not gap-protected, so a pooling argmax can flip
// inside the probe interval. Such a kink sits at some fixed distance d < h
// from the point and drops out once the step shrinks below d; a wrong
// analytic gradient keeps failing at every step size.
inline void pipeline_fd_coord(const std::function<double()>& value,
                              double* coord, double analytic, const char* name,
                              CheckResult& res) {
  const double orig = *coord;
  double best_err = -1.0;
  double best_fd = 0.0;
  for (const double h : {kGradStep, kGradStep / 10.0, kGradStep / 100.0}) {
    *coord = orig + h;
    const double hi = value();
    *coord = orig - h;
    const double lo = value();
    *coord = orig;
    const double fd = (hi - lo) / (2.0 * h);
    const double err = rel_err(analytic, fd);
    if (best_err < 0.0 || err < best_err) {
      best_err = err;
      best_fd = fd;
    }
    if (err < kGradTol) break;
  }
  ++res.comparisons;
  if (best_err > res.max_delta) res.max_delta = best_err;
  if (!(best_err < kGradTol)) {
    ++res.violations;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s: tape %.10g vs fd %.10g", name,
                  analytic, best_fd);
    add_counterexample(res, buf);
  }
}

inline void primitive_gradient_checks(Rng& rng, CheckResult& res) {
  auto rt = [&rng](std::vector<std::size_t> shape, double lo, double hi) {
    return rand_tensor(rng, std::move(shape), lo, hi);
  };

  fd_check_inputs(
      "add",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.add(in[0], in[1]));
      },
      {rt({2, 3}, -1, 1), rt({2, 3}, -1, 1)}, res);
  fd_check_inputs(
      "sub",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.mul(t.sub(in[0], in[1]), in[2]));
      },
      {rt({4}, -1, 1), rt({4}, -1, 1), rt({4}, -1, 1)}, res);
  fd_check_inputs(
      "mul",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.mul(in[0], in[1]));
      },
      {rt({2, 3}, -1, 1), rt({2, 3}, -1, 1)}, res);
  fd_check_inputs(
      "div",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.div(in[0], in[1]));
      },
      {rt({5}, -1, 1), rand_tensor_off_zero(rng, {5}, 0.4)}, res);
  {
    const double c = rng.uniform(-2.0, 2.0);
    fd_check_inputs(
        "scalar_mul",
        [c](ad::Tape& t, const std::vector<int>& in) {
          return t.sum(t.scalar_mul(c, in[0]));
        },
        {rt({3, 2}, -1, 1)}, res);
  }
  fd_check_inputs(
      "matmul",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.matmul(in[0], in[1]));
      },
      {rt({3, 4}, -1, 1), rt({4, 2}, -1, 1)}, res);
  fd_check_inputs(
      "matvec",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.matmul(in[0], in[1]));
      },
      {rt({3, 4}, -1, 1), rt({4}, -1, 1)}, res);
  fd_check_inputs(
      "conv2d",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.conv2d(in[0], in[1], in[2]));
      },
      {rt({2, 6, 6}, -1, 1), rt({3, 2, 3, 3}, -1, 1), rt({3}, -1, 1)}, res);
  fd_check_inputs(
      "maxpool2x2",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.mul(t.maxpool2x2(in[0]), in[1]));
      },
      {rand_pool_input(rng, {2, 4, 4}), rt({2, 2, 2}, -1, 1)}, res);
  fd_check_inputs(
      "relu",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.mul(t.relu(in[0]), in[1]));
      },
      {rand_tensor_off_zero(rng, {3, 3}, 0.05), rt({3, 3}, -1, 1)}, res);
  fd_check_inputs(
      "sigmoid",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.mul(t.sigmoid(in[0]), in[1]));
      },
      {rt({6}, -3, 3), rt({6}, -1, 1)}, res);
  fd_check_inputs(
      "softmax",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.mul(t.softmax(in[0]), in[1]));
      },
      {rt({5}, -2, 2), rt({5}, -1, 1)}, res);
  fd_check_inputs(
      "log",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.mul(t.log(in[0]), in[1]));
      },
      {rt({4}, 0.5, 2), rt({4}, -1, 1)}, res);
  {
    // clamp threshold 0.3; inputs land on either side with margin
    fd_check_inputs(
        "clamp_min",
        [](ad::Tape& t, const std::vector<int>& in) {
          return t.sum(t.mul(t.clamp_min(in[0], 0.3), in[1]));
        },
        {[&rng] {
           ad::Tensor x({6});
           for (double& v : x.data) {
             v = rng.index(2) == 0 ? rng.uniform(0.4, 1.0)
                                   : rng.uniform(-1.0, 0.2);
           }
           return x;
         }(),
         rt({6}, -1, 1)},
        res);
  }
  fd_check_inputs(
      "reshape",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.mul(t.reshape(in[0], {6}), in[1]));
      },
      {rt({2, 3}, -1, 1), rt({6}, -1, 1)}, res);
  fd_check_inputs(
      "sum",
      [](ad::Tape& t, const std::vector<int>& in) { return t.sum(in[0]); },
      {rt({3, 4}, -1, 1)}, res);
  fd_check_inputs(
      "concat",
      [](ad::Tape& t, const std::vector<int>& in) {
        return t.sum(t.mul(t.concat(in[0], in[1]), in[2]));
      },
      {rt({3}, -1, 1), rt({5}, -1, 1), rt({8}, -1, 1)}, res);
}

inline void semantic_pipeline_check(Rng& rng, int instances,
                                    CheckResult& res) {
  const models::ClassSpec spec = models::traffic_class_spec();
  for (int it = 0; it < instances; ++it) {
    const models::BinaryHead head = it % 2 == 0
                                        ? models::BinaryHead::kTwoUnitNormalized
                                        : models::BinaryHead::kSingleLogit;
    models::BinaryDigitNet red(head), green(head);
    models::init_params(rng, red);
    models::init_params(rng, green);
    const ad::Tensor img_r = rand_tensor(rng, {1, 28, 28}, 0.0, 1.0);
    const ad::Tensor img_g = rand_tensor(rng, {1, 28, 28}, 0.0, 1.0);
    const int y = it % 2;

    ad::Tape t;
    const models::BinaryNodes rn = models::bind(t, red);
    const models::BinaryNodes gn = models::bind(t, green);
    const int pr = models::binary_forward_node(t, rn, head, t.leaf(img_r));
    const int pg = models::binary_forward_node(t, gn, head, t.leaf(img_g));
    t.backward(models::semantic_loss_node(t, spec, y, {pr, pg}));

    auto value = [&] {
      const double vr = models::binary_digit_forward(red, img_r);
      const double vg = models::binary_digit_forward(green, img_g);
      return models::semantic_loss(spec, y,
                                   logic::BernoulliVector{{vr, vg}});
    };

    std::vector<ad::Tensor*> params = red.params();
    for (ad::Tensor* p : green.params()) params.push_back(p);
    std::vector<int> ids = models::param_nodes(rn);
    for (int id : models::param_nodes(gn)) ids.push_back(id);

    for (std::size_t k = 0; k < params.size(); ++k) {
      const ad::Tensor& g = t.grad(ids[k]);
      for (int rep = 0; rep < 2; ++rep) {
        const std::size_t j = rng.index(params[k]->data.size());
        pipeline_fd_coord(value, &params[k]->data[j], g.data[j],
                          "semantic pipeline", res);
      }
    }
    ++res.trials;
  }
}

inline void disjunctive_pipeline_check(Rng& rng, int instances,
                                       CheckResult& res) {
  const models::ClassSpec spec = models::traffic_class_spec();
  for (int it = 0; it < instances; ++it) {
    models::JointWorldNet net(it % 2 == 0);
    models::init_params(rng, net);
    const ad::Tensor img_r = rand_tensor(rng, {1, 28, 28}, 0.0, 1.0);
    const ad::Tensor img_g = rand_tensor(rng, {1, 28, 28}, 0.0, 1.0);
    const std::vector<std::uint8_t>& acceptable =
        spec.table.betas[static_cast<std::size_t>(it % 2)];

    ad::Tape t;
    const models::JointNodes jn = models::bind(t, net);
    const int q =
        models::joint_forward_node(t, jn, t.leaf(img_r), t.leaf(img_g));
    t.backward(models::disjunctive_supervision_loss_node(t, q, acceptable));

    auto value = [&] {
      return models::disjunctive_supervision_loss(
          models::joint_world_forward(net, img_r, img_g), acceptable);
    };

    std::vector<ad::Tensor*> params = net.params();
    const std::vector<int> ids = models::param_nodes(jn, net.shared_encoder);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const ad::Tensor& g = t.grad(ids[k]);
      for (int rep = 0; rep < 2; ++rep) {
        const std::size_t j = rng.index(params[k]->data.size());
        pipeline_fd_coord(value, &params[k]->data[j], g.data[j],
                          "disjunctive pipeline", res);
      }
    }
    ++res.trials;
  }
}

}  // namespace detail

// Every tape primitive and both end-to-end loss pipelines against central
// finite differences.
inline CheckResult gradient_suite(int instances, std::uint64_t seed) {
  if (instances < 1) throw std::invalid_argument("instances must be >= 1");
  Rng rng(seed);
  CheckResult res;
  res.suite = "gradients";
  for (int it = 0; it < instances; ++it) {
    detail::primitive_gradient_checks(rng, res);
  }
  detail::semantic_pipeline_check(rng, instances, res);
  detail::disjunctive_pipeline_check(rng, instances, res);
  return res;
}

namespace detail {

inline int random_subformula(logic::FormulaBuilder& b, Rng& rng,
                             std::size_t n_vars, int depth) {
  if (depth <= 0 || rng.index(3) == 0) {
    const int v = b.var(rng.index(n_vars));
    return rng.index(2) == 0 ? v : b.not_(v);
  }
  const int lhs = random_subformula(b, rng, n_vars, depth - 1);
  const int rhs = random_subformula(b, rng, n_vars, depth - 1);
  switch (rng.index(4)) {
    case 0:
      return b.and_(lhs, rhs);
    case 1:
      return b.or_(lhs, rhs);
    case 2:
      return b.implies(lhs, rhs);
    default:
      return b.iff(lhs, rhs);
  }
}

}  // namespace detail

// Random formulas against the world-table oracle: the weighted count must
// equal the indicator dot product bit for bit (shared summation order), and
// a formula plus its negation must cover the whole space.
inline CheckResult wmc_oracle_suite(int n_trials, std::uint64_t seed) {
  Rng rng(seed);
  CheckResult res;
  res.suite = "oracle";
  for (int trial = 0; trial < n_trials; ++trial) {
    const std::size_t n = 1 + rng.index(10);
    std::vector<std::string> vars;
    for (std::size_t i = 0; i < n; ++i) vars.push_back("x" + std::to_string(i));

    logic::FormulaBuilder b(vars);
    const int root = detail::random_subformula(b, rng, n, 4);
    const logic::Formula f = b.build(root);
    const logic::Formula nf = b.build(b.not_(root));

    logic::BernoulliVector p;
    for (std::size_t i = 0; i < n; ++i) p.probs.push_back(rng.uniform());

    const logic::WorldTable table = logic::build_world_table({f}, vars);
    const std::vector<double> q = logic::world_distribution(p);
    double dot = 0.0;
    for (std::size_t m = 0; m < q.size(); ++m) {
      if (table.betas[0][m]) dot += q[m];
    }

    const double w = logic::wmc(f, p);
    ++res.comparisons;
    if (w != dot) {
      ++res.violations;
      char buf[128];
      std::snprintf(buf, sizeof(buf), "trial %d: wmc %.17g != dot %.17g",
                    trial, w, dot);
      detail::add_counterexample(res, buf);
    }

    const double complement = logic::wmc(nf, p);
    const double dev = std::abs(w + complement - 1.0);
    ++res.comparisons;
    if (dev > res.max_delta) res.max_delta = dev;
    if (!(dev <= kOracleComplementTol)) {
      ++res.violations;
      char buf[128];
      std::snprintf(buf, sizeof(buf),
                    "trial %d: wmc(f) + wmc(!f) = %.17g deviates by %.3g",
                    trial, w + complement, dev);
      detail::add_counterexample(res, buf);
    }
    ++res.trials;
  }
  return res;
}

}  // namespace nesylab::lab
