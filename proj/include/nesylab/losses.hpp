#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nesylab/autodiff.hpp"
#include "nesylab/logic.hpp"
#include "nesylab/tensor.hpp"

namespace nesylab::models {

// Probabilities are floored here before log so a collapsed prediction yields
// a large finite loss (about 27.6 nats) instead of inf.
inline constexpr double kProbFloor = 1e-12;

inline const char* kTrafficConstraint =
    "(!red & green) | (red & !green) | (!red & !green)";

// Mutually exclusive and exhaustive class formulas over a shared variable
// order, with the derived world table. Class labels are 0-based indices
// into `classes`.
struct ClassSpec {
  std::vector<logic::Formula> classes;
  std::vector<std::string> variables;
  logic::WorldTable table;

  std::size_t class_count() const { return classes.size(); }
};

inline ClassSpec make_class_spec(std::vector<logic::Formula> classes,
                                 std::vector<std::string> variables) {
  ClassSpec spec;
  spec.classes = std::move(classes);
  spec.variables = std::move(variables);
  spec.table = logic::build_world_table(spec.classes, spec.variables);
  if (!spec.table.is_partition()) {
    std::string why = spec.table.mutually_exclusive
                          ? "not exhaustive"
                          : "not mutually exclusive";
    throw std::invalid_argument("class formulas must form a partition (" +
                                why + ")");
  }
  return spec;
}

// class 0: the violating red&green world; class 1: the constraint
inline ClassSpec traffic_class_spec() {
  return make_class_spec(
      {logic::parse("red & green"), logic::parse(kTrafficConstraint)},
      {"red", "green"});
}

namespace detail {

inline void check_label(const ClassSpec& spec, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= spec.class_count()) {
    throw std::invalid_argument("class label " + std::to_string(y) +
                                " out of range [0, " +
                                std::to_string(spec.class_count()) + ")");
  }
}

inline double neg_log(double s) {
  return -std::log(s < kProbFloor ? kProbFloor : s);
}

}  // namespace detail

inline double semantic_loss(const ClassSpec& spec, int y,
                            const logic::BernoulliVector& p) {
  detail::check_label(spec, y);
  return detail::neg_log(
      logic::wmc(spec.classes[static_cast<std::size_t>(y)], p, spec.variables));
}

// Positives-only variant: negative examples contribute exactly zero.
inline double truncated_semantic_loss(const ClassSpec& spec, int y,
                                      const logic::BernoulliVector& p) {
  detail::check_label(spec, y);
  if (y != 1) return 0.0;
  return semantic_loss(spec, 1, p);
}

inline double disjunctive_supervision_loss(
    const std::vector<double>& q, const std::vector<std::uint8_t>& acceptable) {
  if (q.size() != acceptable.size()) {
    throw std::invalid_argument("output distribution has " +
                                std::to_string(q.size()) +
                                " entries but the supervision bit vector has " +
                                std::to_string(acceptable.size()));
  }
  bool any = false;
  for (std::uint8_t b : acceptable) any = any || (b != 0);
  if (!any) {
    throw std::invalid_argument(
        "supervision bit vector is all zero; the loss is undefined");
  }
  double total = 0.0;
  for (double v : q) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("output entry out of [0, 1]: " +
                                  std::to_string(v));
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("output distribution sums to " +
                                std::to_string(total) + ", not 1");
  }
  double s = 0.0;
  for (std::size_t m = 0; m < q.size(); ++m) {
    s += acceptable[m] ? q[m] : 0.0;
  }
  return detail::neg_log(s);
}

// argmax_k wmc(class_k, p); ties go to the lowest index
inline int classify(const ClassSpec& spec, const logic::BernoulliVector& p) {
  int best = 0;
  double best_w = logic::wmc(spec.classes[0], p, spec.variables);
  for (std::size_t k = 1; k < spec.class_count(); ++k) {
    const double w = logic::wmc(spec.classes[k], p, spec.variables);
    if (w > best_w) {
      best_w = w;
      best = static_cast<int>(k);
    }
  }
  return best;
}

// world order (!r!g, !rg, r!g, rg)
inline std::vector<double> factorized_world_probs(double p_red,
                                                  double p_green) {
  return logic::world_distribution(logic::BernoulliVector{{p_red, p_green}});
}

// --- tape-route counterparts used during training ---

// All 2^N world-probability nodes from per-variable Bernoulli scalar nodes,
// in ascending world-index order.
inline std::vector<int> world_prob_nodes(ad::Tape& t,
                                         const std::vector<int>& p_vars) {
  const std::size_t n = p_vars.size();
  if (n > 16) {
    throw std::invalid_argument("too many factorized variables");
  }
  const int one = t.leaf(ad::Tensor::scalar(1.0));
  std::vector<int> comp;
  comp.reserve(n);
  for (int p : p_vars) comp.push_back(t.sub(one, p));

  std::vector<int> q;
  q.reserve(1ULL << n);
  for (std::uint64_t m = 0; m < (1ULL << n); ++m) {
    int node = -1;
    for (std::size_t i = 0; i < n; ++i) {
      const bool on = ((m >> (n - 1 - i)) & 1ULL) != 0;
      const int term = on ? p_vars[i] : comp[i];
      node = node < 0 ? term : t.mul(node, term);
    }
    q.push_back(node < 0 ? one : node);
  }
  return q;
}

// Sum of the member worlds' probability nodes, ascending world order; this
// is wmc of the class as a tape node.
inline int masked_sum_node(ad::Tape& t, const std::vector<int>& q,
                           const std::vector<std::uint8_t>& member) {
  if (q.size() != member.size()) {
    throw std::invalid_argument("masked_sum_node size mismatch");
  }
  int acc = -1;
  for (std::size_t m = 0; m < q.size(); ++m) {
    if (!member[m]) continue;
    acc = acc < 0 ? q[m] : t.add(acc, q[m]);
  }
  if (acc < 0) acc = t.leaf(ad::Tensor::scalar(0.0));
  return acc;
}

inline int neg_log_node(ad::Tape& t, int s) {
  return t.scalar_mul(-1.0, t.log(t.clamp_min(s, kProbFloor)));
}

// -log wmc(class_y) from per-variable probability nodes
inline int semantic_loss_node(ad::Tape& t, const ClassSpec& spec, int y,
                              const std::vector<int>& p_vars) {
  detail::check_label(spec, y);
  if (p_vars.size() != spec.variables.size()) {
    throw std::invalid_argument("expected one probability node per variable");
  }
  const std::vector<int> q = world_prob_nodes(t, p_vars);
  const int s =
      masked_sum_node(t, q, spec.table.betas[static_cast<std::size_t>(y)]);
  return neg_log_node(t, s);
}

// -log sum of acceptable outputs, for a softmax output node q
inline int disjunctive_supervision_loss_node(
    ad::Tape& t, int q, const std::vector<std::uint8_t>& acceptable) {
  const ad::Tensor& vq = t.value(q);
  if (vq.rank() != 1 || vq.shape[0] != acceptable.size()) {
    throw std::invalid_argument("supervision bit vector length " +
                                std::to_string(acceptable.size()) +
                                " does not match output shape " +
                                ad::shape_str(vq.shape));
  }
  bool any = false;
  for (std::uint8_t b : acceptable) any = any || (b != 0);
  if (!any) {
    throw std::invalid_argument(
        "supervision bit vector is all zero; the loss is undefined");
  }
  ad::Tensor mask({acceptable.size()});
  for (std::size_t m = 0; m < acceptable.size(); ++m) {
    mask.data[m] = acceptable[m] ? 1.0 : 0.0;
  }
  const int s = t.sum(t.mul(q, t.leaf(std::move(mask))));
  return neg_log_node(t, s);
}

}  // namespace nesylab::models
