#pragma once

#include <array>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nesylab::lab {

enum class LossKind { kSemantic, kTruncatedSemantic, kDisjunctive };

inline const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::kSemantic:
      return "semantic";
    case LossKind::kTruncatedSemantic:
      return "truncated_semantic";
    case LossKind::kDisjunctive:
      return "disjunctive";
  }
  return "?";
}

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "semantic") return LossKind::kSemantic;
  if (s == "truncated" || s == "truncated_semantic") {
    return LossKind::kTruncatedSemantic;
  }
  if (s == "disjunctive") return LossKind::kDisjunctive;
  throw std::invalid_argument(
      "unknown loss kind '" + s +
      "' (expected semantic, truncated_semantic, or disjunctive)");
}

// The four test partitions, named by their light configuration, in world
// order: both off, green only, red only, both on.
inline constexpr std::array<const char*, 4> kPartitionNames{"nn", "ng", "rn",
                                                            "rg"};

using ProbGrid = std::array<std::array<double, 4>, 4>;  // [partition][world]

// One evaluation record per step: mean per-world probability over each test
// partition. steps[i] is the number of optimizer updates applied before
// probs[i] was measured.
struct Trajectory {
  LossKind loss_kind = LossKind::kSemantic;
  std::uint64_t run_seed = 0;
  std::vector<int> steps;
  std::vector<ProbGrid> probs;

  // held-out digit accuracy at 0.5 threshold; set for factorized runs only
  std::optional<double> red_digit_accuracy;
  std::optional<double> green_digit_accuracy;

  std::size_t record_count() const { return steps.size(); }
};

struct AggregateTrajectory {
  std::vector<int> steps;
  std::vector<ProbGrid> mean;
  std::vector<ProbGrid> ci95;  // half-widths
};

// Pointwise mean over runs with a normal-approximation 95% interval,
// half-width 1.96 * s / sqrt(R) using the sample standard deviation. A
// single run gets half-width zero by convention.
inline AggregateTrajectory aggregate_runs(
    const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) {
    throw std::invalid_argument("aggregate_runs on an empty list");
  }
  const std::size_t records = trajectories[0].record_count();
  for (const Trajectory& t : trajectories) {
    if (t.record_count() != records || t.steps != trajectories[0].steps) {
      throw std::invalid_argument(
          "aggregate_runs: trajectories disagree on evaluation steps");
    }
  }

  const double r = static_cast<double>(trajectories.size());
  AggregateTrajectory agg;
  agg.steps = trajectories[0].steps;
  agg.mean.assign(records, ProbGrid{});
  agg.ci95.assign(records, ProbGrid{});
  for (std::size_t i = 0; i < records; ++i) {
    for (int p = 0; p < 4; ++p) {
      for (int w = 0; w < 4; ++w) {
        double total = 0.0;
        for (const Trajectory& t : trajectories) total += t.probs[i][p][w];
        const double mean = total / r;
        agg.mean[i][p][w] = mean;
        if (trajectories.size() > 1) {
          double ss = 0.0;
          for (const Trajectory& t : trajectories) {
            const double d = t.probs[i][p][w] - mean;
            ss += d * d;
          }
          const double sd = std::sqrt(ss / (r - 1.0));
          agg.ci95[i][p][w] = 1.96 * sd / std::sqrt(r);
        }
      }
    }
  }
  return agg;
}

// Descending order of the first three outputs by their probability summed
// over every record and the three satisfying partitions; ties keep index
// order. Aligns winner-take-all runs before aggregation.
inline std::array<int, 3> rank_ds_outputs(const Trajectory& t) {
  if (t.loss_kind != LossKind::kDisjunctive) {
    throw std::invalid_argument(
        "output ranking applies to disjunctive runs only");
  }
  std::array<double, 3> sums{};
  for (const ProbGrid& rec : t.probs) {
    for (int p = 0; p < 3; ++p) {
      for (int w = 0; w < 3; ++w) sums[w] += rec[p][w];
    }
  }
  std::array<int, 3> order{0, 1, 2};
  // three elements; a stable insertion pass keeps tie order by index
  for (int i = 1; i < 3; ++i) {
    for (int j = i; j > 0 && sums[order[j]] > sums[order[j - 1]]; --j) {
      std::swap(order[j], order[j - 1]);
    }
  }
  return order;
}

// Worlds 0..2 permuted into rank order (strongest first); the violating
// fourth output stays put.
inline Trajectory apply_output_ranking(const Trajectory& t) {
  const std::array<int, 3> order = rank_ds_outputs(t);
  Trajectory out = t;
  for (std::size_t i = 0; i < t.probs.size(); ++i) {
    for (int p = 0; p < 4; ++p) {
      for (int w = 0; w < 3; ++w) {
        out.probs[i][p][w] = t.probs[i][p][order[w]];
      }
    }
  }
  return out;
}

struct BiasCell {
  double tail_mean = 0.0;
  bool collapsed_to_one = false;
  bool collapsed_to_zero = false;
};

struct BiasReport {
  std::array<std::array<BiasCell, 4>, 4> cells;  // [partition][world]
  bool biased = false;
  int biased_world = -1;
};

// A cell is collapsed when the mean over the last ceil(tail_fraction * T)
// records sits within tol of 0 or 1. The run is deterministically biased
// when one world is collapsed-to-one on every partition.
inline BiasReport detect_deterministic_bias(const Trajectory& t,
                                            double tail_fraction = 0.1,
                                            double tol = 0.05) {
  const std::size_t records = t.record_count();
  if (records == 0) {
    throw std::invalid_argument("bias detection on an empty trajectory");
  }
  std::size_t k = static_cast<std::size_t>(
      std::ceil(tail_fraction * static_cast<double>(records)));
  if (k < 1) k = 1;
  if (k > records) k = records;

  BiasReport report;
  for (int p = 0; p < 4; ++p) {
    for (int w = 0; w < 4; ++w) {
      double total = 0.0;
      for (std::size_t i = records - k; i < records; ++i) {
        total += t.probs[i][p][w];
      }
      BiasCell& cell = report.cells[p][w];
      cell.tail_mean = total / static_cast<double>(k);
      cell.collapsed_to_one = std::abs(cell.tail_mean - 1.0) <= tol;
      cell.collapsed_to_zero = std::abs(cell.tail_mean) <= tol;
    }
  }
  for (int w = 0; w < 4 && !report.biased; ++w) {
    bool all = true;
    for (int p = 0; p < 4; ++p) all = all && report.cells[p][w].collapsed_to_one;
    if (all) {
      report.biased = true;
      report.biased_world = w;
    }
  }
  return report;
}

inline std::string bias_report_text(const BiasReport& r) {
  std::string out;
  for (int p = 0; p < 4; ++p) {
    out += "partition ";
    out += kPartitionNames[p];
    out += ":";
    for (int w = 0; w < 4; ++w) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), " w%d=%.4f", w, r.cells[p][w].tail_mean);
      out += buf;
      if (r.cells[p][w].collapsed_to_one) out += "(->1)";
      if (r.cells[p][w].collapsed_to_zero) out += "(->0)";
    }
    out += '\n';
  }
  out += r.biased ? "deterministic bias: yes, world w" +
                        std::to_string(r.biased_world) + "\n"
                  : "deterministic bias: no\n";
  return out;
}

// --- CSV forms ---

// %.17g round-trips doubles exactly through strtod
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline constexpr const char* kTrajectoryHeader = "run,step,partition,world,prob";
inline constexpr const char* kAggregateHeader = "step,partition,world,mean,ci95";

inline std::string trajectory_csv(const std::vector<Trajectory>& runs) {
  std::string out = kTrajectoryHeader;
  out += '\n';
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const Trajectory& t = runs[r];
    for (std::size_t i = 0; i < t.record_count(); ++i) {
      for (int p = 0; p < 4; ++p) {
        for (int w = 0; w < 4; ++w) {
          out += std::to_string(r);
          out += ',';
          out += std::to_string(t.steps[i]);
          out += ',';
          out += kPartitionNames[p];
          out += ",w";
          out += std::to_string(w);
          out += ',';
          out += fmt_double(t.probs[i][p][w]);
          out += '\n';
        }
      }
    }
  }
  return out;
}

inline std::string aggregate_csv(const AggregateTrajectory& agg) {
  std::string out = kAggregateHeader;
  out += '\n';
  for (std::size_t i = 0; i < agg.steps.size(); ++i) {
    for (int p = 0; p < 4; ++p) {
      for (int w = 0; w < 4; ++w) {
        out += std::to_string(agg.steps[i]);
        out += ',';
        out += kPartitionNames[p];
        out += ",w";
        out += std::to_string(w);
        out += ',';
        out += fmt_double(agg.mean[i][p][w]);
        out += ',';
        out += fmt_double(agg.ci95[i][p][w]);
        out += '\n';
      }
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline int partition_index(const std::string& name) {
  for (int p = 0; p < 4; ++p) {
    if (name == kPartitionNames[p]) return p;
  }
  throw std::invalid_argument("unknown partition name '" + name + "'");
}

inline int world_index(const std::string& name) {
  if (name.size() == 2 && name[0] == 'w' && name[1] >= '0' && name[1] <= '3') {
    return name[1] - '0';
  }
  throw std::invalid_argument("unknown world name '" + name + "'");
}

inline long parse_long(const std::string& s, const char* what) {
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size() || s.empty()) {
    throw std::invalid_argument(std::string("bad ") + what + " '" + s + "'");
  }
  return v;
}

inline double parse_double(const std::string& s, const char* what) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty()) {
    throw std::invalid_argument(std::string("bad ") + what + " '" + s + "'");
  }
  return v;
}

}  // namespace detail

// Inverse of trajectory_csv. Runs must be numbered 0..R-1; every (step,
// partition, world) cell must appear exactly once per run. The loss kind is
// not part of the CSV contract, so parsed trajectories cannot be ranked.
inline std::vector<Trajectory> parse_trajectory_csv(const std::string& text) {
  const std::vector<std::string> lines = detail::split(text, '\n');
  if (lines.empty() || lines[0] != kTrajectoryHeader) {
    throw std::invalid_argument("trajectory CSV must start with header '" +
                                std::string(kTrajectoryHeader) + "'");
  }

  struct Slot {
    bool seen[4][4] = {};
    ProbGrid grid{};
  };
  // per run: step -> slot, in first-seen order
  std::vector<std::vector<std::pair<int, Slot>>> runs;

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string& line = lines[li];
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::split(line, ',');
    if (f.size() != 5) {
      throw std::invalid_argument("trajectory CSV row " + std::to_string(li) +
                                  " has " + std::to_string(f.size()) +
                                  " fields, expected 5");
    }
    const long run = detail::parse_long(f[0], "run index");
    const long step = detail::parse_long(f[1], "step");
    const int p = detail::partition_index(f[2]);
    const int w = detail::world_index(f[3]);
    const double prob = detail::parse_double(f[4], "probability");

    if (run < 0 || run > static_cast<long>(runs.size())) {
      throw std::invalid_argument("run indices must be consecutive from 0");
    }
    if (run == static_cast<long>(runs.size())) runs.emplace_back();
    auto& records = runs[static_cast<std::size_t>(run)];

    Slot* slot = nullptr;
    for (auto& [s, sl] : records) {
      if (s == step) {
        slot = &sl;
        break;
      }
    }
    if (!slot) {
      records.emplace_back(static_cast<int>(step), Slot{});
      slot = &records.back().second;
    }
    if (slot->seen[p][w]) {
      throw std::invalid_argument("duplicate cell in trajectory CSV at row " +
                                  std::to_string(li));
    }
    slot->seen[p][w] = true;
    slot->grid[p][w] = prob;
  }

  std::vector<Trajectory> out;
  for (auto& records : runs) {
    Trajectory t;
    for (auto& [step, slot] : records) {
      for (int p = 0; p < 4; ++p) {
        for (int w = 0; w < 4; ++w) {
          if (!slot.seen[p][w]) {
            throw std::invalid_argument(
                "incomplete record at step " + std::to_string(step) +
                ": missing " + kPartitionNames[p] + "/w" + std::to_string(w));
          }
        }
      }
      t.steps.push_back(step);
      t.probs.push_back(slot.grid);
    }
    if (t.record_count() == 0) {
      throw std::invalid_argument("a run with no records in trajectory CSV");
    }
    out.push_back(std::move(t));
  }
  if (out.empty()) {
    throw std::invalid_argument("trajectory CSV contains no data rows");
  }
  return out;
}

}  // namespace nesylab::lab
