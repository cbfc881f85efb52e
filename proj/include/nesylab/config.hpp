#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "nesylab/lab.hpp"

namespace nesylab::lab {

inline const char* binary_head_name(models::BinaryHead h) {
  return h == models::BinaryHead::kTwoUnitNormalized ? "two_unit_normalized"
                                                     : "single_logit";
}

inline models::BinaryHead parse_binary_head(const std::string& s) {
  if (s == "two_unit_normalized") {
    return models::BinaryHead::kTwoUnitNormalized;
  }
  if (s == "single_logit") return models::BinaryHead::kSingleLogit;
  throw std::invalid_argument(
      "unknown binary head '" + s +
      "' (expected two_unit_normalized or single_logit)");
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) {
    --b;
  }
  return s.substr(a, b - a);
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("config key '" + key + "': bad boolean '" + s +
                              "'");
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size() || s.empty() || s[0] == '-') {
    throw std::invalid_argument("config key '" + key +
                                "': bad unsigned integer '" + s + "'");
  }
  return v;
}

}  // namespace detail

// Keys mirror the RunConfig fields; anything else is an error.
inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& value) {
  if (key == "loss_kind") {
    cfg.loss_kind = parse_loss_kind(value);
  } else if (key == "lr") {
    cfg.lr = detail::parse_double(value, "lr");
  } else if (key == "batch_size") {
    cfg.batch_size = static_cast<int>(detail::parse_long(value, "batch_size"));
  } else if (key == "epochs") {
    cfg.epochs = static_cast<int>(detail::parse_long(value, "epochs"));
  } else if (key == "runs") {
    cfg.runs = static_cast<int>(detail::parse_long(value, "runs"));
  } else if (key == "eval_every") {
    cfg.eval_every = static_cast<int>(detail::parse_long(value, "eval_every"));
  } else if (key == "seed") {
    cfg.seed = detail::parse_u64(value, "seed");
  } else if (key == "binary_head") {
    cfg.binary_head = parse_binary_head(value);
  } else if (key == "shared_encoder") {
    cfg.shared_encoder = detail::parse_bool(value, "shared_encoder");
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

// Flat `key = value` lines; blank lines and lines starting with '#' are
// skipped.
inline RunConfig parse_run_config(const std::string& text,
                                  RunConfig base = {}) {
  std::size_t line_no = 0;
  for (const std::string& raw : detail::split(text, '\n')) {
    ++line_no;
    const std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line +
                                  "'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": empty key");
    }
    apply_config_entry(base, key, value);
  }
  return base;
}

// The mirror image of parse_run_config, used to record the exact settings
// an experiment ran with.
inline std::string run_config_text(const RunConfig& cfg) {
  std::string out;
  out += "loss_kind = ";
  out += loss_kind_name(cfg.loss_kind);
  out += "\nlr = ";
  out += fmt_double(cfg.lr);
  out += "\nbatch_size = " + std::to_string(cfg.batch_size);
  out += "\nepochs = " + std::to_string(cfg.epochs);
  out += "\nruns = " + std::to_string(cfg.runs);
  out += "\neval_every = " + std::to_string(cfg.eval_every);
  out += "\nseed = " + std::to_string(cfg.seed);
  out += "\nbinary_head = ";
  out += binary_head_name(cfg.binary_head);
  out += "\nshared_encoder = ";
  out += cfg.shared_encoder ? "true" : "false";
  out += '\n';
  return out;
}

}  // namespace nesylab::lab
