#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nesylab/io.hpp"
#include "nesylab/rng.hpp"
#include "nesylab/tensor.hpp"

namespace nesylab::data {

struct MnistImage {
  ad::Tensor pixels;  // [1, 28, 28], values in [0, 1]
  int digit_label = 0;
};

namespace detail {

inline constexpr std::uint32_t kImageMagic = 0x00000803;
inline constexpr std::uint32_t kLabelMagic = 0x00000801;

struct BeReader {
  const std::string& buf;
  const std::string& path;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) {
      throw std::runtime_error("truncated IDX file: " + path);
    }
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v = (v << 8) | static_cast<unsigned char>(buf[pos + i]);
    }
    pos += 4;
    return v;
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
};

inline std::string hex_magic(std::uint32_t m) {
  char out[11];
  std::snprintf(out, sizeof(out), "0x%08x", m);
  return out;
}

}  // namespace detail

// Standard IDX pair: big-endian headers, raw byte payloads. Pixels are
// scaled by 1/255.
inline std::vector<MnistImage> load_idx(const std::string& images_path,
                                        const std::string& labels_path) {
  const std::string ibuf = read_file(images_path);
  const std::string lbuf = read_file(labels_path);

  detail::BeReader ir{ibuf, images_path};
  const std::uint32_t imagic = ir.u32();
  if (imagic != detail::kImageMagic) {
    throw std::runtime_error(
        images_path + ": bad magic " + detail::hex_magic(imagic) +
        ", expected " + detail::hex_magic(detail::kImageMagic));
  }
  const std::uint32_t icount = ir.u32();
  const std::uint32_t rows = ir.u32();
  const std::uint32_t cols = ir.u32();
  if (rows != 28 || cols != 28) {
    throw std::runtime_error(images_path + ": expected 28x28 images, got " +
                             std::to_string(rows) + "x" + std::to_string(cols));
  }

  detail::BeReader lr{lbuf, labels_path};
  const std::uint32_t lmagic = lr.u32();
  if (lmagic != detail::kLabelMagic) {
    throw std::runtime_error(
        labels_path + ": bad magic " + detail::hex_magic(lmagic) +
        ", expected " + detail::hex_magic(detail::kLabelMagic));
  }
  const std::uint32_t lcount = lr.u32();
  if (icount != lcount) {
    throw std::runtime_error("image count " + std::to_string(icount) +
                             " does not match label count " +
                             std::to_string(lcount));
  }

  ir.need(static_cast<std::size_t>(icount) * 28 * 28);
  lr.need(icount);

  std::vector<MnistImage> out;
  out.reserve(icount);
  for (std::uint32_t i = 0; i < icount; ++i) {
    MnistImage img;
    img.pixels = ad::Tensor({1, 28, 28});
    for (std::size_t p = 0; p < 28 * 28; ++p) {
      img.pixels.data[p] = static_cast<double>(ir.u8()) / 255.0;
    }
    img.digit_label = lr.u8();
    if (img.digit_label > 9) {
      throw std::runtime_error(labels_path + ": label " +
                               std::to_string(img.digit_label) +
                               " out of range 0-9");
    }
    out.push_back(std::move(img));
  }
  return out;
}

inline std::pair<std::vector<MnistImage>, std::vector<MnistImage>>
split_zeros_ones(const std::vector<MnistImage>& images) {
  std::pair<std::vector<MnistImage>, std::vector<MnistImage>> out;
  for (const MnistImage& img : images) {
    if (img.digit_label == 0) out.first.push_back(img);
    if (img.digit_label == 1) out.second.push_back(img);
  }
  return out;
}

struct SynthDigits {
  std::vector<MnistImage> zeros;
  std::vector<MnistImage> ones;
};

// Network-free stand-ins: an ellipse ring reads as 0, a vertical bar as 1.
// Noise is uniform +-amplitude per pixel, clipped to [0, 1].
inline SynthDigits synth_digits(int n, std::uint64_t seed,
                                double noise = 0.1) {
  if (n <= 0) {
    throw std::invalid_argument("synth_digits needs n > 0");
  }
  ad::Tensor ring({1, 28, 28});
  ad::Tensor bar({1, 28, 28});
  for (int r = 0; r < 28; ++r) {
    for (int c = 0; c < 28; ++c) {
      const double u = (c - 13.5) / 7.5;
      const double v = (r - 13.5) / 9.5;
      const double d = u * u + v * v;
      ring.data[static_cast<std::size_t>(r) * 28 + c] =
          (d > 0.55 && d < 1.45) ? 1.0 : 0.0;
      bar.data[static_cast<std::size_t>(r) * 28 + c] =
          (c >= 12 && c <= 15 && r >= 4 && r <= 23) ? 1.0 : 0.0;
    }
  }

  Rng rng(seed);
  SynthDigits out;
  auto emit = [&](const ad::Tensor& base, int label,
                  std::vector<MnistImage>& dst) {
    for (int i = 0; i < n; ++i) {
      MnistImage img;
      img.pixels = base;
      img.digit_label = label;
      for (double& p : img.pixels.data) {
        p = std::clamp(p + rng.uniform(-noise, noise), 0.0, 1.0);
      }
      dst.push_back(std::move(img));
    }
  };
  emit(ring, 0, out.zeros);
  emit(bar, 1, out.ones);
  return out;
}

// config is the world index over (red, green) with red the high bit:
// 0 both off, 1 green only, 2 red only, 3 both on (the violating world).
struct TrafficExample {
  int config = 0;
  int y = 0;  // 0 iff both lights are on
  std::uint32_t red_source = 0;    // index into the pool the red digit came from
  std::uint32_t green_source = 0;
};

inline int config_red_on(int config) { return (config >> 1) & 1; }
inline int config_green_on(int config) { return config & 1; }

struct TrafficDataset {
  std::shared_ptr<const std::vector<MnistImage>> zeros;
  std::shared_ptr<const std::vector<MnistImage>> ones;
  std::vector<TrafficExample> train;
  std::vector<TrafficExample> test;
  std::uint64_t seed = 0;

  const MnistImage& red_image(const TrafficExample& e) const {
    const auto& pool = config_red_on(e.config) ? *ones : *zeros;
    return pool[e.red_source];
  }
  const MnistImage& green_image(const TrafficExample& e) const {
    const auto& pool = config_green_on(e.config) ? *ones : *zeros;
    return pool[e.green_source];
  }
};

// Train: 1600 positives spread 533/533/534 over the satisfying configs plus
// 1600 negatives (both on), shuffled. Test: 50 per config. Test examples
// draw from a held-out fifth of each source pool, so no digit image is seen
// in both splits. Sampling is with replacement.
inline TrafficDataset build_traffic_dataset(
    std::shared_ptr<const std::vector<MnistImage>> zeros,
    std::shared_ptr<const std::vector<MnistImage>> ones, std::uint64_t seed) {
  if (!zeros || !ones || zeros->empty() || ones->empty()) {
    throw std::invalid_argument("empty source image pool");
  }
  if (zeros->size() < 2 || ones->size() < 2) {
    throw std::invalid_argument(
        "need at least 2 images per digit to hold out a test split");
  }

  Rng rng(seed);
  auto split_indices = [&](std::size_t n) {
    std::vector<std::uint32_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
    rng.shuffle(idx);
    const std::size_t held = std::max<std::size_t>(1, n / 5);
    std::vector<std::uint32_t> test_part(idx.begin(), idx.begin() + held);
    std::vector<std::uint32_t> train_part(idx.begin() + held, idx.end());
    return std::make_pair(std::move(train_part), std::move(test_part));
  };
  const auto [ztrain, ztest] = split_indices(zeros->size());
  const auto [otrain, otest] = split_indices(ones->size());

  auto pick = [&](const std::vector<std::uint32_t>& part) {
    return part[rng.index(part.size())];
  };
  auto make_example = [&](int config, bool from_test) -> TrafficExample {
    TrafficExample e;
    e.config = config;
    e.y = config == 3 ? 0 : 1;
    const auto& red_part = config_red_on(config) ? (from_test ? otest : otrain)
                                                 : (from_test ? ztest : ztrain);
    const auto& green_part =
        config_green_on(config) ? (from_test ? otest : otrain)
                                : (from_test ? ztest : ztrain);
    e.red_source = pick(red_part);
    e.green_source = pick(green_part);
    return e;
  };

  TrafficDataset d;
  d.zeros = std::move(zeros);
  d.ones = std::move(ones);
  d.seed = seed;

  const int train_counts[4] = {533, 533, 534, 1600};
  for (int config = 0; config < 4; ++config) {
    for (int i = 0; i < train_counts[config]; ++i) {
      d.train.push_back(make_example(config, false));
    }
  }
  rng.shuffle(d.train);

  for (int config = 0; config < 4; ++config) {
    for (int i = 0; i < 50; ++i) {
      d.test.push_back(make_example(config, true));
    }
  }
  return d;
}

inline TrafficDataset build_traffic_dataset(std::vector<MnistImage> zeros,
                                            std::vector<MnistImage> ones,
                                            std::uint64_t seed) {
  return build_traffic_dataset(
      std::make_shared<const std::vector<MnistImage>>(std::move(zeros)),
      std::make_shared<const std::vector<MnistImage>>(std::move(ones)), seed);
}

inline std::string dataset_manifest(const TrafficDataset& d) {
  std::string out = "split,config,y,red_source,green_source\n";
  auto rows = [&out](const char* split, const std::vector<TrafficExample>& v) {
    for (const TrafficExample& e : v) {
      out += split;
      out += ',' + std::to_string(e.config) + ',' + std::to_string(e.y) + ',' +
             std::to_string(e.red_source) + ',' +
             std::to_string(e.green_source) + '\n';
    }
  };
  rows("train", d.train);
  rows("test", d.test);
  return out;
}

inline void write_manifest(const TrafficDataset& d, const std::string& path) {
  write_file_atomic(path, dataset_manifest(d));
}

}  // namespace nesylab::data
