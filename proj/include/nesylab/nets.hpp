#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nesylab/autodiff.hpp"
#include "nesylab/rng.hpp"
#include "nesylab/tensor.hpp"

namespace nesylab::models {

using ad::Tape;
using ad::Tensor;

// 1x28x28 -> conv(6,5x5) relu pool -> conv(16,5x5) relu pool -> 256
struct DigitEncoder {
  Tensor conv1_k{{6, 1, 5, 5}};
  Tensor conv1_b{{6}};
  Tensor conv2_k{{16, 6, 5, 5}};
  Tensor conv2_b{{16}};

  std::vector<Tensor*> params() {
    return {&conv1_k, &conv1_b, &conv2_k, &conv2_b};
  }
  std::vector<const Tensor*> params() const {
    return {&conv1_k, &conv1_b, &conv2_k, &conv2_b};
  }
};

struct EncoderNodes {
  int conv1_k, conv1_b, conv2_k, conv2_b;
};

inline EncoderNodes bind(Tape& t, const DigitEncoder& e) {
  return {t.leaf(e.conv1_k), t.leaf(e.conv1_b), t.leaf(e.conv2_k),
          t.leaf(e.conv2_b)};
}

// node ids in params() order
inline std::vector<int> param_nodes(const EncoderNodes& n) {
  return {n.conv1_k, n.conv1_b, n.conv2_k, n.conv2_b};
}

inline int encode(Tape& t, const EncoderNodes& n, int image) {
  int h = t.maxpool2x2(t.relu(t.conv2d(image, n.conv1_k, n.conv1_b)));
  h = t.maxpool2x2(t.relu(t.conv2d(h, n.conv2_k, n.conv2_b)));
  return t.reshape(h, {ad::shape_size(t.value(h).shape)});  // [256]
}

enum class BinaryHead {
  kTwoUnitNormalized,  // p_on = s(z1) / (s(z0) + s(z1))
  kSingleLogit,        // p_on = s(z)
};

// Per-digit Bernoulli net: encoder + fc 256->120->84->head.
struct BinaryDigitNet {
  explicit BinaryDigitNet(BinaryHead h = BinaryHead::kTwoUnitNormalized)
      : head(h),
        w3({h == BinaryHead::kTwoUnitNormalized ? std::size_t{2}
                                                : std::size_t{1},
            84}),
        b3({h == BinaryHead::kTwoUnitNormalized ? std::size_t{2}
                                                : std::size_t{1}}) {}

  BinaryHead head;
  DigitEncoder encoder;
  Tensor w1{{120, 256}};
  Tensor b1{{120}};
  Tensor w2{{84, 120}};
  Tensor b2{{84}};
  Tensor w3;
  Tensor b3;

  std::vector<Tensor*> params() {
    std::vector<Tensor*> p = encoder.params();
    for (Tensor* t : {&w1, &b1, &w2, &b2, &w3, &b3}) p.push_back(t);
    return p;
  }
  std::vector<const Tensor*> params() const {
    std::vector<const Tensor*> p = encoder.params();
    for (const Tensor* t : {&w1, &b1, &w2, &b2, &w3, &b3}) p.push_back(t);
    return p;
  }
};

struct BinaryNodes {
  EncoderNodes enc;
  int w1, b1, w2, b2, w3, b3;
};

inline BinaryNodes bind(Tape& t, const BinaryDigitNet& n) {
  return {bind(t, n.encoder), t.leaf(n.w1), t.leaf(n.b1), t.leaf(n.w2),
          t.leaf(n.b2),       t.leaf(n.w3), t.leaf(n.b3)};
}

inline std::vector<int> param_nodes(const BinaryNodes& n) {
  std::vector<int> ids = param_nodes(n.enc);
  for (int id : {n.w1, n.b1, n.w2, n.b2, n.w3, n.b3}) ids.push_back(id);
  return ids;
}

// Normalized readout of a two-unit sigmoid head; the clamp only guards
// against both units underflowing to zero.
inline int p_on_from_logits(Tape& t, int z, BinaryHead head) {
  if (head == BinaryHead::kSingleLogit) {
    return t.sigmoid(z);
  }
  const int s = t.sigmoid(z);
  const int mask = t.leaf(Tensor({2}, {0.0, 1.0}));
  const int num = t.sum(t.mul(s, mask));
  const int den = t.clamp_min(t.sum(s), 1e-12);
  return t.div(num, den);
}

inline void check_image_shape(const Tensor& image) {
  if (image.shape != std::vector<std::size_t>{1, 28, 28}) {
    throw std::invalid_argument("expected a 1x28x28 image, got " +
                                ad::shape_str(image.shape));
  }
}

// scalar node holding p_on for one image
inline int binary_forward_node(Tape& t, const BinaryNodes& n, BinaryHead head,
                               int image) {
  const int f = encode(t, n.enc, image);
  int h = t.relu(t.add(t.matmul(n.w1, f), n.b1));
  h = t.relu(t.add(t.matmul(n.w2, h), n.b2));
  const int z = t.add(t.matmul(n.w3, h), n.b3);
  return p_on_from_logits(t, z, head);
}

inline double binary_digit_forward(const BinaryDigitNet& net,
                                   const Tensor& image) {
  check_image_shape(image);
  Tape t;
  const BinaryNodes n = bind(t, net);
  const int p = binary_forward_node(t, n, net.head, t.leaf(image));
  return t.value(p).data[0];
}

// Two images -> one distribution over the four light configurations.
struct JointWorldNet {
  explicit JointWorldNet(bool shared = true) : shared_encoder(shared) {}

  bool shared_encoder;
  DigitEncoder enc_red;
  DigitEncoder enc_green;  // unused when shared_encoder
  Tensor w1{{120, 512}};
  Tensor b1{{120}};
  Tensor w2{{84, 120}};
  Tensor b2{{84}};
  Tensor w3{{4, 84}};
  Tensor b3{{4}};

  std::vector<Tensor*> params() {
    std::vector<Tensor*> p = enc_red.params();
    if (!shared_encoder) {
      for (Tensor* t : enc_green.params()) p.push_back(t);
    }
    for (Tensor* t : {&w1, &b1, &w2, &b2, &w3, &b3}) p.push_back(t);
    return p;
  }
  std::vector<const Tensor*> params() const {
    std::vector<const Tensor*> p = enc_red.params();
    if (!shared_encoder) {
      for (const Tensor* t : enc_green.params()) p.push_back(t);
    }
    for (const Tensor* t : {&w1, &b1, &w2, &b2, &w3, &b3}) p.push_back(t);
    return p;
  }
};

struct JointNodes {
  EncoderNodes enc_red, enc_green;
  int w1, b1, w2, b2, w3, b3;
};

inline JointNodes bind(Tape& t, const JointWorldNet& n) {
  const EncoderNodes er = bind(t, n.enc_red);
  const EncoderNodes eg = n.shared_encoder ? er : bind(t, n.enc_green);
  return {er,           eg,           t.leaf(n.w1), t.leaf(n.b1),
          t.leaf(n.w2), t.leaf(n.b2), t.leaf(n.w3), t.leaf(n.b3)};
}

inline std::vector<int> param_nodes(const JointNodes& n, bool shared_encoder) {
  std::vector<int> ids = param_nodes(n.enc_red);
  if (!shared_encoder) {
    for (int id : param_nodes(n.enc_green)) ids.push_back(id);
  }
  for (int id : {n.w1, n.b1, n.w2, n.b2, n.w3, n.b3}) ids.push_back(id);
  return ids;
}

// length-4 softmax node
inline int joint_forward_node(Tape& t, const JointNodes& n, int image_red,
                              int image_green) {
  const int fr = encode(t, n.enc_red, image_red);
  const int fg = encode(t, n.enc_green, image_green);
  const int f = t.concat(fr, fg);  // [512]
  int h = t.relu(t.add(t.matmul(n.w1, f), n.b1));
  h = t.relu(t.add(t.matmul(n.w2, h), n.b2));
  return t.softmax(t.add(t.matmul(n.w3, h), n.b3));
}

inline std::vector<double> joint_world_forward(const JointWorldNet& net,
                                               const Tensor& image_red,
                                               const Tensor& image_green) {
  check_image_shape(image_red);
  check_image_shape(image_green);
  Tape t;
  const JointNodes n = bind(t, net);
  const int q = joint_forward_node(t, n, t.leaf(image_red),
                                   t.leaf(image_green));
  return t.value(q).data;
}

using NamedParams = std::vector<std::pair<std::string, const Tensor*>>;

inline void append_named(NamedParams& out, const std::string& prefix,
                         const DigitEncoder& e) {
  out.emplace_back(prefix + "conv1_k", &e.conv1_k);
  out.emplace_back(prefix + "conv1_b", &e.conv1_b);
  out.emplace_back(prefix + "conv2_k", &e.conv2_k);
  out.emplace_back(prefix + "conv2_b", &e.conv2_b);
}

inline NamedParams named_params(const BinaryDigitNet& n,
                                const std::string& prefix) {
  NamedParams out;
  append_named(out, prefix + "encoder.", n.encoder);
  out.emplace_back(prefix + "w1", &n.w1);
  out.emplace_back(prefix + "b1", &n.b1);
  out.emplace_back(prefix + "w2", &n.w2);
  out.emplace_back(prefix + "b2", &n.b2);
  out.emplace_back(prefix + "w3", &n.w3);
  out.emplace_back(prefix + "b3", &n.b3);
  return out;
}

inline NamedParams named_params(const JointWorldNet& n,
                                const std::string& prefix) {
  NamedParams out;
  append_named(out, prefix + "enc_red.", n.enc_red);
  if (!n.shared_encoder) append_named(out, prefix + "enc_green.", n.enc_green);
  out.emplace_back(prefix + "w1", &n.w1);
  out.emplace_back(prefix + "b1", &n.b1);
  out.emplace_back(prefix + "w2", &n.w2);
  out.emplace_back(prefix + "b2", &n.b2);
  out.emplace_back(prefix + "w3", &n.w3);
  out.emplace_back(prefix + "b3", &n.b3);
  return out;
}

// uniform +-1/sqrt(fan_in), biases included
inline void init_tensor(Rng& rng, Tensor& t, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
}

inline void init_params(Rng& rng, DigitEncoder& e) {
  init_tensor(rng, e.conv1_k, 1 * 5 * 5);
  init_tensor(rng, e.conv1_b, 1 * 5 * 5);
  init_tensor(rng, e.conv2_k, 6 * 5 * 5);
  init_tensor(rng, e.conv2_b, 6 * 5 * 5);
}

inline void init_params(Rng& rng, BinaryDigitNet& n) {
  init_params(rng, n.encoder);
  init_tensor(rng, n.w1, 256);
  init_tensor(rng, n.b1, 256);
  init_tensor(rng, n.w2, 120);
  init_tensor(rng, n.b2, 120);
  init_tensor(rng, n.w3, 84);
  init_tensor(rng, n.b3, 84);
}

inline void init_params(Rng& rng, JointWorldNet& n) {
  init_params(rng, n.enc_red);
  if (!n.shared_encoder) init_params(rng, n.enc_green);
  init_tensor(rng, n.w1, 512);
  init_tensor(rng, n.b1, 512);
  init_tensor(rng, n.w2, 120);
  init_tensor(rng, n.b2, 120);
  init_tensor(rng, n.w3, 84);
  init_tensor(rng, n.b3, 84);
}

}  // namespace nesylab::models
