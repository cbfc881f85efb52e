#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nesylab/tensor.hpp"

namespace nesylab::ad {

// Reverse-mode tape. Nodes append in evaluation order, so ids already form a
// topological order and backward is a single reverse sweep. Gradients are
// allocated lazily; fan-out accumulates additively. One backward per tape.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int leaf(Tensor value) { return push(std::move(value), nullptr); }

  const Tensor& value(int id) const { return rec(id).value; }

  // Zero-filled for nodes backward never reached.
  const Tensor& grad(int id) { return grad_buf(id); }

  std::size_t size() const { return recs_.size(); }

  int add(int a, int b) {
    require_same(a, b, "add");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, b, id](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      Tensor& ga = t.grad_buf(a);
      Tensor& gb = t.grad_buf(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i];
        gb.data[i] += g.data[i];
      }
    };
    return id;
  }

  int sub(int a, int b) {
    require_same(a, b, "sub");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= vb.data[i];
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, b, id](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      Tensor& ga = t.grad_buf(a);
      Tensor& gb = t.grad_buf(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i];
        gb.data[i] -= g.data[i];
      }
    };
    return id;
  }

  // elementwise product
  int mul(int a, int b) {
    require_same(a, b, "mul");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vb.data[i];
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, b, id](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      const Tensor& va = t.rec(a).value;
      const Tensor& vb2 = t.rec(b).value;
      Tensor& ga = t.grad_buf(a);
      Tensor& gb = t.grad_buf(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i] * vb2.data[i];
        gb.data[i] += g.data[i] * va.data[i];
      }
    };
    return id;
  }

  // elementwise quotient; zero divisors are rejected rather than producing inf
  int div(int a, int b) {
    require_same(a, b, "div");
    const Tensor& vb = value(b);
    for (double v : vb.data) {
      if (v == 0.0) throw std::domain_error("div by zero element");
    }
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] /= vb.data[i];
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, b, id](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      const Tensor& vo = t.rec(id).value;
      const Tensor& vb2 = t.rec(b).value;
      Tensor& ga = t.grad_buf(a);
      Tensor& gb = t.grad_buf(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i] / vb2.data[i];
        gb.data[i] -= g.data[i] * vo.data[i] / vb2.data[i];
      }
    };
    return id;
  }

  int scalar_mul(double c, int a) {
    Tensor out = value(a);
    for (double& v : out.data) v *= c;
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, c, id](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      Tensor& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += c * g.data[i];
      }
    };
    return id;
  }

  // [m,k] x [k,n] -> [m,n], or [m,k] x [k] -> [m]
  int matmul(int a, int b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.rank() != 2) {
      throw std::invalid_argument("matmul lhs must be rank 2, got " +
                                  shape_str(va.shape));
    }
    const std::size_t m = va.shape[0];
    const std::size_t k = va.shape[1];
    if (vb.rank() == 1) {
      if (vb.shape[0] != k) {
        throw std::invalid_argument("matmul shapes " + shape_str(va.shape) +
                                    " x " + shape_str(vb.shape));
      }
      Tensor out({m});
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        const double* row = va.data.data() + i * k;
        for (std::size_t l = 0; l < k; ++l) acc += row[l] * vb.data[l];
        out.data[i] = acc;
      }
      const int id = push(std::move(out), nullptr);
      recs_[static_cast<std::size_t>(id)].back = [a, b, id, m, k](Tape& t) {
        const Tensor& g = t.rec(id).grad;
        const Tensor& va2 = t.rec(a).value;
        const Tensor& vb2 = t.rec(b).value;
        Tensor& ga = t.grad_buf(a);
        Tensor& gb = t.grad_buf(b);
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = g.data[i];
          for (std::size_t l = 0; l < k; ++l) {
            ga.data[i * k + l] += gi * vb2.data[l];
            gb.data[l] += gi * va2.data[i * k + l];
          }
        }
      };
      return id;
    }
    if (vb.rank() != 2 || vb.shape[0] != k) {
      throw std::invalid_argument("matmul shapes " + shape_str(va.shape) +
                                  " x " + shape_str(vb.shape));
    }
    const std::size_t n = vb.shape[1];
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t l = 0; l < k; ++l) {
        const double ail = va.data[i * k + l];
        const double* brow = vb.data.data() + l * n;
        double* orow = out.data.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += ail * brow[j];
      }
    }
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, b, id, m, k, n](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      const Tensor& va2 = t.rec(a).value;
      const Tensor& vb2 = t.rec(b).value;
      Tensor& ga = t.grad_buf(a);
      Tensor& gb = t.grad_buf(b);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
          double acc = 0.0;
          const double ail = va2.data[i * k + l];
          for (std::size_t j = 0; j < n; ++j) {
            const double gij = g.data[i * n + j];
            acc += gij * vb2.data[l * n + j];
            gb.data[l * n + j] += ail * gij;
          }
          ga.data[i * k + l] += acc;
        }
      }
    };
    return id;
  }

  // x [C,H,W], kernel [F,C,KH,KW], bias [F] -> [F,H-KH+1,W-KW+1]
  // stride 1, no padding
  int conv2d(int x, int kernel, int bias) {
    const Tensor& vx = value(x);
    const Tensor& vk = value(kernel);
    const Tensor& vb = value(bias);
    if (vx.rank() != 3 || vk.rank() != 4 || vb.rank() != 1) {
      throw std::invalid_argument("conv2d expects x rank 3, kernel rank 4, "
                                  "bias rank 1");
    }
    const std::size_t C = vx.shape[0], H = vx.shape[1], W = vx.shape[2];
    const std::size_t F = vk.shape[0], KH = vk.shape[2], KW = vk.shape[3];
    if (vk.shape[1] != C || vb.shape[0] != F || KH > H || KW > W) {
      throw std::invalid_argument("conv2d shapes " + shape_str(vx.shape) +
                                  ", " + shape_str(vk.shape) + ", " +
                                  shape_str(vb.shape));
    }
    const std::size_t OH = H - KH + 1, OW = W - KW + 1;
    Tensor out({F, OH, OW});
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t oy = 0; oy < OH; ++oy) {
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double acc = vb.data[f];
          for (std::size_t c = 0; c < C; ++c) {
            const double* xin = vx.data.data() + (c * H + oy) * W + ox;
            const double* kin = vk.data.data() + ((f * C + c) * KH) * KW;
            for (std::size_t ky = 0; ky < KH; ++ky) {
              const double* xr = xin + ky * W;
              const double* kr = kin + ky * KW;
              for (std::size_t kx = 0; kx < KW; ++kx) acc += xr[kx] * kr[kx];
            }
          }
          out.data[(f * OH + oy) * OW + ox] = acc;
        }
      }
    }
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [x, kernel, bias, id, C, H, W, F,
                                                KH, KW, OH, OW](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      const Tensor& vx2 = t.rec(x).value;
      const Tensor& vk2 = t.rec(kernel).value;
      Tensor& gx = t.grad_buf(x);
      Tensor& gk = t.grad_buf(kernel);
      Tensor& gb = t.grad_buf(bias);
      for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t oy = 0; oy < OH; ++oy) {
          for (std::size_t ox = 0; ox < OW; ++ox) {
            const double go = g.data[(f * OH + oy) * OW + ox];
            gb.data[f] += go;
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t xbase = (c * H + oy) * W + ox;
              const std::size_t kbase = ((f * C + c) * KH) * KW;
              for (std::size_t ky = 0; ky < KH; ++ky) {
                double* gxr = gx.data.data() + xbase + ky * W;
                double* gkr = gk.data.data() + kbase + ky * KW;
                const double* xr = vx2.data.data() + xbase + ky * W;
                const double* kr = vk2.data.data() + kbase + ky * KW;
                for (std::size_t kx = 0; kx < KW; ++kx) {
                  gxr[kx] += go * kr[kx];
                  gkr[kx] += go * xr[kx];
                }
              }
            }
          }
        }
      }
    };
    return id;
  }

  // [C,H,W] -> [C,H/2,W/2]; H and W must be even
  int maxpool2x2(int a) {
    const Tensor& va = value(a);
    if (va.rank() != 3 || va.shape[1] % 2 != 0 || va.shape[2] % 2 != 0) {
      throw std::invalid_argument("maxpool2x2 expects rank 3 with even "
                                  "spatial dims, got " + shape_str(va.shape));
    }
    const std::size_t C = va.shape[0], H = va.shape[1], W = va.shape[2];
    const std::size_t OH = H / 2, OW = W / 2;
    Tensor out({C, OH, OW});
    std::vector<std::size_t> argmax(out.size());
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t oy = 0; oy < OH; ++oy) {
        for (std::size_t ox = 0; ox < OW; ++ox) {
          std::size_t best = (c * H + 2 * oy) * W + 2 * ox;
          double bv = va.data[best];
          const std::size_t cands[3] = {best + 1, best + W, best + W + 1};
          for (std::size_t cand : cands) {
            if (va.data[cand] > bv) {
              bv = va.data[cand];
              best = cand;
            }
          }
          const std::size_t o = (c * OH + oy) * OW + ox;
          out.data[o] = bv;
          argmax[o] = best;
        }
      }
    }
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back =
        [a, id, argmax = std::move(argmax)](Tape& t) {
          const Tensor& g = t.rec(id).grad;
          Tensor& ga = t.grad_buf(a);
          for (std::size_t o = 0; o < g.data.size(); ++o) {
            ga.data[argmax[o]] += g.data[o];
          }
        };
    return id;
  }

  int relu(int a) {
    Tensor out = value(a);
    for (double& v : out.data) {
      if (v < 0.0) v = 0.0;
    }
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, id](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      const Tensor& va = t.rec(a).value;
      Tensor& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        if (va.data[i] > 0.0) ga.data[i] += g.data[i];
      }
    };
    return id;
  }

  int sigmoid(int a) {
    Tensor out = value(a);
    for (double& v : out.data) {
      if (v >= 0.0) {
        v = 1.0 / (1.0 + std::exp(-v));
      } else {
        const double e = std::exp(v);
        v = e / (1.0 + e);
      }
    }
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, id](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      const Tensor& s = t.rec(id).value;
      Tensor& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i] * s.data[i] * (1.0 - s.data[i]);
      }
    };
    return id;
  }

  // normalizes along the last axis
  int softmax(int a) {
    const Tensor& va = value(a);
    if (va.rank() < 1) {
      throw std::invalid_argument("softmax expects rank >= 1");
    }
    const std::size_t cols = va.shape.back();
    const std::size_t rows = va.size() / cols;
    Tensor out = va;
    for (std::size_t r = 0; r < rows; ++r) {
      double* row = out.data.data() + r * cols;
      double mx = row[0];
      for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
      double total = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        row[j] = std::exp(row[j] - mx);
        total += row[j];
      }
      for (std::size_t j = 0; j < cols; ++j) row[j] /= total;
    }
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, id, rows, cols](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      const Tensor& s = t.rec(id).value;
      Tensor& ga = t.grad_buf(a);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g.data.data() + r * cols;
        const double* sr = s.data.data() + r * cols;
        double* gar = ga.data.data() + r * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * sr[j];
        for (std::size_t j = 0; j < cols; ++j) {
          gar[j] += sr[j] * (gr[j] - dot);
        }
      }
    };
    return id;
  }

  int log(int a) {
    Tensor out = value(a);
    for (double& v : out.data) {
      if (!(v > 0.0)) {
        throw std::domain_error("log of non-positive value " +
                                std::to_string(v));
      }
      v = std::log(v);
    }
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, id](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      const Tensor& va = t.rec(a).value;
      Tensor& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i] / va.data[i];
      }
    };
    return id;
  }

  // max(x, lo) elementwise; gradient flows only where x > lo
  int clamp_min(int a, double lo) {
    Tensor out = value(a);
    for (double& v : out.data) {
      if (v < lo) v = lo;
    }
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, id, lo](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      const Tensor& va = t.rec(a).value;
      Tensor& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        if (va.data[i] > lo) ga.data[i] += g.data[i];
      }
    };
    return id;
  }

  // same data, new shape; sizes must agree
  int reshape(int a, std::vector<std::size_t> shape) {
    const Tensor& va = value(a);
    if (shape_size(shape) != va.size()) {
      throw std::invalid_argument("reshape from " + shape_str(va.shape) +
                                  " to " + shape_str(shape));
    }
    Tensor out(std::move(shape), va.data);
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, id](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      Tensor& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    };
    return id;
  }

  int sum(int a) {
    const Tensor& va = value(a);
    double total = 0.0;
    for (double v : va.data) total += v;
    const int id = push(Tensor::scalar(total), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, id](Tape& t) {
      const double g = t.rec(id).grad.data[0];
      Tensor& ga = t.grad_buf(a);
      for (double& v : ga.data) v += g;
    };
    return id;
  }

  // joins along the last axis; leading dims must match
  int concat(int a, int b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.rank() < 1 || va.rank() != vb.rank()) {
      throw std::invalid_argument("concat rank mismatch");
    }
    for (std::size_t i = 0; i + 1 < va.rank(); ++i) {
      if (va.shape[i] != vb.shape[i]) {
        throw std::invalid_argument("concat shapes " + shape_str(va.shape) +
                                    " and " + shape_str(vb.shape));
      }
    }
    const std::size_t la = va.shape.back(), lb = vb.shape.back();
    const std::size_t rows = va.size() / la;
    std::vector<std::size_t> shape = va.shape;
    shape.back() = la + lb;
    Tensor out(std::move(shape));
    for (std::size_t r = 0; r < rows; ++r) {
      double* orow = out.data.data() + r * (la + lb);
      const double* ar = va.data.data() + r * la;
      const double* br = vb.data.data() + r * lb;
      for (std::size_t j = 0; j < la; ++j) orow[j] = ar[j];
      for (std::size_t j = 0; j < lb; ++j) orow[la + j] = br[j];
    }
    const int id = push(std::move(out), nullptr);
    recs_[static_cast<std::size_t>(id)].back = [a, b, id, rows, la, lb](Tape& t) {
      const Tensor& g = t.rec(id).grad;
      Tensor& ga = t.grad_buf(a);
      Tensor& gb = t.grad_buf(b);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g.data.data() + r * (la + lb);
        for (std::size_t j = 0; j < la; ++j) ga.data[r * la + j] += gr[j];
        for (std::size_t j = 0; j < lb; ++j) gb.data[r * lb + j] += gr[la + j];
      }
    };
    return id;
  }

  void backward(int root) {
    if (ran_backward_) {
      throw std::logic_error("backward already run on this tape");
    }
    const Rec& r = rec(root);
    if (r.value.size() != 1) {
      throw std::invalid_argument("backward root must be a scalar, got shape " +
                                  shape_str(r.value.shape));
    }
    ran_backward_ = true;
    grad_buf(root).data[0] = 1.0;
    for (std::size_t i = recs_.size(); i-- > 0;) {
      Rec& n = recs_[i];
      if (n.grad.data.empty() || !n.back) continue;
      n.back(*this);
    }
  }

 private:
  struct Rec {
    Tensor value;
    Tensor grad;  // empty until touched
    std::function<void(Tape&)> back;
  };

  const Rec& rec(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= recs_.size()) {
      throw std::out_of_range("tape node id out of range: " +
                              std::to_string(id));
    }
    return recs_[static_cast<std::size_t>(id)];
  }

  Rec& rec(int id) {
    return const_cast<Rec&>(static_cast<const Tape*>(this)->rec(id));
  }

  Tensor& grad_buf(int id) {
    Rec& r = rec(id);
    if (r.grad.data.empty()) {
      r.grad.shape = r.value.shape;
      r.grad.data.assign(r.value.size(), 0.0);
    }
    return r.grad;
  }

  void require_same(int a, int b, const char* op) {
    if (!same_shape(value(a), value(b))) {
      throw std::invalid_argument(std::string(op) + " shape mismatch: " +
                                  shape_str(value(a).shape) + " vs " +
                                  shape_str(value(b).shape));
    }
  }

  int push(Tensor v, std::function<void(Tape&)> back) {
    if (v.size() == 0) {
      throw std::invalid_argument("empty tensors are not supported");
    }
    Rec r;
    r.value = std::move(v);
    r.back = std::move(back);
    recs_.push_back(std::move(r));
    return static_cast<int>(recs_.size()) - 1;
  }

  std::vector<Rec> recs_;
  bool ran_backward_ = false;
};

}  // namespace nesylab::ad
