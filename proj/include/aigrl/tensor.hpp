#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aigrl/error.hpp"

namespace aigrl {

// Named value buffer for parameters and checkpoints. Compute happens on a
// Tape; this type only stores data.
template <class S>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<S> data;

  int64_t numel() const {
    int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
  int rows2d() const { return shape.size() == 2 ? static_cast<int>(shape[0]) : 1; }
  int cols2d() const {
    if (shape.size() == 2) return static_cast<int>(shape[1]);
    return shape.empty() ? 1 : static_cast<int>(shape[0]);
  }

  static Tensor zeros(std::vector<int64_t> shape_) {
    Tensor t;
    t.shape = std::move(shape_);
    t.data.assign(static_cast<size_t>(t.numel()), S(0));
    return t;
  }
};

// Reverse-mode tape over row-major 2-D buffers (vectors are 1 x n, scalars
// 1 x 1). Single-threaded; node ids index into `nodes`.
template <class S>
class Tape {
 public:
  using Idx = int32_t;

  struct Node {
    int rows = 0, cols = 0;
    std::vector<S> val;
    std::vector<S> grad;
    std::function<void(Tape&, Idx)> back;
  };

  std::vector<Node> nodes;

  int rows(Idx i) const { return nodes[i].rows; }
  int cols(Idx i) const { return nodes[i].cols; }
  std::span<const S> val(Idx i) const { return nodes[i].val; }
  std::span<const S> grad(Idx i) const { return nodes[i].grad; }

  Idx leaf(int r, int c, std::span<const S> data) {
    check(static_cast<int64_t>(data.size()) == int64_t(r) * c, "leaf data size mismatch");
    Idx id = make(r, c);
    std::copy(data.begin(), data.end(), nodes[id].val.begin());
    return id;
  }

  Idx leaf(const Tensor<S>& t) { return leaf(t.rows2d(), t.cols2d(), std::span<const S>(t.data)); }

  Idx zeros(int r, int c) { return make(r, c); }

  Idx matmul(Idx a, Idx b) {
    shapes_must(cols(a) == rows(b), "matmul", a, b);
    const int m = rows(a), k = cols(a), n = cols(b);
    Idx out = make(m, n);
    const S* pa = nodes[a].val.data();
    const S* pb = nodes[b].val.data();
    S* po = nodes[out].val.data();
    for (int i = 0; i < m; ++i)
      for (int t = 0; t < k; ++t) {
        const S av = pa[i * k + t];
        if (av == S(0)) continue;
        for (int j = 0; j < n; ++j) po[i * n + j] += av * pb[t * n + j];
      }
    finish(out);
    nodes[out].back = [a, b, m, k, n](Tape& tp, Idx self) {
      const S* g = tp.nodes[self].grad.data();
      const S* pa = tp.nodes[a].val.data();
      const S* pb = tp.nodes[b].val.data();
      S* ga = tp.nodes[a].grad.data();
      S* gb = tp.nodes[b].grad.data();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const S gv = g[i * n + j];
          if (gv == S(0)) continue;
          for (int t = 0; t < k; ++t) {
            ga[i * k + t] += gv * pb[t * n + j];
            gb[t * n + j] += pa[i * k + t] * gv;
          }
        }
    };
    return out;
  }

  // a @ b^T, with b given as n x k
  Idx matmul_nt(Idx a, Idx b) {
    shapes_must(cols(a) == cols(b), "matmul_nt", a, b);
    const int m = rows(a), k = cols(a), n = rows(b);
    Idx out = make(m, n);
    const S* pa = nodes[a].val.data();
    const S* pb = nodes[b].val.data();
    S* po = nodes[out].val.data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        S acc = 0;
        for (int t = 0; t < k; ++t) acc += pa[i * k + t] * pb[j * k + t];
        po[i * n + j] = acc;
      }
    finish(out);
    nodes[out].back = [a, b, m, k, n](Tape& tp, Idx self) {
      const S* g = tp.nodes[self].grad.data();
      const S* pa = tp.nodes[a].val.data();
      const S* pb = tp.nodes[b].val.data();
      S* ga = tp.nodes[a].grad.data();
      S* gb = tp.nodes[b].grad.data();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const S gv = g[i * n + j];
          if (gv == S(0)) continue;
          for (int t = 0; t < k; ++t) {
            ga[i * k + t] += gv * pb[j * k + t];
            gb[j * k + t] += gv * pa[i * k + t];
          }
        }
    };
    return out;
  }

  Idx add(Idx a, Idx b) {
    return elementwise2(
        a, b, [](S x, S y) { return x + y; },
        [](Tape& tp, Idx a_, Idx b_, Idx self) {
          accumulate(tp, a_, tp.nodes[self].grad, S(1));
          accumulate(tp, b_, tp.nodes[self].grad, S(1));
        });
  }

  Idx sub(Idx a, Idx b) {
    return elementwise2(
        a, b, [](S x, S y) { return x - y; },
        [](Tape& tp, Idx a_, Idx b_, Idx self) {
          accumulate(tp, a_, tp.nodes[self].grad, S(1));
          accumulate(tp, b_, tp.nodes[self].grad, S(-1));
        });
  }

  Idx mul(Idx a, Idx b) {
    shapes_must(rows(a) == rows(b) && cols(a) == cols(b), "mul", a, b);
    Idx out = make(rows(a), cols(a));
    for (size_t i = 0; i < nodes[out].val.size(); ++i)
      nodes[out].val[i] = nodes[a].val[i] * nodes[b].val[i];
    finish(out);
    nodes[out].back = [a, b](Tape& tp, Idx self) {
      const auto& g = tp.nodes[self].grad;
      for (size_t i = 0; i < g.size(); ++i) {
        tp.nodes[a].grad[i] += g[i] * tp.nodes[b].val[i];
        tp.nodes[b].grad[i] += g[i] * tp.nodes[a].val[i];
      }
    };
    return out;
  }

  Idx scale(Idx a, S c) {
    Idx out = make(rows(a), cols(a));
    for (size_t i = 0; i < nodes[out].val.size(); ++i) nodes[out].val[i] = nodes[a].val[i] * c;
    finish(out);
    nodes[out].back = [a, c](Tape& tp, Idx self) {
      const auto& g = tp.nodes[self].grad;
      for (size_t i = 0; i < g.size(); ++i) tp.nodes[a].grad[i] += g[i] * c;
    };
    return out;
  }

  // broadcast a 1 x c bias over every row
  Idx add_rowvec(Idx a, Idx v) {
    shapes_must(rows(v) == 1 && cols(v) == cols(a), "add_rowvec", a, v);
    const int m = rows(a), c = cols(a);
    Idx out = make(m, c);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < c; ++j)
        nodes[out].val[i * c + j] = nodes[a].val[i * c + j] + nodes[v].val[j];
    finish(out);
    nodes[out].back = [a, v, m, c](Tape& tp, Idx self) {
      const auto& g = tp.nodes[self].grad;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < c; ++j) {
          tp.nodes[a].grad[i * c + j] += g[i * c + j];
          tp.nodes[v].grad[j] += g[i * c + j];
        }
    };
    return out;
  }

  Idx concat_cols(Idx a, Idx b) {
    shapes_must(rows(a) == rows(b), "concat_cols", a, b);
    const int m = rows(a), ca = cols(a), cb = cols(b);
    Idx out = make(m, ca + cb);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < ca; ++j) nodes[out].val[i * (ca + cb) + j] = nodes[a].val[i * ca + j];
      for (int j = 0; j < cb; ++j)
        nodes[out].val[i * (ca + cb) + ca + j] = nodes[b].val[i * cb + j];
    }
    finish(out);
    nodes[out].back = [a, b, m, ca, cb](Tape& tp, Idx self) {
      const auto& g = tp.nodes[self].grad;
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < ca; ++j) tp.nodes[a].grad[i * ca + j] += g[i * (ca + cb) + j];
        for (int j = 0; j < cb; ++j) tp.nodes[b].grad[i * cb + j] += g[i * (ca + cb) + ca + j];
      }
    };
    return out;
  }

  Idx slice_cols(Idx a, int c0, int c1) {
    check(0 <= c0 && c0 < c1 && c1 <= cols(a), "slice_cols range invalid");
    const int m = rows(a), c = cols(a), w = c1 - c0;
    Idx out = make(m, w);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j) nodes[out].val[i * w + j] = nodes[a].val[i * c + c0 + j];
    finish(out);
    nodes[out].back = [a, m, c, c0, w](Tape& tp, Idx self) {
      const auto& g = tp.nodes[self].grad;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j) tp.nodes[a].grad[i * c + c0 + j] += g[i * w + j];
    };
    return out;
  }

  // gathers rows from possibly different sources into one matrix
  Idx stack_rows(const std::vector<std::pair<Idx, int>>& items) {
    check(!items.empty(), "stack_rows needs at least one row");
    const int c = cols(items[0].first);
    for (const auto& [src, r] : items) {
      check(cols(src) == c, "stack_rows column mismatch");
      check(0 <= r && r < rows(src), "stack_rows row out of range");
    }
    const int m = static_cast<int>(items.size());
    Idx out = make(m, c);
    for (int i = 0; i < m; ++i) {
      const auto& [src, r] = items[i];
      for (int j = 0; j < c; ++j) nodes[out].val[i * c + j] = nodes[src].val[r * c + j];
    }
    finish(out);
    nodes[out].back = [items, c](Tape& tp, Idx self) {
      const auto& g = tp.nodes[self].grad;
      for (size_t i = 0; i < items.size(); ++i) {
        const auto& [src, r] = items[i];
        for (int j = 0; j < c; ++j) tp.nodes[src].grad[r * c + j] += g[i * c + j];
      }
    };
    return out;
  }

  Idx row(Idx a, int r) { return stack_rows({{a, r}}); }

  Idx gather_rows(Idx a, const std::vector<int>& rows_) {
    std::vector<std::pair<Idx, int>> items;
    items.reserve(rows_.size());
    for (int r : rows_) items.push_back({a, r});
    return stack_rows(items);
  }

  Idx mean_rows(Idx a) {
    const int m = rows(a), c = cols(a);
    Idx out = make(1, c);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < c; ++j) nodes[out].val[j] += nodes[a].val[i * c + j] / S(m);
    finish(out);
    nodes[out].back = [a, m, c](Tape& tp, Idx self) {
      const auto& g = tp.nodes[self].grad;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < c; ++j) tp.nodes[a].grad[i * c + j] += g[j] / S(m);
    };
    return out;
  }

  Idx relu(Idx a) {
    return elementwise1(
        a, [](S x) { return x > S(0) ? x : S(0); },
        [](Tape& tp, Idx a_, Idx self) {
          const auto& g = tp.nodes[self].grad;
          for (size_t i = 0; i < g.size(); ++i)
            if (tp.nodes[a_].val[i] > S(0)) tp.nodes[a_].grad[i] += g[i];
        });
  }

  Idx sigmoid(Idx a) {
    return elementwise1(
        a, [](S x) { return S(1) / (S(1) + std::exp(-x)); },
        [](Tape& tp, Idx a_, Idx self) {
          const auto& g = tp.nodes[self].grad;
          const auto& y = tp.nodes[self].val;
          for (size_t i = 0; i < g.size(); ++i)
            tp.nodes[a_].grad[i] += g[i] * y[i] * (S(1) - y[i]);
        });
  }

  Idx tanh_(Idx a) {
    return elementwise1(
        a, [](S x) { return std::tanh(x); },
        [](Tape& tp, Idx a_, Idx self) {
          const auto& g = tp.nodes[self].grad;
          const auto& y = tp.nodes[self].val;
          for (size_t i = 0; i < g.size(); ++i) tp.nodes[a_].grad[i] += g[i] * (S(1) - y[i] * y[i]);
        });
  }

  Idx softplus(Idx a) {
    return elementwise1(
        a,
        [](S x) {
          if (x > S(30)) return x;
          if (x < S(-30)) return std::exp(x);
          return std::log(S(1) + std::exp(x));
        },
        [](Tape& tp, Idx a_, Idx self) {
          const auto& g = tp.nodes[self].grad;
          for (size_t i = 0; i < g.size(); ++i) {
            const S x = tp.nodes[a_].val[i];
            tp.nodes[a_].grad[i] += g[i] * (S(1) / (S(1) + std::exp(-x)));
          }
        });
  }

  // row-wise softmax over allowed key positions only; masked entries never
  // enter the normalization and their outputs are exactly zero
  Idx softmax_masked(Idx a, const std::vector<std::vector<int>>& allowed) {
    const int m = rows(a), c = cols(a);
    check(static_cast<int>(allowed.size()) == m, "softmax_masked needs one key list per row");
    Idx out = make(m, c);
    for (int i = 0; i < m; ++i) {
      const auto& keys = allowed[i];
      check(!keys.empty(), "softmax_masked row with no allowed keys");
      S mx = nodes[a].val[i * c + keys[0]];
      for (int k : keys) mx = std::max(mx, nodes[a].val[i * c + k]);
      S denom = 0;
      for (int k : keys) denom += std::exp(nodes[a].val[i * c + k] - mx);
      for (int k : keys) nodes[out].val[i * c + k] = std::exp(nodes[a].val[i * c + k] - mx) / denom;
    }
    finish(out);
    nodes[out].back = [a, m, c, allowed](Tape& tp, Idx self) {
      const auto& g = tp.nodes[self].grad;
      const auto& p = tp.nodes[self].val;
      for (int i = 0; i < m; ++i) {
        S dot = 0;
        for (int k : allowed[i]) dot += g[i * c + k] * p[i * c + k];
        for (int k : allowed[i])
          tp.nodes[a].grad[i * c + k] += p[i * c + k] * (g[i * c + k] - dot);
      }
    };
    return out;
  }

  Idx layer_norm(Idx a, Idx gamma, Idx beta, S eps = S(1e-5)) {
    shapes_must(rows(gamma) == 1 && cols(gamma) == cols(a), "layer_norm gamma", a, gamma);
    shapes_must(rows(beta) == 1 && cols(beta) == cols(a), "layer_norm beta", a, beta);
    const int m = rows(a), c = cols(a);
    Idx out = make(m, c);
    std::vector<S> inv_sigma(m), mu(m);
    for (int i = 0; i < m; ++i) {
      S s = 0;
      for (int j = 0; j < c; ++j) s += nodes[a].val[i * c + j];
      mu[i] = s / S(c);
      S var = 0;
      for (int j = 0; j < c; ++j) {
        const S d = nodes[a].val[i * c + j] - mu[i];
        var += d * d;
      }
      inv_sigma[i] = S(1) / std::sqrt(var / S(c) + eps);
      for (int j = 0; j < c; ++j) {
        const S xhat = (nodes[a].val[i * c + j] - mu[i]) * inv_sigma[i];
        nodes[out].val[i * c + j] = xhat * nodes[gamma].val[j] + nodes[beta].val[j];
      }
    }
    finish(out);
    nodes[out].back = [a, gamma, beta, m, c, inv_sigma, mu](Tape& tp, Idx self) {
      const auto& g = tp.nodes[self].grad;
      for (int i = 0; i < m; ++i) {
        S mean_gg = 0, mean_ggx = 0;
        std::vector<S> xhat(c), gg(c);
        for (int j = 0; j < c; ++j) {
          xhat[j] = (tp.nodes[a].val[i * c + j] - mu[i]) * inv_sigma[i];
          gg[j] = g[i * c + j] * tp.nodes[gamma].val[j];
          mean_gg += gg[j];
          mean_ggx += gg[j] * xhat[j];
          tp.nodes[gamma].grad[j] += g[i * c + j] * xhat[j];
          tp.nodes[beta].grad[j] += g[i * c + j];
        }
        mean_gg /= S(c);
        mean_ggx /= S(c);
        for (int j = 0; j < c; ++j)
          tp.nodes[a].grad[i * c + j] += (gg[j] - mean_gg - xhat[j] * mean_ggx) * inv_sigma[i];
      }
    };
    return out;
  }

  Idx mean(Idx a) {
    const int64_t n = static_cast<int64_t>(nodes[a].val.size());
    Idx out = make(1, 1);
    S s = 0;
    for (const S v : nodes[a].val) s += v;
    nodes[out].val[0] = s / S(n);
    finish(out);
    nodes[out].back = [a, n](Tape& tp, Idx self) {
      const S g = tp.nodes[self].grad[0] / S(n);
      for (auto& gv : tp.nodes[a].grad) gv += g;
    };
    return out;
  }

  // ---- losses ----

  Idx l1_loss(Idx pred, std::span<const S> target) {
    check(nodes[pred].val.size() == target.size(), "l1_loss size mismatch");
    const int64_t n = static_cast<int64_t>(target.size());
    Idx out = make(1, 1);
    S s = 0;
    for (size_t i = 0; i < target.size(); ++i) s += std::abs(nodes[pred].val[i] - target[i]);
    nodes[out].val[0] = s / S(n);
    finish(out);
    std::vector<S> tgt(target.begin(), target.end());
    nodes[out].back = [pred, tgt, n](Tape& tp, Idx self) {
      const S g = tp.nodes[self].grad[0] / S(n);
      for (size_t i = 0; i < tgt.size(); ++i) {
        const S d = tp.nodes[pred].val[i] - tgt[i];
        if (d > S(0))
          tp.nodes[pred].grad[i] += g;
        else if (d < S(0))
          tp.nodes[pred].grad[i] -= g;
      }
    };
    return out;
  }

  Idx bce_loss(Idx prob, std::span<const S> target) {
    check(nodes[prob].val.size() == target.size(), "bce_loss size mismatch");
    const int64_t n = static_cast<int64_t>(target.size());
    const S lo = S(1e-7), hi = S(1) - S(1e-7);
    Idx out = make(1, 1);
    S s = 0;
    for (size_t i = 0; i < target.size(); ++i) {
      const S p = std::clamp(nodes[prob].val[i], lo, hi);
      s += -(target[i] * std::log(p) + (S(1) - target[i]) * std::log(S(1) - p));
    }
    nodes[out].val[0] = s / S(n);
    finish(out);
    std::vector<S> tgt(target.begin(), target.end());
    nodes[out].back = [prob, tgt, n, lo, hi](Tape& tp, Idx self) {
      const S g = tp.nodes[self].grad[0] / S(n);
      for (size_t i = 0; i < tgt.size(); ++i) {
        const S raw = tp.nodes[prob].val[i];
        if (raw <= lo || raw >= hi) continue;  // clamped region has zero slope
        tp.nodes[prob].grad[i] += g * (-tgt[i] / raw + (S(1) - tgt[i]) / (S(1) - raw));
      }
    };
    return out;
  }

  Idx cross_entropy(Idx logits, std::span<const int> classes) {
    const int m = rows(logits), c = cols(logits);
    check(static_cast<int>(classes.size()) == m, "cross_entropy class count mismatch");
    for (int cls : classes) check(0 <= cls && cls < c, "cross_entropy class out of range");
    Idx out = make(1, 1);
    S s = 0;
    for (int i = 0; i < m; ++i) {
      S mx = nodes[logits].val[i * c];
      for (int j = 1; j < c; ++j) mx = std::max(mx, nodes[logits].val[i * c + j]);
      S denom = 0;
      for (int j = 0; j < c; ++j) denom += std::exp(nodes[logits].val[i * c + j] - mx);
      s += std::log(denom) + mx - nodes[logits].val[i * c + classes[i]];
    }
    nodes[out].val[0] = s / S(m);
    finish(out);
    std::vector<int> cls(classes.begin(), classes.end());
    nodes[out].back = [logits, cls, m, c](Tape& tp, Idx self) {
      const S g = tp.nodes[self].grad[0] / S(m);
      for (int i = 0; i < m; ++i) {
        S mx = tp.nodes[logits].val[i * c];
        for (int j = 1; j < c; ++j) mx = std::max(mx, tp.nodes[logits].val[i * c + j]);
        S denom = 0;
        for (int j = 0; j < c; ++j) denom += std::exp(tp.nodes[logits].val[i * c + j] - mx);
        for (int j = 0; j < c; ++j) {
          const S p = std::exp(tp.nodes[logits].val[i * c + j] - mx) / denom;
          tp.nodes[logits].grad[i * c + j] += g * (p - (j == cls[i] ? S(1) : S(0)));
        }
      }
    };
    return out;
  }

  // ---- engine ----

  void backward(Idx root) {
    check(nodes[root].val.size() == 1, "backward root must be scalar");
    nodes[root].grad[0] = S(1);
    for (Idx i = root; i >= 0; --i)
      if (nodes[i].back) nodes[i].back(*this, i);
  }

  S scalar(Idx i) const {
    check(nodes[i].val.size() == 1, "scalar() on non-scalar node");
    return nodes[i].val[0];
  }

 private:
  Idx make(int r, int c) {
    Node n;
    n.rows = r;
    n.cols = c;
    n.val.assign(static_cast<size_t>(r) * c, S(0));
    n.grad.assign(static_cast<size_t>(r) * c, S(0));
    nodes.push_back(std::move(n));
    return static_cast<Idx>(nodes.size() - 1);
  }

  void finish(Idx id) {
#ifndef NDEBUG
    for (const S v : nodes[id].val) assert(std::isfinite(static_cast<double>(v)));
#endif
  }

  static void check(bool ok, const std::string& msg) {
    if (!ok) throw ArgumentError(msg);
  }

  void shapes_must(bool ok, const char* op, Idx a, Idx b) const {
    if (!ok)
      throw ArgumentError(std::string(op) + ": incompatible shapes (" +
                          std::to_string(rows(a)) + "x" + std::to_string(cols(a)) + " vs " +
                          std::to_string(rows(b)) + "x" + std::to_string(cols(b)) + ")");
  }

  static void accumulate(Tape& tp, Idx target, const std::vector<S>& g, S sign) {
    for (size_t i = 0; i < g.size(); ++i) tp.nodes[target].grad[i] += sign * g[i];
  }

  template <class F, class B>
  Idx elementwise1(Idx a, F fwd, B back) {
    Idx out = make(rows(a), cols(a));
    for (size_t i = 0; i < nodes[out].val.size(); ++i) nodes[out].val[i] = fwd(nodes[a].val[i]);
    finish(out);
    nodes[out].back = [a, back](Tape& tp, Idx self) { back(tp, a, self); };
    return out;
  }

  template <class F, class B>
  Idx elementwise2(Idx a, Idx b, F fwd, B back) {
    shapes_must(rows(a) == rows(b) && cols(a) == cols(b), "elementwise", a, b);
    Idx out = make(rows(a), cols(a));
    for (size_t i = 0; i < nodes[out].val.size(); ++i)
      nodes[out].val[i] = fwd(nodes[a].val[i], nodes[b].val[i]);
    finish(out);
    nodes[out].back = [a, b, back](Tape& tp, Idx self) { back(tp, a, b, self); };
    return out;
  }
};

// ---------------------------------------------------------------------------
// Parameter store + Adam
// ---------------------------------------------------------------------------

template <class S>
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Tensor<S>> values;
  std::vector<uint8_t> trainable;

  int add(std::string name, Tensor<S> t, bool train = true) {
    names.push_back(std::move(name));
    values.push_back(std::move(t));
    trainable.push_back(train);
    return static_cast<int>(values.size()) - 1;
  }
  int find(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }
  int64_t total_scalars() const {
    int64_t n = 0;
    for (const auto& t : values) n += t.numel();
    return n;
  }
};

template <class S>
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<std::vector<S>> m, v;

  void init_like(const ParamStore<S>& params) {
    m.clear();
    v.clear();
    for (const auto& t : params.values) {
      m.push_back(std::vector<S>(t.data.size(), S(0)));
      v.push_back(std::vector<S>(t.data.size(), S(0)));
    }
    step = 0;
  }
};

// Binds every store tensor as a tape leaf, in store order.
template <class S>
std::vector<typename Tape<S>::Idx> bind_params(Tape<S>& tape, const ParamStore<S>& params) {
  std::vector<typename Tape<S>::Idx> bound;
  bound.reserve(params.values.size());
  for (const auto& t : params.values) bound.push_back(tape.leaf(t));
  return bound;
}

template <class S>
std::vector<std::vector<S>> read_grads(const Tape<S>& tape,
                                       const std::vector<typename Tape<S>::Idx>& bound) {
  std::vector<std::vector<S>> grads;
  grads.reserve(bound.size());
  for (auto idx : bound) {
    auto g = tape.grad(idx);
    grads.emplace_back(g.begin(), g.end());
  }
  return grads;
}

// Standard Adam with bias correction over every trainable parameter; grads is
// indexed like the store and may hold empty slots for untouched tensors.
template <class S>
void adam_step(ParamStore<S>& params, const std::vector<std::vector<S>>& grads,
               AdamState<S>& state) {
  if (state.m.size() != params.values.size()) throw ArgumentError("adam state size mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t p = 0; p < params.values.size(); ++p) {
    if (!params.trainable[p] || grads[p].empty()) continue;
    auto& data = params.values[p].data;
    if (grads[p].size() != data.size()) throw ArgumentError("adam grad size mismatch");
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = static_cast<double>(grads[p][i]);
      double mi = state.beta1 * static_cast<double>(state.m[p][i]) + (1.0 - state.beta1) * g;
      double vi = state.beta2 * static_cast<double>(state.v[p][i]) + (1.0 - state.beta2) * g * g;
      state.m[p][i] = static_cast<S>(mi);
      state.v[p][i] = static_cast<S>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      data[i] = static_cast<S>(static_cast<double>(data[i]) -
                               state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

}  // namespace aigrl
