// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#include "vdp/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <memory>

namespace vdp::diff {

uint64_t Tape::next_id() {
  static std::atomic<uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

namespace {

int checked_out_extent(int in, int pad, int k, int stride, const char* axis) {
  const int span = in + 2 * pad - k;
  if (span < 0 || span % stride != 0)
    throw ShapeError(std::string("conv2d: ") + axis + " extent " + std::to_string(in) +
                     " with kernel " + std::to_string(k) + ", padding " + std::to_string(pad) +
                     ", stride " + std::to_string(stride) + " does not yield an integer output extent");
  return span / stride + 1;
}

inline int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }

}  // namespace

Var Tape::emplace(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::gbuf(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

double Tape::scalar_f64(Var v) const {
  const Node& n = node(v);
  if (n.has_f64) return n.f64;
  return static_cast<double>(n.value[0]);
}

Var Tape::constant(Tensor v) { return emplace(std::move(v), false); }

Var Tape::param(ParamLeaf& leaf) {
  Var v = emplace(leaf.value, true);
  node(v).leaf = &leaf;
  param_ids_.push_back(v.id);
  return v;
}

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  Tensor out(ta.shape());
  const int64_t n = ta.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = ta[i] + tb[i];
  Var v = emplace(std::move(out), needs_grad(a) || needs_grad(b));
  if (n == 1) {
    node(v).f64 = scalar_f64(a) + scalar_f64(b);
    node(v).has_f64 = true;
  }
  if (node(v).requires_grad) {
    node(v).backward = [a, b, v](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const int64_t n2 = g.numel();
      if (t.needs_grad(a)) {
        Tensor& ga = t.gbuf(a.id);
        for (int64_t i = 0; i < n2; ++i) ga[i] += g[i];
      }
      if (t.needs_grad(b)) {
        Tensor& gb = t.gbuf(b.id);
        for (int64_t i = 0; i < n2; ++i) gb[i] += g[i];
      }
    };
  }
  return v;
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  Tensor out(ta.shape());
  const int64_t n = ta.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = ta[i] - tb[i];
  Var v = emplace(std::move(out), needs_grad(a) || needs_grad(b));
  if (n == 1) {
    node(v).f64 = scalar_f64(a) - scalar_f64(b);
    node(v).has_f64 = true;
  }
  if (node(v).requires_grad) {
    node(v).backward = [a, b, v](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const int64_t n2 = g.numel();
      if (t.needs_grad(a)) {
        Tensor& ga = t.gbuf(a.id);
        for (int64_t i = 0; i < n2; ++i) ga[i] += g[i];
      }
      if (t.needs_grad(b)) {
        Tensor& gb = t.gbuf(b.id);
        for (int64_t i = 0; i < n2; ++i) gb[i] -= g[i];
      }
    };
  }
  return v;
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(value(a), value(b), "mul");
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  Tensor out(ta.shape());
  const int64_t n = ta.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = ta[i] * tb[i];
  Var v = emplace(std::move(out), needs_grad(a) || needs_grad(b));
  if (n == 1) {
    node(v).f64 = scalar_f64(a) * scalar_f64(b);
    node(v).has_f64 = true;
  }
  if (node(v).requires_grad) {
    node(v).backward = [a, b, v](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const Tensor& ta2 = t.value(a);
      const Tensor& tb2 = t.value(b);
      const int64_t n2 = g.numel();
      if (t.needs_grad(a)) {
        Tensor& ga = t.gbuf(a.id);
        for (int64_t i = 0; i < n2; ++i) ga[i] += g[i] * tb2[i];
      }
      if (t.needs_grad(b)) {
        Tensor& gb = t.gbuf(b.id);
        for (int64_t i = 0; i < n2; ++i) gb[i] += g[i] * ta2[i];
      }
    };
  }
  return v;
}

Var Tape::scale(Var a, double s) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  const int64_t n = ta.numel();
  const float fs = static_cast<float>(s);
  for (int64_t i = 0; i < n; ++i) out[i] = ta[i] * fs;
  Var v = emplace(std::move(out), needs_grad(a));
  if (n == 1) {
    node(v).f64 = scalar_f64(a) * s;
    node(v).has_f64 = true;
  }
  if (node(v).requires_grad) {
    node(v).backward = [a, v, fs](Tape& t) {
      const Tensor& g = t.node(v).grad;
      Tensor& ga = t.gbuf(a.id);
      const int64_t n2 = g.numel();
      for (int64_t i = 0; i < n2; ++i) ga[i] += g[i] * fs;
    };
  }
  return v;
}

Var Tape::abs(Var a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  const int64_t n = ta.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = std::fabs(ta[i]);
  Var v = emplace(std::move(out), needs_grad(a));
  if (node(v).requires_grad) {
    node(v).backward = [a, v](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const Tensor& ta2 = t.value(a);
      Tensor& ga = t.gbuf(a.id);
      const int64_t n2 = g.numel();
      for (int64_t i = 0; i < n2; ++i) {
        const float s = ta2[i] > 0.0f ? 1.0f : (ta2[i] < 0.0f ? -1.0f : 0.0f);
        ga[i] += g[i] * s;
      }
    };
  }
  return v;
}

Var Tape::tanh(Var a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  const int64_t n = ta.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = std::tanh(ta[i]);
  Var v = emplace(std::move(out), needs_grad(a));
  if (node(v).requires_grad) {
    node(v).backward = [a, v](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const Tensor& y = t.value(v);
      Tensor& ga = t.gbuf(a.id);
      const int64_t n2 = g.numel();
      for (int64_t i = 0; i < n2; ++i) ga[i] += g[i] * (1.0f - y[i] * y[i]);
    };
  }
  return v;
}

Var Tape::sigmoid(Var a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  const int64_t n = ta.numel();
  for (int64_t i = 0; i < n; ++i) {
    const float x = ta[i];
    out[i] = x >= 0.0f ? 1.0f / (1.0f + std::exp(-x))
                       : std::exp(x) / (1.0f + std::exp(x));
  }
  Var v = emplace(std::move(out), needs_grad(a));
  if (node(v).requires_grad) {
    node(v).backward = [a, v](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const Tensor& y = t.value(v);
      Tensor& ga = t.gbuf(a.id);
      const int64_t n2 = g.numel();
      for (int64_t i = 0; i < n2; ++i) ga[i] += g[i] * y[i] * (1.0f - y[i]);
    };
  }
  return v;
}

Var Tape::leaky_relu(Var a, double slope) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  const int64_t n = ta.numel();
  const float sl = static_cast<float>(slope);
  for (int64_t i = 0; i < n; ++i) out[i] = ta[i] >= 0.0f ? ta[i] : sl * ta[i];
  Var v = emplace(std::move(out), needs_grad(a));
  if (node(v).requires_grad) {
    node(v).backward = [a, v, sl](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const Tensor& x = t.value(a);
      Tensor& ga = t.gbuf(a.id);
      const int64_t n2 = g.numel();
      for (int64_t i = 0; i < n2; ++i) ga[i] += g[i] * (x[i] >= 0.0f ? 1.0f : sl);
    };
  }
  return v;
}

Var Tape::lerp(Var a, Var b, double alpha) {
  check_same_shape(value(a), value(b), "lerp");
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  Tensor out(ta.shape());
  const int64_t n = ta.numel();
  const float w1 = static_cast<float>(1.0 - alpha);
  const float w2 = static_cast<float>(alpha);
  for (int64_t i = 0; i < n; ++i) out[i] = w1 * ta[i] + w2 * tb[i];
  Var v = emplace(std::move(out), needs_grad(a) || needs_grad(b));
  if (n == 1) {
    node(v).f64 = (1.0 - alpha) * scalar_f64(a) + alpha * scalar_f64(b);
    node(v).has_f64 = true;
  }
  if (node(v).requires_grad) {
    node(v).backward = [a, b, v, w1, w2](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const int64_t n2 = g.numel();
      if (t.needs_grad(a)) {
        Tensor& ga = t.gbuf(a.id);
        for (int64_t i = 0; i < n2; ++i) ga[i] += g[i] * w1;
      }
      if (t.needs_grad(b)) {
        Tensor& gb = t.gbuf(b.id);
        for (int64_t i = 0; i < n2; ++i) gb[i] += g[i] * w2;
      }
    };
  }
  return v;
}

Var Tape::detach(Var a) { return emplace(value(a), false); }

Var Tape::linear(Var x, Var w, Var b) {
  const Tensor& tx = value(x);
  const Tensor& tw = value(w);
  const Tensor& tb = value(b);
  if (tx.shape().ndim() != 1)
    throw ShapeError("linear: input must be 1D, got " + tx.shape().str());
  if (tw.shape().ndim() != 2)
    throw ShapeError("linear: weight must be 2D, got " + tw.shape().str());
  const int din = tx.shape()[0];
  const int dout = tw.shape()[0];
  if (tw.shape()[1] != din)
    throw ShapeError("linear: weight input axis (1) = " + std::to_string(tw.shape()[1]) +
                     " does not match input extent " + std::to_string(din));
  if (tb.shape().ndim() != 1 || tb.shape()[0] != dout)
    throw ShapeError("linear: bias axis 0 = " + tb.shape().str() + " does not match output extent " +
                     std::to_string(dout));

  Tensor out(Shape{dout});
  for (int o = 0; o < dout; ++o) {
    double acc = tb[o];
    const float* wrow = tw.data() + static_cast<int64_t>(o) * din;
    const float* xv = tx.data();
    for (int i = 0; i < din; ++i) acc += static_cast<double>(wrow[i]) * xv[i];
    out[o] = static_cast<float>(acc);
  }
  Var v = emplace(std::move(out), needs_grad(x) || needs_grad(w) || needs_grad(b));
  if (node(v).requires_grad) {
    node(v).backward = [x, w, b, v, din, dout](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const Tensor& tx2 = t.value(x);
      const Tensor& tw2 = t.value(w);
      if (t.needs_grad(x)) {
        Tensor& gx = t.gbuf(x.id);
        for (int i = 0; i < din; ++i) {
          double acc = 0.0;
          for (int o = 0; o < dout; ++o)
            acc += static_cast<double>(tw2[static_cast<int64_t>(o) * din + i]) * g[o];
          gx[i] += static_cast<float>(acc);
        }
      }
      if (t.needs_grad(w)) {
        Tensor& gw = t.gbuf(w.id);
        for (int o = 0; o < dout; ++o) {
          const float go = g[o];
          float* gwrow = gw.data() + static_cast<int64_t>(o) * din;
          for (int i = 0; i < din; ++i) gwrow[i] += go * tx2[i];
        }
      }
      if (t.needs_grad(b)) {
        Tensor& gb = t.gbuf(b.id);
        for (int o = 0; o < dout; ++o) gb[o] += g[o];
      }
    };
  }
  return v;
}

Var Tape::conv2d(Var x, Var w, Var b, int stride, int padding) {
  const Tensor& tx = value(x);
  const Tensor& tw = value(w);
  const Tensor& tb = value(b);
  if (tx.shape().ndim() != 3)
    throw ShapeError("conv2d: input must be [C,H,W], got " + tx.shape().str());
  if (tw.shape().ndim() != 4)
    throw ShapeError("conv2d: weight must be [Cout,Cin,k,k], got " + tw.shape().str());
  const int cin = tx.shape()[0], h = tx.shape()[1], wd = tx.shape()[2];
  const int cout = tw.shape()[0], k = tw.shape()[2];
  if (tw.shape()[1] != cin)
    throw ShapeError("conv2d: weight channel axis (1) = " + std::to_string(tw.shape()[1]) +
                     " does not match input channel axis (0) = " + std::to_string(cin));
  if (tw.shape()[3] != k)
    throw ShapeError("conv2d: kernel must be square, got " + tw.shape().str());
  if (k % 2 == 0) throw ShapeError("conv2d: kernel extent must be odd, got " + std::to_string(k));
  if (padding < 0) throw ShapeError("conv2d: padding must be >= 0");
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (tb.shape().ndim() != 1 || tb.shape()[0] != cout)
    throw ShapeError("conv2d: bias shape " + tb.shape().str() + " does not match output channel axis " +
                     std::to_string(cout));
  const int ho = checked_out_extent(h, padding, k, stride, "height (axis 1)");
  const int wo = checked_out_extent(wd, padding, k, stride, "width (axis 2)");

  std::vector<double> acc(static_cast<size_t>(cout) * ho * wo, 0.0);
  for (int co = 0; co < cout; ++co) {
    for (int ci = 0; ci < cin; ++ci) {
      const float* xc = tx.data() + static_cast<int64_t>(ci) * h * wd;
      const float* wk = tw.data() + (static_cast<int64_t>(co) * cin + ci) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const double wv = wk[ky * k + kx];
          const int ox_lo = std::max(0, ceil_div(padding - kx, stride));
          const int ox_hi = std::min(wo - 1, (wd - 1 + padding - kx) / stride);
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - padding;
            if (iy < 0 || iy >= h) continue;
            const float* xrow = xc + static_cast<int64_t>(iy) * wd;
            double* arow = acc.data() + (static_cast<int64_t>(co) * ho + oy) * wo;
            if (stride == 1) {
              const float* xs = xrow + kx - padding;
              for (int ox = ox_lo; ox <= ox_hi; ++ox) arow[ox] += wv * xs[ox];
            } else {
              for (int ox = ox_lo; ox <= ox_hi; ++ox)
                arow[ox] += wv * xrow[ox * stride + kx - padding];
            }
          }
        }
      }
    }
  }
  Tensor out(Shape{cout, ho, wo});
  for (int co = 0; co < cout; ++co) {
    const double bias = tb[co];
    double* arow = acc.data() + static_cast<int64_t>(co) * ho * wo;
    float* orow = out.data() + static_cast<int64_t>(co) * ho * wo;
    for (int64_t i = 0; i < static_cast<int64_t>(ho) * wo; ++i)
      orow[i] = static_cast<float>(arow[i] + bias);
  }

  Var v = emplace(std::move(out), needs_grad(x) || needs_grad(w) || needs_grad(b));
  if (node(v).requires_grad) {
    const int s = stride, p = padding;
    node(v).backward = [x, w, b, v, cin, cout, h, wd, k, ho, wo, s, p](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const Tensor& tx2 = t.value(x);
      const Tensor& tw2 = t.value(w);
      if (t.needs_grad(x)) {
        std::vector<double> gx(static_cast<size_t>(cin) * h * wd, 0.0);
        for (int co = 0; co < cout; ++co) {
          for (int ci = 0; ci < cin; ++ci) {
            double* gxc = gx.data() + static_cast<int64_t>(ci) * h * wd;
            const float* wk = tw2.data() + (static_cast<int64_t>(co) * cin + ci) * k * k;
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const double wv = wk[ky * k + kx];
                const int ox_lo = std::max(0, ceil_div(p - kx, s));
                const int ox_hi = std::min(wo - 1, (wd - 1 + p - kx) / s);
                for (int oy = 0; oy < ho; ++oy) {
                  const int iy = oy * s + ky - p;
                  if (iy < 0 || iy >= h) continue;
                  const float* grow = g.data() + (static_cast<int64_t>(co) * ho + oy) * wo;
                  double* gxrow = gxc + static_cast<int64_t>(iy) * wd;
                  for (int ox = ox_lo; ox <= ox_hi; ++ox)
                    gxrow[ox * s + kx - p] += wv * grow[ox];
                }
              }
            }
          }
        }
        Tensor& gxt = t.gbuf(x.id);
        for (int64_t i = 0; i < gxt.numel(); ++i) gxt[i] += static_cast<float>(gx[static_cast<size_t>(i)]);
      }
      if (t.needs_grad(w)) {
        Tensor& gw = t.gbuf(w.id);
        for (int co = 0; co < cout; ++co) {
          for (int ci = 0; ci < cin; ++ci) {
            const float* xc = tx2.data() + static_cast<int64_t>(ci) * h * wd;
            float* gwk = gw.data() + (static_cast<int64_t>(co) * cin + ci) * k * k;
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                double acc2 = 0.0;
                const int ox_lo = std::max(0, ceil_div(p - kx, s));
                const int ox_hi = std::min(wo - 1, (wd - 1 + p - kx) / s);
                for (int oy = 0; oy < ho; ++oy) {
                  const int iy = oy * s + ky - p;
                  if (iy < 0 || iy >= h) continue;
                  const float* grow = g.data() + (static_cast<int64_t>(co) * ho + oy) * wo;
                  const float* xrow = xc + static_cast<int64_t>(iy) * wd;
                  for (int ox = ox_lo; ox <= ox_hi; ++ox)
                    acc2 += static_cast<double>(grow[ox]) * xrow[ox * s + kx - p];
                }
                gwk[ky * k + kx] += static_cast<float>(acc2);
              }
            }
          }
        }
      }
      if (t.needs_grad(b)) {
        Tensor& gb = t.gbuf(b.id);
        for (int co = 0; co < cout; ++co) {
          double acc2 = 0.0;
          const float* grow = g.data() + static_cast<int64_t>(co) * ho * wo;
          for (int64_t i = 0; i < static_cast<int64_t>(ho) * wo; ++i) acc2 += grow[i];
          gb[co] += static_cast<float>(acc2);
        }
      }
    };
  }
  return v;
}

Var Tape::upsample_nearest(Var x, int factor) {
  const Tensor& tx = value(x);
  if (tx.shape().ndim() != 3)
    throw ShapeError("upsample_nearest: input must be [C,H,W], got " + tx.shape().str());
  if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  const int c = tx.shape()[0], h = tx.shape()[1], w = tx.shape()[2];
  const int ho = h * factor, wo = w * factor;
  Tensor out(Shape{c, ho, wo});
  for (int ci = 0; ci < c; ++ci)
    for (int oy = 0; oy < ho; ++oy) {
      const float* xrow = tx.data() + (static_cast<int64_t>(ci) * h + oy / factor) * w;
      float* orow = out.data() + (static_cast<int64_t>(ci) * ho + oy) * wo;
      for (int ox = 0; ox < wo; ++ox) orow[ox] = xrow[ox / factor];
    }
  Var v = emplace(std::move(out), needs_grad(x));
  if (node(v).requires_grad) {
    node(v).backward = [x, v, c, h, w, factor](Tape& t) {
      const Tensor& g = t.node(v).grad;
      Tensor& gx = t.gbuf(x.id);
      const int ho = h * factor, wo = w * factor;
      for (int ci = 0; ci < c; ++ci)
        for (int oy = 0; oy < ho; ++oy) {
          const float* grow = g.data() + (static_cast<int64_t>(ci) * ho + oy) * wo;
          float* gxrow = gx.data() + (static_cast<int64_t>(ci) * h + oy / factor) * w;
          for (int ox = 0; ox < wo; ++ox) gxrow[ox / factor] += grow[ox];
        }
    };
  }
  return v;
}

Var Tape::avg_downsample(Var x, int factor) {
  const Tensor& tx = value(x);
  if (tx.shape().ndim() != 3)
    throw ShapeError("avg_downsample: input must be [C,H,W], got " + tx.shape().str());
  if (factor < 1) throw ShapeError("avg_downsample: factor must be >= 1");
  const int c = tx.shape()[0], h = tx.shape()[1], w = tx.shape()[2];
  if (h % factor != 0)
    throw ShapeError("avg_downsample: height (axis 1) = " + std::to_string(h) +
                     " not divisible by factor " + std::to_string(factor) +
                     "; pad the frame to a multiple first");
  if (w % factor != 0)
    throw ShapeError("avg_downsample: width (axis 2) = " + std::to_string(w) +
                     " not divisible by factor " + std::to_string(factor) +
                     "; pad the frame to a multiple first");
  const int ho = h / factor, wo = w / factor;
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  Tensor out(Shape{c, ho, wo});
  for (int ci = 0; ci < c; ++ci)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        double acc = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          const float* xrow = tx.data() + (static_cast<int64_t>(ci) * h + oy * factor + dy) * w + ox * factor;
          for (int dx = 0; dx < factor; ++dx) acc += xrow[dx];
        }
        out.at(ci, oy, ox) = static_cast<float>(acc * inv);
      }
  Var v = emplace(std::move(out), needs_grad(x));
  if (node(v).requires_grad) {
    node(v).backward = [x, v, c, h, w, factor, inv](Tape& t) {
      const Tensor& g = t.node(v).grad;
      Tensor& gx = t.gbuf(x.id);
      const int ho = h / factor, wo = w / factor;
      for (int ci = 0; ci < c; ++ci)
        for (int oy = 0; oy < ho; ++oy)
          for (int ox = 0; ox < wo; ++ox) {
            const float gv = static_cast<float>(g.at(ci, oy, ox) * inv);
            for (int dy = 0; dy < factor; ++dy) {
              float* gxrow = gx.data() + (static_cast<int64_t>(ci) * h + oy * factor + dy) * w + ox * factor;
              for (int dx = 0; dx < factor; ++dx) gxrow[dx] += gv;
            }
          }
    };
  }
  return v;
}

namespace {

double catmull_rom(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return a * (((t - 5.0) * t + 8.0) * t - 4.0);
  return 0.0;
}

// Per-output tap positions (clamped to [0, n-1]) and normalized weights for
// one axis of an antialiased cubic downsample by an integer factor.
struct CubicTaps {
  std::vector<std::vector<int>> pos;
  std::vector<std::vector<double>> wgt;
};

CubicTaps cubic_taps(int n, int factor) {
  const int no = n / factor;
  const double s = static_cast<double>(factor);
  CubicTaps taps;
  taps.pos.resize(static_cast<size_t>(no));
  taps.wgt.resize(static_cast<size_t>(no));
  for (int o = 0; o < no; ++o) {
    const double center = (o + 0.5) * s - 0.5;
    const int lo = static_cast<int>(std::ceil(center - 2.0 * s));
    const int hi = static_cast<int>(std::floor(center + 2.0 * s));
    double sum = 0.0;
    for (int p = lo; p <= hi; ++p) {
      const double w = catmull_rom((p - center) / s);
      if (w == 0.0) continue;
      taps.pos[static_cast<size_t>(o)].push_back(std::clamp(p, 0, n - 1));
      taps.wgt[static_cast<size_t>(o)].push_back(w);
      sum += w;
    }
    for (double& w : taps.wgt[static_cast<size_t>(o)]) w /= sum;
  }
  return taps;
}

}  // namespace

Var Tape::cubic_downsample(Var x, int factor) {
  const Tensor& tx = value(x);
  if (tx.shape().ndim() != 3)
    throw ShapeError("cubic_downsample: input must be [C,H,W], got " + tx.shape().str());
  if (factor < 1) throw ShapeError("cubic_downsample: factor must be >= 1");
  const int c = tx.shape()[0], h = tx.shape()[1], w = tx.shape()[2];
  if (h % factor != 0)
    throw ShapeError("cubic_downsample: height (axis 1) = " + std::to_string(h) +
                     " not divisible by factor " + std::to_string(factor) +
                     "; pad the frame to a multiple first");
  if (w % factor != 0)
    throw ShapeError("cubic_downsample: width (axis 2) = " + std::to_string(w) +
                     " not divisible by factor " + std::to_string(factor) +
                     "; pad the frame to a multiple first");
  const int ho = h / factor, wo = w / factor;
  auto ty = std::make_shared<CubicTaps>(cubic_taps(h, factor));
  auto tx2 = std::make_shared<CubicTaps>(cubic_taps(w, factor));
  Tensor out(Shape{c, ho, wo});
  for (int ci = 0; ci < c; ++ci) {
    const float* plane = tx.data() + static_cast<int64_t>(ci) * h * w;
    for (int oy = 0; oy < ho; ++oy) {
      const auto& py = ty->pos[static_cast<size_t>(oy)];
      const auto& wy = ty->wgt[static_cast<size_t>(oy)];
      for (int ox = 0; ox < wo; ++ox) {
        const auto& px = tx2->pos[static_cast<size_t>(ox)];
        const auto& wx = tx2->wgt[static_cast<size_t>(ox)];
        double acc = 0.0;
        for (size_t ky = 0; ky < py.size(); ++ky) {
          const float* row = plane + static_cast<int64_t>(py[ky]) * w;
          double racc = 0.0;
          for (size_t kx = 0; kx < px.size(); ++kx) racc += wx[kx] * row[px[kx]];
          acc += wy[ky] * racc;
        }
        out.at(ci, oy, ox) = static_cast<float>(acc);
      }
    }
  }
  Var v = emplace(std::move(out), needs_grad(x));
  if (node(v).requires_grad) {
    node(v).backward = [x, v, c, h, w, ho, wo, ty, tx2](Tape& t) {
      const Tensor& g = t.node(v).grad;
      Tensor& gx = t.gbuf(x.id);
      for (int ci = 0; ci < c; ++ci) {
        float* gplane = gx.data() + static_cast<int64_t>(ci) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          const auto& py = ty->pos[static_cast<size_t>(oy)];
          const auto& wy = ty->wgt[static_cast<size_t>(oy)];
          for (int ox = 0; ox < wo; ++ox) {
            const auto& px = tx2->pos[static_cast<size_t>(ox)];
            const auto& wx = tx2->wgt[static_cast<size_t>(ox)];
            const double gv = g.at(ci, oy, ox);
            for (size_t ky = 0; ky < py.size(); ++ky) {
              float* grow = gplane + static_cast<int64_t>(py[ky]) * w;
              for (size_t kx = 0; kx < px.size(); ++kx)
                grow[px[kx]] += static_cast<float>(gv * wy[ky] * wx[kx]);
            }
          }
        }
      }
    };
  }
  return v;
}

Var Tape::batch_norm(Var x, Var gamma, Var beta, double eps, BnStats* stats_out) {
  const Tensor& tx = value(x);
  if (tx.shape().ndim() != 4)
    throw ShapeError("batch_norm: input must be [T,C,H,W], got " + tx.shape().str());
  const int tt = tx.shape()[0], c = tx.shape()[1], h = tx.shape()[2], w = tx.shape()[3];
  const Tensor& tg = value(gamma);
  const Tensor& tb = value(beta);
  if (tg.shape().ndim() != 1 || tg.shape()[0] != c)
    throw ShapeError("batch_norm: gamma shape " + tg.shape().str() + " does not match channel axis " +
                     std::to_string(c));
  if (tb.shape().ndim() != 1 || tb.shape()[0] != c)
    throw ShapeError("batch_norm: beta shape " + tb.shape().str() + " does not match channel axis " +
                     std::to_string(c));

  const int64_t plane = static_cast<int64_t>(h) * w;
  const int64_t n_per_c = static_cast<int64_t>(tt) * plane;
  Tensor mean(Shape{c}), var(Shape{c});
  for (int ci = 0; ci < c; ++ci) {
    double s = 0.0;
    for (int ti = 0; ti < tt; ++ti) {
      const float* xp = tx.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
      for (int64_t i = 0; i < plane; ++i) s += xp[i];
    }
    const double mu = s / static_cast<double>(n_per_c);
    double sv = 0.0;
    for (int ti = 0; ti < tt; ++ti) {
      const float* xp = tx.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
      for (int64_t i = 0; i < plane; ++i) {
        const double d = xp[i] - mu;
        sv += d * d;
      }
    }
    mean[ci] = static_cast<float>(mu);
    var[ci] = static_cast<float>(sv / static_cast<double>(n_per_c));
  }
  if (stats_out) {
    stats_out->mean = mean;
    stats_out->var = var;
  }

  Tensor out(tx.shape());
  Tensor inv_std(Shape{c});
  for (int ci = 0; ci < c; ++ci)
    inv_std[ci] = static_cast<float>(1.0 / std::sqrt(static_cast<double>(var[ci]) + eps));
  for (int ti = 0; ti < tt; ++ti)
    for (int ci = 0; ci < c; ++ci) {
      const float mu = mean[ci], is = inv_std[ci], ga = tg[ci], be = tb[ci];
      const float* xp = tx.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
      float* op = out.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
      for (int64_t i = 0; i < plane; ++i) op[i] = ga * ((xp[i] - mu) * is) + be;
    }

  Var v = emplace(std::move(out), needs_grad(x) || needs_grad(gamma) || needs_grad(beta));
  if (node(v).requires_grad) {
    node(v).backward = [x, gamma, beta, v, tt, c, plane, n_per_c, mean, inv_std](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const Tensor& tx2 = t.value(x);
      const Tensor& tg2 = t.value(gamma);
      // Per-channel sums of dy and dy*xhat, double accumulation.
      std::vector<double> sum_dy(static_cast<size_t>(c), 0.0);
      std::vector<double> sum_dy_xhat(static_cast<size_t>(c), 0.0);
      for (int ti = 0; ti < tt; ++ti)
        for (int ci = 0; ci < c; ++ci) {
          const float mu = mean[ci], is = inv_std[ci];
          const float* xp = tx2.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
          const float* gp = g.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
          double sd = 0.0, sx = 0.0;
          for (int64_t i = 0; i < plane; ++i) {
            sd += gp[i];
            sx += static_cast<double>(gp[i]) * ((xp[i] - mu) * is);
          }
          sum_dy[static_cast<size_t>(ci)] += sd;
          sum_dy_xhat[static_cast<size_t>(ci)] += sx;
        }
      if (t.needs_grad(beta)) {
        Tensor& gb = t.gbuf(beta.id);
        for (int ci = 0; ci < c; ++ci) gb[ci] += static_cast<float>(sum_dy[static_cast<size_t>(ci)]);
      }
      if (t.needs_grad(gamma)) {
        Tensor& gg = t.gbuf(gamma.id);
        for (int ci = 0; ci < c; ++ci) gg[ci] += static_cast<float>(sum_dy_xhat[static_cast<size_t>(ci)]);
      }
      if (t.needs_grad(x)) {
        Tensor& gx = t.gbuf(x.id);
        for (int ti = 0; ti < tt; ++ti)
          for (int ci = 0; ci < c; ++ci) {
            const double mu = mean[ci], is = inv_std[ci], ga = tg2[ci];
            const double mdy = sum_dy[static_cast<size_t>(ci)] / static_cast<double>(n_per_c);
            const double mdyx = sum_dy_xhat[static_cast<size_t>(ci)] / static_cast<double>(n_per_c);
            const float* xp = tx2.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
            const float* gp = g.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
            float* gxp = gx.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
            for (int64_t i = 0; i < plane; ++i) {
              const double xhat = (xp[i] - mu) * is;
              gxp[i] += static_cast<float>(ga * is * (gp[i] - mdy - xhat * mdyx));
            }
          }
      }
    };
  }
  return v;
}

Var Tape::bn_frozen(Var x, const Tensor& mean, const Tensor& var, Var gamma, Var beta, double eps) {
  const Tensor& tx = value(x);
  const int nd = tx.shape().ndim();
  if (nd != 3 && nd != 4)
    throw ShapeError("bn_frozen: input must be [C,H,W] or [T,C,H,W], got " + tx.shape().str());
  const int c = nd == 3 ? tx.shape()[0] : tx.shape()[1];
  if (mean.shape().ndim() != 1 || mean.shape()[0] != c || var.shape()[0] != c)
    throw ShapeError("bn_frozen: statistics do not match channel axis " + std::to_string(c));
  const Tensor& tg = value(gamma);
  const Tensor& tb = value(beta);
  const int tt = nd == 3 ? 1 : tx.shape()[0];
  const int64_t plane = nd == 3 ? static_cast<int64_t>(tx.shape()[1]) * tx.shape()[2]
                                : static_cast<int64_t>(tx.shape()[2]) * tx.shape()[3];

  Tensor scale_c(Shape{c}), shift_c(Shape{c});
  for (int ci = 0; ci < c; ++ci) {
    const double is = 1.0 / std::sqrt(static_cast<double>(var[ci]) + eps);
    scale_c[ci] = static_cast<float>(tg[ci] * is);
    shift_c[ci] = static_cast<float>(tb[ci] - tg[ci] * is * mean[ci]);
  }
  Tensor out(tx.shape());
  for (int ti = 0; ti < tt; ++ti)
    for (int ci = 0; ci < c; ++ci) {
      const float sc = scale_c[ci], sh = shift_c[ci];
      const float* xp = tx.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
      float* op = out.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
      for (int64_t i = 0; i < plane; ++i) op[i] = sc * xp[i] + sh;
    }
  Var v = emplace(std::move(out), needs_grad(x) || needs_grad(gamma) || needs_grad(beta));
  if (node(v).requires_grad) {
    node(v).backward = [x, gamma, beta, v, tt, c, plane, mean, var, eps, scale_c](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const Tensor& tx2 = t.value(x);
      if (t.needs_grad(x)) {
        Tensor& gx = t.gbuf(x.id);
        for (int ti = 0; ti < tt; ++ti)
          for (int ci = 0; ci < c; ++ci) {
            const float sc = scale_c[ci];
            const float* gp = g.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
            float* gxp = gx.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
            for (int64_t i = 0; i < plane; ++i) gxp[i] += sc * gp[i];
          }
      }
      if (t.needs_grad(gamma)) {
        Tensor& gg = t.gbuf(gamma.id);
        for (int ci = 0; ci < c; ++ci) {
          const double is = 1.0 / std::sqrt(static_cast<double>(var[ci]) + eps);
          double acc = 0.0;
          for (int ti = 0; ti < tt; ++ti) {
            const float* gp = g.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
            const float* xp = tx2.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
            for (int64_t i = 0; i < plane; ++i) acc += static_cast<double>(gp[i]) * ((xp[i] - mean[ci]) * is);
          }
          gg[ci] += static_cast<float>(acc);
        }
      }
      if (t.needs_grad(beta)) {
        Tensor& gb = t.gbuf(beta.id);
        for (int ci = 0; ci < c; ++ci) {
          double acc = 0.0;
          for (int ti = 0; ti < tt; ++ti) {
            const float* gp = g.data() + ((static_cast<int64_t>(ti) * c + ci) * plane);
            for (int64_t i = 0; i < plane; ++i) acc += gp[i];
          }
          gb[ci] += static_cast<float>(acc);
        }
      }
    };
  }
  return v;
}

Var Tape::stack(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("stack: empty input list");
  const Shape s0 = value(xs[0]).shape();
  if (s0.ndim() != 3) throw ShapeError("stack: inputs must be [C,H,W], got " + s0.str());
  bool rg = false;
  for (const Var& xv : xs) {
    check_same_shape(value(xs[0]), value(xv), "stack");
    rg = rg || needs_grad(xv);
  }
  const int tt = static_cast<int>(xs.size());
  const int64_t per = s0.numel();
  Tensor out(Shape{tt, s0[0], s0[1], s0[2]});
  for (int ti = 0; ti < tt; ++ti)
    std::memcpy(out.data() + static_cast<int64_t>(ti) * per, value(xs[static_cast<size_t>(ti)]).data(),
                static_cast<size_t>(per) * sizeof(float));
  Var v = emplace(std::move(out), rg);
  if (node(v).requires_grad) {
    std::vector<Var> ins = xs;
    node(v).backward = [ins, v, per](Tape& t) {
      const Tensor& g = t.node(v).grad;
      for (size_t ti = 0; ti < ins.size(); ++ti) {
        if (!t.needs_grad(ins[ti])) continue;
        Tensor& gi = t.gbuf(ins[ti].id);
        const float* gp = g.data() + static_cast<int64_t>(ti) * per;
        for (int64_t i = 0; i < per; ++i) gi[i] += gp[i];
      }
    };
  }
  return v;
}

Var Tape::slice_t(Var x, int ti) {
  const Tensor& tx = value(x);
  if (tx.shape().ndim() != 4)
    throw ShapeError("slice_t: input must be [T,C,H,W], got " + tx.shape().str());
  const int tt = tx.shape()[0];
  if (ti < 0 || ti >= tt)
    throw ShapeError("slice_t: index " + std::to_string(ti) + " out of range [0," + std::to_string(tt) + ")");
  const Shape fs{tx.shape()[1], tx.shape()[2], tx.shape()[3]};
  const int64_t per = fs.numel();
  Tensor out(fs);
  std::memcpy(out.data(), tx.data() + static_cast<int64_t>(ti) * per, static_cast<size_t>(per) * sizeof(float));
  Var v = emplace(std::move(out), needs_grad(x));
  if (node(v).requires_grad) {
    node(v).backward = [x, v, ti, per](Tape& t) {
      const Tensor& g = t.node(v).grad;
      Tensor& gx = t.gbuf(x.id);
      float* gp = gx.data() + static_cast<int64_t>(ti) * per;
      for (int64_t i = 0; i < per; ++i) gp[i] += g[i];
    };
  }
  return v;
}

Var Tape::slice_vec(Var x, int begin, int len) {
  const Tensor& tx = value(x);
  if (tx.shape().ndim() != 1)
    throw ShapeError("slice_vec: input must be 1D, got " + tx.shape().str());
  if (begin < 0 || len < 1 || begin + len > tx.shape()[0])
    throw ShapeError("slice_vec: range [" + std::to_string(begin) + "," + std::to_string(begin + len) +
                     ") out of bounds for extent " + std::to_string(tx.shape()[0]));
  Tensor out(Shape{len});
  std::memcpy(out.data(), tx.data() + begin, static_cast<size_t>(len) * sizeof(float));
  Var v = emplace(std::move(out), needs_grad(x));
  if (node(v).requires_grad) {
    node(v).backward = [x, v, begin, len](Tape& t) {
      const Tensor& g = t.node(v).grad;
      Tensor& gx = t.gbuf(x.id);
      for (int i = 0; i < len; ++i) gx[begin + i] += g[i];
    };
  }
  return v;
}

Var Tape::concat_c(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.shape().ndim() != 3 || tb.shape().ndim() != 3)
    throw ShapeError("concat_c: inputs must be [C,H,W]");
  if (ta.shape()[1] != tb.shape()[1] || ta.shape()[2] != tb.shape()[2])
    throw ShapeError("concat_c: spatial axes differ, " + ta.shape().str() + " vs " + tb.shape().str());
  const int ca = ta.shape()[0], cb = tb.shape()[0];
  const int64_t na = ta.numel(), nb = tb.numel();
  Tensor out(Shape{ca + cb, ta.shape()[1], ta.shape()[2]});
  std::memcpy(out.data(), ta.data(), static_cast<size_t>(na) * sizeof(float));
  std::memcpy(out.data() + na, tb.data(), static_cast<size_t>(nb) * sizeof(float));
  Var v = emplace(std::move(out), needs_grad(a) || needs_grad(b));
  if (node(v).requires_grad) {
    node(v).backward = [a, b, v, na, nb](Tape& t) {
      const Tensor& g = t.node(v).grad;
      if (t.needs_grad(a)) {
        Tensor& ga = t.gbuf(a.id);
        for (int64_t i = 0; i < na; ++i) ga[i] += g[i];
      }
      if (t.needs_grad(b)) {
        Tensor& gb = t.gbuf(b.id);
        for (int64_t i = 0; i < nb; ++i) gb[i] += g[na + i];
      }
    };
  }
  return v;
}

Var Tape::reshape(Var a, Shape s) {
  Tensor out = value(a).reshaped(s);
  Var v = emplace(std::move(out), needs_grad(a));
  if (node(v).requires_grad) {
    node(v).backward = [a, v](Tape& t) {
      const Tensor& g = t.node(v).grad;
      Tensor& ga = t.gbuf(a.id);
      const int64_t n = g.numel();
      for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
    };
  }
  return v;
}

Var Tape::sum_all(Var a) {
  const Tensor& ta = value(a);
  double acc = 0.0;
  const int64_t n = ta.numel();
  for (int64_t i = 0; i < n; ++i) acc += ta[i];
  Var v = emplace(Tensor::scalar(static_cast<float>(acc)), needs_grad(a));
  node(v).f64 = acc;
  node(v).has_f64 = true;
  if (node(v).requires_grad) {
    node(v).backward = [a, v](Tape& t) {
      const float g = t.node(v).grad[0];
      Tensor& ga = t.gbuf(a.id);
      const int64_t n2 = ga.numel();
      for (int64_t i = 0; i < n2; ++i) ga[i] += g;
    };
  }
  return v;
}

Var Tape::mean_all(Var a) {
  const Tensor& ta = value(a);
  double acc = 0.0;
  const int64_t n = ta.numel();
  for (int64_t i = 0; i < n; ++i) acc += ta[i];
  const double inv = 1.0 / static_cast<double>(n);
  Var v = emplace(Tensor::scalar(static_cast<float>(acc * inv)), needs_grad(a));
  node(v).f64 = acc * inv;
  node(v).has_f64 = true;
  if (node(v).requires_grad) {
    node(v).backward = [a, v, inv](Tape& t) {
      const float g = static_cast<float>(t.node(v).grad[0] * inv);
      Tensor& ga = t.gbuf(a.id);
      const int64_t n2 = ga.numel();
      for (int64_t i = 0; i < n2; ++i) ga[i] += g;
    };
  }
  return v;
}

Var Tape::mean_abs_diff(Var a, Var b) {
  check_same_shape(value(a), value(b), "mean_abs_diff");
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const int64_t n = ta.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += std::fabs(static_cast<double>(ta[i]) - tb[i]);
  const double inv = 1.0 / static_cast<double>(n);
  Var v = emplace(Tensor::scalar(static_cast<float>(acc * inv)), needs_grad(a) || needs_grad(b));
  node(v).f64 = acc * inv;
  node(v).has_f64 = true;
  if (node(v).requires_grad) {
    node(v).backward = [a, b, v, inv, n](Tape& t) {
      const float g = static_cast<float>(t.node(v).grad[0] * inv);
      const Tensor& ta2 = t.value(a);
      const Tensor& tb2 = t.value(b);
      const bool ga_on = t.needs_grad(a), gb_on = t.needs_grad(b);
      Tensor* ga = ga_on ? &t.gbuf(a.id) : nullptr;
      Tensor* gb = gb_on ? &t.gbuf(b.id) : nullptr;
      for (int64_t i = 0; i < n; ++i) {
        const float d = ta2[i] - tb2[i];
        const float s = d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f);
        if (ga_on) (*ga)[i] += g * s;
        if (gb_on) (*gb)[i] -= g * s;
      }
    };
  }
  return v;
}

Var Tape::tv_l1(Var frame) {
  const Tensor& tx = value(frame);
  if (tx.shape().ndim() != 3)
    throw ShapeError("tv_l1: input must be [C,H,W], got " + tx.shape().str());
  const int c = tx.shape()[0], h = tx.shape()[1], w = tx.shape()[2];
  if (h < 2 || w < 2)
    throw ShapeError("tv_l1: spatial extents must be >= 2, got " + tx.shape().str());
  double acc = 0.0;
  for (int ci = 0; ci < c; ++ci)
    for (int i = 1; i < h; ++i)
      for (int j = 1; j < w; ++j) {
        acc += std::fabs(static_cast<double>(tx.at(ci, i, j)) - tx.at(ci, i - 1, j));
        acc += std::fabs(static_cast<double>(tx.at(ci, i, j)) - tx.at(ci, i, j - 1));
      }
  const double inv = 1.0 / static_cast<double>(tx.numel());
  Var v = emplace(Tensor::scalar(static_cast<float>(acc * inv)), needs_grad(frame));
  node(v).f64 = acc * inv;
  node(v).has_f64 = true;
  if (node(v).requires_grad) {
    node(v).backward = [frame, v, c, h, w, inv](Tape& t) {
      const float g = static_cast<float>(t.node(v).grad[0] * inv);
      const Tensor& tx2 = t.value(frame);
      Tensor& gx = t.gbuf(frame.id);
      for (int ci = 0; ci < c; ++ci)
        for (int i = 1; i < h; ++i)
          for (int j = 1; j < w; ++j) {
            const float dv = tx2.at(ci, i, j) - tx2.at(ci, i - 1, j);
            const float sv = dv > 0.0f ? 1.0f : (dv < 0.0f ? -1.0f : 0.0f);
            gx.at(ci, i, j) += g * sv;
            gx.at(ci, i - 1, j) -= g * sv;
            const float dh = tx2.at(ci, i, j) - tx2.at(ci, i, j - 1);
            const float sh = dh > 0.0f ? 1.0f : (dh < 0.0f ? -1.0f : 0.0f);
            gx.at(ci, i, j) += g * sh;
            gx.at(ci, i, j - 1) -= g * sh;
          }
    };
  }
  return v;
}

Var Tape::add_n(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("add_n: empty input list");
  const Tensor& t0 = value(xs[0]);
  bool rg = false;
  for (const Var& xv : xs) {
    check_same_shape(t0, value(xv), "add_n");
    rg = rg || needs_grad(xv);
  }
  const int64_t n = t0.numel();
  Tensor out(t0.shape());
  for (int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (const Var& xv : xs) acc += value(xv)[i];
    out[i] = static_cast<float>(acc);
  }
  Var v = emplace(std::move(out), rg);
  if (n == 1) {
    double acc = 0.0;
    for (const Var& xv : xs) acc += scalar_f64(xv);
    node(v).f64 = acc;
    node(v).has_f64 = true;
  }
  if (node(v).requires_grad) {
    std::vector<Var> ins = xs;
    node(v).backward = [ins, v](Tape& t) {
      const Tensor& g = t.node(v).grad;
      const int64_t n2 = g.numel();
      for (const Var& xv : ins) {
        if (!t.needs_grad(xv)) continue;
        Tensor& gi = t.gbuf(xv.id);
        for (int64_t i = 0; i < n2; ++i) gi[i] += g[i];
      }
    };
  }
  return v;
}

void Tape::backward(Var loss) {
  if (value(loss).numel() != 1)
    throw ShapeError("backward: loss must be scalar, got " + value(loss).shape().str());
  gbuf(loss.id)[0] = 1.0f;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this);
  }
  for (int id : param_ids_) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty() || n.leaf == nullptr) continue;
    Tensor& lg = n.leaf->grad;
    const int64_t n2 = lg.numel();
    for (int64_t i = 0; i < n2; ++i) lg[i] += n.grad[i];
  }
}

void Tape::reset() {
  nodes_.clear();
  param_ids_.clear();
  id_ = next_id();
}

std::pair<Var, Var> lstm_cell(Tape& t, Var x, Var h, Var c, const LstmGateVars& p) {
  const int hidden = t.value(h).shape()[0];
  Var gates = t.add(t.linear(x, p.w_ih, p.b_ih), t.linear(h, p.w_hh, p.b_hh));
  Var gi = t.sigmoid(t.slice_vec(gates, 0, hidden));
  Var gf = t.sigmoid(t.slice_vec(gates, hidden, hidden));
  Var gg = t.tanh(t.slice_vec(gates, 2 * hidden, hidden));
  Var go = t.sigmoid(t.slice_vec(gates, 3 * hidden, hidden));
  Var c_next = t.add(t.mul(gf, c), t.mul(gi, gg));
  Var h_next = t.mul(go, t.tanh(c_next));
  return {h_next, c_next};
}

}  // namespace vdp::diff
