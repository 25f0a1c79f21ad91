#include "qw/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qw/error.hpp"

namespace qw {

namespace {

void same_shape(const Var& a, const Var& b, const char* op) {
  require(&a.tape() == &b.tape(), ErrorKind::tape_state,
          std::string(op) + ": operands on different tapes");
  require(a.shape() == b.shape(), ErrorKind::shape_mismatch,
          std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
              shape_str(b.shape()) + " differ");
}

void single_element(const Var& s, const char* op) {
  require(s.size() == 1, ErrorKind::shape_mismatch,
          std::string(op) + ": expected a single-element scalar, got " +
              shape_str(s.shape()));
}

template <class F>
Tensor map_unary(const Tensor& x, F f) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return y;
}

// Outer/axis/inner extents for reductions along one axis.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split(const Shape& s, std::size_t axis, const char* op) {
  require(axis < s.size(), ErrorKind::shape_mismatch,
          std::string(op) + ": axis out of range for shape " + shape_str(s));
  AxisSplit a;
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  a.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

}  // namespace

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
    for (const Var& in : {a, b}) {
      if (!t.requires_grad(in)) continue;
      auto& gi = t.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  }, "add");
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(a)) {
      auto& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(b)) {
      auto& gb = t.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  }, "sub");
}

Var mul(Var a, Var b) {
  same_shape(a, b, "mul");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(a)) {
      auto& ga = t.grad(a);
      const auto& bv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      auto& gb = t.grad(b);
      const auto& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  }, "mul");
}

Var scale(Var a, double s) {
  Tensor y = map_unary(a.value(), [s](double x) { return x * s; });
  return a.tape().record(std::move(y), {a}, [a, s](Tape& t, const Tensor&, const Tensor& g) {
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  }, "scale");
}

Var add_scalar(Var a, double s) {
  Tensor y = map_unary(a.value(), [s](double x) { return x + s; });
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  }, "add_scalar");
}

Var mul_scalar(Var a, Var s) {
  single_element(s, "mul_scalar");
  const double sv = s.value()[0];
  Tensor y = map_unary(a.value(), [sv](double x) { return x * sv; });
  return a.tape().record(std::move(y), {a, s}, [a, s](Tape& t, const Tensor&, const Tensor& g) {
    const double sv = s.value()[0];
    const auto& av = a.value();
    if (t.requires_grad(a)) {
      auto& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sv;
    }
    if (t.requires_grad(s)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
      t.grad(s)[0] += acc;
    }
  }, "mul_scalar");
}

Var div_scalar(Var a, Var s) {
  single_element(s, "div_scalar");
  const double sv = s.value()[0];
  require(sv != 0.0, ErrorKind::non_finite, "div_scalar: division by zero");
  Tensor y = map_unary(a.value(), [sv](double x) { return x / sv; });
  return a.tape().record(std::move(y), {a, s}, [a, s](Tape& t, const Tensor&, const Tensor& g) {
    const double sv = s.value()[0];
    const auto& av = a.value();
    if (t.requires_grad(a)) {
      auto& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / sv;
    }
    if (t.requires_grad(s)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
      t.grad(s)[0] += -acc / (sv * sv);
    }
  }, "div_scalar");
}

Var matmul(Var a, Var b) {
  require(a.shape().size() == 2 && b.shape().size() == 2 &&
              a.shape()[1] == b.shape()[0],
          ErrorKind::shape_mismatch,
          "matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
              shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor y({m, n});
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t r = 0; r < k; ++r) {
      const double aik = av[i * k + r];
      for (std::size_t j = 0; j < n; ++j) y[i * n + j] += aik * bv[r * n + j];
    }
  return a.tape().record(std::move(y), {a, b}, [a, b, m, k, n](Tape& t, const Tensor&, const Tensor& g) {
    const auto& av = a.value();
    const auto& bv = b.value();
    if (t.requires_grad(a)) {  // dA = G B^T
      auto& ga = t.grad(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t r = 0; r < k; ++r) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[r * n + j];
          ga[i * k + r] += acc;
        }
    }
    if (t.requires_grad(b)) {  // dB = A^T G
      auto& gb = t.grad(b);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t r = 0; r < k; ++r) {
          const double aik = av[i * k + r];
          for (std::size_t j = 0; j < n; ++j) gb[r * n + j] += aik * g[i * n + j];
        }
    }
  }, "matmul");
}

Var conv2d(Var x, Var w, Var b) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  require(xs.size() == 3 && ws.size() == 4 && ws[2] == 3 && ws[3] == 3 &&
              ws[1] == xs[0] && b.shape() == Shape{ws[0]},
          ErrorKind::shape_mismatch,
          "conv2d: input " + shape_str(xs) + ", weight " + shape_str(ws) +
              ", bias " + shape_str(b.shape()));
  const std::size_t ci = xs[0], h = xs[1], wd = xs[2], co = ws[0];
  const std::size_t hw = h * wd, rows = ci * 9;

  // im2col: col[(c*9 + ky*3 + kx), y*W + x] = x[c, y+ky-1, x+kx-1] (zero outside)
  std::vector<double> col(rows * hw, 0.0);
  const auto& xv = x.value();
  for (std::size_t c = 0; c < ci; ++c)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* dst = col.data() + (c * 9 + ky * 3 + kx) * hw;
        for (std::size_t yy = 0; yy < h; ++yy) {
          const long sy = long(yy) + long(ky) - 1;
          if (sy < 0 || sy >= long(h)) continue;
          for (std::size_t xx = 0; xx < wd; ++xx) {
            const long sx = long(xx) + long(kx) - 1;
            if (sx < 0 || sx >= long(wd)) continue;
            dst[yy * wd + xx] = xv[(c * h + std::size_t(sy)) * wd + std::size_t(sx)];
          }
        }
      }

  Tensor y({co, h, wd});
  const auto& wv = w.value();
  const auto& bv = b.value();
  for (std::size_t o = 0; o < co; ++o) {
    double* out = y.storage().data() + o * hw;
    std::fill(out, out + hw, bv[o]);
    for (std::size_t r = 0; r < rows; ++r) {
      const double wr = wv[o * rows + r];
      if (wr == 0.0) continue;
      const double* src = col.data() + r * hw;
      for (std::size_t p = 0; p < hw; ++p) out[p] += wr * src[p];
    }
  }

  return x.tape().record(
      std::move(y), {x, w, b},
      [x, w, b, col = std::move(col), ci, h, wd, co, hw, rows](Tape& t, const Tensor&, const Tensor& g) {
        const auto& wv = w.value();
        if (t.requires_grad(w)) {
          auto& gw = t.grad(w);
          for (std::size_t o = 0; o < co; ++o) {
            const double* go = g.storage().data() + o * hw;
            for (std::size_t r = 0; r < rows; ++r) {
              const double* src = col.data() + r * hw;
              double acc = 0.0;
              for (std::size_t p = 0; p < hw; ++p) acc += go[p] * src[p];
              gw[o * rows + r] += acc;
            }
          }
        }
        if (t.requires_grad(b)) {
          auto& gb = t.grad(b);
          for (std::size_t o = 0; o < co; ++o) {
            double acc = 0.0;
            for (std::size_t p = 0; p < hw; ++p) acc += g[o * hw + p];
            gb[o] += acc;
          }
        }
        if (t.requires_grad(x)) {
          std::vector<double> dcol(rows * hw, 0.0);
          for (std::size_t o = 0; o < co; ++o) {
            const double* go = g.storage().data() + o * hw;
            for (std::size_t r = 0; r < rows; ++r) {
              const double wr = wv[o * rows + r];
              if (wr == 0.0) continue;
              double* dst = dcol.data() + r * hw;
              for (std::size_t p = 0; p < hw; ++p) dst[p] += wr * go[p];
            }
          }
          auto& gx = t.grad(x);
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t ky = 0; ky < 3; ++ky)
              for (std::size_t kx = 0; kx < 3; ++kx) {
                const double* src = dcol.data() + (c * 9 + ky * 3 + kx) * hw;
                for (std::size_t yy = 0; yy < h; ++yy) {
                  const long sy = long(yy) + long(ky) - 1;
                  if (sy < 0 || sy >= long(h)) continue;
                  for (std::size_t xx = 0; xx < wd; ++xx) {
                    const long sx = long(xx) + long(kx) - 1;
                    if (sx < 0 || sx >= long(wd)) continue;
                    gx[(c * h + std::size_t(sy)) * wd + std::size_t(sx)] += src[yy * wd + xx];
                  }
                }
              }
        }
      },
      "conv2d");
}

Var relu(Var a) {
  Tensor y = map_unary(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    auto& ga = t.grad(a);
    const auto& av = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += av[i] > 0.0 ? g[i] : 0.0;
  }, "relu");
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Var a) {
  Tensor y = map_unary(a.value(), [](double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  });
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    auto& ga = t.grad(a);
    const auto& av = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = av[i];
      const double u = kGeluC * (x + kGeluA * x * x * x);
      const double th = std::tanh(u);
      const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      ga[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du);
    }
  }, "gelu");
}

Var softmax(Var a, std::size_t axis) {
  const AxisSplit s = split(a.shape(), axis, "softmax");
  const auto& av = a.value();
  Tensor y(a.shape());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = av[base];
      for (std::size_t k = 1; k < s.len; ++k) mx = std::max(mx, av[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.len; ++k) {
        const double e = std::exp(av[base + k * s.inner] - mx);
        y[base + k * s.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < s.len; ++k) y[base + k * s.inner] /= z;
    }
  return a.tape().record(std::move(y), {a}, [a, s](Tape& t, const Tensor& yv, const Tensor& g) {
    auto& ga = t.grad(a);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < s.len; ++k)
          dot += g[base + k * s.inner] * yv[base + k * s.inner];
        for (std::size_t k = 0; k < s.len; ++k) {
          const std::size_t i = base + k * s.inner;
          ga[i] += yv[i] * (g[i] - dot);
        }
      }
  }, "softmax");
}

Var log(Var a) {
  for (double v : a.value().data()) {
    require(v > 0.0, ErrorKind::non_finite, "log of non-positive value");
  }
  Tensor y = map_unary(a.value(), [](double x) { return std::log(x); });
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    auto& ga = t.grad(a);
    const auto& av = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / av[i];
  }, "log");
}

Var exp(Var a) {
  Tensor y = map_unary(a.value(), [](double x) { return std::exp(x); });
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor& yv, const Tensor& g) {
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i];
  }, "exp");
}

Var sqrt(Var a) {
  for (double v : a.value().data()) {
    require(v >= 0.0, ErrorKind::non_finite, "sqrt of negative value");
  }
  Tensor y = map_unary(a.value(), [](double x) { return std::sqrt(x); });
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor& yv, const Tensor& g) {
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 0.5 / yv[i];
  }, "sqrt");
}

Var square(Var a) {
  Tensor y = map_unary(a.value(), [](double x) { return x * x; });
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    auto& ga = t.grad(a);
    const auto& av = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * av[i] * g[i];
  }, "square");
}

Var clamp(Var a, double lo, double hi) {
  Tensor y = map_unary(a.value(), [lo, hi](double x) { return std::clamp(x, lo, hi); });
  return a.tape().record(std::move(y), {a}, [a, lo, hi](Tape& t, const Tensor&, const Tensor& g) {
    auto& ga = t.grad(a);
    const auto& av = a.value();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] >= lo && av[i] <= hi) ga[i] += g[i];
  }, "clamp");
}

Var cumsum(Var a, std::size_t axis) {
  const AxisSplit s = split(a.shape(), axis, "cumsum");
  const auto& av = a.value();
  Tensor y(a.shape());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double run = 0.0;
      for (std::size_t k = 0; k < s.len; ++k) {
        run += av[base + k * s.inner];
        y[base + k * s.inner] = run;
      }
    }
  return a.tape().record(std::move(y), {a}, [a, s](Tape& t, const Tensor&, const Tensor& g) {
    auto& ga = t.grad(a);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        double run = 0.0;
        for (std::size_t k = s.len; k-- > 0;) {
          run += g[base + k * s.inner];
          ga[base + k * s.inner] += run;
        }
      }
  }, "cumsum");
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  return a.tape().record(Tensor::scalar(acc), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  }, "sum");
}

Var mean(Var a) {
  require(a.size() > 0, ErrorKind::shape_mismatch, "mean of empty tensor");
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  const double n = double(a.size());
  return a.tape().record(Tensor::scalar(acc / n), {a}, [a, n](Tape& t, const Tensor&, const Tensor& g) {
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] / n;
  }, "mean");
}

Var concat(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::shape_mismatch, "concat of nothing");
  Shape out_shape = parts.front().shape();
  require(!out_shape.empty(), ErrorKind::shape_mismatch, "concat of rank-0 tensors");
  std::size_t rows = 0;
  for (const auto& p : parts) {
    Shape tail(p.shape().begin() + 1, p.shape().end());
    Shape ref_tail(out_shape.begin() + 1, out_shape.end());
    require(p.shape().size() == out_shape.size() && tail == ref_tail,
            ErrorKind::shape_mismatch, "concat: trailing dimensions differ");
    require(&p.tape() == &parts.front().tape(), ErrorKind::tape_state,
            "concat: parts on different tapes");
    rows += p.shape()[0];
  }
  out_shape[0] = rows;
  Tensor y(out_shape);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    std::copy(p.value().data().begin(), p.value().data().end(),
              y.storage().begin() + long(off));
    off += p.size();
  }
  return parts.front().tape().record(
      std::move(y), parts,
      [parts, offsets](Tape& t, const Tensor&, const Tensor& g) {
        for (std::size_t k = 0; k < parts.size(); ++k) {
          if (!t.requires_grad(parts[k])) continue;
          auto& gp = t.grad(parts[k]);
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[k] + i];
        }
      },
      "concat");
}

Var slice(Var a, std::size_t begin, std::size_t end) {
  require(!a.shape().empty() && begin < end && end <= a.shape()[0],
          ErrorKind::shape_mismatch,
          "slice [" + std::to_string(begin) + "," + std::to_string(end) +
              ") out of range for " + shape_str(a.shape()));
  Shape out_shape = a.shape();
  out_shape[0] = end - begin;
  const std::size_t stride = a.size() / a.shape()[0];
  Tensor y(out_shape);
  std::copy(a.value().data().begin() + long(begin * stride),
            a.value().data().begin() + long(end * stride), y.storage().begin());
  const std::size_t off = begin * stride;
  return a.tape().record(std::move(y), {a}, [a, off](Tape& t, const Tensor&, const Tensor& g) {
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[off + i] += g[i];
  }, "slice");
}

Var reshape(Var a, Shape shape) {
  require(shape_size(shape) == a.size(), ErrorKind::shape_mismatch,
          "reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  Tensor y(std::move(shape), a.value().storage());
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  }, "reshape");
}

Var scale_shift(Var x, Var sc, Var sh) {
  const auto& xs = x.shape();
  require(xs.size() == 3 && sc.shape() == Shape{xs[0]} && sh.shape() == Shape{xs[0]},
          ErrorKind::shape_mismatch,
          "scale_shift: input " + shape_str(xs) + ", scale " + shape_str(sc.shape()) +
              ", shift " + shape_str(sh.shape()));
  const std::size_t c = xs[0], hw = xs[1] * xs[2];
  Tensor y(xs);
  const auto& xv = x.value();
  for (std::size_t k = 0; k < c; ++k) {
    const double a = sc.value()[k], b = sh.value()[k];
    for (std::size_t p = 0; p < hw; ++p) y[k * hw + p] = xv[k * hw + p] * a + b;
  }
  return x.tape().record(std::move(y), {x, sc, sh}, [x, sc, sh, c, hw](Tape& t, const Tensor&, const Tensor& g) {
    const auto& xv = x.value();
    if (t.requires_grad(x)) {
      auto& gx = t.grad(x);
      for (std::size_t k = 0; k < c; ++k) {
        const double a = sc.value()[k];
        for (std::size_t p = 0; p < hw; ++p) gx[k * hw + p] += g[k * hw + p] * a;
      }
    }
    if (t.requires_grad(sc)) {
      auto& gs = t.grad(sc);
      for (std::size_t k = 0; k < c; ++k) {
        double acc = 0.0;
        for (std::size_t p = 0; p < hw; ++p) acc += g[k * hw + p] * xv[k * hw + p];
        gs[k] += acc;
      }
    }
    if (t.requires_grad(sh)) {
      auto& gb = t.grad(sh);
      for (std::size_t k = 0; k < c; ++k) {
        double acc = 0.0;
        for (std::size_t p = 0; p < hw; ++p) acc += g[k * hw + p];
        gb[k] += acc;
      }
    }
  }, "scale_shift");
}

Var gaussian_sample(Var mu, Var log_sigma, const Tensor& noise) {
  same_shape(mu, log_sigma, "gaussian_sample");
  require(noise.shape() == mu.shape(), ErrorKind::shape_mismatch,
          "gaussian_sample: noise shape " + shape_str(noise.shape()) +
              " differs from " + shape_str(mu.shape()));
  const auto& mv = mu.value();
  const auto& lv = log_sigma.value();
  Tensor sigma(mu.shape());
  Tensor y(mu.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double ls = std::isnan(lv[i]) ? lv[i] : std::clamp(lv[i], kLogSigmaMin, kLogSigmaMax);
    sigma[i] = std::exp(ls);
    y[i] = mv[i] + sigma[i] * noise[i];
  }
  return mu.tape().record(
      std::move(y), {mu, log_sigma},
      [mu, log_sigma, sigma, noise](Tape& t, const Tensor&, const Tensor& g) {
        if (t.requires_grad(mu)) {
          auto& gm = t.grad(mu);
          for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
        }
        if (t.requires_grad(log_sigma)) {
          auto& gl = t.grad(log_sigma);
          const auto& lv = log_sigma.value();
          for (std::size_t i = 0; i < g.size(); ++i)
            if (lv[i] >= kLogSigmaMin && lv[i] <= kLogSigmaMax)
              gl[i] += g[i] * sigma[i] * noise[i];
        }
      },
      "gaussian_sample");
}

}  // namespace qw
