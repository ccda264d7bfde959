#include "riskloss/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace riskloss::ad {
namespace {

Tape& tape_of(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw std::invalid_argument("operands belong to different tapes");
  }
  return *a.tape();
}

Tape& tape_of(Var a) {
  if (!a.valid()) {
    throw std::invalid_argument("unbound Var");
  }
  return *a.tape();
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a) +
                              " vs " + shape_string(b));
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) {
    return false;
  }
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

enum class Binary { Add, Sub, Mul };

Var elementwise(Var a, Var b, Binary kind, const char* name) {
  Tape& tape = tape_of(a, b);
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  const bool a_big = va.size() >= vb.size();
  const Shape& big_shape = a_big ? va.shape() : vb.shape();
  const Shape& small_shape = a_big ? vb.shape() : va.shape();
  if (!is_suffix(small_shape, big_shape)) {
    shape_error(name, va.shape(), vb.shape());
  }
  const std::size_t n = shape_size(big_shape);
  const std::size_t na = va.size();
  const std::size_t nb = vb.size();

  Tensor out(big_shape);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = va[i % na];
    const double y = vb[i % nb];
    switch (kind) {
      case Binary::Add: out[i] = x + y; break;
      case Binary::Sub: out[i] = x - y; break;
      case Binary::Mul: out[i] = x * y; break;
    }
  }
  return tape.record(std::move(out), {a, b}, [kind, n, na, nb](GradContext& c) {
    const Tensor& g = c.out_grad;
    if (Tensor* ga = c.in_grad[0]) {
      for (std::size_t i = 0; i < n; ++i) {
        const double d = kind == Binary::Mul ? g[i] * (*c.in[1])[i % nb] : g[i];
        (*ga)[i % na] += d;
      }
    }
    if (Tensor* gb = c.in_grad[1]) {
      for (std::size_t i = 0; i < n; ++i) {
        double d = g[i];
        if (kind == Binary::Sub) d = -d;
        if (kind == Binary::Mul) d *= (*c.in[0])[i % na];
        (*gb)[i % nb] += d;
      }
    }
  });
}

// c[m,n] += a[m,k] * b[k,n], all row-major with explicit strides.
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

// c[m,k] += g[m,n] * b[k,n]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        acc += grow[j] * brow[j];
      }
      c[i * k + p] += acc;
    }
  }
}

// c[k,n] += a[m,k]^T * g[m,n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        crow[j] += av * grow[j];
      }
    }
  }
}

std::size_t last_dim(const Tensor& t, const char* op) {
  if (t.rank() == 0) {
    throw std::invalid_argument(std::string(op) + ": requires rank >= 1");
  }
  return t.shape().back();
}

}  // namespace

Var add(Var a, Var b) { return elementwise(a, b, Binary::Add, "add"); }
Var sub(Var a, Var b) { return elementwise(a, b, Binary::Sub, "sub"); }
Var mul(Var a, Var b) { return elementwise(a, b, Binary::Mul, "mul"); }

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Shape& sa = a.value().shape();
  const Shape& sb = b.value().shape();
  if (sa.size() < 2 || sb.size() < 2) {
    shape_error("matmul", sa, sb);
  }
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa.back();
  const std::size_t n = sb.back();
  if (sb[sb.size() - 2] != k) {
    shape_error("matmul", sa, sb);
  }
  const bool shared_b = sb.size() == 2;
  if (!shared_b && (sb.size() != sa.size() || !std::equal(sa.begin(), sa.end() - 2, sb.begin()))) {
    shape_error("matmul", sa, sb);
  }
  const std::size_t batch = shape_size(Shape(sa.begin(), sa.end() - 2));
  Shape out_shape(sa.begin(), sa.end() - 1);
  out_shape.push_back(n);

  Tensor out(out_shape);
  const double* pa = a.value().data().data();
  const double* pb = b.value().data().data();
  if (shared_b) {
    gemm_nn(pa, pb, out.data().data(), batch * m, k, n);
  } else {
    for (std::size_t s = 0; s < batch; ++s) {
      gemm_nn(pa + s * m * k, pb + s * k * n, out.data().data() + s * m * n, m, k, n);
    }
  }
  return tape.record(std::move(out), {a, b}, [=](GradContext& c) {
    const double* g = c.out_grad.data().data();
    const double* xa = c.in[0]->data().data();
    const double* xb = c.in[1]->data().data();
    if (shared_b) {
      if (Tensor* ga = c.in_grad[0]) gemm_nt(g, xb, ga->data().data(), batch * m, n, k);
      if (Tensor* gb = c.in_grad[1]) gemm_tn(xa, g, gb->data().data(), batch * m, k, n);
      return;
    }
    for (std::size_t s = 0; s < batch; ++s) {
      const double* gs = g + s * m * n;
      if (Tensor* ga = c.in_grad[0]) {
        gemm_nt(gs, xb + s * k * n, ga->data().data() + s * m * k, m, n, k);
      }
      if (Tensor* gb = c.in_grad[1]) {
        gemm_tn(xa + s * m * k, gs, gb->data().data() + s * k * n, m, k, n);
      }
    }
  });
}

Var transpose(Var a) {
  Tape& tape = tape_of(a);
  const Shape& sa = a.value().shape();
  if (sa.size() < 2) {
    throw std::invalid_argument("transpose: requires rank >= 2, got " + shape_string(sa));
  }
  const std::size_t r = sa[sa.size() - 2];
  const std::size_t cdim = sa.back();
  const std::size_t batch = shape_size(Shape(sa.begin(), sa.end() - 2));
  Shape out_shape = sa;
  std::swap(out_shape[sa.size() - 2], out_shape[sa.size() - 1]);

  Tensor out(out_shape);
  const Tensor& x = a.value();
  for (std::size_t s = 0; s < batch; ++s) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < cdim; ++j) {
        out[s * r * cdim + j * r + i] = x[s * r * cdim + i * cdim + j];
      }
    }
  }
  return tape.record(std::move(out), {a}, [=](GradContext& c) {
    Tensor& ga = *c.in_grad[0];
    for (std::size_t s = 0; s < batch; ++s) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < cdim; ++j) {
          ga[s * r * cdim + i * cdim + j] += c.out_grad[s * r * cdim + j * r + i];
        }
      }
    }
  });
}

Var relu(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (double& v : out.data()) {
    v = v > 0.0 ? v : 0.0;
  }
  return tape.record(std::move(out), {a}, [](GradContext& c) {
    Tensor& ga = *c.in_grad[0];
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if ((*c.in[0])[i] > 0.0) {
        ga[i] += c.out_grad[i];
      }
    }
  });
}

Var softmax(Var a) {
  Tape& tape = tape_of(a);
  const std::size_t d = last_dim(a.value(), "softmax");
  const std::size_t rows = a.value().size() / d;
  Tensor out = a.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data().data() + r * d;
    const double mx = *std::max_element(row, row + d);
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) {
      row[j] /= total;
    }
  }
  return tape.record(std::move(out), {a}, [=](GradContext& c) {
    Tensor& ga = *c.in_grad[0];
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = c.out.data().data() + r * d;
      const double* g = c.out_grad.data().data() + r * d;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        dot += y[j] * g[j];
      }
      for (std::size_t j = 0; j < d; ++j) {
        ga[r * d + j] += y[j] * (g[j] - dot);
      }
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double epsilon) {
  Tape& tape = tape_of(x, gain);
  tape_of(x, bias);
  const std::size_t d = last_dim(x.value(), "layer_norm");
  if (gain.value().shape() != Shape{d} || bias.value().shape() != Shape{d}) {
    shape_error("layer_norm", x.value().shape(), gain.value().shape());
  }
  const std::size_t rows = x.value().size() / d;
  const double dn = static_cast<double>(d);

  // Normalized activations and per-row inverse std are reused by backward.
  std::vector<double> xhat(x.value().size());
  std::vector<double> inv_std(rows);
  Tensor out(x.value().shape());
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= dn;
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= dn;
    inv_std[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mu) * inv_std[r];
      out[r * d + j] = xhat[r * d + j] * gv[j] + bv[j];
    }
  }
  return tape.record(
      std::move(out), {x, gain, bias},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](GradContext& c) {
        const Tensor& g = c.out_grad;
        const Tensor& gain_v = *c.in[1];
        if (Tensor* gg = c.in_grad[1]) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gg)[i % d] += g[i] * xhat[i];
        }
        if (Tensor* gb = c.in_grad[2]) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % d] += g[i];
        }
        if (Tensor* gx = c.in_grad[0]) {
          for (std::size_t r = 0; r < rows; ++r) {
            double sum_d = 0.0;
            double sum_dx = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dxhat = g[r * d + j] * gain_v[j];
              sum_d += dxhat;
              sum_dx += dxhat * xhat[r * d + j];
            }
            for (std::size_t j = 0; j < d; ++j) {
              const double dxhat = g[r * d + j] * gain_v[j];
              (*gx)[r * d + j] +=
                  inv_std[r] / dn * (dn * dxhat - sum_d - xhat[r * d + j] * sum_dx);
            }
          }
        }
      });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  double total = 0.0;
  for (const double v : a.value().data()) total += v;
  return tape.record(Tensor::scalar(total), {a}, [](GradContext& c) {
    const double g = c.out_grad[0];
    for (double& v : c.in_grad[0]->data()) v += g;
  });
}

Var mean(Var a) {
  Tape& tape = tape_of(a);
  const double n = static_cast<double>(a.value().size());
  double total = 0.0;
  for (const double v : a.value().data()) total += v;
  return tape.record(Tensor::scalar(total / n), {a}, [n](GradContext& c) {
    const double g = c.out_grad[0] / n;
    for (double& v : c.in_grad[0]->data()) v += g;
  });
}

Var scale(Var a, double factor) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return tape.record(std::move(out), {a}, [factor](GradContext& c) {
    Tensor& ga = *c.in_grad[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * c.out_grad[i];
  });
}

Var power2(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (double& v : out.data()) v *= v;
  return tape.record(std::move(out), {a}, [](GradContext& c) {
    Tensor& ga = *c.in_grad[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * (*c.in[0])[i] * c.out_grad[i];
  });
}

Var slice(Var a, std::size_t axis, std::size_t start, std::size_t length) {
  Tape& tape = tape_of(a);
  const Shape& sa = a.value().shape();
  if (axis >= sa.size() || length == 0 || start + length > sa[axis]) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " +
                                std::to_string(start + length) + ") on axis " +
                                std::to_string(axis) + " out of bounds for shape " +
                                shape_string(sa));
  }
  const std::size_t outer = shape_size(Shape(sa.begin(), sa.begin() + axis));
  const std::size_t inner = shape_size(Shape(sa.begin() + axis + 1, sa.end()));
  const std::size_t src_block = sa[axis] * inner;
  const std::size_t dst_block = length * inner;
  Shape out_shape = sa;
  out_shape[axis] = length;

  Tensor out(out_shape);
  const Tensor& x = a.value();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.data().begin() + o * src_block + start * inner, dst_block,
                out.data().begin() + o * dst_block);
  }
  return tape.record(std::move(out), {a}, [=](GradContext& c) {
    Tensor& ga = *c.in_grad[0];
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < dst_block; ++i) {
        ga[o * src_block + start * inner + i] += c.out_grad[o * dst_block + i];
      }
    }
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) {
    throw std::invalid_argument("concat: no inputs");
  }
  Tape& tape = tape_of(parts[0]);
  const Shape& first = parts[0].value().shape();
  if (axis >= first.size()) {
    throw std::invalid_argument("concat: axis out of range for shape " + shape_string(first));
  }
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    tape_of(parts[0], p);
    const Shape& s = p.value().shape();
    if (s.size() != first.size()) shape_error("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) shape_error("concat", first, s);
    }
    widths.push_back(s[axis]);
    total += s[axis];
  }
  const std::size_t outer = shape_size(Shape(first.begin(), first.begin() + axis));
  const std::size_t inner = shape_size(Shape(first.begin() + axis + 1, first.end()));
  Shape out_shape = first;
  out_shape[axis] = total;

  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& x = parts[k].value();
    const std::size_t block = widths[k] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(x.data().begin() + o * block, block,
                  out.data().begin() + o * total * inner + offset * inner);
    }
    offset += widths[k];
  }
  return tape.record(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                     [=](GradContext& c) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         const std::size_t block = widths[k] * inner;
                         if (Tensor* g = c.in_grad[k]) {
                           for (std::size_t o = 0; o < outer; ++o) {
                             for (std::size_t i = 0; i < block; ++i) {
                               (*g)[o * block + i] +=
                                   c.out_grad[o * total * inner + off * inner + i];
                             }
                           }
                         }
                         off += widths[k];
                       }
                     });
}

Var reshape(Var a, Shape shape) {
  Tape& tape = tape_of(a);
  if (shape_size(shape) != a.value().size()) {
    shape_error("reshape", a.value().shape(), shape);
  }
  Tensor out(std::move(shape), std::vector<double>(a.value().data().begin(), a.value().data().end()));
  return tape.record(std::move(out), {a}, [](GradContext& c) {
    Tensor& ga = *c.in_grad[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c.out_grad[i];
  });
}

Var scalar_objective(Var input, double value, std::vector<double> gradient) {
  Tape& tape = tape_of(input);
  if (gradient.size() != input.value().size()) {
    throw std::invalid_argument("scalar_objective: gradient length " +
                                std::to_string(gradient.size()) + " does not match input shape " +
                                shape_string(input.value().shape()));
  }
  return tape.record(Tensor::scalar(value), {input},
                     [gradient = std::move(gradient)](GradContext& c) {
                       const double g = c.out_grad[0];
                       Tensor& gi = *c.in_grad[0];
                       for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g * gradient[i];
                     });
}

}  // namespace riskloss::ad
