// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/diffcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "triaug/errors.hpp"

namespace triaug::diff {

namespace {

Graph& graph_of(Var a) {
  if (!a.valid()) throw GraphError("operation on an unbound variable");
  return *a.graph();
}

Graph& graph_of(Var a, Var b) {
  Graph& g = graph_of(a);
  if (b.graph() != &g) throw GraphError("operands belong to different graphs");
  return g;
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                   to_string(b));
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + to_string(t.shape()));
}

void check_mask(const char* op, const Tensor& v, std::span<const std::uint8_t> mask) {
  if (mask.size() != v.cols()) {
    throw ShapeError(std::string(op) + ": mask of length " + std::to_string(mask.size()) +
                     " does not match shape " + to_string(v.shape()));
  }
}

Shape reduced_row_shape(const Tensor& v) {
  return v.rank() == 1 ? Shape{1} : Shape{v.rows(), 1};
}

// c += a * b for row-major a [m x k], b [k x n].
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c += a^T * b for a [k x m], b [k x n].
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = ap[i];
      if (api == 0.0) continue;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

// c += a * b^T for a [m x k], b [n x k].
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2("matmul", av);
  require_rank2("matmul", bv);
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
  if (bv.shape()[0] != k) shape_mismatch("matmul", av.shape(), bv.shape());
  Tensor out({m, n});
  gemm_acc(av.values().data(), bv.values().data(), out.values().data(), m, k, n);
  return g.record(std::move(out), {a, b}, [m, k, n](const BackwardContext& ctx) {
    const double* gout = ctx.out_grad.values().data();
    if (ctx.in_grads[0]) {
      gemm_nt_acc(gout, ctx.in_values[1]->values().data(), ctx.in_grads[0]->values().data(), m, n, k);
    }
    if (ctx.in_grads[1]) {
      gemm_tn_acc(ctx.in_values[0]->values().data(), gout, ctx.in_grads[1]->values().data(), k, m, n);
    }
  });
}

Var transpose(Var a) {
  Graph& g = graph_of(a);
  const Tensor& av = a.value();
  require_rank2("transpose", av);
  const std::size_t r = av.shape()[0], c = av.shape()[1];
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = av(i, j);
  return g.record(std::move(out), {a}, [r, c](const BackwardContext& ctx) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*ctx.in_grads[0])(i, j) += ctx.out_grad(j, i);
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_mismatch("add", av.shape(), bv.shape());
  Tensor out = av;
  out += bv;
  return g.record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    for (Tensor* gi : ctx.in_grads) {
      if (gi) *gi += ctx.out_grad;
    }
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_mismatch("sub", av.shape(), bv.shape());
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return g.record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    if (ctx.in_grads[0]) *ctx.in_grads[0] += ctx.out_grad;
    if (Tensor* gb = ctx.in_grads[1]) {
      for (std::size_t i = 0; i < gb->numel(); ++i) (*gb)[i] -= ctx.out_grad[i];
    }
  });
}

Var add_row(Var a, Var row) {
  Graph& g = graph_of(a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rank() != 1 || rv.numel() != av.cols()) shape_mismatch("add_row", av.shape(), rv.shape());
  Tensor out = av;
  const std::size_t rows = av.rows(), cols = av.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += rv[c];
  return g.record(std::move(out), {a, row}, [rows, cols](const BackwardContext& ctx) {
    if (ctx.in_grads[0]) *ctx.in_grads[0] += ctx.out_grad;
    if (Tensor* gr = ctx.in_grads[1]) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (*gr)[c] += ctx.out_grad[r * cols + c];
    }
  });
}

Var scale(Var a, double factor) {
  Graph& g = graph_of(a);
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return g.record(std::move(out), {a}, [factor](const BackwardContext& ctx) {
    Tensor& ga = *ctx.in_grads[0];
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += factor * ctx.out_grad[i];
  });
}

Var relu(Var a) {
  Graph& g = graph_of(a);
  Tensor out = a.value();
  for (double& v : out.values()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  return g.record(std::move(out), {a}, [](const BackwardContext& ctx) {
    Tensor& ga = *ctx.in_grads[0];
    const Tensor& x = *ctx.in_values[0];
    for (std::size_t i = 0; i < ga.numel(); ++i) {
      if (!(x[i] <= 0.0)) ga[i] += ctx.out_grad[i];
    }
  });
}

Var concat(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != bv.rank() || av.rows() != bv.rows()) shape_mismatch("concat", av.shape(), bv.shape());
  const std::size_t rows = av.rows(), ca = av.cols(), cb = bv.cols();
  Shape shape = av.rank() == 1 ? Shape{ca + cb} : Shape{rows, ca + cb};
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(av.row(r).begin(), av.row(r).end(), out.row(r).begin());
    std::copy(bv.row(r).begin(), bv.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(ca));
  }
  return g.record(std::move(out), {a, b}, [rows, ca, cb](const BackwardContext& ctx) {
    for (std::size_t r = 0; r < rows; ++r) {
      auto go = ctx.out_grad.row(r);
      if (Tensor* ga = ctx.in_grads[0]) {
        for (std::size_t c = 0; c < ca; ++c) ga->row(r)[c] += go[c];
      }
      if (Tensor* gb = ctx.in_grads[1]) {
        for (std::size_t c = 0; c < cb; ++c) gb->row(r)[c] += go[ca + c];
      }
    }
  });
}

Var masked_sum(Var v, std::span<const std::uint8_t> mask) {
  Graph& g = graph_of(v);
  const Tensor& vv = v.value();
  check_mask("masked_sum", vv, mask);
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  Tensor out(reduced_row_shape(vv));
  for (std::size_t r = 0; r < vv.rows(); ++r) {
    double s = 0.0;
    auto row = vv.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (m[c]) s += row[c];
    }
    out[r] = s;
  }
  return g.record(std::move(out), {v}, [m = std::move(m)](const BackwardContext& ctx) {
    Tensor& gv = *ctx.in_grads[0];
    for (std::size_t r = 0; r < gv.rows(); ++r) {
      auto row = gv.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (m[c]) row[c] += ctx.out_grad[r];
      }
    }
  });
}

Var masked_logsumexp(Var v, std::span<const std::uint8_t> mask) {
  Graph& g = graph_of(v);
  const Tensor& vv = v.value();
  check_mask("masked_logsumexp", vv, mask);
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  if (std::none_of(m.begin(), m.end(), [](std::uint8_t b) { return b != 0; })) {
    throw DegenerateInputError("masked_logsumexp: mask selects no entries");
  }
  Tensor out(reduced_row_shape(vv));
  for (std::size_t r = 0; r < vv.rows(); ++r) {
    auto row = vv.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (m[c]) mx = std::max(mx, row[c]);
    }
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (m[c]) s += std::exp(row[c] - mx);
    }
    out[r] = mx + std::log(s);
  }
  return g.record(std::move(out), {v}, [m = std::move(m)](const BackwardContext& ctx) {
    Tensor& gv = *ctx.in_grads[0];
    const Tensor& x = *ctx.in_values[0];
    for (std::size_t r = 0; r < gv.rows(); ++r) {
      auto row = gv.row(r);
      auto xr = x.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (m[c]) row[c] += ctx.out_grad[r] * std::exp(xr[c] - ctx.out_value[r]);
      }
    }
  });
}

Var l2_normalize(Var v, double norm_floor) {
  Graph& g = graph_of(v);
  const Tensor& vv = v.value();
  const std::size_t rows = vv.rows();
  std::vector<double> norms(rows);
  Tensor out = vv;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (double x : vv.row(r)) s += x * x;
    double n = std::sqrt(s);
    if (norm_floor > 0.0) {
      n = std::max(n, norm_floor);
    } else if (n == 0.0) {
      throw DegenerateInputError("l2_normalize: row " + std::to_string(r) + " has zero norm");
    }
    norms[r] = n;
    for (double& x : out.row(r)) x /= n;
  }
  return g.record(std::move(out), {v}, [norms = std::move(norms), norm_floor](const BackwardContext& ctx) {
    Tensor& gv = *ctx.in_grads[0];
    for (std::size_t r = 0; r < gv.rows(); ++r) {
      auto y = ctx.out_value.row(r);
      auto go = ctx.out_grad.row(r);
      auto gr = gv.row(r);
      const double n = norms[r];
      const bool clamped = norm_floor > 0.0 && n == norm_floor;
      if (clamped) {
        // constant denominator in the clamped region
        for (std::size_t c = 0; c < gr.size(); ++c) gr[c] += go[c] / n;
        continue;
      }
      double dot = 0.0;
      for (std::size_t c = 0; c < gr.size(); ++c) dot += go[c] * y[c];
      for (std::size_t c = 0; c < gr.size(); ++c) gr[c] += (go[c] - dot * y[c]) / n;
    }
  });
}

Var log_softmax(Var v) {
  Graph& g = graph_of(v);
  const Tensor& vv = v.value();
  Tensor out = vv;
  for (std::size_t r = 0; r < vv.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double x : row) s += std::exp(x - mx);
    const double lse = mx + std::log(s);
    for (double& x : row) x -= lse;
  }
  return g.record(std::move(out), {v}, [](const BackwardContext& ctx) {
    Tensor& gv = *ctx.in_grads[0];
    for (std::size_t r = 0; r < gv.rows(); ++r) {
      auto y = ctx.out_value.row(r);
      auto go = ctx.out_grad.row(r);
      double gs = 0.0;
      for (double x : go) gs += x;
      auto gr = gv.row(r);
      for (std::size_t c = 0; c < gr.size(); ++c) gr[c] += go[c] - std::exp(y[c]) * gs;
    }
  });
}

Var pick(Var v, std::span<const std::size_t> index) {
  Graph& g = graph_of(v);
  const Tensor& vv = v.value();
  if (index.size() != vv.rows()) {
    throw ShapeError("pick: " + std::to_string(index.size()) + " indices for shape " + to_string(vv.shape()));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  Tensor out({vv.rows()});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= vv.cols()) {
      throw ShapeError("pick: index " + std::to_string(idx[r]) + " out of range for shape " + to_string(vv.shape()));
    }
    out[r] = vv.row(r)[idx[r]];
  }
  return g.record(std::move(out), {v}, [idx = std::move(idx)](const BackwardContext& ctx) {
    Tensor& gv = *ctx.in_grads[0];
    for (std::size_t r = 0; r < idx.size(); ++r) gv.row(r)[idx[r]] += ctx.out_grad[r];
  });
}

Var sum(Var v) {
  Graph& g = graph_of(v);
  double s = 0.0;
  for (double x : v.value().values()) s += x;
  return g.record(Tensor::scalar(s), {v}, [](const BackwardContext& ctx) {
    const double go = ctx.out_grad[0];
    for (double& x : ctx.in_grads[0]->values()) x += go;
  });
}

Var mean(Var v) { return scale(sum(v), 1.0 / static_cast<double>(v.value().numel())); }

}  // namespace triaug::diff
