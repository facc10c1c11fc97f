#include "udparse/autodiff.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "udparse/error.h"

namespace udparse {
namespace {

size_t NRows(const Tensor& t) { return t.rows(); }
size_t NCols(const Tensor& t) { return t.cols(); }

std::string Dims(const Tensor& t) { return ShapeString(t.shape()); }

[[noreturn]] void Mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + Dims(a) +
                       " and " + Dims(b));
}

void RequireMatrix(const char* op, const Tensor& t) {
  if (t.rank() < 1 || t.rank() > 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + Dims(t));
  }
}

// c (m x n) += a (m x k) * b (k x n)
void GemmNN(const Real* a, const Real* b, Real* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    Real* ci = c + i * n;
    const Real* ai = a + i * k;
    for (size_t p = 0; p < k; ++p) {
      const Real av = ai[p];
      if (av == 0.0) continue;
      const Real* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c (m x n) += a (m x k) * b^T where b is n x k
void GemmNT(const Real* a, const Real* b, Real* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const Real* ai = a + i * k;
    Real* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      const Real* bj = b + j * k;
      Real s = 0.0;
      for (size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] += s;
    }
  }
}

// c (m x n) += a^T * b where a is k x m, b is k x n
void GemmTN(const Real* a, const Real* b, Real* c, size_t m, size_t k, size_t n) {
  for (size_t p = 0; p < k; ++p) {
    const Real* ap = a + p * m;
    const Real* bp = b + p * n;
    for (size_t i = 0; i < m; ++i) {
      const Real av = ap[i];
      if (av == 0.0) continue;
      Real* ci = c + i * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

Real SigmoidScalar(Real x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::Push(Tensor value, const char* op,
               std::function<void(Tape&, const Tensor&)> backward) {
  if (!value.AllFinite()) {
    throw NumericError(std::string(op) + ": non-finite value in forward pass");
  }
  nodes_.push_back({std::move(value), Tensor(), std::move(backward)});
  return Var{static_cast<uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::GradRef(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

const Tensor& Tape::grad(Var v) { return GradRef(v); }

Var Tape::Constant(Tensor t) { return Push(std::move(t), "constant", nullptr); }

Var Tape::Param(Parameter& p) {
  Parameter* ptr = &p;
  return Push(p.value, "param", [ptr](Tape&, const Tensor& g) {
    if (!ptr->trainable) return;
    for (size_t i = 0; i < g.size(); ++i) ptr->grad[i] += g[i];
  });
}

Var Tape::MatMul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  RequireMatrix("matmul", av);
  RequireMatrix("matmul", bv);
  const size_t m = NRows(av), k = NCols(av), n = NCols(bv);
  if (NRows(bv) != k) Mismatch("matmul", av, bv);
  Tensor out = Tensor::Zeros(m, n);
  GemmNN(av.data(), bv.data(), out.data(), m, k, n);
  return Push(std::move(out), "matmul", [a, b, m, k, n](Tape& t, const Tensor& g) {
    GemmNT(g.data(), t.value(b).data(), t.GradRef(a).data(), m, n, k);
    GemmTN(t.value(a).data(), g.data(), t.GradRef(b).data(), k, m, n);
  });
}

Var Tape::Transpose(Var a) {
  const Tensor& av = value(a);
  RequireMatrix("transpose", av);
  const size_t m = NRows(av), n = NCols(av);
  Tensor out = Tensor::Zeros(n, m);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out.at(j, i) = av.at(i, j);
  return Push(std::move(out), "transpose", [a, m, n](Tape& t, const Tensor& g) {
    Tensor& ga = t.GradRef(a);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) ga.at(i, j) += g.at(j, i);
  });
}

Var Tape::Linear(Var x, Var w) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  RequireMatrix("affine", xv);
  RequireMatrix("affine", wv);
  const size_t n = NRows(xv), in = NCols(xv), out_dim = NRows(wv);
  if (NCols(wv) != in) Mismatch("affine", xv, wv);
  Tensor out = Tensor::Zeros(n, out_dim);
  GemmNT(xv.data(), wv.data(), out.data(), n, in, out_dim);
  return Push(std::move(out), "affine",
              [x, w, n, in, out_dim](Tape& t, const Tensor& g) {
                GemmNN(g.data(), t.value(w).data(), t.GradRef(x).data(), n,
                       out_dim, in);
                GemmTN(g.data(), t.value(x).data(), t.GradRef(w).data(),
                       out_dim, n, in);
              });
}

Var Tape::Affine(Var x, Var w, Var b) {
  const Tensor& bv = value(b);
  if (bv.size() != NRows(value(w))) Mismatch("affine", value(w), bv);
  return Add(Linear(x, w), b);
}

Var Tape::Add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.shape() == bv.shape()) {
    Tensor out = av;
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return Push(std::move(out), "add", [a, b](Tape& t, const Tensor& g) {
      Tensor& ga = t.GradRef(a);
      Tensor& gb = t.GradRef(b);
      for (size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i];
        gb[i] += g[i];
      }
    });
  }
  if (NRows(bv) == 1 && NCols(bv) == NCols(av) && av.rank() <= 2) {
    const size_t m = NRows(av), n = NCols(av);
    Tensor out = av;
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) out.at(i, j) += bv[j];
    return Push(std::move(out), "add", [a, b, m, n](Tape& t, const Tensor& g) {
      Tensor& ga = t.GradRef(a);
      Tensor& gb = t.GradRef(b);
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
          ga.at(i, j) += g.at(i, j);
          gb[j] += g.at(i, j);
        }
    });
  }
  Mismatch("add", av, bv);
}

Var Tape::Sub(Var a, Var b) { return Add(a, Scale(b, -1.0)); }

Var Tape::Mul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.shape() != bv.shape()) Mismatch("mul", av, bv);
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return Push(std::move(out), "mul", [a, b](Tape& t, const Tensor& g) {
    Tensor& ga = t.GradRef(a);
    Tensor& gb = t.GradRef(b);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    for (size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * bv[i];
      gb[i] += g[i] * av[i];
    }
  });
}

Var Tape::Scale(Var a, Real c) {
  Tensor out = value(a);
  for (Real& v : out.values()) v *= c;
  return Push(std::move(out), "scale", [a, c](Tape& t, const Tensor& g) {
    Tensor& ga = t.GradRef(a);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

Var Tape::AddN(std::span<const Var> terms) {
  if (terms.empty()) throw DimensionError("addn: no terms");
  Tensor out = value(terms[0]);
  for (size_t k = 1; k < terms.size(); ++k) {
    const Tensor& tv = value(terms[k]);
    if (tv.shape() != out.shape()) Mismatch("addn", out, tv);
    for (size_t i = 0; i < out.size(); ++i) out[i] += tv[i];
  }
  std::vector<Var> ids(terms.begin(), terms.end());
  return Push(std::move(out), "addn", [ids](Tape& t, const Tensor& g) {
    for (Var v : ids) {
      Tensor& gv = t.GradRef(v);
      for (size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

Var Tape::Tanh(Var a) {
  Tensor out = value(a);
  for (Real& v : out.values()) v = std::tanh(v);
  return Push(std::move(out), "tanh", [a, self = nodes_.size()](Tape& t, const Tensor& g) {
    const Tensor& y = t.nodes_[self].value;
    Tensor& ga = t.GradRef(a);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var Tape::Sigmoid(Var a) {
  Tensor out = value(a);
  for (Real& v : out.values()) v = SigmoidScalar(v);
  return Push(std::move(out), "sigmoid", [a, self = nodes_.size()](Tape& t, const Tensor& g) {
    const Tensor& y = t.nodes_[self].value;
    Tensor& ga = t.GradRef(a);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tape::Relu(Var a) {
  Tensor out = value(a);
  for (Real& v : out.values()) v = v > 0.0 ? v : 0.0;
  return Push(std::move(out), "relu", [a](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(a);
    Tensor& ga = t.GradRef(a);
    for (size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) ga[i] += g[i];
    }
  });
}

Var Tape::Concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  const size_t m = NRows(value(parts[0]));
  size_t total = 0;
  std::vector<size_t> widths;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    RequireMatrix("concat", pv);
    if (NRows(pv) != m) Mismatch("concat", value(parts[0]), pv);
    widths.push_back(NCols(pv));
    total += NCols(pv);
  }
  Tensor out = Tensor::Zeros(m, total);
  size_t offset = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = value(parts[k]);
    for (size_t i = 0; i < m; ++i)
      std::copy(pv.row(i).begin(), pv.row(i).end(), out.row(i).begin() + offset);
    offset += widths[k];
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return Push(std::move(out), "concat", [ids, widths, m](Tape& t, const Tensor& g) {
    size_t offset = 0;
    for (size_t k = 0; k < ids.size(); ++k) {
      Tensor& gp = t.GradRef(ids[k]);
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < widths[k]; ++j) gp.at(i, j) += g.at(i, offset + j);
      offset += widths[k];
    }
  });
}

Var Tape::StackRows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("stack: no parts");
  const size_t n = NCols(value(parts[0]));
  std::vector<Real> data;
  std::vector<size_t> heights;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    RequireMatrix("stack", pv);
    if (NCols(pv) != n) Mismatch("stack", value(parts[0]), pv);
    heights.push_back(NRows(pv));
    data.insert(data.end(), pv.values().begin(), pv.values().end());
  }
  const size_t m = data.size() / std::max<size_t>(n, 1);
  std::vector<Var> ids(parts.begin(), parts.end());
  return Push(Tensor::Matrix(m, n, std::move(data)), "stack",
              [ids](Tape& t, const Tensor& g) {
                size_t offset = 0;
                for (Var v : ids) {
                  Tensor& gv = t.GradRef(v);
                  for (size_t i = 0; i < gv.size(); ++i) gv[i] += g[offset + i];
                  offset += gv.size();
                }
              });
}

Var Tape::Row(Var a, size_t r) {
  const size_t idx[1] = {r};
  return Rows(a, idx);
}

Var Tape::Rows(Var a, std::span<const size_t> rows) {
  const Tensor& av = value(a);
  RequireMatrix("rows", av);
  const size_t n = NCols(av);
  Tensor out = Tensor::Zeros(rows.size(), n);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= NRows(av)) {
      throw DimensionError("rows: index " + std::to_string(rows[i]) +
                           " out of range for " + Dims(av));
    }
    std::copy(av.row(rows[i]).begin(), av.row(rows[i]).end(), out.row(i).begin());
  }
  std::vector<size_t> idx(rows.begin(), rows.end());
  return Push(std::move(out), "rows", [a, idx, n](Tape& t, const Tensor& g) {
    Tensor& ga = t.GradRef(a);
    for (size_t i = 0; i < idx.size(); ++i)
      for (size_t j = 0; j < n; ++j) ga.at(idx[i], j) += g.at(i, j);
  });
}

Var Tape::SliceCols(Var a, size_t begin, size_t len) {
  const Tensor& av = value(a);
  RequireMatrix("slice", av);
  if (begin + len > NCols(av)) {
    throw DimensionError("slice: columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + len) + ") out of range for " +
                         Dims(av));
  }
  const size_t m = NRows(av);
  Tensor out = Tensor::Zeros(m, len);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < len; ++j) out.at(i, j) = av.at(i, begin + j);
  return Push(std::move(out), "slice", [a, begin, len, m](Tape& t, const Tensor& g) {
    Tensor& ga = t.GradRef(a);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < len; ++j) ga.at(i, begin + j) += g.at(i, j);
  });
}

Var Tape::Lookup(Parameter& table, std::span<const size_t> ids) {
  const Tensor& tv = table.value;
  const size_t d = NCols(tv);
  Tensor out = Tensor::Zeros(ids.size(), d);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= NRows(tv)) {
      throw DimensionError("lookup: id " + std::to_string(ids[i]) +
                           " out of range for table " + table.name);
    }
    std::copy(tv.row(ids[i]).begin(), tv.row(ids[i]).end(), out.row(i).begin());
  }
  Parameter* ptr = &table;
  std::vector<size_t> idx(ids.begin(), ids.end());
  return Push(std::move(out), "lookup", [ptr, idx, d](Tape&, const Tensor& g) {
    if (!ptr->trainable) return;
    for (size_t i = 0; i < idx.size(); ++i)
      for (size_t j = 0; j < d; ++j) ptr->grad.at(idx[i], j) += g.at(i, j);
  });
}

Var Tape::LookupConstant(const Tensor& table, std::span<const size_t> ids) {
  const size_t d = NCols(table);
  Tensor out = Tensor::Zeros(ids.size(), d);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= NRows(table)) {
      throw DimensionError("lookup: id " + std::to_string(ids[i]) + " out of range");
    }
    std::copy(table.row(ids[i]).begin(), table.row(ids[i]).end(), out.row(i).begin());
  }
  return Constant(std::move(out));
}

Var Tape::LstmCell(Var gates, Var cell) {
  const Tensor& gv = value(gates);
  const Tensor& cv = value(cell);
  const size_t h = cv.size();
  if (gv.size() != 4 * h || NRows(gv) != 1 || NRows(cv) != 1) {
    Mismatch("lstm_cell", gv, cv);
  }
  // Saved activations: i, f, o, g, tanh(c').
  std::vector<Real> act(5 * h);
  Tensor out = Tensor::Zeros(1, 2 * h);
  for (size_t j = 0; j < h; ++j) {
    const Real i = SigmoidScalar(gv[j]);
    const Real f = SigmoidScalar(gv[h + j]);
    const Real o = SigmoidScalar(gv[2 * h + j]);
    const Real g = std::tanh(gv[3 * h + j]);
    const Real c = f * cv[j] + i * g;
    const Real tc = std::tanh(c);
    act[j] = i;
    act[h + j] = f;
    act[2 * h + j] = o;
    act[3 * h + j] = g;
    act[4 * h + j] = tc;
    out[j] = o * tc;
    out[h + j] = c;
  }
  return Push(std::move(out), "lstm_cell",
              [gates, cell, h, act = std::move(act)](Tape& t, const Tensor& grad) {
                Tensor& gg = t.GradRef(gates);
                Tensor& gc = t.GradRef(cell);
                const Tensor& c_prev = t.value(cell);
                for (size_t j = 0; j < h; ++j) {
                  const Real i = act[j], f = act[h + j], o = act[2 * h + j];
                  const Real g = act[3 * h + j], tc = act[4 * h + j];
                  const Real dh = grad[j];
                  const Real dc = grad[h + j] + dh * o * (1.0 - tc * tc);
                  gg[j] += dc * g * i * (1.0 - i);
                  gg[h + j] += dc * c_prev[j] * f * (1.0 - f);
                  gg[2 * h + j] += dh * tc * o * (1.0 - o);
                  gg[3 * h + j] += dc * i * (1.0 - g * g);
                  gc[j] += dc * f;
                }
              });
}

Var Tape::ConvMaxPool(Var x, Var filters, Var bias, size_t width) {
  const Tensor& xv = value(x);
  const Tensor& fv = value(filters);
  const Tensor& bv = value(bias);
  RequireMatrix("conv_maxpool", xv);
  const size_t len = NRows(xv), in = NCols(xv), nf = NRows(fv);
  if (width == 0 || NCols(fv) != width * in || bv.size() != nf) {
    Mismatch("conv_maxpool", xv, fv);
  }
  const size_t windows = len >= width ? len - width + 1 : 1;
  Tensor out = Tensor::Zeros(1, nf);
  std::vector<size_t> best(nf, 0);
  for (size_t f = 0; f < nf; ++f) {
    const Real* w = fv.data() + f * width * in;
    Real best_val = 0.0;
    for (size_t p = 0; p < windows; ++p) {
      Real s = bv[f];
      for (size_t k = 0; k < width && p + k < len; ++k) {
        const Real* xr = xv.data() + (p + k) * in;
        const Real* wk = w + k * in;
        for (size_t j = 0; j < in; ++j) s += wk[j] * xr[j];
      }
      if (p == 0 || s > best_val) {
        best_val = s;
        best[f] = p;
      }
    }
    out[f] = best_val;
  }
  return Push(std::move(out), "conv_maxpool",
              [x, filters, bias, width, len, in, nf, best = std::move(best)](
                  Tape& t, const Tensor& g) {
                Tensor& gx = t.GradRef(x);
                Tensor& gf = t.GradRef(filters);
                Tensor& gb = t.GradRef(bias);
                const Tensor& xv = t.value(x);
                const Tensor& fv = t.value(filters);
                for (size_t f = 0; f < nf; ++f) {
                  const Real gv = g[f];
                  if (gv == 0.0) continue;
                  gb[f] += gv;
                  const size_t p = best[f];
                  for (size_t k = 0; k < width && p + k < len; ++k) {
                    for (size_t j = 0; j < in; ++j) {
                      gf[f * width * in + k * in + j] += gv * xv[(p + k) * in + j];
                      gx[(p + k) * in + j] += gv * fv[f * width * in + k * in + j];
                    }
                  }
                }
              });
}

Var Tape::Dropout(Var a, double rate) {
  if (!training_ || rate <= 0.0) return a;
  if (rate >= 1.0) throw Error("dropout: rate must be below 1");
  if (!rng_) throw Error("dropout: training tape needs an Rng");
  const Tensor& av = value(a);
  const Real keep_scale = 1.0 / (1.0 - rate);
  std::vector<Real> mask(av.size());
  for (Real& m : mask) m = rng_->Uniform() < rate ? 0.0 : keep_scale;
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return Push(std::move(out), "dropout", [a, mask = std::move(mask)](Tape& t, const Tensor& g) {
    Tensor& ga = t.GradRef(a);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

Var Tape::Softmax(Var a) {
  const Tensor& av = value(a);
  RequireMatrix("softmax", av);
  const size_t m = NRows(av), n = NCols(av);
  Tensor out = av;
  for (size_t i = 0; i < m; ++i) {
    std::span<Real> r = out.row(i);
    const Real mx = *std::max_element(r.begin(), r.end());
    Real z = 0.0;
    for (Real& v : r) {
      v = std::exp(v - mx);
      z += v;
    }
    for (Real& v : r) v /= z;
  }
  return Push(std::move(out), "softmax", [a, m, n, self = nodes_.size()](Tape& t, const Tensor& g) {
    const Tensor& y = t.nodes_[self].value;
    Tensor& ga = t.GradRef(a);
    for (size_t i = 0; i < m; ++i) {
      Real dot = 0.0;
      for (size_t j = 0; j < n; ++j) dot += g.at(i, j) * y.at(i, j);
      for (size_t j = 0; j < n; ++j) ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
    }
  });
}

Var Tape::SoftmaxCrossEntropy(Var logits, std::span<const size_t> targets) {
  const Tensor& lv = value(logits);
  RequireMatrix("softmax_cross_entropy", lv);
  const size_t m = NRows(lv), n = NCols(lv);
  if (targets.size() != m) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + Dims(lv));
  }
  Tensor probs = lv;
  Real loss = 0.0;
  for (size_t i = 0; i < m; ++i) {
    if (targets[i] >= n) {
      throw DimensionError("softmax_cross_entropy: target out of range");
    }
    std::span<Real> r = probs.row(i);
    const Real mx = *std::max_element(r.begin(), r.end());
    Real z = 0.0;
    for (Real v : r) z += std::exp(v - mx);
    const Real log_z = mx + std::log(z);
    loss += log_z - r[targets[i]];
    for (Real& v : r) v = std::exp(v - log_z);
  }
  std::vector<size_t> tgt(targets.begin(), targets.end());
  return Push(Tensor::Scalar(loss), "softmax_cross_entropy",
              [logits, tgt, probs = std::move(probs), m, n](Tape& t, const Tensor& g) {
                Tensor& gl = t.GradRef(logits);
                const Real s = g[0];
                for (size_t i = 0; i < m; ++i) {
                  for (size_t j = 0; j < n; ++j) gl.at(i, j) += s * probs.at(i, j);
                  gl.at(i, tgt[i]) -= s;
                }
              });
}

Var Tape::Bilinear(Var x, Var u, Var y) {
  const Tensor& xv = value(x);
  const Tensor& uv = value(u);
  const Tensor& yv = value(y);
  RequireMatrix("bilinear", xv);
  RequireMatrix("bilinear", yv);
  if (uv.rank() != 3 || NRows(xv) != NRows(yv) || uv.shape()[1] != NCols(xv) ||
      uv.shape()[2] != NCols(yv)) {
    throw DimensionError("bilinear: incompatible shapes " + Dims(xv) + ", " +
                         Dims(uv) + ", " + Dims(yv));
  }
  const size_t n = NRows(xv), dx = NCols(xv), dy = NCols(yv), r = uv.shape()[0];
  Tensor out = Tensor::Zeros(n, r);
  std::vector<Real> tmp(dy);
  for (size_t i = 0; i < n; ++i) {
    const Real* xi = xv.data() + i * dx;
    const Real* yi = yv.data() + i * dy;
    for (size_t k = 0; k < r; ++k) {
      const Real* uk = uv.data() + k * dx * dy;
      Real s = 0.0;
      for (size_t a = 0; a < dx; ++a) {
        if (xi[a] == 0.0) continue;
        const Real* ua = uk + a * dy;
        Real inner = 0.0;
        for (size_t b = 0; b < dy; ++b) inner += ua[b] * yi[b];
        s += xi[a] * inner;
      }
      out.at(i, k) = s;
    }
  }
  return Push(std::move(out), "bilinear",
              [x, u, y, n, dx, dy, r](Tape& t, const Tensor& g) {
                const Tensor& xv = t.value(x);
                const Tensor& uv = t.value(u);
                const Tensor& yv = t.value(y);
                Tensor& gx = t.GradRef(x);
                Tensor& gu = t.GradRef(u);
                Tensor& gy = t.GradRef(y);
                for (size_t i = 0; i < n; ++i) {
                  const Real* xi = xv.data() + i * dx;
                  const Real* yi = yv.data() + i * dy;
                  for (size_t k = 0; k < r; ++k) {
                    const Real gik = g.at(i, k);
                    if (gik == 0.0) continue;
                    const Real* uk = uv.data() + k * dx * dy;
                    Real* guk = gu.data() + k * dx * dy;
                    for (size_t a = 0; a < dx; ++a) {
                      const Real* ua = uk + a * dy;
                      Real* gua = guk + a * dy;
                      Real inner = 0.0;
                      const Real gx_a = gik * xi[a];
                      for (size_t b = 0; b < dy; ++b) {
                        inner += ua[b] * yi[b];
                        gua[b] += gx_a * yi[b];
                        gy.at(i, b) += gx_a * ua[b];
                      }
                      gx.at(i, a) += gik * inner;
                    }
                  }
                }
              });
}

Var Tape::Sum(Var a) {
  Real s = 0.0;
  for (Real v : value(a).values()) s += v;
  return Push(Tensor::Scalar(s), "sum", [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.GradRef(a);
    for (Real& v : ga.values()) v += g[0];
  });
}

Var Tape::Mean(Var a) {
  const size_t n = value(a).size();
  if (n == 0) throw DimensionError("mean: empty tensor");
  return Scale(Sum(a), 1.0 / static_cast<Real>(n));
}

void Tape::Backward(Var loss) {
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw DimensionError("backward: loss must be scalar, got " + Dims(lv));
  }
  if (has_backward_) {
    for (Node& n : nodes_) n.grad = Tensor();
  }
  has_backward_ = true;
  GradRef(loss)[0] = 1.0;
  for (size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

}  // namespace udparse
