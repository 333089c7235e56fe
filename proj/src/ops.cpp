#include "seqcast/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "seqcast/fsum.hpp"

namespace seqcast {

namespace {

Tape& tape_of(const Tensor& t) { return *t.node()->tape; }

void require_same_tape(const Tensor& a, const Tensor& b) {
  if (a.node()->tape != b.node()->tape)
    throw numeric_error("operands belong to different tapes");
}

void require_rank(const Tensor& t, std::size_t r, const char* what) {
  if (t.rank() != r)
    throw numeric_error(std::string(what) + ": expected rank " + std::to_string(r) +
                        ", got shape " + shape_str(t.shape()));
}

std::vector<double> transposed(const std::vector<double>& m, std::size_t rows,
                               std::size_t cols) {
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = m[i * cols + j];
  return out;
}

} // namespace

namespace kern {

void gemm_ab(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_atb(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double av = ai[p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

void gemm_abt(const double* a, const double* b, double* c, std::size_t m,
              std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    for (std::size_t j = 0; j < k; ++j) {
      const double* bj = b + j * n;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t p = 0;
      for (; p + 4 <= n; p += 4) {
        s0 += ai[p] * bj[p];
        s1 += ai[p + 1] * bj[p + 1];
        s2 += ai[p + 2] * bj[p + 2];
        s3 += ai[p + 3] * bj[p + 3];
      }
      for (; p < n; ++p) s0 += ai[p] * bj[p];
      c[i * k + j] += ((s0 + s1) + (s2 + s3));
    }
  }
}

} // namespace kern

// ---------------------------------------------------------------------------

Tensor matmul(Tensor a, Tensor b) {
  require_same_tape(a, b);
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  if (a.cols() != b.rows())
    throw numeric_error("matmul dimension mismatch: " + shape_str(a.shape()) +
                        " x " + shape_str(b.shape()));
  std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tape& t = tape_of(a);
  bool track = a.node()->needs_grad || b.node()->needs_grad;
  Node* out = t.make({m, n}, track);
  kern::gemm_ab(a.node()->value.data(), b.node()->value.data(),
                out->value.data(), m, k, n);
  if (track) {
    Node *an = a.node(), *bn = b.node();
    // Pre-transposed copies keep both backward products in the fast
    // broadcast-over-contiguous-rows form.
    auto bt = an->needs_grad
                  ? std::make_shared<std::vector<double>>(transposed(bn->value, k, n))
                  : nullptr;
    auto at = bn->needs_grad
                  ? std::make_shared<std::vector<double>>(transposed(an->value, m, k))
                  : nullptr;
    out->backward = [out, an, bn, at, bt, m, k, n]() {
      if (an->needs_grad)
        kern::gemm_ab(out->grad.data(), bt->data(), an->grad.data(), m, n, k);
      if (bn->needs_grad)
        kern::gemm_ab(at->data(), out->grad.data(), bn->grad.data(), k, m, n);
    };
  }
  return Tensor(out);
}

Tensor linear(Tensor x, Tensor w, Tensor b) {
  require_same_tape(x, w);
  require_rank(x, 2, "linear input");
  require_rank(w, 2, "linear weight");
  if (x.cols() != w.rows())
    throw numeric_error("linear dimension mismatch: " + shape_str(x.shape()) +
                        " x " + shape_str(w.shape()));
  std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  if (b.defined()) {
    require_same_tape(x, b);
    if (b.rank() != 1 || b.shape()[0] != n)
      throw numeric_error("linear bias shape " + shape_str(b.shape()) +
                          " does not match output width " + std::to_string(n));
  }
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad || w.node()->needs_grad ||
               (b.defined() && b.node()->needs_grad);
  Node* out = t.make({m, n}, track);
  kern::gemm_ab(x.node()->value.data(), w.node()->value.data(),
                out->value.data(), m, k, n);
  if (b.defined()) {
    const double* bias = b.node()->value.data();
    for (std::size_t i = 0; i < m; ++i) {
      double* oi = out->value.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) oi[j] += bias[j];
    }
  }
  if (track) {
    Node *xn = x.node(), *wn = w.node();
    Node* bn = b.defined() ? b.node() : nullptr;
    auto wt = xn->needs_grad
                  ? std::make_shared<std::vector<double>>(transposed(wn->value, k, n))
                  : nullptr;
    out->backward = [out, xn, wn, bn, wt, m, k, n]() {
      if (xn->needs_grad)
        kern::gemm_ab(out->grad.data(), wt->data(), xn->grad.data(), m, n, k);
      if (wn->needs_grad)
        kern::gemm_atb(xn->value.data(), out->grad.data(), wn->grad.data(), m, k, n);
      if (bn && bn->needs_grad) {
        for (std::size_t i = 0; i < m; ++i) {
          const double* gi = out->grad.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) bn->grad[j] += gi[j];
        }
      }
    };
  }
  return Tensor(out);
}

Tensor add(Tensor a, Tensor b) {
  require_same_tape(a, b);
  if (a.shape() != b.shape())
    throw numeric_error("add shape mismatch: " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
  Tape& t = tape_of(a);
  bool track = a.node()->needs_grad || b.node()->needs_grad;
  Node* out = t.make(a.shape(), track);
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] + bv[i];
  if (track) {
    Node *an = a.node(), *bn = b.node();
    out->backward = [out, an, bn]() {
      if (an->needs_grad)
        for (std::size_t i = 0; i < out->grad.size(); ++i) an->grad[i] += out->grad[i];
      if (bn->needs_grad)
        for (std::size_t i = 0; i < out->grad.size(); ++i) bn->grad[i] += out->grad[i];
    };
  }
  return Tensor(out);
}

Tensor mul(Tensor a, Tensor b) {
  require_same_tape(a, b);
  if (a.shape() != b.shape())
    throw numeric_error("mul shape mismatch: " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
  Tape& t = tape_of(a);
  bool track = a.node()->needs_grad || b.node()->needs_grad;
  Node* out = t.make(a.shape(), track);
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * bv[i];
  if (track) {
    Node *an = a.node(), *bn = b.node();
    out->backward = [out, an, bn]() {
      if (an->needs_grad)
        for (std::size_t i = 0; i < out->grad.size(); ++i)
          an->grad[i] += out->grad[i] * bn->value[i];
      if (bn->needs_grad)
        for (std::size_t i = 0; i < out->grad.size(); ++i)
          bn->grad[i] += out->grad[i] * an->value[i];
    };
  }
  return Tensor(out);
}

Tensor scale(Tensor a, double s) {
  Tape& t = tape_of(a);
  bool track = a.node()->needs_grad;
  Node* out = t.make(a.shape(), track);
  const auto& av = a.node()->value;
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * s;
  if (track) {
    Node* an = a.node();
    out->backward = [out, an, s]() {
      for (std::size_t i = 0; i < out->grad.size(); ++i) an->grad[i] += out->grad[i] * s;
    };
  }
  return Tensor(out);
}

Tensor add_row_broadcast(Tensor x, Tensor rowv) {
  require_same_tape(x, rowv);
  require_rank(x, 2, "add_row_broadcast input");
  require_rank(rowv, 1, "add_row_broadcast row");
  std::size_t m = x.rows(), n = x.cols();
  if (rowv.shape()[0] != n)
    throw numeric_error("add_row_broadcast width mismatch: " + shape_str(x.shape()) +
                        " + " + shape_str(rowv.shape()));
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad || rowv.node()->needs_grad;
  Node* out = t.make({m, n}, track);
  const double* xv = x.node()->value.data();
  const double* rv = rowv.node()->value.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->value[i * n + j] = xv[i * n + j] + rv[j];
  if (track) {
    Node *xn = x.node(), *rn = rowv.node();
    out->backward = [out, xn, rn, m, n]() {
      if (xn->needs_grad)
        for (std::size_t i = 0; i < out->grad.size(); ++i) xn->grad[i] += out->grad[i];
      if (rn->needs_grad)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) rn->grad[j] += out->grad[i * n + j];
    };
  }
  return Tensor(out);
}

Tensor repeat_row(Tensor rowv, std::size_t n) {
  require_rank(rowv, 1, "repeat_row");
  std::size_t d = rowv.shape()[0];
  Tape& t = tape_of(rowv);
  bool track = rowv.node()->needs_grad;
  Node* out = t.make({n, d}, track);
  const double* rv = rowv.node()->value.data();
  for (std::size_t i = 0; i < n; ++i)
    std::copy(rv, rv + d, out->value.data() + i * d);
  if (track) {
    Node* rn = rowv.node();
    out->backward = [out, rn, n, d]() {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) rn->grad[j] += out->grad[i * d + j];
    };
  }
  return Tensor(out);
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

Tensor relu(Tensor x) {
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make(x.shape(), track);
  const auto& xv = x.node()->value;
  for (std::size_t i = 0; i < xv.size(); ++i) out->value[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  if (track) {
    Node* xn = x.node();
    out->backward = [out, xn]() {
      for (std::size_t i = 0; i < out->grad.size(); ++i)
        if (xn->value[i] > 0.0) xn->grad[i] += out->grad[i];
    };
  }
  return Tensor(out);
}

Tensor gelu(Tensor x) {
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make(x.shape(), track);
  const auto& xv = x.node()->value;
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  for (std::size_t i = 0; i < xv.size(); ++i)
    out->value[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * inv_sqrt2));
  if (track) {
    Node* xn = x.node();
    out->backward = [out, xn]() {
      constexpr double inv_sqrt2pi = 0.39894228040143267794;
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        double v = xn->value[i];
        double cdf = 0.5 * (1.0 + std::erf(v * 0.70710678118654752440));
        double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
        xn->grad[i] += out->grad[i] * (cdf + v * pdf);
      }
    };
  }
  return Tensor(out);
}

Tensor silu(Tensor x) {
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make(x.shape(), track);
  const auto& xv = x.node()->value;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    double s = 1.0 / (1.0 + std::exp(-xv[i]));
    out->value[i] = xv[i] * s;
  }
  if (track) {
    Node* xn = x.node();
    out->backward = [out, xn]() {
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        double v = xn->value[i];
        double s = 1.0 / (1.0 + std::exp(-v));
        xn->grad[i] += out->grad[i] * (s * (1.0 + v * (1.0 - s)));
      }
    };
  }
  return Tensor(out);
}

Tensor dropout(Tensor x, double rate) {
  if (rate == 0.0) return x;
  if (rate < 0.0 || rate >= 1.0)
    throw numeric_error("dropout rate " + std::to_string(rate) + " outside [0,1)");
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make(x.shape(), track);
  const auto& xv = x.node()->value;
  double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    double u = static_cast<double>(t.rng_bits() >> 11) * 0x1.0p-53;
    (*mask)[i] = u < rate ? 0.0 : 1.0 / keep;
    out->value[i] = xv[i] * (*mask)[i];
  }
  if (track) {
    Node* xn = x.node();
    out->backward = [out, xn, mask]() {
      for (std::size_t i = 0; i < out->grad.size(); ++i)
        xn->grad[i] += out->grad[i] * (*mask)[i];
    };
  }
  return Tensor(out);
}

// ---------------------------------------------------------------------------
// Normalization and softmax
// ---------------------------------------------------------------------------

Tensor layer_norm(Tensor x, Tensor gain, Tensor bias, double eps) {
  require_same_tape(x, gain);
  require_same_tape(x, bias);
  std::size_t m, d;
  if (x.rank() == 2) {
    m = x.rows();
    d = x.cols();
  } else if (x.rank() == 1) {
    m = 1;
    d = x.shape()[0];
  } else {
    throw numeric_error("layer_norm expects rank 1 or 2, got " + shape_str(x.shape()));
  }
  if (gain.rank() != 1 || gain.shape()[0] != d || bias.rank() != 1 || bias.shape()[0] != d)
    throw numeric_error("layer_norm gain/bias shape mismatch for width " + std::to_string(d));
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad || gain.node()->needs_grad || bias.node()->needs_grad;
  Node* out = t.make(x.shape(), track);
  auto xhat = std::make_shared<std::vector<double>>(m * d);
  auto inv_sigma = std::make_shared<std::vector<double>>(m);
  const double* xv = x.node()->value.data();
  const double* gv = gain.node()->value.data();
  const double* bv = bias.node()->value.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = xv + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xi[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double c = xi[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    (*inv_sigma)[i] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      double h = (xi[j] - mean) * inv;
      (*xhat)[i * d + j] = h;
      out->value[i * d + j] = gv[j] * h + bv[j];
    }
  }
  if (track) {
    Node *xn = x.node(), *gn = gain.node(), *bn = bias.node();
    out->backward = [out, xn, gn, bn, xhat, inv_sigma, m, d]() {
      for (std::size_t i = 0; i < m; ++i) {
        const double* go = out->grad.data() + i * d;
        const double* h = xhat->data() + i * d;
        if (gn->needs_grad)
          for (std::size_t j = 0; j < d; ++j) gn->grad[j] += go[j] * h[j];
        if (bn->needs_grad)
          for (std::size_t j = 0; j < d; ++j) bn->grad[j] += go[j];
        if (xn->needs_grad) {
          double sum_dh = 0.0, sum_dh_h = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            double dh = go[j] * gn->value[j];
            sum_dh += dh;
            sum_dh_h += dh * h[j];
          }
          double inv = (*inv_sigma)[i];
          double nd = static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            double dh = go[j] * gn->value[j];
            xn->grad[i * d + j] += inv * (dh - sum_dh / nd - h[j] * sum_dh_h / nd);
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor softmax(Tensor logits) {
  require_rank(logits, 1, "softmax");
  Tape& t = tape_of(logits);
  bool track = logits.node()->needs_grad;
  Node* out = t.make(logits.shape(), track);
  const auto& lv = logits.node()->value;
  double mx = *std::max_element(lv.begin(), lv.end());
  double denom = 0.0;
  for (std::size_t i = 0; i < lv.size(); ++i) {
    out->value[i] = std::exp(lv[i] - mx);
    denom += out->value[i];
  }
  for (auto& v : out->value) v /= denom;
  if (track) {
    Node* ln = logits.node();
    out->backward = [out, ln]() {
      double dot = 0.0;
      for (std::size_t i = 0; i < out->grad.size(); ++i) dot += out->grad[i] * out->value[i];
      for (std::size_t i = 0; i < out->grad.size(); ++i)
        ln->grad[i] += out->value[i] * (out->grad[i] - dot);
    };
  }
  return Tensor(out);
}

Tensor masked_softmax_rows(Tensor logits, const Mask& key_valid) {
  require_rank(logits, 2, "masked_softmax_rows");
  std::size_t m = logits.rows(), n = logits.cols();
  if (key_valid.size() != n)
    throw numeric_error("masked_softmax_rows mask length " + std::to_string(key_valid.size()) +
                        " vs columns " + std::to_string(n));
  std::size_t nvalid = 0;
  for (auto v : key_valid) nvalid += v ? 1 : 0;
  if (nvalid == 0) throw numeric_error("masked_softmax_rows: mask excludes every key");
  Tape& t = tape_of(logits);
  bool track = logits.node()->needs_grad;
  Node* out = t.make(logits.shape(), track);
  const double* lv = logits.node()->value.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* li = lv + i * n;
    double mx = -1e308;
    for (std::size_t j = 0; j < n; ++j)
      if (key_valid[j] && li[j] > mx) mx = li[j];
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (key_valid[j]) denom += std::exp(li[j] - mx);
    for (std::size_t j = 0; j < n; ++j)
      out->value[i * n + j] = key_valid[j] ? std::exp(li[j] - mx) / denom : 0.0;
  }
  if (track) {
    Node* ln = logits.node();
    Mask mask = key_valid;
    out->backward = [out, ln, mask, m, n]() {
      for (std::size_t i = 0; i < m; ++i) {
        const double* go = out->grad.data() + i * n;
        const double* p = out->value.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          if (mask[j]) dot += go[j] * p[j];
        for (std::size_t j = 0; j < n; ++j)
          if (mask[j]) ln->grad[i * n + j] += p[j] * (go[j] - dot);
      }
    };
  }
  return Tensor(out);
}

// ---------------------------------------------------------------------------
// Masked multi-head attention
// ---------------------------------------------------------------------------

Tensor masked_attention(Tensor q, Tensor k, Tensor v, const Mask& key_valid,
                        const Mask& query_valid, std::size_t heads,
                        bool exact_reduction) {
  require_same_tape(q, k);
  require_same_tape(q, v);
  require_rank(q, 2, "attention query");
  require_rank(k, 2, "attention key");
  require_rank(v, 2, "attention value");
  std::size_t nq = q.rows(), nk = k.rows(), d = q.cols();
  if (k.cols() != d || v.cols() != d || v.rows() != nk)
    throw numeric_error("attention shape mismatch: q" + shape_str(q.shape()) + " k" +
                        shape_str(k.shape()) + " v" + shape_str(v.shape()));
  if (heads == 0 || d % heads != 0)
    throw numeric_error("attention width " + std::to_string(d) +
                        " not divisible by heads " + std::to_string(heads));
  if (key_valid.size() != nk)
    throw numeric_error("attention key mask length " + std::to_string(key_valid.size()) +
                        " vs keys " + std::to_string(nk));
  if (!query_valid.empty() && query_valid.size() != nq)
    throw numeric_error("attention query mask length mismatch");

  std::vector<std::size_t> valid_keys;
  valid_keys.reserve(nk);
  for (std::size_t j = 0; j < nk; ++j)
    if (key_valid[j]) valid_keys.push_back(j);
  std::vector<std::size_t> valid_queries;
  valid_queries.reserve(nq);
  for (std::size_t i = 0; i < nq; ++i)
    if (query_valid.empty() || query_valid[i]) valid_queries.push_back(i);
  if (valid_keys.empty() && !valid_queries.empty())
    throw numeric_error("attention mask excludes every key");

  std::size_t dh = d / heads;
  double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Tape& t = tape_of(q);
  bool track = q.node()->needs_grad || k.node()->needs_grad || v.node()->needs_grad;
  Node* out = t.make({nq, d}, track);

  // weights[h][i][j] stored dense per head for backward.
  auto weights = std::make_shared<std::vector<double>>(heads * nq * nk, 0.0);
  const double* qv = q.node()->value.data();
  const double* kv = k.node()->value.data();
  const double* vv = v.node()->value.data();
  std::vector<double> scores(valid_keys.size());
  for (std::size_t h = 0; h < heads; ++h) {
    std::size_t off = h * dh;
    for (std::size_t i : valid_queries) {
      const double* qi = qv + i * d + off;
      double mx = -1e308;
      for (std::size_t a = 0; a < valid_keys.size(); ++a) {
        const double* kj = kv + valid_keys[a] * d + off;
        double s = 0.0;
        for (std::size_t p = 0; p < dh; ++p) s += qi[p] * kj[p];
        s *= att_scale;
        scores[a] = s;
        if (s > mx) mx = s;
      }
      double denom;
      if (exact_reduction) {
        ExactSum acc;
        for (std::size_t a = 0; a < valid_keys.size(); ++a) {
          scores[a] = std::exp(scores[a] - mx);
          acc.add(scores[a]);
        }
        denom = acc.result();
      } else {
        denom = 0.0;
        for (std::size_t a = 0; a < valid_keys.size(); ++a) {
          scores[a] = std::exp(scores[a] - mx);
          denom += scores[a];
        }
      }
      double* wrow = weights->data() + (h * nq + i) * nk;
      for (std::size_t a = 0; a < valid_keys.size(); ++a)
        wrow[valid_keys[a]] = scores[a] / denom;
      double* oi = out->value.data() + i * d + off;
      if (exact_reduction) {
        for (std::size_t p = 0; p < dh; ++p) {
          ExactSum acc;
          for (std::size_t j : valid_keys) acc.add(wrow[j] * vv[j * d + off + p]);
          oi[p] = acc.result();
        }
      } else {
        for (std::size_t j : valid_keys) {
          double w = wrow[j];
          const double* vj = vv + j * d + off;
          for (std::size_t p = 0; p < dh; ++p) oi[p] += w * vj[p];
        }
      }
    }
  }

  if (track) {
    Node *qn = q.node(), *kn = k.node(), *vn = v.node();
    out->backward = [out, qn, kn, vn, weights, valid_keys, valid_queries, heads,
                     dh, att_scale]() {
      std::size_t d = heads * dh;
      std::size_t nq = out->shape[0];
      std::size_t nk = kn->shape[0];
      std::vector<double> ds(nk);
      for (std::size_t h = 0; h < heads; ++h) {
        std::size_t off = h * dh;
        for (std::size_t i : valid_queries) {
          const double* go = out->grad.data() + i * d + off;
          const double* wrow = weights->data() + (h * nq + i) * nk;
          double common = 0.0;
          for (std::size_t j : valid_keys) {
            const double* vj = vn->value.data() + j * d + off;
            double dw = 0.0;
            for (std::size_t p = 0; p < dh; ++p) dw += go[p] * vj[p];
            if (vn->needs_grad) {
              double* gv = vn->grad.data() + j * d + off;
              double w = wrow[j];
              for (std::size_t p = 0; p < dh; ++p) gv[p] += w * go[p];
            }
            ds[j] = dw;
            common += wrow[j] * dw;
          }
          const double* qi = qn->value.data() + i * d + off;
          double* gq = qn->needs_grad ? qn->grad.data() + i * d + off : nullptr;
          for (std::size_t j : valid_keys) {
            double dsj = wrow[j] * (ds[j] - common) * att_scale;
            if (gq) {
              const double* kj = kn->value.data() + j * d + off;
              for (std::size_t p = 0; p < dh; ++p) gq[p] += dsj * kj[p];
            }
            if (kn->needs_grad) {
              double* gk = kn->grad.data() + j * d + off;
              for (std::size_t p = 0; p < dh; ++p) gk[p] += dsj * qi[p];
            }
          }
        }
      }
    };
  }
  return Tensor(out);
}

// ---------------------------------------------------------------------------
// Shape plumbing
// ---------------------------------------------------------------------------

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw numeric_error("concat_rows of zero tensors");
  std::size_t cols = parts[0].cols();
  std::size_t total = 0;
  bool track = false;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows part");
    if (p.cols() != cols)
      throw numeric_error("concat_rows column mismatch: " + shape_str(p.shape()));
    total += p.rows();
    track = track || p.node()->needs_grad;
  }
  Tape& t = tape_of(parts[0]);
  Node* out = t.make({total, cols}, track);
  std::size_t at = 0;
  for (const auto& p : parts) {
    std::copy(p.node()->value.begin(), p.node()->value.end(),
              out->value.begin() + at * cols);
    at += p.rows();
  }
  if (track) {
    std::vector<Node*> srcs;
    for (const auto& p : parts) srcs.push_back(p.node());
    out->backward = [out, srcs, cols]() {
      std::size_t at = 0;
      for (Node* s : srcs) {
        std::size_t n = s->value.size();
        if (s->needs_grad)
          for (std::size_t i = 0; i < n; ++i) s->grad[i] += out->grad[at + i];
        at += n;
      }
    };
  }
  return Tensor(out);
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw numeric_error("stack_rows of zero tensors");
  std::size_t d = rows[0].shape().at(0);
  bool track = false;
  for (const auto& r : rows) {
    require_rank(r, 1, "stack_rows row");
    if (r.shape()[0] != d) throw numeric_error("stack_rows width mismatch");
    track = track || r.node()->needs_grad;
  }
  Tape& t = tape_of(rows[0]);
  Node* out = t.make({rows.size(), d}, track);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].node()->value.begin(), rows[i].node()->value.end(),
              out->value.begin() + i * d);
  if (track) {
    std::vector<Node*> srcs;
    for (const auto& r : rows) srcs.push_back(r.node());
    out->backward = [out, srcs, d]() {
      for (std::size_t i = 0; i < srcs.size(); ++i)
        if (srcs[i]->needs_grad)
          for (std::size_t j = 0; j < d; ++j) srcs[i]->grad[j] += out->grad[i * d + j];
    };
  }
  return Tensor(out);
}

Tensor gather_rows(Tensor x, std::vector<std::size_t> idx) {
  require_rank(x, 2, "gather_rows");
  std::size_t n = x.rows(), d = x.cols();
  for (std::size_t i : idx)
    if (i >= n)
      throw numeric_error("gather_rows index " + std::to_string(i) + " out of range " +
                          std::to_string(n));
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make({idx.size(), d}, track);
  const double* xv = x.node()->value.data();
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(xv + idx[i] * d, xv + (idx[i] + 1) * d, out->value.begin() + i * d);
  if (track) {
    Node* xn = x.node();
    out->backward = [out, xn, idx, d]() {
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
          xn->grad[idx[i] * d + j] += out->grad[i * d + j];
    };
  }
  return Tensor(out);
}

Tensor gather_elements(Tensor x, std::vector<std::size_t> idx) {
  std::size_t n = x.numel();
  for (std::size_t i : idx)
    if (i >= n)
      throw numeric_error("gather_elements index " + std::to_string(i) +
                          " out of range " + std::to_string(n));
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make({idx.size()}, track);
  for (std::size_t i = 0; i < idx.size(); ++i) out->value[i] = x.node()->value[idx[i]];
  if (track) {
    Node* xn = x.node();
    out->backward = [out, xn, idx]() {
      for (std::size_t i = 0; i < idx.size(); ++i) xn->grad[idx[i]] += out->grad[i];
    };
  }
  return Tensor(out);
}

Tensor row(Tensor x, std::size_t i) {
  require_rank(x, 2, "row");
  if (i >= x.rows())
    throw numeric_error("row index " + std::to_string(i) + " out of range " +
                        std::to_string(x.rows()));
  std::size_t d = x.cols();
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make({d}, track);
  std::copy(x.node()->value.begin() + i * d, x.node()->value.begin() + (i + 1) * d,
            out->value.begin());
  if (track) {
    Node* xn = x.node();
    out->backward = [out, xn, i, d]() {
      for (std::size_t j = 0; j < d; ++j) xn->grad[i * d + j] += out->grad[j];
    };
  }
  return Tensor(out);
}

// ---------------------------------------------------------------------------
// Pooling and reductions
// ---------------------------------------------------------------------------

Tensor masked_max_rows(Tensor x, const Mask& valid) {
  require_rank(x, 2, "masked_max_rows");
  std::size_t p = x.rows(), d = x.cols();
  if (valid.size() != p) throw numeric_error("masked_max_rows mask length mismatch");
  std::vector<std::size_t> vrows;
  for (std::size_t i = 0; i < p; ++i)
    if (valid[i]) vrows.push_back(i);
  if (vrows.empty()) throw numeric_error("masked_max_rows: mask excludes every row");
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make({d}, track);
  auto argmax = std::make_shared<std::vector<std::size_t>>(d);
  const double* xv = x.node()->value.data();
  for (std::size_t j = 0; j < d; ++j) {
    std::size_t best = vrows[0];
    double bv = xv[best * d + j];
    for (std::size_t a = 1; a < vrows.size(); ++a) {
      double cand = xv[vrows[a] * d + j];
      if (cand > bv) {
        bv = cand;
        best = vrows[a];
      }
    }
    out->value[j] = bv;
    (*argmax)[j] = best;
  }
  if (track) {
    Node* xn = x.node();
    out->backward = [out, xn, argmax, d]() {
      for (std::size_t j = 0; j < d; ++j) xn->grad[(*argmax)[j] * d + j] += out->grad[j];
    };
  }
  return Tensor(out);
}

Tensor masked_mean_rows(Tensor x, const Mask& valid) {
  require_rank(x, 2, "masked_mean_rows");
  std::size_t p = x.rows(), d = x.cols();
  if (valid.size() != p) throw numeric_error("masked_mean_rows mask length mismatch");
  std::vector<std::size_t> vrows;
  for (std::size_t i = 0; i < p; ++i)
    if (valid[i]) vrows.push_back(i);
  if (vrows.empty()) throw numeric_error("masked_mean_rows: mask excludes every row");
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make({d}, track);
  const double* xv = x.node()->value.data();
  double inv = 1.0 / static_cast<double>(vrows.size());
  for (std::size_t i : vrows)
    for (std::size_t j = 0; j < d; ++j) out->value[j] += xv[i * d + j];
  for (std::size_t j = 0; j < d; ++j) out->value[j] *= inv;
  if (track) {
    Node* xn = x.node();
    out->backward = [out, xn, vrows, d, inv]() {
      for (std::size_t i : vrows)
        for (std::size_t j = 0; j < d; ++j) xn->grad[i * d + j] += out->grad[j] * inv;
    };
  }
  return Tensor(out);
}

Tensor mean_all(Tensor x) {
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make({1}, track);
  double s = 0.0;
  for (double v : x.node()->value) s += v;
  double inv = 1.0 / static_cast<double>(x.numel());
  out->value[0] = s * inv;
  if (track) {
    Node* xn = x.node();
    out->backward = [out, xn, inv]() {
      for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += out->grad[0] * inv;
    };
  }
  return Tensor(out);
}

Tensor sum_all(Tensor x) {
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make({1}, track);
  double s = 0.0;
  for (double v : x.node()->value) s += v;
  out->value[0] = s;
  if (track) {
    Node* xn = x.node();
    out->backward = [out, xn]() {
      for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += out->grad[0];
    };
  }
  return Tensor(out);
}

Tensor mean_scalars(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw numeric_error("mean_scalars of zero tensors");
  bool track = false;
  for (const auto& x : xs) {
    if (x.numel() != 1) throw numeric_error("mean_scalars expects scalar tensors");
    track = track || x.node()->needs_grad;
  }
  Tape& t = tape_of(xs[0]);
  Node* out = t.make({1}, track);
  double s = 0.0;
  for (const auto& x : xs) s += x.node()->value[0];
  double inv = 1.0 / static_cast<double>(xs.size());
  out->value[0] = s * inv;
  if (track) {
    std::vector<Node*> srcs;
    for (const auto& x : xs) srcs.push_back(x.node());
    out->backward = [out, srcs, inv]() {
      for (Node* s : srcs)
        if (s->needs_grad) s->grad[0] += out->grad[0] * inv;
    };
  }
  return Tensor(out);
}

Tensor zero_invalid_rows(Tensor x, const Mask& valid) {
  require_rank(x, 2, "zero_invalid_rows");
  std::size_t n = x.rows(), d = x.cols();
  if (valid.size() != n) throw numeric_error("zero_invalid_rows mask length mismatch");
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make({n, d}, track);
  const double* xv = x.node()->value.data();
  for (std::size_t i = 0; i < n; ++i)
    if (valid[i])
      std::copy(xv + i * d, xv + (i + 1) * d, out->value.begin() + i * d);
  if (track) {
    Node* xn = x.node();
    Mask mask = valid;
    out->backward = [out, xn, mask, n, d]() {
      for (std::size_t i = 0; i < n; ++i)
        if (mask[i])
          for (std::size_t j = 0; j < d; ++j) xn->grad[i * d + j] += out->grad[i * d + j];
    };
  }
  return Tensor(out);
}

Tensor reshape(Tensor x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw numeric_error("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                        " changes element count");
  Tape& t = tape_of(x);
  bool track = x.node()->needs_grad;
  Node* out = t.make(std::move(shape), track);
  out->value = x.node()->value;
  if (track) {
    Node* xn = x.node();
    out->backward = [out, xn]() {
      for (std::size_t i = 0; i < out->grad.size(); ++i) xn->grad[i] += out->grad[i];
    };
  }
  return Tensor(out);
}

Tensor rigid_transform_rows(Tensor pts, double angle, double tx, double ty) {
  require_rank(pts, 2, "rigid_transform_rows");
  if (pts.cols() != 2)
    throw numeric_error("rigid_transform_rows expects Nx2, got " + shape_str(pts.shape()));
  std::size_t n = pts.rows();
  double c = std::cos(angle), s = std::sin(angle);
  Tape& t = tape_of(pts);
  bool track = pts.node()->needs_grad;
  Node* out = t.make({n, 2}, track);
  const double* pv = pts.node()->value.data();
  for (std::size_t i = 0; i < n; ++i) {
    double x = pv[i * 2], y = pv[i * 2 + 1];
    out->value[i * 2] = c * x - s * y + tx;
    out->value[i * 2 + 1] = s * x + c * y + ty;
  }
  if (track) {
    Node* pn = pts.node();
    out->backward = [out, pn, c, s, n]() {
      for (std::size_t i = 0; i < n; ++i) {
        double gx = out->grad[i * 2], gy = out->grad[i * 2 + 1];
        pn->grad[i * 2] += c * gx + s * gy;
        pn->grad[i * 2 + 1] += -s * gx + c * gy;
      }
    };
  }
  return Tensor(out);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

Tensor smooth_l1(Tensor pred, Tensor target, double beta) {
  require_same_tape(pred, target);
  if (pred.shape() != target.shape())
    throw numeric_error("smooth_l1 shape mismatch: " + shape_str(pred.shape()) + " vs " +
                        shape_str(target.shape()));
  Tape& t = tape_of(pred);
  bool track = pred.node()->needs_grad || target.node()->needs_grad;
  Node* out = t.make({1}, track);
  const auto& pv = pred.node()->value;
  const auto& tv = target.node()->value;
  std::size_t n = pv.size();
  double inv = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = pv[i] - tv[i];
    double ad = std::fabs(d);
    acc += ad < beta ? 0.5 * d * d / beta : ad - 0.5 * beta;
  }
  out->value[0] = acc * inv;
  if (track) {
    Node *pn = pred.node(), *tn = target.node();
    out->backward = [out, pn, tn, beta, inv, n]() {
      double g = out->grad[0] * inv;
      for (std::size_t i = 0; i < n; ++i) {
        double d = pn->value[i] - tn->value[i];
        double dd = std::fabs(d) < beta ? d / beta : (d > 0.0 ? 1.0 : -1.0);
        if (pn->needs_grad) pn->grad[i] += g * dd;
        if (tn->needs_grad) tn->grad[i] -= g * dd;
      }
    };
  }
  return Tensor(out);
}

Tensor cross_entropy(Tensor logits, std::size_t target_index) {
  require_rank(logits, 1, "cross_entropy");
  std::size_t k = logits.shape()[0];
  if (target_index >= k)
    throw numeric_error("cross_entropy target index " + std::to_string(target_index) +
                        " out of range " + std::to_string(k));
  Tape& t = tape_of(logits);
  bool track = logits.node()->needs_grad;
  Node* out = t.make({1}, track);
  const auto& lv = logits.node()->value;
  double mx = *std::max_element(lv.begin(), lv.end());
  double denom = 0.0;
  for (double v : lv) denom += std::exp(v - mx);
  out->value[0] = mx + std::log(denom) - lv[target_index];
  if (track) {
    Node* ln = logits.node();
    out->backward = [out, ln, target_index, mx, denom]() {
      double g = out->grad[0];
      for (std::size_t i = 0; i < ln->value.size(); ++i) {
        double p = std::exp(ln->value[i] - mx) / denom;
        ln->grad[i] += g * (p - (i == target_index ? 1.0 : 0.0));
      }
    };
  }
  return Tensor(out);
}

} // namespace seqcast
