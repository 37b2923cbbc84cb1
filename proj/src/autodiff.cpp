#include "srgf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace srgf::ad {

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw ContractError("Var: use of an empty handle");
  return tape_->value(*this);
}

Var Tape::push(Matrix value, bool requires_grad, BackwardFn backward) {
  if (consumed_) throw ContractError("Tape: recording after backward");
  nodes_.push_back(Node{std::move(value), Matrix{}, requires_grad ? std::move(backward) : BackwardFn{}, requires_grad});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Matrix value) { return push(std::move(value), true, {}); }

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape() != this) throw ContractError("Tape: operand recorded on a different tape");
    needs = needs || nodes_[v.id()].requires_grad;
  }
  return push(std::move(value), needs, std::move(backward));
}

Matrix& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  if (!nodes_[id].requires_grad) return;
  grad_buffer(id) += g;
}

Matrix Tape::gradient(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("backward: loss belongs to a different tape");
  const Matrix& v = value(loss);
  if (v.rows() != 1 || v.cols() != 1) throw ContractError("backward: loss must be 1x1, got " + shape_string(v));
  if (consumed_) throw ContractError("backward: tape already consumed");
  consumed_ = true;
  if (!nodes_[loss.id()].requires_grad) return;

  grad_buffer(loss.id())(0, 0) = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad, n.value);
  }
}

double scalar(Var v) {
  const Matrix& m = v.value();
  if (m.rows() != 1 || m.cols() != 1) throw ContractError("scalar: expected 1x1, got " + shape_string(m));
  return m(0, 0);
}

namespace {

void require_same_shape(Var a, Var b, const char* what) {
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(what) + ": " + shape_string(a.value()) + " vs " + shape_string(b.value()));
  }
}

void require_pattern(const SparseMatrix& p, Var values, const char* what) {
  if (values.rows() != p.nnz() || values.cols() != 1) {
    throw ShapeError(std::string(what) + ": pattern values must be " + std::to_string(p.nnz()) + "x1, got " +
                     shape_string(values.value()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record(srgf::matmul(a.value(), b.value()), {a, b}, [a, b](Tape& tape, const Matrix& g, const Matrix&) {
    if (tape.requires_grad(a)) tape.accumulate(a.id(), srgf::matmul_nt(g, b.value()));
    if (tape.requires_grad(b)) tape.accumulate(b.id(), srgf::matmul_tn(a.value(), g));
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record(srgf::matmul_nt(a.value(), b.value()), {a, b}, [a, b](Tape& tape, const Matrix& g, const Matrix&) {
    if (tape.requires_grad(a)) tape.accumulate(a.id(), srgf::matmul(g, b.value()));
    if (tape.requires_grad(b)) tape.accumulate(b.id(), srgf::matmul_tn(g, a.value()));
  });
}

Var matmul_tn(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record(srgf::matmul_tn(a.value(), b.value()), {a, b}, [a, b](Tape& tape, const Matrix& g, const Matrix&) {
    if (tape.requires_grad(a)) tape.accumulate(a.id(), srgf::matmul_nt(b.value(), g));
    if (tape.requires_grad(b)) tape.accumulate(b.id(), srgf::matmul(a.value(), g));
  });
}

Var spmm(const SparseMatrix& s, Var d) {
  Tape& t = *d.tape();
  const SparseMatrix* sp = &s;
  return t.record(srgf::spmm(s, d.value()), {d}, [sp, d](Tape& tape, const Matrix& g, const Matrix&) {
    tape.accumulate(d.id(), spmm_transposed(*sp, g));
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  return t.record(a.value().transposed(), {a},
                  [a](Tape& tape, const Matrix& g, const Matrix&) { tape.accumulate(a.id(), g.transposed()); });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tape& t = *a.tape();
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g, const Matrix&) {
    tape.accumulate(a.id(), g);
    tape.accumulate(b.id(), g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tape& t = *a.tape();
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g, const Matrix&) {
    tape.accumulate(a.id(), g);
    if (tape.requires_grad(b)) tape.accumulate(b.id(), g * -1.0);
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  return t.record(a.value() * s, {a},
                  [a, s](Tape& tape, const Matrix& g, const Matrix&) { tape.accumulate(a.id(), g * s); });
}

Var hadamard(Var a, Var b) {
  require_same_shape(a, b, "hadamard");
  Tape& t = *a.tape();
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= b.value().values()[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g, const Matrix&) {
    if (tape.requires_grad(a)) {
      Matrix& ga = tape.grad_buffer(a.id());
      for (std::size_t i = 0; i < g.size(); ++i) ga.values()[i] += g.values()[i] * b.value().values()[i];
    }
    if (tape.requires_grad(b)) {
      Matrix& gb = tape.grad_buffer(b.id());
      for (std::size_t i = 0; i < g.size(); ++i) gb.values()[i] += g.values()[i] * a.value().values()[i];
    }
  });
}

Var mul_constant(Var a, const Matrix& c) {
  if (!a.value().same_shape(c)) throw ShapeError("mul_constant: " + shape_string(a.value()) + " vs " + shape_string(c));
  Tape& t = *a.tape();
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= c.values()[i];
  return t.record(std::move(out), {a}, [a, c](Tape& tape, const Matrix& g, const Matrix&) {
    Matrix& ga = tape.grad_buffer(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) ga.values()[i] += g.values()[i] * c.values()[i];
  });
}

Var add_constant(Var a, const Matrix& c) {
  if (!a.value().same_shape(c)) throw ShapeError("add_constant: " + shape_string(a.value()) + " vs " + shape_string(c));
  Tape& t = *a.tape();
  return t.record(a.value() + c, {a}, [a](Tape& tape, const Matrix& g, const Matrix&) { tape.accumulate(a.id(), g); });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return t.record(Matrix(1, 1, total), {a}, [a](Tape& tape, const Matrix& g, const Matrix&) {
    Matrix& ga = tape.grad_buffer(a.id());
    for (double& v : ga.values()) v += g(0, 0);
  });
}

Var sum_squares(Var a) {
  Tape& t = *a.tape();
  double total = 0.0;
  for (double v : a.value().values()) total += v * v;
  return t.record(Matrix(1, 1, total), {a}, [a](Tape& tape, const Matrix& g, const Matrix&) {
    Matrix& ga = tape.grad_buffer(a.id());
    const auto& x = a.value().values();
    for (std::size_t i = 0; i < x.size(); ++i) ga.values()[i] += 2.0 * g(0, 0) * x[i];
  });
}

Var softmax_rows(Var a) {
  const Matrix& x = a.value();
  if (x.empty()) throw ShapeError("softmax_rows: empty input");
  Matrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    double peak = -std::numeric_limits<double>::infinity();
    for (double v : in) {
      if (std::isnan(v)) throw std::domain_error("softmax_rows: NaN in row " + std::to_string(r));
      peak = std::max(peak, v);
    }
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - peak);
      total += out[c];
    }
    for (double& v : out) v /= total;
  }
  Tape& t = *a.tape();
  return t.record(std::move(y), {a}, [a](Tape& tape, const Matrix& g, const Matrix& y) {
    Matrix& ga = tape.grad_buffer(a.id());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
      auto out = ga.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) out[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var l2_normalize_rows(Var a) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  std::vector<double> norms(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double sq = 0.0;
    for (double v : x.row(r)) sq += v * v;
    norms[r] = std::sqrt(sq);
    if (norms[r] == 0.0) continue;
    auto in = x.row(r);
    auto out = y.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) out[c] = in[c] / norms[r];
  }
  Tape& t = *a.tape();
  return t.record(std::move(y), {a}, [a, norms = std::move(norms)](Tape& tape, const Matrix& g, const Matrix& y) {
    Matrix& ga = tape.grad_buffer(a.id());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      if (norms[r] == 0.0) continue;
      auto yr = y.row(r);
      auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
      auto out = ga.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) out[c] += (gr[c] - yr[c] * dot) / norms[r];
    }
  });
}

Var row_dot(Var a, Var b) {
  require_same_shape(a, b, "row_dot");
  Matrix out(a.rows(), 1);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto ar = a.value().row(r);
    auto br = b.value().row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < ar.size(); ++c) acc += ar[c] * br[c];
    out(r, 0) = acc;
  }
  Tape& t = *a.tape();
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g, const Matrix&) {
    for (const auto& [dst, src] : {std::pair{a, b}, std::pair{b, a}}) {
      if (!tape.requires_grad(dst)) continue;
      Matrix& gd = tape.grad_buffer(dst.id());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto s = src.value().row(r);
        auto out = gd.row(r);
        for (std::size_t c = 0; c < s.size(); ++c) out[c] += g(r, 0) * s[c];
      }
    }
  });
}

Var logsumexp_rows(Var a) {
  const Matrix& x = a.value();
  if (x.cols() == 0) throw ShapeError("logsumexp_rows: no columns");
  Matrix out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (double v : in) total += std::exp(v - peak);
    out(r, 0) = peak + std::log(total);
  }
  Tape& t = *a.tape();
  return t.record(std::move(out), {a}, [a](Tape& tape, const Matrix& g, const Matrix& y) {
    Matrix& ga = tape.grad_buffer(a.id());
    const Matrix& x = a.value();
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto in = x.row(r);
      auto out = ga.row(r);
      for (std::size_t c = 0; c < in.size(); ++c) out[c] += g(r, 0) * std::exp(in[c] - y(r, 0));
    }
  });
}

Var log_sigmoid(Var a) {
  Matrix y = a.value();
  for (double& v : y.values()) v = -std::log1p(std::exp(-std::abs(v))) + std::min(v, 0.0);
  Tape& t = *a.tape();
  return t.record(std::move(y), {a}, [a](Tape& tape, const Matrix& g, const Matrix&) {
    Matrix& ga = tape.grad_buffer(a.id());
    const auto& x = a.value().values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      // d/dx log(sigmoid(x)) = sigmoid(-x)
      const double s = x[i] >= 0 ? std::exp(-x[i]) / (1.0 + std::exp(-x[i])) : 1.0 / (1.0 + std::exp(x[i]));
      ga.values()[i] += g.values()[i] * s;
    }
  });
}

Var gather_rows(Var a, std::vector<std::size_t> indices) {
  const Matrix& x = a.value();
  Matrix out(indices.size(), x.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= x.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[k]) + " out of " + std::to_string(x.rows()));
    }
    std::copy_n(x.row(indices[k]).begin(), x.cols(), out.row(k).begin());
  }
  Tape& t = *a.tape();
  return t.record(std::move(out), {a}, [a, idx = std::move(indices)](Tape& tape, const Matrix& g, const Matrix&) {
    Matrix& ga = tape.grad_buffer(a.id());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto src = g.row(k);
      auto dst = ga.row(idx[k]);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Matrix& x = a.value();
  if (begin + count > x.rows()) throw ShapeError("slice_rows: range past " + std::to_string(x.rows()) + " rows");
  Matrix out(count, x.cols());
  std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(begin * x.cols()), count * x.cols(),
              out.values().begin());
  Tape& t = *a.tape();
  return t.record(std::move(out), {a}, [a, begin](Tape& tape, const Matrix& g, const Matrix&) {
    Matrix& ga = tape.grad_buffer(a.id());
    const std::size_t offset = begin * g.cols();
    for (std::size_t i = 0; i < g.size(); ++i) ga.values()[offset + i] += g.values()[i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& x = a.value();
  if (begin + count > x.cols()) throw ShapeError("slice_cols: range past " + std::to_string(x.cols()) + " cols");
  Matrix out(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = x(r, begin + c);
  Tape& t = *a.tape();
  return t.record(std::move(out), {a}, [a, begin](Tape& tape, const Matrix& g, const Matrix&) {
    Matrix& ga = tape.grad_buffer(a.id());
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, begin + c) += g(r, c);
  });
}

Var vstack(Var top, Var bottom) {
  if (top.cols() != bottom.cols()) {
    throw ShapeError("vstack: " + shape_string(top.value()) + " over " + shape_string(bottom.value()));
  }
  std::vector<double> values = top.value().values();
  values.insert(values.end(), bottom.value().values().begin(), bottom.value().values().end());
  Matrix out(top.rows() + bottom.rows(), top.cols(), std::move(values));
  Tape& t = *top.tape();
  return t.record(std::move(out), {top, bottom}, [top, bottom](Tape& tape, const Matrix& g, const Matrix&) {
    const std::size_t split = top.rows() * g.cols();
    if (tape.requires_grad(top)) {
      Matrix& gt = tape.grad_buffer(top.id());
      for (std::size_t i = 0; i < split; ++i) gt.values()[i] += g.values()[i];
    }
    if (tape.requires_grad(bottom)) {
      Matrix& gb = tape.grad_buffer(bottom.id());
      for (std::size_t i = split; i < g.size(); ++i) gb.values()[i - split] += g.values()[i];
    }
  });
}

Var hstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("hstack: no operands");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("hstack: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, offset + c) = p.value()(r, c);
    offset += p.cols();
  }
  Tape& t = *parts.front().tape();
  return t.record(std::move(out), parts, [parts](Tape& tape, const Matrix& g, const Matrix&) {
    std::size_t offset = 0;
    for (const Var& p : parts) {
      if (tape.requires_grad(p)) {
        Matrix& gp = tape.grad_buffer(p.id());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < p.cols(); ++c) gp(r, c) += g(r, offset + c);
      }
      offset += p.cols();
    }
  });
}

Var mean_of(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("mean_of: no operands");
  Matrix out = parts.front().value();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    if (!parts[k].value().same_shape(out)) throw ShapeError("mean_of: shapes differ");
    out += parts[k].value();
  }
  const double w = 1.0 / static_cast<double>(parts.size());
  out *= w;
  Tape& t = *parts.front().tape();
  return t.record(std::move(out), parts, [parts, w](Tape& tape, const Matrix& g, const Matrix&) {
    const Matrix scaled = g * w;
    for (const Var& p : parts) tape.accumulate(p.id(), scaled);
  });
}

Var sddmm(const SparseMatrix& pattern, Var a, Var b, double factor) {
  if (a.rows() != pattern.rows() || b.rows() != pattern.cols() || a.cols() != b.cols()) {
    throw ShapeError("sddmm: operands " + shape_string(a.value()) + ", " + shape_string(b.value()) +
                     " do not fit pattern " + std::to_string(pattern.rows()) + "x" + std::to_string(pattern.cols()));
  }
  Matrix out(pattern.nnz(), 1);
  const auto cols = pattern.col_idx();
  for (std::size_t r = 0; r < pattern.rows(); ++r) {
    auto ar = a.value().row(r);
    for (std::size_t k = pattern.row_begin(r); k < pattern.row_end(r); ++k) {
      auto br = b.value().row(cols[k]);
      double acc = 0.0;
      for (std::size_t c = 0; c < ar.size(); ++c) acc += ar[c] * br[c];
      out(k, 0) = factor * acc;
    }
  }
  Tape& t = *a.tape();
  const SparseMatrix* p = &pattern;
  return t.record(std::move(out), {a, b}, [p, a, b, factor](Tape& tape, const Matrix& g, const Matrix&) {
    const auto cols = p->col_idx();
    const bool need_a = tape.requires_grad(a);
    const bool need_b = tape.requires_grad(b);
    Matrix* ga = need_a ? &tape.grad_buffer(a.id()) : nullptr;
    Matrix* gb = need_b ? &tape.grad_buffer(b.id()) : nullptr;
    for (std::size_t r = 0; r < p->rows(); ++r) {
      auto ar = a.value().row(r);
      for (std::size_t k = p->row_begin(r); k < p->row_end(r); ++k) {
        const double w = factor * g(k, 0);
        if (w == 0.0) continue;
        auto br = b.value().row(cols[k]);
        if (ga) {
          auto out = ga->row(r);
          for (std::size_t c = 0; c < ar.size(); ++c) out[c] += w * br[c];
        }
        if (gb) {
          auto out = gb->row(cols[k]);
          for (std::size_t c = 0; c < ar.size(); ++c) out[c] += w * ar[c];
        }
      }
    }
  });
}

Var segment_softmax(const SparseMatrix& pattern, Var values) {
  require_pattern(pattern, values, "segment_softmax");
  Matrix y(pattern.nnz(), 1);
  const Matrix& x = values.value();
  for (std::size_t r = 0; r < pattern.rows(); ++r) {
    const std::size_t lo = pattern.row_begin(r);
    const std::size_t hi = pattern.row_end(r);
    if (lo == hi) continue;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = lo; k < hi; ++k) peak = std::max(peak, x(k, 0));
    double total = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      y(k, 0) = std::exp(x(k, 0) - peak);
      total += y(k, 0);
    }
    for (std::size_t k = lo; k < hi; ++k) y(k, 0) /= total;
  }
  Tape& t = *values.tape();
  const SparseMatrix* p = &pattern;
  return t.record(std::move(y), {values}, [p, values](Tape& tape, const Matrix& g, const Matrix& y) {
    Matrix& gv = tape.grad_buffer(values.id());
    for (std::size_t r = 0; r < p->rows(); ++r) {
      double dot = 0.0;
      for (std::size_t k = p->row_begin(r); k < p->row_end(r); ++k) dot += g(k, 0) * y(k, 0);
      for (std::size_t k = p->row_begin(r); k < p->row_end(r); ++k) gv(k, 0) += y(k, 0) * (g(k, 0) - dot);
    }
  });
}

Var pattern_spmm(const SparseMatrix& pattern, Var values, Var dense) {
  require_pattern(pattern, values, "pattern_spmm");
  if (dense.rows() != pattern.cols()) {
    throw ShapeError("pattern_spmm: dense operand " + shape_string(dense.value()) + " does not fit " +
                     std::to_string(pattern.cols()) + " pattern columns");
  }
  const auto cols = pattern.col_idx();
  Matrix out(pattern.rows(), dense.cols());
  for (std::size_t r = 0; r < pattern.rows(); ++r) {
    auto orow = out.row(r);
    for (std::size_t k = pattern.row_begin(r); k < pattern.row_end(r); ++k) {
      const double w = values.value()(k, 0);
      auto drow = dense.value().row(cols[k]);
      for (std::size_t c = 0; c < drow.size(); ++c) orow[c] += w * drow[c];
    }
  }
  Tape& t = *values.tape();
  const SparseMatrix* p = &pattern;
  return t.record(std::move(out), {values, dense}, [p, values, dense](Tape& tape, const Matrix& g, const Matrix&) {
    const auto cols = p->col_idx();
    Matrix* gv = tape.requires_grad(values) ? &tape.grad_buffer(values.id()) : nullptr;
    Matrix* gd = tape.requires_grad(dense) ? &tape.grad_buffer(dense.id()) : nullptr;
    for (std::size_t r = 0; r < p->rows(); ++r) {
      auto gr = g.row(r);
      for (std::size_t k = p->row_begin(r); k < p->row_end(r); ++k) {
        auto drow = dense.value().row(cols[k]);
        if (gv) {
          double acc = 0.0;
          for (std::size_t c = 0; c < drow.size(); ++c) acc += gr[c] * drow[c];
          (*gv)(k, 0) += acc;
        }
        if (gd) {
          const double w = values.value()(k, 0);
          auto out = gd->row(cols[k]);
          for (std::size_t c = 0; c < gr.size(); ++c) out[c] += w * gr[c];
        }
      }
    }
  });
}

}  // namespace srgf::ad
