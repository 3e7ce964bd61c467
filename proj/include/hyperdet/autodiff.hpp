#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hyperdet/error.hpp"
#include "hyperdet/matrix.hpp"

// Minimal reverse-mode differentiation over dense double matrices.
//
// A Tape records every primitive in insertion order; that order is a valid
// topological order, so backward() is a single reverse sweep. Var is a light
// handle (tape pointer + node id) and is only meaningful while its tape lives.
namespace hyperdet::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Segment membership of P elements: element p belongs to segment ids[p].
struct Segments {
  std::vector<std::size_t> ids;
  std::size_t count = 0;

  std::size_t size() const { return ids.size(); }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), "const", {}, false, nullptr); }
  Var variable(Matrix value) { return push(std::move(value), "var", {}, true, nullptr); }

  Var record(Matrix value, std::string op, std::vector<Var> parents, Backward backward) {
    bool needs = false;
    for (const Var& p : parents) {
      check_owner(p);
      needs = needs || nodes_[p.id()].requires_grad;
    }
    std::vector<std::size_t> ids;
    ids.reserve(parents.size());
    for (const Var& p : parents) ids.push_back(p.id());
    return push(std::move(value), std::move(op), std::move(ids), needs, needs ? std::move(backward) : nullptr);
  }

  const Matrix& value(const Var& v) const {
    check_owner(v);
    return nodes_[v.id()].value;
  }

  bool requires_grad(const Var& v) const {
    check_owner(v);
    return nodes_[v.id()].requires_grad;
  }

  // Gradient of the last backward() output with respect to v. Zero if v does
  // not influence it.
  const Matrix& grad(const Var& v) {
    check_owner(v);
    if (!backward_done_) throw Error("gradient requested before backward()");
    Node& n = nodes_[v.id()];
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  // Seeds d(out)/d(out) = 1 for a 1x1 output and sweeps the tape backwards.
  void backward(const Var& out) {
    check_owner(out);
    const Node& o = nodes_[out.id()];
    if (o.value.rows() != 1 || o.value.cols() != 1) throw ShapeError("backward() needs a scalar output");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[out.id()].grad = Matrix::Ones(1, 1);
    for (std::size_t i = out.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
      // parents have smaller ids, so n.grad is not touched while it is out
      Matrix g;
      g.swap(n.grad);
      n.backward(*this, g);
      n.grad.swap(g);
    }
    backward_done_ = true;
  }

  // Adds g into the gradient buffer of v (only when v needs a gradient).
  void accumulate(std::size_t id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = g;
    else n.grad += g;
  }
  template <class Expr>
  void accumulate_expr(std::size_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = g;
    else n.grad += g;
  }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  std::size_t size() const { return nodes_.size(); }

  // Text graph: one line per node, "id op rows x cols <- parents".
  std::string dump() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      os << '%' << i << " = " << n.op << ' ' << n.value.rows() << 'x' << n.value.cols();
      if (n.requires_grad) os << " grad";
      if (!n.parents.empty()) {
        os << " <-";
        for (auto p : n.parents) os << " %" << p;
      }
      os << '\n';
    }
    return os.str();
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    std::string op;
    Backward backward;
  };

  Var push(Matrix value, std::string op, std::vector<std::size_t> parents, bool requires_grad, Backward backward) {
    assert(value.allFinite() && "non-finite tensor entry");
    nodes_.push_back({std::move(value), Matrix(), requires_grad, std::move(parents), std::move(op), std::move(backward)});
    backward_done_ = false;
    return Var(this, nodes_.size() - 1);
  }

  void check_owner(const Var& v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) throw Error("variable does not belong to this tape");
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }
inline const Matrix& Var::grad() const { return tape_->grad(*this); }

namespace detail {

inline void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
}

inline void check_segments(const Segments& seg, Eigen::Index rows, const char* op) {
  if (static_cast<Eigen::Index>(seg.size()) != rows)
    throw ShapeError(std::string(op) + ": segment index length does not match rows");
  for (auto s : seg.ids)
    if (s >= seg.count) throw ShapeError(std::string(op) + ": segment id out of range");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " + std::to_string(b.rows()));
  Tape& t = *a.tape();
  Matrix out = a.value() * b.value();
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), "matmul", {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(ia)) tp.accumulate_expr(ia, g * tp.value(Var(&tp, ib)).transpose());
    if (tp.needs_grad(ib)) tp.accumulate_expr(ib, tp.value(Var(&tp, ia)).transpose() * g);
  });
}

inline Var add(const Var& a, const Var& b) {
  detail::same_shape(a, b, "add");
  Tape& t = *a.tape();
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), "add", {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::same_shape(a, b, "sub");
  Tape& t = *a.tape();
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), "sub", {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g);
    tp.accumulate_expr(ib, -g);
  });
}

inline Var scale(const Var& a, double c) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  return t.record(a.value() * c, "scale", {a}, [ia, c](Tape& tp, const Matrix& g) { tp.accumulate_expr(ia, g * c); });
}

// Adds the 1 x cols row `bias` to every row of a.
inline Var add_row(const Var& a, const Var& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw ShapeError("add_row: bias must be 1 x cols");
  Tape& t = *a.tape();
  Matrix out = a.value().rowwise() + bias.value().row(0);
  const auto ia = a.id(), ib = bias.id();
  return t.record(std::move(out), "add_row", {a, bias}, [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g);
    if (tp.needs_grad(ib)) tp.accumulate_expr(ib, g.colwise().sum());
  });
}

inline Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw ShapeError("concat_cols: row counts differ");
  Tape& t = *a.tape();
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const auto ia = a.id(), ib = b.id();
  const auto ca = a.cols(), cb = b.cols();
  return t.record(std::move(out), "concat_cols", {a, b}, [ia, ib, ca, cb](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(ia)) tp.accumulate_expr(ia, g.leftCols(ca));
    if (tp.needs_grad(ib)) tp.accumulate_expr(ib, g.rightCols(cb));
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no blocks");
  Var out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out = concat_cols(out, parts[i]);
  return out;
}

inline Var leaky_relu(const Var& a, double slope) {
  Tape& t = *a.tape();
  Matrix out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  const auto ia = a.id();
  return t.record(std::move(out), "leaky_relu", {a}, [ia, slope](Tape& tp, const Matrix& g) {
    const Matrix& x = tp.value(Var(&tp, ia));
    tp.accumulate_expr(ia, g.cwiseProduct(x.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; })));
  });
}

// out[p] = a[index[p]] (row gather).
inline Var gather_rows(const Var& a, std::vector<std::size_t> index) {
  Tape& t = *a.tape();
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t p = 0; p < index.size(); ++p) {
    if (index[p] >= static_cast<std::size_t>(a.rows())) throw ShapeError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(p)) = a.value().row(static_cast<Eigen::Index>(index[p]));
  }
  const auto ia = a.id();
  const auto rows = a.rows(), cols = a.cols();
  return t.record(std::move(out), "gather_rows", {a},
                  [ia, rows, cols, index = std::move(index)](Tape& tp, const Matrix& g) {
                    Matrix acc = Matrix::Zero(rows, cols);
                    for (std::size_t p = 0; p < index.size(); ++p)
                      acc.row(static_cast<Eigen::Index>(index[p])) += g.row(static_cast<Eigen::Index>(p));
                    tp.accumulate(ia, acc);
                  });
}

// Multiplies row p of a by the constant factors[p].
inline Var scale_rows(const Var& a, std::vector<double> factors) {
  if (static_cast<Eigen::Index>(factors.size()) != a.rows()) throw ShapeError("scale_rows: factor count");
  Tape& t = *a.tape();
  const Eigen::Map<const Vector> f(factors.data(), static_cast<Eigen::Index>(factors.size()));
  Matrix out = f.asDiagonal() * a.value();
  const auto ia = a.id();
  return t.record(std::move(out), "scale_rows", {a}, [ia, factors = std::move(factors)](Tape& tp, const Matrix& g) {
    const Eigen::Map<const Vector> fm(factors.data(), static_cast<Eigen::Index>(factors.size()));
    tp.accumulate_expr(ia, fm.asDiagonal() * g);
  });
}

// Softmax of a P x 1 logit column within each segment. Every segment must be
// non-empty.
inline Var segment_softmax(const Var& logits, const Segments& seg) {
  if (logits.cols() != 1) throw ShapeError("segment_softmax: logits must be a column");
  detail::check_segments(seg, logits.rows(), "segment_softmax");
  std::vector<double> mx(seg.count, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> members(seg.count, 0);
  const Matrix& x = logits.value();
  for (std::size_t p = 0; p < seg.size(); ++p) {
    mx[seg.ids[p]] = std::max(mx[seg.ids[p]], x(static_cast<Eigen::Index>(p), 0));
    ++members[seg.ids[p]];
  }
  for (std::size_t s = 0; s < seg.count; ++s)
    if (members[s] == 0) throw ShapeError("segment_softmax: segment " + std::to_string(s) + " is empty");
  Matrix y(x.rows(), 1);
  std::vector<double> z(seg.count, 0.0);
  for (std::size_t p = 0; p < seg.size(); ++p) {
    const auto r = static_cast<Eigen::Index>(p);
    y(r, 0) = std::exp(x(r, 0) - mx[seg.ids[p]]);
    z[seg.ids[p]] += y(r, 0);
  }
  for (std::size_t p = 0; p < seg.size(); ++p) y(static_cast<Eigen::Index>(p), 0) /= z[seg.ids[p]];
  Tape& t = *logits.tape();
  const auto il = logits.id();
  Matrix ycopy = y;
  return t.record(std::move(y), "segment_softmax", {logits},
                  [il, seg, y = std::move(ycopy)](Tape& tp, const Matrix& g) {
                    std::vector<double> dot(seg.count, 0.0);
                    for (std::size_t p = 0; p < seg.size(); ++p) {
                      const auto r = static_cast<Eigen::Index>(p);
                      dot[seg.ids[p]] += y(r, 0) * g(r, 0);
                    }
                    Matrix dx(y.rows(), 1);
                    for (std::size_t p = 0; p < seg.size(); ++p) {
                      const auto r = static_cast<Eigen::Index>(p);
                      dx(r, 0) = y(r, 0) * (g(r, 0) - dot[seg.ids[p]]);
                    }
                    tp.accumulate(il, dx);
                  });
}

// out[s] = sum over p in segment s of weights[p] * values[p]; empty segments
// give zero rows. `weights` is a P x 1 column.
inline Var segment_sum(const Var& values, const Segments& seg, const Var& weights) {
  detail::check_segments(seg, values.rows(), "segment_sum");
  if (weights.rows() != values.rows() || weights.cols() != 1)
    throw ShapeError("segment_sum: weights must be a P x 1 column");
  const Matrix& v = values.value();
  const Matrix& w = weights.value();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(seg.count), v.cols());
  for (std::size_t p = 0; p < seg.size(); ++p) {
    const auto r = static_cast<Eigen::Index>(p);
    out.row(static_cast<Eigen::Index>(seg.ids[p])) += w(r, 0) * v.row(r);
  }
  Tape& t = *values.tape();
  const auto iv = values.id(), iw = weights.id();
  return t.record(std::move(out), "segment_sum", {values, weights}, [iv, iw, seg](Tape& tp, const Matrix& g) {
    const Matrix& vv = tp.value(Var(&tp, iv));
    const Matrix& ww = tp.value(Var(&tp, iw));
    if (tp.needs_grad(iv)) {
      Matrix dv(vv.rows(), vv.cols());
      for (std::size_t p = 0; p < seg.size(); ++p) {
        const auto r = static_cast<Eigen::Index>(p);
        dv.row(r) = ww(r, 0) * g.row(static_cast<Eigen::Index>(seg.ids[p]));
      }
      tp.accumulate(iv, dv);
    }
    if (tp.needs_grad(iw)) {
      Matrix dw(ww.rows(), 1);
      for (std::size_t p = 0; p < seg.size(); ++p) {
        const auto r = static_cast<Eigen::Index>(p);
        dw(r, 0) = vv.row(r).dot(g.row(static_cast<Eigen::Index>(seg.ids[p])));
      }
      tp.accumulate(iw, dw);
    }
  });
}

inline Var segment_sum(const Var& values, const Segments& seg, const std::vector<double>& weights) {
  Matrix w(static_cast<Eigen::Index>(weights.size()), 1);
  for (std::size_t p = 0; p < weights.size(); ++p) w(static_cast<Eigen::Index>(p), 0) = weights[p];
  return segment_sum(values, seg, values.tape()->constant(std::move(w)));
}

// Row-wise softmax.
inline Var row_softmax(const Var& a) {
  Matrix y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    y.row(r).array() -= y.row(r).maxCoeff();
    y.row(r) = y.row(r).array().exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  Tape& t = *a.tape();
  const auto ia = a.id();
  Matrix ycopy = y;
  return t.record(std::move(y), "row_softmax", {a}, [ia, y = std::move(ycopy)](Tape& tp, const Matrix& g) {
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = y.row(r).dot(g.row(r));
      dx.row(r) = y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    tp.accumulate(ia, dx);
  });
}

// Sum of squared differences, 1 x 1.
inline Var squared_error(const Var& a, const Var& b) {
  detail::same_shape(a, b, "squared_error");
  Tape& t = *a.tape();
  Matrix out(1, 1);
  out(0, 0) = (a.value() - b.value()).squaredNorm();
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), "squared_error", {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
    const Matrix diff = tp.value(Var(&tp, ia)) - tp.value(Var(&tp, ib));
    tp.accumulate_expr(ia, (2.0 * g(0, 0)) * diff);
    tp.accumulate_expr(ib, (-2.0 * g(0, 0)) * diff);
  });
}

inline constexpr double kProbClamp = 1e-12;

// sum_v weights[v] * -log(clamp(probs[v, labels[v]])), 1 x 1.
inline Var weighted_ce(const Var& probs, const std::vector<std::uint8_t>& labels, const std::vector<double>& weights) {
  if (static_cast<Eigen::Index>(labels.size()) != probs.rows() || labels.size() != weights.size())
    throw ShapeError("weighted_ce: label/weight length does not match rows");
  const Matrix& p = probs.value();
  Matrix out = Matrix::Zero(1, 1);
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] >= p.cols()) throw ShapeError("weighted_ce: label exceeds class count");
    const double q = std::clamp(p(static_cast<Eigen::Index>(v), labels[v]), kProbClamp, 1.0 - kProbClamp);
    out(0, 0) -= weights[v] * std::log(q);
  }
  Tape& t = *probs.tape();
  const auto ip = probs.id();
  return t.record(std::move(out), "weighted_ce", {probs}, [ip, labels, weights](Tape& tp, const Matrix& g) {
    const Matrix& pp = tp.value(Var(&tp, ip));
    Matrix d = Matrix::Zero(pp.rows(), pp.cols());
    for (std::size_t v = 0; v < labels.size(); ++v) {
      const auto r = static_cast<Eigen::Index>(v);
      const double q = pp(r, labels[v]);
      if (q > kProbClamp && q < 1.0 - kProbClamp) d(r, labels[v]) = -g(0, 0) * weights[v] / q;
    }
    tp.accumulate(ip, d);
  });
}

// sum over params of the squared Frobenius norm, 1 x 1.
inline Var l2_penalty(const std::vector<Var>& params) {
  if (params.empty()) throw ShapeError("l2_penalty: no parameters");
  Tape& t = *params.front().tape();
  Matrix out = Matrix::Zero(1, 1);
  std::vector<std::size_t> ids;
  for (const Var& p : params) {
    out(0, 0) += p.value().squaredNorm();
    ids.push_back(p.id());
  }
  return t.record(std::move(out), "l2_penalty", params, [ids](Tape& tp, const Matrix& g) {
    for (auto id : ids)
      if (tp.needs_grad(id)) tp.accumulate_expr(id, (2.0 * g(0, 0)) * tp.value(Var(&tp, id)));
  });
}

// Element-wise mean of K equally shaped blocks.
inline Var row_mean_k(const std::vector<Var>& blocks) {
  if (blocks.empty()) throw ShapeError("row_mean_k: no blocks");
  Matrix out = blocks.front().value();
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    detail::same_shape(blocks.front(), blocks[i], "row_mean_k");
    out += blocks[i].value();
  }
  const double inv = 1.0 / static_cast<double>(blocks.size());
  out *= inv;
  std::vector<std::size_t> ids;
  for (const Var& b : blocks) ids.push_back(b.id());
  return blocks.front().tape()->record(std::move(out), "row_mean_k", blocks, [ids, inv](Tape& tp, const Matrix& g) {
    for (auto id : ids) tp.accumulate_expr(id, g * inv);
  });
}

// Sum of all entries, 1 x 1.
inline Var sum_all(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const auto ia = a.id();
  const auto r = a.rows(), c = a.cols();
  return a.tape()->record(std::move(out), "sum_all", {a}, [ia, r, c](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, Matrix::Constant(r, c, g(0, 0)));
  });
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_input = 0;
  Eigen::Index worst_row = 0, worst_col = 0;
  std::size_t entries = 0;
  bool passed = false;
};

using ScalarFunction = std::function<Var(Tape&, const std::vector<Var>&)>;

// Compares tape gradients of f at `point` with central differences. Relative
// error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradCheckReport grad_check(const ScalarFunction& f, std::vector<Matrix> point, double eps = 1e-6,
                                  double tol = 1e-5, double floor = 1e-6) {
  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& m : point) vars.push_back(tape.variable(m));
    Var out = f(tape, vars);
    if (out.rows() != 1 || out.cols() != 1) throw ShapeError("grad_check: function must be scalar");
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  auto eval = [&](const std::vector<Matrix>& pt) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& m : pt) vars.push_back(tape.constant(m));
    return f(tape, vars).scalar();
  };
  GradCheckReport rep;
  for (std::size_t i = 0; i < point.size(); ++i) {
    for (Eigen::Index r = 0; r < point[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < point[i].cols(); ++c) {
        const double orig = point[i](r, c);
        point[i](r, c) = orig + eps;
        const double up = eval(point);
        point[i](r, c) = orig - eps;
        const double down = eval(point);
        point[i](r, c) = orig;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[i](r, c);
        const double abs_err = std::abs(a - numeric);
        const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
        rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
        if (rel > rep.max_rel_error) {
          rep.max_rel_error = rel;
          rep.worst_input = i;
          rep.worst_row = r;
          rep.worst_col = c;
        }
        ++rep.entries;
      }
    }
  }
  rep.passed = rep.max_rel_error <= tol;
  return rep;
}

}  // namespace hyperdet::ad
