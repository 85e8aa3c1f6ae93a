#include "nto/autodiff.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "nto/error.hpp"
#include "nto/vector_math.hpp"

namespace nto::ad {

namespace {

Broadcast classify(const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::none;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::col;
  throw ContractViolation("incompatible operand shapes " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
}

bool swaps_to_broadcast(const Matrix& a, const Matrix& b) {
  return a.size() < b.size();
}

Matrix& scratch() {
  thread_local Matrix buffer;
  return buffer;
}

}  // namespace

const Matrix& Var::value() const {
  return tape_->value(*this);
}

Tape::Node& Tape::push(Op op) {
  if (size_ == nodes_.size()) nodes_.emplace_back();
  Node& node = nodes_[size_++];
  node.op = op;
  node.broadcast = Broadcast::none;
  node.requires_grad = false;
  node.a = node.b = node.c = 0;
  node.scalar = 0.0;
  node.start = node.count = 0;
  node.parts.clear();
  return node;
}

Var Tape::handle(const Node& node) {
  return Var(this, static_cast<std::uint32_t>(&node - nodes_.data()));
}

void Tape::check_same_tape(Var v) const {
  if (v.tape() != this || v.id() >= size_) {
    throw ContractViolation("variable does not belong to this tape recording");
  }
}

const Matrix& Tape::value(Var v) const {
  check_same_tape(v);
  return nodes_[v.id()].value;
}

void Tape::reset() {
  size_ = 0;
}

Var Tape::leaf(const Matrix& value) {
  Node& node = push(Op::leaf);
  node.value = value;
  node.requires_grad = true;
  return handle(node);
}

Var Tape::constant(const Matrix& value) {
  Node& node = push(Op::constant);
  node.value = value;
  return handle(node);
}

Var Tape::constant(double value) {
  Node& node = push(Op::constant);
  node.value.resize(1, 1);
  node.value(0, 0) = value;
  return handle(node);
}

Var Tape::matmul(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  if (nodes_[a.id()].value.cols() != nodes_[b.id()].value.rows()) {
    throw ContractViolation("matmul inner dimensions differ");
  }
  Node& node = push(Op::matmul);
  node.a = a.id();
  node.b = b.id();
  node.requires_grad = nodes_[a.id()].requires_grad || nodes_[b.id()].requires_grad;
  node.value.noalias() = nodes_[a.id()].value * nodes_[b.id()].value;
  return handle(node);
}

Var Tape::affine(Var w, Var x, Var bias) {
  check_same_tape(w);
  check_same_tape(x);
  check_same_tape(bias);
  const Matrix& wv = nodes_[w.id()].value;
  const Matrix& xv = nodes_[x.id()].value;
  const Matrix& bv = nodes_[bias.id()].value;
  if (wv.cols() != xv.rows() || bv.rows() != wv.rows() || bv.cols() != 1) {
    throw ContractViolation("affine: shapes do not match");
  }
  Node& node = push(Op::affine);
  node.a = w.id();
  node.b = x.id();
  node.c = bias.id();
  node.requires_grad = nodes_[w.id()].requires_grad || nodes_[x.id()].requires_grad ||
                       nodes_[bias.id()].requires_grad;
  const Matrix& wr = nodes_[w.id()].value;
  const Matrix& xr = nodes_[x.id()].value;
  node.value.noalias() = wr * xr;
  node.value.colwise() += nodes_[bias.id()].value.col(0);
  return handle(node);
}

Var Tape::binary(Op op, Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  const Broadcast bc = classify(nodes_[a.id()].value, nodes_[b.id()].value);
  Node& node = push(op);
  node.a = a.id();
  node.b = b.id();
  node.broadcast = bc;
  node.requires_grad = nodes_[a.id()].requires_grad || nodes_[b.id()].requires_grad;
  const Matrix& av = nodes_[a.id()].value;
  const Matrix& bv = nodes_[b.id()].value;
  auto apply = [&](auto&& fn) {
    switch (bc) {
      case Broadcast::none:
        node.value = fn(av.array(), bv.array());
        break;
      case Broadcast::scalar:
        node.value = fn(av.array(), Eigen::ArrayXXd::Constant(av.rows(), av.cols(), bv(0, 0)));
        break;
      case Broadcast::row:
        node.value = fn(av.array(), bv.row(0).array().replicate(av.rows(), 1));
        break;
      case Broadcast::col:
        node.value = fn(av.array(), bv.col(0).array().replicate(1, av.cols()));
        break;
    }
  };
  switch (op) {
    case Op::add:
      apply([](const auto& x, const auto& y) { return (x + y).matrix(); });
      break;
    case Op::sub:
      apply([](const auto& x, const auto& y) { return (x - y).matrix(); });
      break;
    case Op::mul:
      apply([](const auto& x, const auto& y) { return (x * y).matrix(); });
      break;
    default:
      throw ContractViolation("binary: not an elementwise op");
  }
  return handle(node);
}

Var Tape::add(Var a, Var b) {
  if (swaps_to_broadcast(value(a), value(b))) std::swap(a, b);
  return binary(Op::add, a, b);
}

Var Tape::sub(Var a, Var b) {
  if (swaps_to_broadcast(value(a), value(b))) return add(scale(b, -1.0), a);
  return binary(Op::sub, a, b);
}

Var Tape::mul(Var a, Var b) {
  if (swaps_to_broadcast(value(a), value(b))) std::swap(a, b);
  return binary(Op::mul, a, b);
}

Var Tape::scale(Var a, double factor) {
  check_same_tape(a);
  Node& node = push(Op::scale);
  node.a = a.id();
  node.scalar = factor;
  node.requires_grad = nodes_[a.id()].requires_grad;
  node.value = nodes_[a.id()].value * factor;
  return handle(node);
}

Var Tape::add_scalar(Var a, double offset) {
  check_same_tape(a);
  Node& node = push(Op::add_scalar);
  node.a = a.id();
  node.scalar = offset;
  node.requires_grad = nodes_[a.id()].requires_grad;
  node.value = nodes_[a.id()].value.array() + offset;
  return handle(node);
}

Var Tape::sin(Var a) {
  check_same_tape(a);
  Node& node = push(Op::sin);
  node.a = a.id();
  node.requires_grad = nodes_[a.id()].requires_grad;
  const Matrix& av = nodes_[a.id()].value;
  node.value.resize(av.rows(), av.cols());
  vmath::sin(av.data(), node.value.data(), static_cast<std::size_t>(av.size()));
  return handle(node);
}

Var Tape::cos(Var a) {
  check_same_tape(a);
  Node& node = push(Op::cos);
  node.a = a.id();
  node.requires_grad = nodes_[a.id()].requires_grad;
  const Matrix& av = nodes_[a.id()].value;
  node.value.resize(av.rows(), av.cols());
  vmath::cos(av.data(), node.value.data(), static_cast<std::size_t>(av.size()));
  return handle(node);
}

Var Tape::sigmoid(Var a) {
  check_same_tape(a);
  Node& node = push(Op::sigmoid);
  node.a = a.id();
  node.requires_grad = nodes_[a.id()].requires_grad;
  const Matrix& av = nodes_[a.id()].value;
  node.value = -av;
  vmath::exp(node.value.data(), node.value.data(), static_cast<std::size_t>(av.size()));
  node.value = (1.0 + node.value.array()).inverse().matrix();
  return handle(node);
}

Var Tape::relu(Var a) {
  check_same_tape(a);
  Node& node = push(Op::relu);
  node.a = a.id();
  node.requires_grad = nodes_[a.id()].requires_grad;
  node.value = nodes_[a.id()].value.cwiseMax(0.0);
  return handle(node);
}

Var Tape::step(Var a) {
  check_same_tape(a);
  Node& node = push(Op::step);
  node.a = a.id();
  node.value = (nodes_[a.id()].value.array() > 0.0).cast<double>().matrix();
  return handle(node);
}

Var Tape::power(Var a, double exponent) {
  check_same_tape(a);
  Node& node = push(Op::power);
  node.a = a.id();
  node.scalar = exponent;
  node.requires_grad = nodes_[a.id()].requires_grad;
  node.value = nodes_[a.id()].value.array().pow(exponent).matrix();
  return handle(node);
}

Var Tape::square(Var a) {
  check_same_tape(a);
  Node& node = push(Op::square);
  node.a = a.id();
  node.requires_grad = nodes_[a.id()].requires_grad;
  node.value = nodes_[a.id()].value.array().square().matrix();
  return handle(node);
}

Var Tape::sum(Var a) {
  check_same_tape(a);
  Node& node = push(Op::sum);
  node.a = a.id();
  node.requires_grad = nodes_[a.id()].requires_grad;
  const double total = nodes_[a.id()].value.sum();
  node.value.resize(1, 1);
  node.value(0, 0) = total;
  return handle(node);
}

Var Tape::mean(Var a) {
  check_same_tape(a);
  if (nodes_[a.id()].value.size() == 0) throw ContractViolation("mean of an empty node");
  Node& node = push(Op::mean);
  node.a = a.id();
  node.requires_grad = nodes_[a.id()].requires_grad;
  const double avg = nodes_[a.id()].value.mean();
  node.value.resize(1, 1);
  node.value(0, 0) = avg;
  return handle(node);
}

Var Tape::sum_rows(Var a) {
  check_same_tape(a);
  Node& node = push(Op::sum_rows);
  node.a = a.id();
  node.requires_grad = nodes_[a.id()].requires_grad;
  node.value = nodes_[a.id()].value.colwise().sum();
  return handle(node);
}

Var Tape::slice_rows(Var a, Index start, Index count) {
  check_same_tape(a);
  if (start < 0 || count <= 0 || start + count > nodes_[a.id()].value.rows()) {
    throw ContractViolation("slice_rows out of range");
  }
  Node& node = push(Op::slice_rows);
  node.a = a.id();
  node.start = start;
  node.count = count;
  node.requires_grad = nodes_[a.id()].requires_grad;
  node.value = nodes_[a.id()].value.middleRows(start, count);
  return handle(node);
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractViolation("concat_rows of nothing");
  Index rows = 0;
  const Index cols = value(parts.front()).cols();
  for (Var p : parts) {
    check_same_tape(p);
    if (nodes_[p.id()].value.cols() != cols) throw ContractViolation("concat_rows: column mismatch");
    rows += nodes_[p.id()].value.rows();
  }
  Node& node = push(Op::concat_rows);
  node.value.resize(rows, cols);
  Index offset = 0;
  for (Var p : parts) {
    const Matrix& pv = nodes_[p.id()].value;
    node.value.middleRows(offset, pv.rows()) = pv;
    offset += pv.rows();
    node.parts.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  return handle(node);
}

template <typename Expr>
void Tape::accumulate(std::uint32_t id, const Expr& expr) {
  if (!nodes_[id].requires_grad) return;
  if (!touched_[id]) {
    adjoints_[id] = expr;
    touched_[id] = 1;
  } else {
    adjoints_[id] += expr;
  }
}

void Tape::backward(Var root) {
  check_same_tape(root);
  const Matrix& rv = nodes_[root.id()].value;
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw ContractViolation("backward requires a scalar (1x1) root, got " + std::to_string(rv.rows()) +
                            "x" + std::to_string(rv.cols()));
  }
  if (adjoints_.size() < size_) adjoints_.resize(size_);
  touched_.assign(size_, 0);
  if (!nodes_[root.id()].requires_grad) return;
  adjoints_[root.id()].setOnes(1, 1);
  touched_[root.id()] = 1;
  for (std::int64_t id = root.id(); id >= 0; --id) {
    const auto uid = static_cast<std::uint32_t>(id);
    if (touched_[uid] && nodes_[uid].requires_grad) backprop_node(uid);
  }
}

void Tape::backprop_node(std::uint32_t id) {
  const Node& node = nodes_[id];
  const Matrix& g = adjoints_[id];
  switch (node.op) {
    case Op::leaf:
    case Op::constant:
    case Op::step:
      break;
    case Op::matmul: {
      const Matrix& av = nodes_[node.a].value;
      const Matrix& bv = nodes_[node.b].value;
      if (nodes_[node.a].requires_grad) accumulate(node.a, g * bv.transpose());
      if (nodes_[node.b].requires_grad) accumulate(node.b, av.transpose() * g);
      break;
    }
    case Op::affine: {
      const Matrix& wv = nodes_[node.a].value;
      const Matrix& xv = nodes_[node.b].value;
      if (nodes_[node.a].requires_grad) accumulate(node.a, g * xv.transpose());
      if (nodes_[node.b].requires_grad) accumulate(node.b, wv.transpose() * g);
      if (nodes_[node.c].requires_grad) accumulate(node.c, g.rowwise().sum());
      break;
    }
    case Op::add:
    case Op::sub: {
      accumulate(node.a, g);
      if (!nodes_[node.b].requires_grad) break;
      const double sign = node.op == Op::add ? 1.0 : -1.0;
      switch (node.broadcast) {
        case Broadcast::none:
          accumulate(node.b, sign * g);
          break;
        case Broadcast::scalar:
          accumulate(node.b, Matrix::Constant(1, 1, sign * g.sum()));
          break;
        case Broadcast::row:
          accumulate(node.b, sign * g.colwise().sum());
          break;
        case Broadcast::col:
          accumulate(node.b, sign * g.rowwise().sum());
          break;
      }
      break;
    }
    case Op::mul: {
      const Matrix& av = nodes_[node.a].value;
      const Matrix& bv = nodes_[node.b].value;
      if (nodes_[node.a].requires_grad) {
        switch (node.broadcast) {
          case Broadcast::none:
            accumulate(node.a, g.cwiseProduct(bv));
            break;
          case Broadcast::scalar:
            accumulate(node.a, g * bv(0, 0));
            break;
          case Broadcast::row:
            accumulate(node.a, (g.array().rowwise() * bv.row(0).array()).matrix());
            break;
          case Broadcast::col:
            accumulate(node.a, (g.array().colwise() * bv.col(0).array()).matrix());
            break;
        }
      }
      if (nodes_[node.b].requires_grad) {
        switch (node.broadcast) {
          case Broadcast::none:
            accumulate(node.b, g.cwiseProduct(av));
            break;
          case Broadcast::scalar:
            accumulate(node.b, Matrix::Constant(1, 1, g.cwiseProduct(av).sum()));
            break;
          case Broadcast::row:
            accumulate(node.b, g.cwiseProduct(av).colwise().sum());
            break;
          case Broadcast::col:
            accumulate(node.b, g.cwiseProduct(av).rowwise().sum());
            break;
        }
      }
      break;
    }
    case Op::scale:
      accumulate(node.a, g * node.scalar);
      break;
    case Op::add_scalar:
      accumulate(node.a, g);
      break;
    case Op::sin: {
      const Matrix& av = nodes_[node.a].value;
      Matrix& tmp = scratch();
      tmp.resize(av.rows(), av.cols());
      vmath::cos(av.data(), tmp.data(), static_cast<std::size_t>(av.size()));
      accumulate(node.a, g.cwiseProduct(tmp));
      break;
    }
    case Op::cos: {
      const Matrix& av = nodes_[node.a].value;
      Matrix& tmp = scratch();
      tmp.resize(av.rows(), av.cols());
      vmath::sin(av.data(), tmp.data(), static_cast<std::size_t>(av.size()));
      accumulate(node.a, -g.cwiseProduct(tmp));
      break;
    }
    case Op::sigmoid:
      accumulate(node.a, (g.array() * node.value.array() * (1.0 - node.value.array())).matrix());
      break;
    case Op::relu:
      accumulate(node.a, (g.array() * (nodes_[node.a].value.array() > 0.0).cast<double>()).matrix());
      break;
    case Op::power: {
      const auto& av = nodes_[node.a].value.array();
      accumulate(node.a, (g.array() * node.scalar * av.pow(node.scalar - 1.0)).matrix());
      break;
    }
    case Op::square:
      accumulate(node.a, (2.0 * g.array() * nodes_[node.a].value.array()).matrix());
      break;
    case Op::sum: {
      const Matrix& av = nodes_[node.a].value;
      accumulate(node.a, Matrix::Constant(av.rows(), av.cols(), g(0, 0)));
      break;
    }
    case Op::mean: {
      const Matrix& av = nodes_[node.a].value;
      accumulate(node.a, Matrix::Constant(av.rows(), av.cols(), g(0, 0) / static_cast<double>(av.size())));
      break;
    }
    case Op::sum_rows: {
      const Index rows = nodes_[node.a].value.rows();
      accumulate(node.a, g.replicate(rows, 1));
      break;
    }
    case Op::slice_rows: {
      if (!nodes_[node.a].requires_grad) break;
      const Matrix& av = nodes_[node.a].value;
      if (!touched_[node.a]) {
        adjoints_[node.a].setZero(av.rows(), av.cols());
        touched_[node.a] = 1;
      }
      adjoints_[node.a].middleRows(node.start, node.count) += g;
      break;
    }
    case Op::concat_rows: {
      Index offset = 0;
      for (std::uint32_t part : node.parts) {
        const Index rows = nodes_[part].value.rows();
        accumulate(part, g.middleRows(offset, rows));
        offset += rows;
      }
      break;
    }
  }
}

const Matrix& Tape::grad(Var v) {
  check_same_tape(v);
  if (v.id() < touched_.size() && touched_[v.id()]) return adjoints_[v.id()];
  const Matrix& val = nodes_[v.id()].value;
  zero_scratch_.setZero(val.rows(), val.cols());
  return zero_scratch_;
}

Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }
Var operator*(double s, Var a) { return a.tape()->scale(a, s); }
Var operator*(Var a, double s) { return a.tape()->scale(a, s); }
Var operator+(Var a, double s) { return a.tape()->add_scalar(a, s); }
Var operator+(double s, Var a) { return a.tape()->add_scalar(a, s); }
Var operator-(Var a) { return a.tape()->scale(a, -1.0); }
Var sin(Var a) { return a.tape()->sin(a); }
Var cos(Var a) { return a.tape()->cos(a); }
Var square(Var a) { return a.tape()->square(a); }

DualBlock dual_input(Tape& tape, const Matrix& points, std::size_t spatial_dims) {
  if (static_cast<Index>(spatial_dims) > points.rows()) {
    throw ContractViolation("dual_input: more spatial dims than input rows");
  }
  DualBlock out;
  out.value = tape.constant(points);
  for (std::size_t k = 0; k < spatial_dims; ++k) {
    Matrix seed = Matrix::Zero(points.rows(), points.cols());
    seed.row(static_cast<Index>(k)).setOnes();
    out.tangents.push_back(tape.constant(seed));
  }
  return out;
}

DualBlock dual_affine(Var weight, const DualBlock& x, Var bias) {
  Tape& tape = *weight.tape();
  DualBlock out;
  out.value = tape.affine(weight, x.value, bias);
  for (Var t : x.tangents) out.tangents.push_back(tape.matmul(weight, t));
  return out;
}

DualBlock dual_sin(const DualBlock& z) {
  Tape& tape = *z.value.tape();
  DualBlock out;
  out.value = tape.sin(z.value);
  if (z.tangents.empty()) return out;
  const Var derivative = tape.cos(z.value);
  for (Var t : z.tangents) out.tangents.push_back(tape.mul(derivative, t));
  return out;
}

DualBlock dual_relu(const DualBlock& z) {
  Tape& tape = *z.value.tape();
  DualBlock out;
  out.value = tape.relu(z.value);
  if (z.tangents.empty()) return out;
  const Var mask = tape.step(z.value);
  for (Var t : z.tangents) out.tangents.push_back(tape.mul(mask, t));
  return out;
}

DualBlock dual_add(const DualBlock& a, const DualBlock& b) {
  if (a.tangents.size() != b.tangents.size()) throw ContractViolation("dual_add: tangent count differs");
  Tape& tape = *a.value.tape();
  DualBlock out;
  out.value = tape.add(a.value, b.value);
  for (std::size_t k = 0; k < a.tangents.size(); ++k) {
    out.tangents.push_back(tape.add(a.tangents[k], b.tangents[k]));
  }
  return out;
}

DualBlock dual_scale(const DualBlock& a, double factor) {
  Tape& tape = *a.value.tape();
  DualBlock out;
  out.value = tape.scale(a.value, factor);
  for (Var t : a.tangents) out.tangents.push_back(tape.scale(t, factor));
  return out;
}

GradCheckResult grad_check(const FlatLossFn& loss, std::span<const double> params, double h,
                           std::span<const std::size_t> indices) {
  GradCheckResult result;
  std::vector<double> analytic;
  const double base = loss(params, &analytic);
  if (!std::isfinite(base) || analytic.size() != params.size()) {
    result.finite = false;
    result.max_relative_error = std::numeric_limits<double>::infinity();
    return result;
  }
  std::vector<double> probe(params.begin(), params.end());
  auto check_entry = [&](std::size_t i) {
    const double original = probe[i];
    probe[i] = original + h;
    const double plus = loss(probe, nullptr);
    probe[i] = original - h;
    const double minus = loss(probe, nullptr);
    probe[i] = original;
    const double fd = (plus - minus) / (2.0 * h);
    const double err = std::abs(analytic[i] - fd) / std::max(1e-12, std::abs(fd));
    if (!std::isfinite(plus) || !std::isfinite(minus) || !std::isfinite(err)) {
      result.finite = false;
      result.max_relative_error = std::numeric_limits<double>::infinity();
      result.worst_index = i;
      return;
    }
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
    }
  };
  if (indices.empty()) {
    for (std::size_t i = 0; i < probe.size() && result.finite; ++i) check_entry(i);
  } else {
    for (std::size_t i : indices) {
      if (i >= probe.size()) throw ContractViolation("grad_check: index out of range");
      check_entry(i);
      if (!result.finite) break;
    }
  }
  return result;
}

}  // namespace nto::ad
