#pragma once

// Reverse-mode differentiation over matrix-valued nodes.
//
// Every node holds a dense column-major matrix; per-sample data is laid out
// one sample per column (features x samples). Spatial derivatives are carried
// forward as DualBlocks whose tangent columns are ordinary tape nodes, so the
// reverse pass differentiates through the Jacobian computation as well.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace nto::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Tape;

/// Handle to a node on a Tape. Valid until the owning tape is reset.
class Var {
 public:
  Var() = default;

  [[nodiscard]] bool valid() const { return tape_ != nullptr; }
  [[nodiscard]] Tape* tape() const { return tape_; }
  [[nodiscard]] std::uint32_t id() const { return id_; }
  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] Index rows() const { return value().rows(); }
  [[nodiscard]] Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

enum class Op : std::uint8_t {
  leaf,
  constant,
  matmul,
  affine,
  add,
  sub,
  mul,
  scale,
  add_scalar,
  sin,
  cos,
  sigmoid,
  relu,
  step,
  power,
  square,
  sum,
  mean,
  sum_rows,
  slice_rows,
  concat_rows,
};

/// Operand broadcasting for binary elementwise ops. Only the second operand broadcasts.
enum class Broadcast : std::uint8_t { none, row, col, scalar };

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input. Gradients are read back with grad().
  Var leaf(const Matrix& value);
  Var constant(const Matrix& value);
  Var constant(double value);

  Var matmul(Var a, Var b);
  /// w * x + bias, with bias a column vector broadcast over samples.
  Var affine(Var w, Var x, Var bias);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var add_scalar(Var a, double offset);

  Var sin(Var a);
  Var cos(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  /// Heaviside indicator (a > 0). Treated as piecewise constant: no gradient flows.
  Var step(Var a);
  Var power(Var a, double exponent);
  Var square(Var a);

  Var sum(Var a);
  Var mean(Var a);
  /// Column sums: r x n -> 1 x n.
  Var sum_rows(Var a);
  Var slice_rows(Var a, Index start, Index count);
  Var concat_rows(std::span<const Var> parts);

  /// Reverse sweep from a 1x1 root. Throws ContractViolation for any other shape.
  void backward(Var root);

  [[nodiscard]] const Matrix& value(Var v) const;
  /// Adjoint from the last backward(). Nodes the root does not depend on report zeros.
  [[nodiscard]] const Matrix& grad(Var v);

  /// Drops all nodes but keeps their buffers for the next recording.
  void reset();
  [[nodiscard]] std::size_t size() const { return size_; }

 private:
  struct Node {
    Op op = Op::constant;
    Broadcast broadcast = Broadcast::none;
    bool requires_grad = false;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::uint32_t c = 0;
    double scalar = 0.0;
    Index start = 0;
    Index count = 0;
    std::vector<std::uint32_t> parts;
    Matrix value;
  };

  Node& push(Op op);
  Var handle(const Node& node);
  void check_same_tape(Var v) const;
  Var binary(Op op, Var a, Var b);

  template <typename Expr>
  void accumulate(std::uint32_t id, const Expr& expr);
  void backprop_node(std::uint32_t id);

  std::vector<Node> nodes_;
  std::vector<Matrix> adjoints_;
  std::vector<std::uint8_t> touched_;
  std::size_t size_ = 0;
  Matrix zero_scratch_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator*(double s, Var a);
Var operator*(Var a, double s);
Var operator+(Var a, double s);
Var operator+(double s, Var a);
Var operator-(Var a);
Var sin(Var a);
Var cos(Var a);
Var square(Var a);

/// A value together with its derivatives along each input coordinate.
/// tangents[k] has the shape of value and holds d value / d x_k per sample.
struct DualBlock {
  Var value;
  std::vector<Var> tangents;

  [[nodiscard]] std::size_t dim() const { return tangents.size(); }
};

/// Seeds a dual block for raw coordinates (dim x n): tangent k is the unit vector e_k.
DualBlock dual_input(Tape& tape, const Matrix& points, std::size_t spatial_dims);
DualBlock dual_affine(Var weight, const DualBlock& x, Var bias);
DualBlock dual_sin(const DualBlock& z);
DualBlock dual_relu(const DualBlock& z);
DualBlock dual_add(const DualBlock& a, const DualBlock& b);
DualBlock dual_scale(const DualBlock& a, double factor);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  bool finite = true;
};

/// Loss over a flat parameter vector. When grad is non-null it receives the analytic gradient.
using FlatLossFn = std::function<double(std::span<const double> params, std::vector<double>* grad)>;

/// Compares the analytic gradient against central differences with step h.
/// Relative error per entry is |analytic - fd| / max(1e-12, |fd|). When indices
/// is non-empty only those entries are probed.
GradCheckResult grad_check(const FlatLossFn& loss, std::span<const double> params, double h,
                           std::span<const std::size_t> indices = {});

}  // namespace nto::ad
