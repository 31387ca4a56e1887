#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "jssl/tensor.hpp"

namespace jssl {

enum class OpKind {
  leaf,
  add,
  sub,
  mul,
  div,
  scalar_mul,
  add_scalar,
  scale,
  matmul,
  conv2d,
  relu,
  abs,
  sqrt,
  square,
  exp,
  sigmoid,
  sum,
  mean,
  sum_axis,
  broadcast_axis,
  reshape,
  slice,
  concat,
  permute,
  pad,
  crop,
  complex_mul,
  complex_conj,
  complex_abs,
  to_complex,
  fft2c,
  ifft2c,
  mask_apply,
};

const char* op_name(OpKind kind);

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Variable {
 public:
  Variable() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Variable(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Result of a backward pass. Lookups for variables the loss does not depend
/// on return zeros of the right shape.
class Gradients {
 public:
  Tensor operator[](const Variable& v) const;
  bool reached(const Variable& v) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<std::optional<Tensor>> grads_;
};

/// Eager forward evaluation with a recorded list of backward rules. Nodes are
/// appended in evaluation order, which is a topological order.
class Tape {
 public:
  /// Adds the op's contribution to each non-null accumulator in `grad_inputs`
  /// (one per input, null where no gradient is needed).
  using BackwardFn =
      std::function<void(const Tape&, const Tensor& grad_out, std::span<Tensor* const> grad_inputs)>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Variable leaf(Tensor value, bool requires_grad = true);
  Variable constant(Tensor value) { return leaf(std::move(value), false); }

  Variable record(OpKind kind, std::vector<Variable> inputs, Tensor value, BackwardFn backward);

  /// Reverse accumulation from a one-element loss.
  Gradients backward(const Variable& loss) const;

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  std::size_t size() const { return nodes_.size(); }
  /// Process-unique identifier of this tape.
  std::uint64_t uid() const { return uid_; }

 private:
  struct Node {
    OpKind kind;
    Tensor value;
    bool requires_grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
  std::uint64_t uid_;
};

// Differentiable counterparts of the tensor operations.
Variable add(const Variable& a, const Variable& b);
Variable sub(const Variable& a, const Variable& b);
Variable mul(const Variable& a, const Variable& b);
Variable div(const Variable& a, const Variable& b);
Variable scalar_mul(const Variable& a, double s);
Variable add_scalar(const Variable& a, double s);
Variable scale(const Variable& a, const Variable& s);
Variable matmul(const Variable& a, const Variable& b);

Variable relu(const Variable& a);
Variable abs(const Variable& a);
/// Derivative at 0 is taken as 0.
Variable sqrt(const Variable& a);
Variable square(const Variable& a);
Variable exp(const Variable& a);
Variable sigmoid(const Variable& a);

Variable sum(const Variable& a);
Variable mean(const Variable& a);
Variable sum_axis(const Variable& a, std::size_t axis);
Variable broadcast_axis(const Variable& a, std::size_t axis, std::size_t n);

Variable reshape(const Variable& a, Shape shape);
Variable slice(const Variable& a, std::size_t axis, std::size_t start, std::size_t length);
Variable concat(std::span<const Variable> parts, std::size_t axis);
Variable permute(const Variable& a, const std::vector<std::size_t>& perm);
Variable pad(const Variable& a, std::size_t amount, PadMode mode);
Variable crop(const Variable& a, std::size_t top, std::size_t left, std::size_t height,
              std::size_t width);
Variable conv2d(const Variable& input, const Variable& weight, const Variable* bias,
                std::size_t dilation = 1);

Variable complex_mul(const Variable& a, const Variable& b);
Variable complex_conj(const Variable& a);
/// Modulus with derivative 0 at the origin.
Variable complex_abs(const Variable& a);
Variable to_complex(const Variable& real);
Variable fft2c(const Variable& a);
Variable ifft2c(const Variable& a);
Variable mask_apply(const Variable& a, const Tensor& grid);

inline Variable operator+(const Variable& a, const Variable& b) { return add(a, b); }
inline Variable operator-(const Variable& a, const Variable& b) { return sub(a, b); }
inline Variable operator*(const Variable& a, const Variable& b) { return mul(a, b); }
inline Variable operator/(const Variable& a, const Variable& b) { return div(a, b); }
inline Variable operator*(double s, const Variable& a) { return scalar_mul(a, s); }
inline Variable operator*(const Variable& a, double s) { return scalar_mul(a, s); }
inline Variable operator+(const Variable& a, double s) { return add_scalar(a, s); }
inline Variable operator-(const Variable& a, double s) { return add_scalar(a, -s); }

// Helpers that let numerical code be written once for Tensor and Variable.
inline const Tensor& value_of(const Tensor& t) { return t; }
inline const Tensor& value_of(const Variable& v) { return v.value(); }
/// Wraps a constant in the same representation as `like`.
inline Tensor lift(const Tensor&, Tensor t) { return t; }
inline Variable lift(const Variable& like, Tensor t) { return like.tape().constant(std::move(t)); }

/// Builds a scalar loss on a fresh tape from leaf variables.
using GraphBuilder = std::function<Variable(Tape&, std::span<const Variable>)>;

/// Max over coordinates of |analytic - central difference| / max(1, |central difference|).
/// With max_coords > 0 only that many coordinates, drawn uniformly with `seed`,
/// are checked.
double grad_check(const GraphBuilder& f, const std::vector<Tensor>& point, double h,
                  std::size_t max_coords = 0, std::uint64_t seed = 0);

/// Single-input convenience overload.
double grad_check(const std::function<Variable(Tape&, const Variable&)>& f, const Tensor& point,
                  double h);

}  // namespace jssl
