#include "jssl/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>

#include "jssl/error.hpp"
#include "kernels.hpp"

namespace jssl {

using detail::accumulate;

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::div: return "div";
    case OpKind::scalar_mul: return "scalar_mul";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::scale: return "scale";
    case OpKind::matmul: return "matmul";
    case OpKind::conv2d: return "conv2d";
    case OpKind::relu: return "relu";
    case OpKind::abs: return "abs";
    case OpKind::sqrt: return "sqrt";
    case OpKind::square: return "square";
    case OpKind::exp: return "exp";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::sum_axis: return "sum_axis";
    case OpKind::broadcast_axis: return "broadcast_axis";
    case OpKind::reshape: return "reshape";
    case OpKind::slice: return "slice";
    case OpKind::concat: return "concat";
    case OpKind::permute: return "permute";
    case OpKind::pad: return "pad";
    case OpKind::crop: return "crop";
    case OpKind::complex_mul: return "complex_mul";
    case OpKind::complex_conj: return "complex_conj";
    case OpKind::complex_abs: return "complex_abs";
    case OpKind::to_complex: return "to_complex";
    case OpKind::fft2c: return "fft2c";
    case OpKind::ifft2c: return "ifft2c";
    case OpKind::mask_apply: return "mask_apply";
  }
  return "unknown";
}

const Tensor& Variable::value() const { return tape_->value(id_); }
bool Variable::requires_grad() const { return tape_->requires_grad(id_); }

Tensor Gradients::operator[](const Variable& v) const {
  if (v.id() < grads_.size() && grads_[v.id()]) return *grads_[v.id()];
  return Tensor(v.shape());
}

bool Gradients::reached(const Variable& v) const {
  return v.id() < grads_.size() && grads_[v.id()].has_value();
}

Tape::Tape() {
  static std::atomic<std::uint64_t> next{1};
  uid_ = next.fetch_add(1);
}

Variable Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{OpKind::leaf, std::move(value), requires_grad, {}, {}});
  return Variable(this, nodes_.size() - 1);
}

Variable Tape::record(OpKind kind, std::vector<Variable> inputs, Tensor value, BackwardFn backward) {
  bool needs = false;
  std::vector<std::size_t> ids;
  ids.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (&in.tape() != this)
      throw Error(std::string(op_name(kind)) + ": input variable belongs to a different tape");
    needs = needs || in.requires_grad();
    ids.push_back(in.id());
  }
  nodes_.push_back(Node{kind, std::move(value), needs, std::move(ids),
                        needs ? std::move(backward) : BackwardFn{}});
  return Variable(this, nodes_.size() - 1);
}

Gradients Tape::backward(const Variable& loss) const {
  if (&loss.tape() != this) throw Error("backward: loss belongs to a different tape");
  if (loss.value().size() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " + to_string(loss.shape()));
  Gradients out;
  out.tape_ = this;
  out.grads_.resize(nodes_.size());
  out.grads_[loss.id()] = Tensor(loss.shape(), 1.0);
  std::vector<Tensor*> sinks;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!out.grads_[i] || !node.backward) continue;
    sinks.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const std::size_t in = node.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      if (!out.grads_[in]) out.grads_[in] = Tensor(nodes_[in].value.shape());
      sinks[k] = &*out.grads_[in];
    }
    node.backward(*this, *out.grads_[i], sinks);
    // Interior gradients are no longer needed once propagated.
    if (node.kind != OpKind::leaf && i != loss.id()) out.grads_[i].reset();
  }
  return out;
}

namespace {

Tape& common_tape(const char* op, std::initializer_list<const Variable*> vars) {
  Tape* t = &(*vars.begin())->tape();
  for (const auto* v : vars)
    if (&v->tape() != t) throw Error(std::string(op) + ": variables from different tapes");
  return *t;
}

template <class F>
void each(Tensor& acc, const Tensor& g, F f) {
  auto a = acc.data();
  auto gd = g.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += f(gd[i], i);
}

}  // namespace

Variable add(const Variable& a, const Variable& b) {
  auto& t = common_tape("add", {&a, &b});
  return t.record(OpKind::add, {a, b}, add(a.value(), b.value()),
                  [](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                    if (s[0]) accumulate(*s[0], g);
                    if (s[1]) accumulate(*s[1], g);
                  });
}

Variable sub(const Variable& a, const Variable& b) {
  auto& t = common_tape("sub", {&a, &b});
  return t.record(OpKind::sub, {a, b}, sub(a.value(), b.value()),
                  [](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                    if (s[0]) accumulate(*s[0], g);
                    if (s[1]) each(*s[1], g, [](double gv, std::size_t) { return -gv; });
                  });
}

Variable mul(const Variable& a, const Variable& b) {
  auto& t = common_tape("mul", {&a, &b});
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::mul, {a, b}, mul(a.value(), b.value()),
                  [ia, ib](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                    const Tensor& av = tp.value(ia);
                    const Tensor& bv = tp.value(ib);
                    if (s[0]) each(*s[0], g, [&](double gv, std::size_t i) { return gv * bv[i]; });
                    if (s[1]) each(*s[1], g, [&](double gv, std::size_t i) { return gv * av[i]; });
                  });
}

Variable div(const Variable& a, const Variable& b) {
  auto& t = common_tape("div", {&a, &b});
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::div, {a, b}, div(a.value(), b.value()),
                  [ia, ib](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                    const Tensor& av = tp.value(ia);
                    const Tensor& bv = tp.value(ib);
                    if (s[0]) each(*s[0], g, [&](double gv, std::size_t i) { return gv / bv[i]; });
                    if (s[1])
                      each(*s[1], g, [&](double gv, std::size_t i) {
                        return -gv * av[i] / (bv[i] * bv[i]);
                      });
                  });
}

Variable scalar_mul(const Variable& a, double c) {
  return a.tape().record(OpKind::scalar_mul, {a}, scalar_mul(a.value(), c),
                         [c](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                           each(*s[0], g, [c](double gv, std::size_t) { return c * gv; });
                         });
}

Variable add_scalar(const Variable& a, double c) {
  return a.tape().record(OpKind::add_scalar, {a}, add_scalar(a.value(), c),
                         [](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(*s[0], g);
                         });
}

Variable scale(const Variable& a, const Variable& c) {
  auto& t = common_tape("scale", {&a, &c});
  if (c.value().size() != 1)
    throw ShapeError("scale: factor must have one element, got " + to_string(c.shape()));
  const std::size_t ia = a.id(), ic = c.id();
  return t.record(OpKind::scale, {a, c}, scale(a.value(), c.value()),
                  [ia, ic](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                    const double cv = tp.value(ic)[0];
                    if (s[0]) each(*s[0], g, [cv](double gv, std::size_t) { return cv * gv; });
                    if (s[1]) (*s[1])[0] += dot(g, tp.value(ia));
                  });
}

Variable matmul(const Variable& a, const Variable& b) {
  auto& t = common_tape("matmul", {&a, &b});
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::matmul, {a, b}, matmul(a.value(), b.value()),
                  [ia, ib](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                    const Tensor& av = tp.value(ia);
                    const Tensor& bv = tp.value(ib);
                    if (s[0]) accumulate(*s[0], matmul(g, permute(bv, {1, 0})));
                    if (s[1]) accumulate(*s[1], matmul(permute(av, {1, 0}), g));
                  });
}

Variable relu(const Variable& a) {
  const std::size_t ia = a.id();
  return a.tape().record(OpKind::relu, {a}, relu(a.value()),
                         [ia](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                           const Tensor& av = tp.value(ia);
                           each(*s[0], g, [&](double gv, std::size_t i) {
                             return av[i] > 0.0 ? gv : 0.0;
                           });
                         });
}

Variable abs(const Variable& a) {
  const std::size_t ia = a.id();
  return a.tape().record(OpKind::abs, {a}, abs(a.value()),
                         [ia](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                           const Tensor& av = tp.value(ia);
                           each(*s[0], g, [&](double gv, std::size_t i) {
                             return av[i] > 0.0 ? gv : (av[i] < 0.0 ? -gv : 0.0);
                           });
                         });
}

Variable sqrt(const Variable& a) {
  auto& t = a.tape();
  Variable out;
  const std::size_t next = t.size();
  out = t.record(OpKind::sqrt, {a}, sqrt(a.value()),
                 [next](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                   const Tensor& ov = tp.value(next);
                   each(*s[0], g, [&](double gv, std::size_t i) {
                     return ov[i] > 0.0 ? gv / (2.0 * ov[i]) : 0.0;
                   });
                 });
  return out;
}

Variable square(const Variable& a) {
  const std::size_t ia = a.id();
  return a.tape().record(OpKind::square, {a}, square(a.value()),
                         [ia](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                           const Tensor& av = tp.value(ia);
                           each(*s[0], g, [&](double gv, std::size_t i) { return 2.0 * av[i] * gv; });
                         });
}

Variable exp(const Variable& a) {
  auto& t = a.tape();
  const std::size_t next = t.size();
  return t.record(OpKind::exp, {a}, exp(a.value()),
                  [next](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                    const Tensor& ov = tp.value(next);
                    each(*s[0], g, [&](double gv, std::size_t i) { return gv * ov[i]; });
                  });
}

Variable sigmoid(const Variable& a) {
  auto& t = a.tape();
  const std::size_t next = t.size();
  return t.record(OpKind::sigmoid, {a}, sigmoid(a.value()),
                  [next](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                    const Tensor& ov = tp.value(next);
                    each(*s[0], g, [&](double gv, std::size_t i) {
                      return gv * ov[i] * (1.0 - ov[i]);
                    });
                  });
}

Variable sum(const Variable& a) {
  return a.tape().record(OpKind::sum, {a}, sum(a.value()),
                         [](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                           const double gv = g[0];
                           each(*s[0], *s[0], [gv](double, std::size_t) { return gv; });
                         });
}

Variable mean(const Variable& a) {
  const double inv = 1.0 / static_cast<double>(a.value().size());
  return a.tape().record(OpKind::mean, {a}, mean(a.value()),
                         [inv](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                           const double gv = g[0] * inv;
                           each(*s[0], *s[0], [gv](double, std::size_t) { return gv; });
                         });
}

Variable sum_axis(const Variable& a, std::size_t axis) {
  const std::size_t n = a.value().ndim() > axis ? a.value().dim(axis) : 0;
  return a.tape().record(OpKind::sum_axis, {a}, sum_axis(a.value(), axis),
                         [axis, n](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(*s[0], broadcast_axis(g, axis, n));
                         });
}

Variable broadcast_axis(const Variable& a, std::size_t axis, std::size_t n) {
  return a.tape().record(OpKind::broadcast_axis, {a}, broadcast_axis(a.value(), axis, n),
                         [axis](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(*s[0], sum_axis(g, axis));
                         });
}

Variable reshape(const Variable& a, Shape shape) {
  const Shape original = a.shape();
  return a.tape().record(OpKind::reshape, {a}, reshape(a.value(), std::move(shape)),
                         [original](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(*s[0], reshape(g, original));
                         });
}

Variable slice(const Variable& a, std::size_t axis, std::size_t start, std::size_t length) {
  return a.tape().record(
      OpKind::slice, {a}, slice(a.value(), axis, start, length),
      [axis, start, length](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
        Tensor& acc = *s[0];
        const auto& sh = acc.shape();
        const std::size_t outer = numel(Shape(sh.begin(), sh.begin() + static_cast<long>(axis)));
        const std::size_t n = sh[axis];
        const std::size_t inner = numel(Shape(sh.begin() + static_cast<long>(axis) + 1, sh.end()));
        for (std::size_t p = 0; p < outer; ++p)
          for (std::size_t i = 0; i < length * inner; ++i)
            acc[(p * n + start) * inner + i] += g[p * length * inner + i];
      });
}

Variable concat(std::span<const Variable> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::vector<Tensor> values;
  std::vector<std::size_t> sizes;
  values.reserve(parts.size());
  for (const auto& p : parts) {
    if (&p.tape() != &parts[0].tape()) throw Error("concat: variables from different tapes");
    values.push_back(p.value());
    sizes.push_back(p.value().ndim() > axis ? p.value().dim(axis) : 0);
  }
  Tensor out = concat(std::span<const Tensor>(values), axis);
  return parts[0].tape().record(
      OpKind::concat, std::vector<Variable>(parts.begin(), parts.end()), std::move(out),
      [axis, sizes](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
          if (s[k]) accumulate(*s[k], slice(g, axis, offset, sizes[k]));
          offset += sizes[k];
        }
      });
}

Variable permute(const Variable& a, const std::vector<std::size_t>& perm) {
  Tensor out = permute(a.value(), perm);
  std::vector<std::size_t> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = i;
  return a.tape().record(OpKind::permute, {a}, std::move(out),
                         [inverse](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(*s[0], permute(g, inverse));
                         });
}

Variable pad(const Variable& a, std::size_t amount, PadMode mode) {
  const Shape original = a.shape();
  return a.tape().record(
      OpKind::pad, {a}, pad(a.value(), amount, mode),
      [original, amount, mode](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
        accumulate(*s[0], detail::pad_adjoint(g, original, amount, mode));
      });
}

Variable crop(const Variable& a, std::size_t top, std::size_t left, std::size_t height,
              std::size_t width) {
  return a.tape().record(
      OpKind::crop, {a}, crop(a.value(), top, left, height, width),
      [top, left, height, width](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
        Tensor& acc = *s[0];
        const std::size_t h = acc.dim(acc.ndim() - 2), w = acc.dim(acc.ndim() - 1);
        const std::size_t planes = acc.size() / (h * w);
        for (std::size_t p = 0; p < planes; ++p)
          for (std::size_t i = 0; i < height; ++i)
            for (std::size_t j = 0; j < width; ++j)
              acc[(p * h + top + i) * w + left + j] += g[(p * height + i) * width + j];
      });
}

Variable conv2d(const Variable& input, const Variable& weight, const Variable* bias,
                std::size_t dilation) {
  auto& t = common_tape("conv2d", {&input, &weight});
  if (bias && &bias->tape() != &t) throw Error("conv2d: bias from a different tape");
  Tensor out = conv2d(input.value(), weight.value(), bias ? &bias->value() : nullptr, dilation);
  std::vector<Variable> ins{input, weight};
  if (bias) ins.push_back(*bias);
  const std::size_t ii = input.id(), iw = weight.id();
  return t.record(OpKind::conv2d, std::move(ins), std::move(out),
                  [ii, iw, dilation](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                    detail::conv2d_backward(tp.value(ii), tp.value(iw), g, dilation, s[0], s[1],
                                            s.size() > 2 ? s[2] : nullptr);
                  });
}

Variable complex_mul(const Variable& a, const Variable& b) {
  auto& t = common_tape("complex_mul", {&a, &b});
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::complex_mul, {a, b}, complex_mul(a.value(), b.value()),
                  [ia, ib](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                    if (s[0]) accumulate(*s[0], complex_mul(g, complex_conj(tp.value(ib))));
                    if (s[1]) accumulate(*s[1], complex_mul(g, complex_conj(tp.value(ia))));
                  });
}

Variable complex_conj(const Variable& a) {
  return a.tape().record(OpKind::complex_conj, {a}, complex_conj(a.value()),
                         [](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(*s[0], complex_conj(g));
                         });
}

Variable complex_abs(const Variable& a) {
  const std::size_t ia = a.id();
  auto& t = a.tape();
  const std::size_t next = t.size();
  return t.record(OpKind::complex_abs, {a}, complex_abs(a.value()),
                  [ia, next](const Tape& tp, const Tensor& g, std::span<Tensor* const> s) {
                    const Tensor& av = tp.value(ia);
                    const Tensor& ov = tp.value(next);
                    Tensor& acc = *s[0];
                    for (std::size_t i = 0; i < ov.size(); ++i) {
                      if (ov[i] <= 0.0) continue;
                      const double f = g[i] / ov[i];
                      acc[2 * i] += f * av[2 * i];
                      acc[2 * i + 1] += f * av[2 * i + 1];
                    }
                  });
}

Variable to_complex(const Variable& real) {
  return real.tape().record(OpKind::to_complex, {real}, to_complex(real.value()),
                            [](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                              Tensor& acc = *s[0];
                              for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[2 * i];
                            });
}

Variable fft2c(const Variable& a) {
  return a.tape().record(OpKind::fft2c, {a}, fft2c(a.value()),
                         [](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(*s[0], ifft2c(g));
                         });
}

Variable ifft2c(const Variable& a) {
  return a.tape().record(OpKind::ifft2c, {a}, ifft2c(a.value()),
                         [](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(*s[0], fft2c(g));
                         });
}

Variable mask_apply(const Variable& a, const Tensor& grid) {
  return a.tape().record(OpKind::mask_apply, {a}, mask_apply(a.value(), grid),
                         [grid](const Tape&, const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(*s[0], mask_apply(g, grid));
                         });
}

double grad_check(const GraphBuilder& f, const std::vector<Tensor>& point, double h,
                  std::size_t max_coords, std::uint64_t seed) {
  if (h <= 0.0) throw ConfigError("grad_check: step must be positive");
  auto evaluate = [&](const std::vector<Tensor>& at) {
    Tape tape;
    std::vector<Variable> leaves;
    for (const auto& p : at) leaves.push_back(tape.leaf(p));
    return f(tape, leaves).value().item();
  };

  Tape tape;
  std::vector<Variable> leaves;
  for (const auto& p : point) leaves.push_back(tape.leaf(p));
  const Variable loss = f(tape, leaves);
  const Gradients grads = tape.backward(loss);

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < point.size(); ++k)
    for (std::size_t i = 0; i < point[k].size(); ++i) coords.emplace_back(k, i);
  if (max_coords > 0 && coords.size() > max_coords) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }

  double worst = 0.0;
  std::vector<Tensor> probe = point;
  for (const auto& [k, i] : coords) {
    const double x0 = point[k][i];
    probe[k][i] = x0 + h;
    const double fp = evaluate(probe);
    probe[k][i] = x0 - h;
    const double fm = evaluate(probe);
    probe[k][i] = x0;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = grads[leaves[k]][i];
    worst = std::max(worst, std::fabs(analytic - numeric) / std::max(1.0, std::fabs(numeric)));
  }
  return worst;
}

double grad_check(const std::function<Variable(Tape&, const Variable&)>& f, const Tensor& point,
                  double h) {
  return grad_check(
      [&f](Tape& t, std::span<const Variable> xs) { return f(t, xs[0]); },
      std::vector<Tensor>{point}, h);
}

}  // namespace jssl
