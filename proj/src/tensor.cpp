#include "jssl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Core>

#include "fft.hpp"
#include "jssl/error.hpp"
#include "kernels.hpp"

namespace jssl {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : data_(1, 0.0) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {
  for (auto e : shape_)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto e : shape_)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape_));
  if (numel(shape_) != data_.size())
    throw ShapeError("tensor shape " + to_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::from_external(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  if (!t.all_finite()) throw NumericalError("tensor contains NaN or Inf values");
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1)
    throw ShapeError("item() requires a one-element tensor, got " + to_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

namespace {

template <class F>
Tensor zip(const char* op, const Tensor& a, const Tensor& b, F f) {
  require_same_shape(op, a, b);
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(x[i], y[i]);
  return out;
}

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(x[i]);
  return out;
}

void require_complex(const char* op, const Tensor& a) {
  if (a.ndim() == 0 || a.shape().back() != 2)
    throw ShapeError(std::string(op) + ": expected trailing complex axis of extent 2, got " +
                     to_string(a.shape()));
}

void require_min_ndim(const char* op, const Tensor& a, std::size_t n) {
  if (a.ndim() < n)
    throw ShapeError(std::string(op) + ": expected at least " + std::to_string(n) +
                     " axes, got " + to_string(a.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return zip("add", a, b, [](double x, double y) { return x + y; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return zip("sub", a, b, [](double x, double y) { return x - y; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return zip("mul", a, b, [](double x, double y) { return x * y; });
}
Tensor div(const Tensor& a, const Tensor& b) {
  return zip("div", a, b, [](double x, double y) { return x / y; });
}
Tensor scalar_mul(const Tensor& a, double s) {
  return map(a, [s](double x) { return x * s; });
}
Tensor add_scalar(const Tensor& a, double s) {
  return map(a, [s](double x) { return x + s; });
}
Tensor scale(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) throw ShapeError("scale: factor must have one element, got " + to_string(s.shape()));
  return scalar_mul(a, s[0]);
}

Tensor relu(const Tensor& a) {
  return map(a, [](double x) { return x > 0.0 ? x : 0.0; });
}
Tensor abs(const Tensor& a) {
  return map(a, [](double x) { return std::fabs(x); });
}
Tensor sqrt(const Tensor& a) {
  return map(a, [](double x) { return std::sqrt(x); });
}
Tensor square(const Tensor& a) {
  return map(a, [](double x) { return x * x; });
}
Tensor exp(const Tensor& a) {
  return map(a, [](double x) { return std::exp(x); });
}
Tensor sigmoid(const Tensor& a) {
  return map(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::scalar(s);
}

Tensor mean(const Tensor& a) { return Tensor::scalar(sum(a).item() / static_cast<double>(a.size())); }

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  if (axis >= a.ndim())
    throw ShapeError("sum_axis: axis " + std::to_string(axis) + " out of range for " +
                     to_string(a.shape()));
  const auto& s = a.shape();
  const std::size_t outer = numel(Shape(s.begin(), s.begin() + static_cast<long>(axis)));
  const std::size_t n = s[axis];
  const std::size_t inner = numel(Shape(s.begin() + static_cast<long>(axis) + 1, s.end()));
  Shape os = s;
  os.erase(os.begin() + static_cast<long>(axis));
  Tensor out(os);
  auto o = out.data();
  auto x = a.data();
  for (std::size_t p = 0; p < outer; ++p)
    for (std::size_t k = 0; k < n; ++k) {
      const double* src = x.data() + (p * n + k) * inner;
      double* dst = o.data() + p * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  return out;
}

Tensor broadcast_axis(const Tensor& a, std::size_t axis, std::size_t n) {
  if (axis > a.ndim())
    throw ShapeError("broadcast_axis: axis " + std::to_string(axis) + " out of range for " +
                     to_string(a.shape()));
  const auto& s = a.shape();
  const std::size_t outer = numel(Shape(s.begin(), s.begin() + static_cast<long>(axis)));
  const std::size_t inner = numel(Shape(s.begin() + static_cast<long>(axis), s.end()));
  Shape os = s;
  os.insert(os.begin() + static_cast<long>(axis), n);
  Tensor out(os);
  auto o = out.data();
  auto x = a.data();
  for (std::size_t p = 0; p < outer; ++p)
    for (std::size_t k = 0; k < n; ++k)
      std::copy_n(x.data() + p * inner, inner, o.data() + (p * n + k) * inner);
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * b[p * n + j];
    }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size())
    throw ShapeError("reshape: cannot reshape " + to_string(a.shape()) + " to " + to_string(shape));
  return Tensor(std::move(shape), a.vec());
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= a.ndim() || length == 0 || start + length > a.dim(axis))
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") on axis " + std::to_string(axis) +
                     " invalid for " + to_string(a.shape()));
  const auto& s = a.shape();
  const std::size_t outer = numel(Shape(s.begin(), s.begin() + static_cast<long>(axis)));
  const std::size_t n = s[axis];
  const std::size_t inner = numel(Shape(s.begin() + static_cast<long>(axis) + 1, s.end()));
  Shape os = s;
  os[axis] = length;
  Tensor out(os);
  for (std::size_t p = 0; p < outer; ++p)
    std::copy_n(a.data().data() + (p * n + start) * inner, length * inner,
                out.data().data() + p * length * inner);
  return out;
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw ShapeError("concat: axis out of range for " + to_string(s0));
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape a = p.shape(), b = s0;
    if (a.size() != b.size()) throw ShapeError("concat: rank mismatch " + to_string(a) + " vs " + to_string(b));
    a[axis] = b[axis] = 0;
    if (a != b) throw ShapeError("concat: shape mismatch " + to_string(p.shape()) + " vs " + to_string(s0));
    total += p.dim(axis);
  }
  const std::size_t outer = numel(Shape(s0.begin(), s0.begin() + static_cast<long>(axis)));
  const std::size_t inner = numel(Shape(s0.begin() + static_cast<long>(axis) + 1, s0.end()));
  Shape os = s0;
  os[axis] = total;
  Tensor out(os);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t n = p.dim(axis);
    for (std::size_t q = 0; q < outer; ++q)
      std::copy_n(p.data().data() + q * n * inner, n * inner,
                  out.data().data() + (q * total + offset) * inner);
    offset += n;
  }
  return out;
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm) {
  const std::size_t nd = a.ndim();
  if (perm.size() != nd) throw ShapeError("permute: permutation rank mismatch for " + to_string(a.shape()));
  std::vector<bool> seen(nd, false);
  for (auto p : perm) {
    if (p >= nd || seen[p]) throw ShapeError("permute: invalid permutation for " + to_string(a.shape()));
    seen[p] = true;
  }
  Shape os(nd);
  for (std::size_t i = 0; i < nd; ++i) os[i] = a.dim(perm[i]);
  std::vector<std::size_t> in_stride(nd, 1);
  for (std::size_t i = nd; i-- > 1;) in_stride[i - 1] = in_stride[i] * a.dim(i);
  Tensor out(os);
  std::vector<std::size_t> idx(nd, 0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < nd; ++i) src += idx[i] * in_stride[perm[i]];
    out[flat] = a[src];
    for (std::size_t i = nd; i-- > 0;) {
      if (++idx[i] < os[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

namespace {

std::ptrdiff_t pad_source(std::ptrdiff_t i, std::ptrdiff_t n, PadMode mode) {
  if (i >= 0 && i < n) return i;
  switch (mode) {
    case PadMode::zero:
      return -1;
    case PadMode::replicate:
      return i < 0 ? 0 : n - 1;
    case PadMode::reflect: {
      if (n == 1) return 0;
      const std::ptrdiff_t period = 2 * (n - 1);
      std::ptrdiff_t m = i % period;
      if (m < 0) m += period;
      return m < n ? m : period - m;
    }
  }
  return -1;
}

}  // namespace

Tensor pad(const Tensor& a, std::size_t amount, PadMode mode) {
  require_min_ndim("pad", a, 2);
  const std::size_t h = a.dim(a.ndim() - 2), w = a.dim(a.ndim() - 1);
  if (mode == PadMode::reflect && (amount >= h || amount >= w))
    throw ShapeError("pad: reflect padding " + std::to_string(amount) + " too large for " +
                     to_string(a.shape()));
  Shape os = a.shape();
  os[os.size() - 2] += 2 * amount;
  os[os.size() - 1] += 2 * amount;
  const std::size_t oh = os[os.size() - 2], ow = os[os.size() - 1];
  const std::size_t planes = a.size() / (h * w);
  Tensor out(os);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < oh; ++i) {
      const auto si = pad_source(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(amount),
                                 static_cast<std::ptrdiff_t>(h), mode);
      if (si < 0) continue;
      for (std::size_t j = 0; j < ow; ++j) {
        const auto sj = pad_source(static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(amount),
                                   static_cast<std::ptrdiff_t>(w), mode);
        if (sj < 0) continue;
        out[(p * oh + i) * ow + j] = a[(p * h + static_cast<std::size_t>(si)) * w + static_cast<std::size_t>(sj)];
      }
    }
  return out;
}

Tensor crop(const Tensor& a, std::size_t top, std::size_t left, std::size_t height,
            std::size_t width) {
  require_min_ndim("crop", a, 2);
  const std::size_t h = a.dim(a.ndim() - 2), w = a.dim(a.ndim() - 1);
  if (height == 0 || width == 0 || top + height > h || left + width > w)
    throw ShapeError("crop: window out of bounds for " + to_string(a.shape()));
  Shape os = a.shape();
  os[os.size() - 2] = height;
  os[os.size() - 1] = width;
  const std::size_t planes = a.size() / (h * w);
  Tensor out(os);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < height; ++i)
      std::copy_n(a.data().data() + (p * h + top + i) * w + left, width,
                  out.data().data() + (p * height + i) * width);
  return out;
}

namespace {

using RowMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row (ic, ky, kx) of `cols` holds the input window seen by that tap.
void im2col(const double* in, std::size_t c, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t dil, std::size_t oh, std::size_t ow, double* cols) {
  for (std::size_t ic = 0; ic < c; ++ic)
    for (std::size_t ky = 0; ky < kh; ++ky)
      for (std::size_t kx = 0; kx < kw; ++kx) {
        double* row = cols + ((ic * kh + ky) * kw + kx) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y)
          std::copy_n(in + (ic * h + y + ky * dil) * w + kx * dil, ow, row + y * ow);
      }
}

void col2im_add(const double* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
                std::size_t kw, std::size_t dil, std::size_t oh, std::size_t ow, double* out) {
  for (std::size_t ic = 0; ic < c; ++ic)
    for (std::size_t ky = 0; ky < kh; ++ky)
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const double* row = cols + ((ic * kh + ky) * kw + kx) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          double* dst = out + (ic * h + y + ky * dil) * w + kx * dil;
          const double* src = row + y * ow;
          for (std::size_t x = 0; x < ow; ++x) dst[x] += src[x];
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor* bias, std::size_t dilation) {
  if (input.ndim() != 3 || weight.ndim() != 4 || weight.dim(1) != input.dim(0) || dilation == 0)
    throw ShapeError("conv2d: incompatible input " + to_string(input.shape()) + " and weight " +
                     to_string(weight.shape()));
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t o = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const std::size_t span_h = dilation * (kh - 1), span_w = dilation * (kw - 1);
  if (span_h >= h || span_w >= w)
    throw ShapeError("conv2d: kernel " + to_string(weight.shape()) + " larger than input " +
                     to_string(input.shape()));
  if (bias && (bias->ndim() != 1 || bias->dim(0) != o))
    throw ShapeError("conv2d: bias " + to_string(bias->shape()) + " does not match " +
                     std::to_string(o) + " output channels");
  const std::size_t oh = h - span_h, ow = w - span_w;
  const auto rows = static_cast<Eigen::Index>(c * kh * kw), n = static_cast<Eigen::Index>(oh * ow);
  // Eigen-owned (aligned) operands keep the summation order independent of
  // where the tensors happen to live in memory.
  thread_local RowMat cols, wm, res;
  cols.resize(rows, n);
  im2col(input.data().data(), c, h, w, kh, kw, dilation, oh, ow, cols.data());
  wm = ConstRowMap(weight.data().data(), static_cast<Eigen::Index>(o), rows);
  res.noalias() = wm * cols;
  if (bias)
    for (std::size_t oc = 0; oc < o; ++oc) res.row(static_cast<Eigen::Index>(oc)).array() += (*bias)[oc];
  Tensor out({o, oh, ow});
  std::copy_n(res.data(), o * oh * ow, out.data().data());
  return out;
}

Tensor complex_mul(const Tensor& a, const Tensor& b) {
  require_complex("complex_mul", a);
  require_same_shape("complex_mul", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); i += 2) {
    const double ar = a[i], ai = a[i + 1], br = b[i], bi = b[i + 1];
    out[i] = ar * br - ai * bi;
    out[i + 1] = ar * bi + ai * br;
  }
  return out;
}

Tensor complex_conj(const Tensor& a) {
  require_complex("complex_conj", a);
  Tensor out = a;
  for (std::size_t i = 1; i < out.size(); i += 2) out[i] = -out[i];
  return out;
}

Tensor complex_abs(const Tensor& a) {
  require_complex("complex_abs", a);
  Shape os(a.shape().begin(), a.shape().end() - 1);
  Tensor out(os);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::hypot(a[2 * i], a[2 * i + 1]);
  return out;
}

Tensor to_complex(const Tensor& real) {
  Shape os = real.shape();
  os.push_back(2);
  Tensor out(os);
  for (std::size_t i = 0; i < real.size(); ++i) out[2 * i] = real[i];
  return out;
}

namespace {

Tensor fft_impl(const char* op, const Tensor& a, bool forward) {
  require_complex(op, a);
  require_min_ndim(op, a, 3);
  const std::size_t nx = a.dim(a.ndim() - 3), ny = a.dim(a.ndim() - 2);
  const std::size_t plane = 2 * nx * ny;
  const std::size_t batch = a.size() / plane;
  Tensor out(a.shape());
  for (std::size_t b = 0; b < batch; ++b)
    detail::fft2c_plane(a.data().subspan(b * plane, plane), out.data().subspan(b * plane, plane),
                        nx, ny, forward);
  return out;
}

}  // namespace

Tensor fft2c(const Tensor& a) { return fft_impl("fft2c", a, true); }
Tensor ifft2c(const Tensor& a) { return fft_impl("ifft2c", a, false); }

Tensor mask_apply(const Tensor& a, const Tensor& grid) {
  require_complex("mask_apply", a);
  if (grid.ndim() != 2 || a.ndim() < 3 || a.dim(a.ndim() - 3) != grid.dim(0) ||
      a.dim(a.ndim() - 2) != grid.dim(1))
    throw ShapeError("mask_apply: mask " + to_string(grid.shape()) + " does not match data " +
                     to_string(a.shape()));
  const std::size_t n = grid.size();
  Tensor out(a.shape());
  for (std::size_t b = 0; b < a.size() / (2 * n); ++b)
    for (std::size_t j = 0; j < n; ++j) {
      const double m = grid[j];
      const std::size_t k = 2 * (b * n + j);
      out[k] = a[k] * m;
      out[k + 1] = a[k + 1] * m;
    }
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape("dot", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::fabs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape("max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

double min_value(const Tensor& a) { return *std::min_element(a.vec().begin(), a.vec().end()); }
double max_value(const Tensor& a) { return *std::max_element(a.vec().begin(), a.vec().end()); }

namespace detail {

Tensor pad_adjoint(const Tensor& grad, const Shape& input_shape, std::size_t amount, PadMode mode) {
  Tensor out(input_shape);
  const std::size_t h = input_shape[input_shape.size() - 2], w = input_shape.back();
  const std::size_t oh = h + 2 * amount, ow = w + 2 * amount;
  const std::size_t planes = out.size() / (h * w);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < oh; ++i) {
      const auto si = pad_source(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(amount),
                                 static_cast<std::ptrdiff_t>(h), mode);
      if (si < 0) continue;
      for (std::size_t j = 0; j < ow; ++j) {
        const auto sj = pad_source(static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(amount),
                                   static_cast<std::ptrdiff_t>(w), mode);
        if (sj < 0) continue;
        out[(p * h + static_cast<std::size_t>(si)) * w + static_cast<std::size_t>(sj)] +=
            grad[(p * oh + i) * ow + j];
      }
    }
  return out;
}

void conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                     std::size_t dilation, Tensor* grad_input, Tensor* grad_weight,
                     Tensor* grad_bias) {
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t o = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const std::size_t oh = grad_out.dim(1), ow = grad_out.dim(2);
  const auto rows = static_cast<Eigen::Index>(c * kh * kw), n = static_cast<Eigen::Index>(oh * ow);
  const auto eo = static_cast<Eigen::Index>(o);
  thread_local RowMat g, cols, prod;
  g = ConstRowMap(grad_out.data().data(), eo, n);
  if (grad_bias)
    for (std::size_t oc = 0; oc < o; ++oc) (*grad_bias)[oc] += g.row(static_cast<Eigen::Index>(oc)).sum();
  if (grad_weight) {
    cols.resize(rows, n);
    im2col(input.data().data(), c, h, w, kh, kw, dilation, oh, ow, cols.data());
    prod.noalias() = g * cols.transpose();
    RowMap(grad_weight->data().data(), eo, rows) += prod;
  }
  if (grad_input) {
    prod.noalias() = ConstRowMap(weight.data().data(), eo, rows).transpose() * g;
    col2im_add(prod.data(), c, h, w, kh, kw, dilation, oh, ow, grad_input->data().data());
  }
}

void accumulate(Tensor& acc, const Tensor& g) {
  require_same_shape("accumulate", acc, g);
  auto a = acc.data();
  auto b = g.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace detail
}  // namespace jssl
