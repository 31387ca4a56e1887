#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace jssl {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles. Complex data carries a trailing axis of
/// extent 2 holding (re, im).
class Tensor {
 public:
  /// Scalar zero with shape [].
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  /// Same as the (shape, data) constructor but also rejects NaN/Inf.
  static Tensor from_external(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  /// Value of a one-element tensor.
  double item() const;
  bool all_finite() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Elementwise arithmetic. Shapes must match exactly (no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
/// Multiplies every element of `a` by the one-element tensor `s`.
Tensor scale(const Tensor& a, const Tensor& s);

Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sigmoid(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_axis(const Tensor& a, std::size_t axis);
/// Inserts a new axis of extent n at position `axis`, replicating the data.
Tensor broadcast_axis(const Tensor& a, std::size_t axis, std::size_t n);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, Shape shape);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm);

enum class PadMode { zero, replicate, reflect };

/// Pads the last two axes by `amount` on every side.
Tensor pad(const Tensor& a, std::size_t amount, PadMode mode);
/// Crops the last two axes to [top, top+height) x [left, left+width).
Tensor crop(const Tensor& a, std::size_t top, std::size_t left, std::size_t height,
            std::size_t width);

/// Valid 2-D correlation. input (C, H, W), weight (O, C, kh, kw), optional
/// bias (O). Output (O, H - d(kh-1), W - d(kw-1)).
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor* bias,
              std::size_t dilation = 1);

// Complex helpers over the trailing (re, im) axis.
Tensor complex_mul(const Tensor& a, const Tensor& b);
Tensor complex_conj(const Tensor& a);
/// Modulus; drops the trailing axis.
Tensor complex_abs(const Tensor& a);
/// Embeds a real tensor as complex with zero imaginary part.
Tensor to_complex(const Tensor& real);

/// Centered orthonormal 2-D FFT over axes (-3, -2) of a (..., nx, ny, 2) tensor.
Tensor fft2c(const Tensor& a);
Tensor ifft2c(const Tensor& a);

/// Multiplies a (..., nx, ny, 2) tensor by a binary (nx, ny) grid.
Tensor mask_apply(const Tensor& a, const Tensor& grid);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scalar_mul(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return scalar_mul(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }

// Reductions used by tests and metrics.
double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
double min_value(const Tensor& a);
double max_value(const Tensor& a);

void require_same_shape(const char* op, const Tensor& a, const Tensor& b);

}  // namespace jssl
