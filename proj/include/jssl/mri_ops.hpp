#pragma once

#include <cstdint>

#include "jssl/autodiff.hpp"
#include "jssl/error.hpp"
#include "jssl/tensor.hpp"

// Multi-coil measurement model. Every operator is written once for T = Tensor
// or T = Variable; the Variable form records on the tape.
//
// Shapes: images (nx, ny, 2); k-space and maps (nc, nx, ny, 2); masks (nx, ny).

namespace jssl {

void check_image(const char* op, const Tensor& x);
void check_kspace(const char* op, const Tensor& y);
void check_maps(const char* op, const Tensor& y, const Tensor& s);
void check_mask(const char* op, const Tensor& y, const Tensor& grid);

/// E_S: image -> coil images.
template <class T>
T expand_coils(const T& x, const T& s) {
  check_image("expand_coils", value_of(x));
  const Tensor& sv = value_of(s);
  check_kspace("expand_coils", sv);
  if (sv.dim(1) != value_of(x).dim(0) || sv.dim(2) != value_of(x).dim(1))
    throw ShapeError("expand_coils: image " + to_string(value_of(x).shape()) + " vs maps " +
                     to_string(sv.shape()));
  return complex_mul(broadcast_axis(x, 0, sv.dim(0)), s);
}

/// R_S: coil images -> image, sum_k conj(S_k) c_k.
template <class T>
T reduce_coils(const T& c, const T& s) {
  check_maps("reduce_coils", value_of(c), value_of(s));
  return sum_axis(complex_mul(complex_conj(s), c), 0);
}

/// U_M.
template <class T>
T apply_mask(const T& y, const Tensor& grid) {
  check_mask("apply_mask", value_of(y), grid);
  return mask_apply(y, grid);
}

/// A = U_M F E_S.
template <class T>
T forward_operator(const T& x, const Tensor& grid, const T& s) {
  return apply_mask(fft2c(expand_coils(x, s)), grid);
}

/// A* = R_S F^-1 U_M.
template <class T>
T adjoint_operator(const T& y, const Tensor& grid, const T& s) {
  return reduce_coils(ifft2c(apply_mask(y, grid)), s);
}

/// (sum_k |F^-1 y_k|^2)^(1/2), shape (nx, ny).
template <class T>
T rss_reconstruct(const T& y) {
  check_kspace("rss_reconstruct", value_of(y));
  return sqrt(sum_axis(sum_axis(square(ifft2c(y)), 3), 0));
}

/// |R_S F^-1 y|, shape (nx, ny).
template <class T>
T sense_reconstruct(const T& y, const T& s) {
  check_maps("sense_reconstruct", value_of(y), value_of(s));
  return complex_abs(reduce_coils(ifft2c(y), s));
}

/// DC_M(w1, w2) = U_M w1 + U_{M^c} w2.
Tensor complement(const Tensor& grid);

template <class T>
T dc_operator(const T& w1, const T& w2, const Tensor& grid) {
  require_same_shape("dc_operator", value_of(w1), value_of(w2));
  return apply_mask(w1, grid) + apply_mask(w2, complement(grid));
}

/// A(x) + e, with e complex Gaussian of per-component std `noise_sigma` at
/// sampled positions only.
Tensor simulate_acquisition(const Tensor& x, const Tensor& grid, const Tensor& s,
                            double noise_sigma, std::uint64_t seed);

/// Real inner product over all (re, im) components, i.e. Re<a, b>.
inline double re_inner(const Tensor& a, const Tensor& b) { return dot(a, b); }

}  // namespace jssl
