#pragma once

#include "jssl/tensor.hpp"

namespace jssl::detail {

/// Adjoint of pad(): folds a gradient on the padded grid back onto the input.
Tensor pad_adjoint(const Tensor& grad, const Shape& input_shape, std::size_t amount, PadMode mode);

/// Accumulates conv2d gradients into the non-null outputs.
void conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                     std::size_t dilation, Tensor* grad_input, Tensor* grad_weight,
                     Tensor* grad_bias);

/// acc += g
void accumulate(Tensor& acc, const Tensor& g);

}  // namespace jssl::detail
