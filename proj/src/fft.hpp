#pragma once

#include <cstddef>
#include <span>

namespace jssl::detail {

/// Centered orthonormal 2-D transform of one (nx, ny) complex plane stored as
/// interleaved (re, im) doubles.
void fft2c_plane(std::span<const double> in, std::span<double> out, std::size_t nx,
                 std::size_t ny, bool forward);

}  // namespace jssl::detail
