#pragma once

#include <span>
#include <vector>

namespace clt {

/// Full linear convolution (length a.size() + b.size() - 1) computed by a
/// zero-padded real FFT of power-of-two length.
std::vector<double> linear_convolution(std::span<const double> a, std::span<const double> b);

std::size_t next_pow2(std::size_t n);

}  // namespace clt
