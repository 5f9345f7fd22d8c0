#pragma once

#include <complex>
#include <span>

namespace desatscan {

/// In-place complex DFT. Power-of-two lengths use iterative radix-2;
/// other lengths fall back to a direct O(n^2) transform.
/// The inverse is unnormalized (caller divides by n).
void fft_inplace(std::span<std::complex<double>> data, bool inverse = false);

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace desatscan
