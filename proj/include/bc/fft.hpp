#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace bc {

// In-place iterative radix-2 FFT. size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& data, bool inverse = false);

// Power spectrum |X_k|^2 for k = 0..n/2 of a real signal zero-padded to
// n = next power of two >= fft_size (callers pass the padded size).
std::vector<double> power_spectrum(const std::vector<double>& signal, std::size_t fft_size);

std::size_t next_pow2(std::size_t n);

} // namespace bc
