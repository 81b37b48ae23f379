#include "bc/fft.hpp"

#include "bc/errors.hpp"

#include <cmath>

namespace bc {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_inplace(std::vector<std::complex<double>>& data, bool inverse) {
    const std::size_t n = data.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw ValidationError("fft size must be a nonzero power of two");

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        double angle = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wlen(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = data[i + k];
                std::complex<double> v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }

    if (inverse) {
        for (auto& x : data) x /= static_cast<double>(n);
    }
}

std::vector<double> power_spectrum(const std::vector<double>& signal, std::size_t fft_size) {
    if (fft_size < signal.size())
        throw ValidationError("fft_size smaller than signal");
    std::vector<std::complex<double>> buf(fft_size, {0.0, 0.0});
    for (std::size_t i = 0; i < signal.size(); ++i) buf[i] = {signal[i], 0.0};
    fft_inplace(buf);
    std::vector<double> power(fft_size / 2 + 1);
    for (std::size_t k = 0; k <= fft_size / 2; ++k) power[k] = std::norm(buf[k]);
    return power;
}

} // namespace bc
