#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace dsd::audio {

/// In-place iterative radix-2 FFT. The length must be a power of two.
void fft_pow2(std::vector<std::complex<double>>& a, bool inverse = false);

/// Real-input transform returning the n/2 + 1 non-redundant bins.
std::vector<std::complex<double>> rfft(const double* in, int64_t n);

}  // namespace dsd::audio
