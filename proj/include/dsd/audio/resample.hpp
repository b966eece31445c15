#pragma once

#include <cstdint>
#include <vector>

namespace dsd::audio {

// Kaiser-windowed sinc rate conversion. Output length is
// llround(input_length * out_rate / in_rate); equal rates return the input
// unchanged. The filter is normalized per output sample so constant signals
// pass through exactly, and the cutoff tracks the lower of the two rates.
std::vector<double> resample(const std::vector<double>& in, double in_rate, double out_rate);

/// Zeroth-order modified Bessel function of the first kind (series form).
double bessel_i0(double x);

}  // namespace dsd::audio
