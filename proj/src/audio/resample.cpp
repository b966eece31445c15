#include "dsd/audio/resample.hpp"

#include <algorithm>
#include <cmath>

namespace dsd::audio {

double bessel_i0(double x) {
  // Power series; converges fast for the argument range a Kaiser window uses.
  const double half = x * 0.5;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

namespace {

constexpr int kZeroCrossings = 32;
// Kaiser shape for roughly 80 dB stopband attenuation.
constexpr double kBeta = 7.857;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace

std::vector<double> resample(const std::vector<double>& in, double in_rate, double out_rate) {
  if (in_rate == out_rate) return in;
  const double ratio = out_rate / in_rate;
  const int64_t out_len = std::llround(static_cast<double>(in.size()) * ratio);
  std::vector<double> out(static_cast<size_t>(std::max<int64_t>(out_len, 0)), 0.0);
  if (in.empty() || out.empty()) return out;

  // When decimating, the anti-alias cutoff shrinks with the ratio and the
  // kernel widens to keep the same number of zero crossings.
  const double scale = std::min(1.0, ratio);
  const double width = kZeroCrossings / scale;
  const double inv_i0_beta = 1.0 / bessel_i0(kBeta);
  const int64_t n = static_cast<int64_t>(in.size());

  for (int64_t m = 0; m < out_len; ++m) {
    const double center = m / ratio;
    const int64_t j0 = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(center - width)));
    const int64_t j1 = std::min(n - 1, static_cast<int64_t>(std::floor(center + width)));
    double acc = 0.0;
    double wsum = 0.0;
    for (int64_t j = j0; j <= j1; ++j) {
      const double t = j - center;
      const double u = t / width;
      const double win = bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - u * u))) * inv_i0_beta;
      const double coeff = sinc(scale * t) * win;
      acc += coeff * in[static_cast<size_t>(j)];
      wsum += coeff;
    }
    out[static_cast<size_t>(m)] = wsum != 0.0 ? acc / wsum : 0.0;
  }
  return out;
}

}  // namespace dsd::audio
