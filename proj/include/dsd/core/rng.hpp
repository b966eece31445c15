#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace dsd {

/// Counter-style splitmix64 generator. One u64 of state, so streams are
/// trivially serializable into checkpoints and replay is step-identical.
/// All randomness in the project flows through explicitly seeded Rng
/// instances; nothing draws from global state.
class Rng {
 public:
  Rng() : state_(0) {}
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  uint64_t uniform_index(uint64_t n) {
    // Multiply-shift bounded draw; deterministic and unbiased enough for
    // data shuffling and grid sampling.
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller. Draws two uniforms per call and keeps
  /// no cached half, so the state alone replays the sequence.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  /// Gamma(k, 1) for small integer k as a sum of exponentials.
  double gamma_int(int k) {
    double prod = 1.0;
    for (int i = 0; i < k; ++i) {
      double u = uniform();
      if (u < 1e-300) u = 1e-300;
      prod *= u;
    }
    return -std::log(prod);
  }

  /// Beta(2, 5), the smoothing distribution used by feature blending.
  double beta_2_5() {
    double x = gamma_int(2);
    double y = gamma_int(5);
    return x / (x + y);
  }

  /// Derive an independently seeded stream for a named purpose.
  Rng derive(std::string_view name) const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : name) {
      h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
      h *= 0x100000001b3ull;
    }
    Rng r(state_ ^ h);
    r.next_u64();
    return Rng(r.next_u64());
  }

  Rng derive(std::string_view name, uint64_t index) const {
    Rng r = derive(name);
    r.state_ ^= 0x9e3779b97f4a7c15ull * (index + 1);
    return Rng(r.next_u64());
  }

  /// In-place Fisher-Yates shuffle with a platform-independent draw.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace dsd
