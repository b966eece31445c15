#include "dsd/core/tensor.hpp"

#include <cmath>

namespace dsd {

bool all_finite(const Tensor& t) {
  const float* p = t.data();
  for (int64_t i = 0; i < t.numel(); ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

}  // namespace dsd
