#include "dsd/nn/augmentation.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dsd::nn {

namespace {

constexpr double kSigmaFloor = 1e-12;

struct RowStats {
  double mean;
  double sigma;
};

RowStats row_stats(const Tensor& z, int64_t row, int64_t n) {
  double sum = 0.0;
  for (int64_t k = 0; k < n; ++k) sum += static_cast<double>(z[row * n + k]);
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (int64_t k = 0; k < n; ++k) {
    const double d = static_cast<double>(z[row * n + k]) - mean;
    sq += d * d;
  }
  const double sigma = std::sqrt(sq / static_cast<double>(n));
  if (sigma < kSigmaFloor) {
    throw std::runtime_error("blend: feature row " + std::to_string(row) +
                             " is constant, no scale to mix");
  }
  return {mean, sigma};
}

}  // namespace

BlendPlan sample_blend_plan(const std::vector<int>& labels, int64_t feature_dim,
                            const BlendConfig& cfg, Rng& rng) {
  const size_t b = labels.size();
  std::vector<std::vector<int64_t>> by_class(2);
  for (size_t i = 0; i < b; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("blend: labels must be 0/1");
    by_class[static_cast<size_t>(labels[i])].push_back(static_cast<int64_t>(i));
  }

  BlendPlan plan;
  plan.partner.resize(b);
  plan.r.resize(b);
  plan.noise_scale.resize(b);
  plan.noise_add.assign(b, std::vector<double>(static_cast<size_t>(feature_dim)));
  for (size_t i = 0; i < b; ++i) {
    const auto& group = by_class[static_cast<size_t>(labels[i])];
    plan.partner[i] = group[rng.uniform_index(group.size())];
    plan.r[i] = rng.uniform(0.5, 1.0);

    const double s1 = rng.uniform(0.0, cfg.noise_eta);
    const double b1 = rng.beta_2_5();
    const double u1 = rng.uniform(-1.0, 1.0);
    plan.noise_scale[i] = s1 * b1 * u1 + 1.0;

    const double s2 = rng.uniform(0.0, cfg.noise_eta);
    const double b2 = rng.beta_2_5();
    for (int64_t k = 0; k < feature_dim; ++k) {
      plan.noise_add[i][static_cast<size_t>(k)] = s2 * b2 * rng.normal();
    }
  }
  return plan;
}

Var blend_features(Tape& t, Var z, const BlendPlan& plan) {
  const Tensor& zt = t.value(z);
  if (zt.rank() != 2) throw std::invalid_argument("blend: expected (B,N) features");
  const int64_t b = zt.dim(0), n = zt.dim(1);
  if (plan.partner.size() != static_cast<size_t>(b)) {
    throw std::invalid_argument("blend: plan size does not match batch");
  }

  std::vector<RowStats> stats(static_cast<size_t>(b));
  for (int64_t i = 0; i < b; ++i) stats[static_cast<size_t>(i)] = row_stats(zt, i, n);

  Tensor out({b, n});
  std::vector<double> mixed_sigma(static_cast<size_t>(b));
  for (int64_t i = 0; i < b; ++i) {
    const int64_t j = plan.partner[static_cast<size_t>(i)];
    if (j < 0 || j >= b) throw std::out_of_range("blend: partner outside batch");
    const double r = plan.r[static_cast<size_t>(i)];
    const RowStats si = stats[static_cast<size_t>(i)];
    const RowStats sj = stats[static_cast<size_t>(j)];
    const double mu = r * si.mean + (1.0 - r) * sj.mean;
    const double sigma = r * si.sigma + (1.0 - r) * sj.sigma;
    mixed_sigma[static_cast<size_t>(i)] = sigma;
    const double n1 = plan.noise_scale[static_cast<size_t>(i)];
    const auto& n2 = plan.noise_add[static_cast<size_t>(i)];
    for (int64_t k = 0; k < n; ++k) {
      const double h = (static_cast<double>(zt[i * n + k]) - si.mean) / si.sigma;
      out[i * n + k] = static_cast<float>(n1 * (sigma * h + mu) + n2[static_cast<size_t>(k)]);
    }
  }

  // Keep what the backward needs; the input row values are read again from the
  // tape so only the per-row scalars are captured.
  return t.custom(
      std::move(out), {z},
      [z, plan, stats, mixed_sigma, b, n](Tape& tt, int32_t self) {
        const Tensor& g = tt.grad_buffer(self);
        const Tensor& zt = tt.value(z);
        Tensor& dz = tt.grad_buffer(z.id);
        const double invn = 1.0 / static_cast<double>(n);
        for (int64_t i = 0; i < b; ++i) {
          const int64_t j = plan.partner[static_cast<size_t>(i)];
          const double r = plan.r[static_cast<size_t>(i)];
          const double n1 = plan.noise_scale[static_cast<size_t>(i)];
          const RowStats si = stats[static_cast<size_t>(i)];
          const RowStats sj = stats[static_cast<size_t>(j)];
          const double sigma = mixed_sigma[static_cast<size_t>(i)];

          // Per-row reductions in double. g0 is gradient at the renormalized
          // row, G at the standardized row.
          double sum_g0 = 0.0, dot_gh = 0.0, sum_G = 0.0, dot_Gh = 0.0;
          for (int64_t k = 0; k < n; ++k) {
            const double h = (static_cast<double>(zt[i * n + k]) - si.mean) / si.sigma;
            const double g0 = n1 * static_cast<double>(g[i * n + k]);
            const double G = sigma * g0;
            sum_g0 += g0;
            dot_gh += g0 * h;
            sum_G += G;
            dot_Gh += G * h;
          }

          // Standardization backward for row i plus the mixed-moment terms.
          for (int64_t k = 0; k < n; ++k) {
            const double h = (static_cast<double>(zt[i * n + k]) - si.mean) / si.sigma;
            const double g0 = n1 * static_cast<double>(g[i * n + k]);
            const double G = sigma * g0;
            const double through_h = (G - sum_G * invn - h * dot_Gh * invn) / si.sigma;
            const double through_mix = r * invn * (sum_g0 + dot_gh * h);
            dz[i * n + k] += static_cast<float>(through_h + through_mix);
          }
          // Partner row receives gradient only through its moments.
          for (int64_t k = 0; k < n; ++k) {
            const double hj = (static_cast<double>(zt[j * n + k]) - sj.mean) / sj.sigma;
            dz[j * n + k] +=
                static_cast<float>((1.0 - r) * invn * (sum_g0 + dot_gh * hj));
          }
        }
      });
}

ShuffleResult shuffle_combine(Tape& t, Var f_c, Var f_s, const std::vector<int>& labels,
                              Rng& rng) {
  std::vector<int64_t> perm(labels.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  return shuffle_combine_with(t, f_c, f_s, labels, std::move(perm));
}

ShuffleResult shuffle_combine_with(Tape& t, Var f_c, Var f_s, const std::vector<int>& labels,
                                   std::vector<int64_t> perm) {
  const int64_t b = t.value(f_c).dim(0);
  if (perm.size() != labels.size() || static_cast<int64_t>(perm.size()) != b) {
    throw std::invalid_argument("shuffle: permutation/label size mismatch");
  }
  ShuffleResult out;
  out.labels.resize(labels.size());
  for (size_t k = 0; k < perm.size(); ++k) {
    const int64_t src = perm[k];
    if (src < 0 || src >= b) throw std::out_of_range("shuffle: bad permutation entry");
    out.labels[k] = (labels[static_cast<size_t>(src)] == 1 && labels[k] == 1) ? 1 : 0;
  }
  Var permuted = t.gather_rows(f_c, perm);
  out.fused = t.concat_cols(permuted, f_s);
  out.perm = std::move(perm);
  return out;
}

}  // namespace dsd::nn
