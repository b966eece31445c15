#pragma once

#include <cstdint>
#include <vector>

#include "dsd/core/rng.hpp"
#include "dsd/nn/tape.hpp"

namespace dsd::nn {

/// Settings for statistic-mixing feature augmentation.
struct BlendConfig {
  double noise_eta = 10.0;  // upper bound for both noise strength draws
  bool enabled = true;
};

// Everything random about one blended batch, separated from the graph op so
// tests can pin exact plans by hand. partner[i] is the same-class row whose
// statistics are mixed in; r[i] the mixing weight; noise_scale[i] the
// multiplicative factor applied to the renormalized row; noise_add[i] the
// additive per-element noise.
struct BlendPlan {
  std::vector<int64_t> partner;
  std::vector<double> r;
  std::vector<double> noise_scale;
  std::vector<std::vector<double>> noise_add;
};

// Draws a plan with a fixed per-row consumption order: partner index, r in
// [0.5,1), strength in [0,eta), Beta(2,5), one uniform in [-1,1) for the
// multiplicative noise, then strength, Beta(2,5) and feature_dim normals for
// the additive noise. The order is part of the reproducibility contract, and
// eta = 0 consumes the same draws so ablations stay stream-aligned. Partners
// are uniform over rows sharing the label, the row itself included.
BlendPlan sample_blend_plan(const std::vector<int>& labels, int64_t feature_dim,
                            const BlendConfig& cfg, Rng& rng);

// Mixes each row's first and second moments toward its partner's and applies
// the plan's noise:
//   out_i = noise_scale_i * (sigma* . (z_i - mu_i)/sigma_i + mu*) + noise_add_i
// with mu* = r mu_i + (1-r) mu_j and sigma* likewise. Moments are per-row over
// the feature dimension, population convention. A nearly constant row (sigma
// below 1e-12 in double) is an error.
Var blend_features(Tape& t, Var z, const BlendPlan& plan);

/// One recombined batch for the consistency classifier.
struct ShuffleResult {
  Var fused;                  // (B, 2N): content row perm[k] next to synth row k
  std::vector<int64_t> perm;
  std::vector<int> labels;    // 1 only when both source rows were genuine
};

// Pairs content features with a uniformly permuted view of themselves against
// the unpermuted synthesizer features. A mixed pair is labeled fake: evidence
// of synthesis in either half should sink the pair.
ShuffleResult shuffle_combine(Tape& t, Var f_c, Var f_s, const std::vector<int>& labels,
                              Rng& rng);

/// Same with a caller-chosen permutation.
ShuffleResult shuffle_combine_with(Tape& t, Var f_c, Var f_s, const std::vector<int>& labels,
                                   std::vector<int64_t> perm);

}  // namespace dsd::nn
