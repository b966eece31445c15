#pragma once

#include <cstdint>
#include <vector>

#include "dsd/nn/tape.hpp"

namespace dsd::nn {

struct LossConfig {
  double margin = 0.4;
  double beta0 = 1.0;
  double beta1 = 0.5;
  double beta2 = 0.5;
  double beta3 = 0.5;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  // Weight on the synthesizer contrastive term inside the beta1 group.
  double con_s_weight = 0.5;
};

/// Per-step loss values, kept in double for the logs.
struct LossBreakdown {
  double cls = 0.0;
  double cls_aug = 0.0;
  double cls_s = 0.0;
  double con_s = 0.0;
  double cls_c = 0.0;
  double adv = 0.0;
  double con_cls = 0.0;
  double total = 0.0;
};

/// total = cls + b0*cls_aug + b1*(cls_s + w*con_s) + b2*(cls_c + adv) + b3*con_cls
double total_from_parts(const LossBreakdown& parts, const LossConfig& cfg);

// Reference loss arithmetic in double. These are the definitions; the graph
// ops below call them for their forward values, and tests compare against
// them directly.
namespace exact {

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Mean over ordered pairs (self-pairs included): matched pairs pay
/// 1 - cos, mismatched pairs pay max(cos - margin, 0), normalized by B^2.
double contrastive_loss(const std::vector<std::vector<double>>& z,
                        const std::vector<int64_t>& labels, double margin);

/// Mean over rows of -log softmax(logits)[label].
double softmax_cross_entropy(const std::vector<std::vector<double>>& logits,
                             const std::vector<int64_t>& labels);

/// Mean over rows of the cross-entropy against the uniform distribution.
double uniform_cross_entropy(const std::vector<std::vector<double>>& logits);

/// Focal terms, probabilities clamped to [1e-7, 1-1e-7]; mean over the batch.
double binary_focal_loss(const std::vector<double>& probs, const std::vector<int>& labels,
                         double alpha, double gamma);

/// Plain binary cross-entropy with the same clamping; mean over the batch.
double binary_cross_entropy(const std::vector<double>& probs, const std::vector<int>& labels);

}  // namespace exact

/// A scalar loss node plus its double-precision forward value.
struct LossNode {
  Var node;
  double value = 0.0;
};

// Graph builders. Each computes its forward in double via exact::*, stores a
// scalar node, and backpropagates analytic gradients.
LossNode bce_node(Tape& t, Var logit, const std::vector<int>& labels);
LossNode focal_node(Tape& t, Var logit, const std::vector<int>& labels, double alpha, double gamma);
LossNode softmax_ce_node(Tape& t, Var logits, const std::vector<int64_t>& labels);
LossNode uniform_ce_node(Tape& t, Var logits);
LossNode contrastive_node(Tape& t, Var z, const std::vector<int64_t>& labels, double margin);

/// sum_i weights[i] * terms[i] as a scalar node.
Var weighted_sum_node(Tape& t, const std::vector<Var>& terms, const std::vector<double>& weights);

}  // namespace dsd::nn
