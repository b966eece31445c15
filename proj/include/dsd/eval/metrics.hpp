#pragma once

#include <vector>

namespace dsd::eval {

/// One ROC vertex: false positive rate and true positive rate at some
/// threshold, thresholds sweeping from +inf down.
struct RocPoint {
  double fpr;
  double tpr;
};

// labels are 1 for the positive class, 0 for the negative. Tied scores enter
// one vertex together, which draws the diagonal segment the tie deserves.
std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels);

// Probability that a random positive outscores a random negative, ties
// counted half. Rank-sum implementation; throws when a class is missing.
double compute_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Rate at which false positives equal false negatives, read off the ROC by
// linear interpolation within the crossing segment.
double compute_eer(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace dsd::eval
