#include "dsd/eval/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace dsd::eval {

namespace {

void check_input(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("metrics: scores/labels length mismatch");
  }
  int64_t pos = 0, neg = 0;
  for (const int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("metrics: labels must be 0/1");
    (y == 1 ? pos : neg)++;
  }
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument("metrics: need both classes to compute a metric");
  }
}

}  // namespace

std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
  check_input(scores, labels);
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  double total_pos = 0, total_neg = 0;
  for (const int y : labels) (y == 1 ? total_pos : total_neg) += 1.0;

  std::vector<RocPoint> roc;
  roc.push_back({0.0, 0.0});
  double tp = 0, fp = 0;
  size_t i = 0;
  while (i < n) {
    const double s = scores[order[i]];
    // Everything tied at this score flips together.
    while (i < n && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp) += 1.0;
      ++i;
    }
    roc.push_back({fp / total_neg, tp / total_pos});
  }
  return roc;
}

double compute_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_input(scores, labels);
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Average ranks across ties, then the Mann-Whitney statistic from the
  // positive rank sum.
  double rank_sum_pos = 0.0;
  double total_pos = 0, total_neg = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum_pos += avg_rank;
        total_pos += 1.0;
      } else {
        total_neg += 1.0;
      }
    }
    i = j;
  }
  return (rank_sum_pos - total_pos * (total_pos + 1.0) / 2.0) / (total_pos * total_neg);
}

double compute_eer(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::vector<RocPoint> roc = roc_points(scores, labels);
  // d = FPR - FNR rises monotonically-enough from -1 at (0,0) to +1 at (1,1);
  // find the first segment where it touches zero.
  auto miss = [](const RocPoint& p) { return p.fpr - (1.0 - p.tpr); };
  for (size_t i = 1; i < roc.size(); ++i) {
    const double d0 = miss(roc[i - 1]);
    const double d1 = miss(roc[i]);
    if (d1 < 0.0) continue;
    if (d1 == 0.0) return roc[i].fpr;
    // d0 < 0 <= d1 here unless the curve started non-negative.
    if (d0 >= 0.0) return roc[i - 1].fpr;
    const double t = d0 / (d0 - d1);
    return roc[i - 1].fpr + t * (roc[i].fpr - roc[i - 1].fpr);
  }
  return roc.back().fpr;
}

}  // namespace dsd::eval
