#include "dsd/nn/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace dsd::nn {

namespace {

constexpr double kProbClamp = 1e-7;

double clamp_prob(double p) {
  if (p < kProbClamp) return kProbClamp;
  if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
  return p;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Row-wise softmax in double with the max trick.
std::vector<double> softmax_row(const std::vector<double>& logits) {
  double mx = logits[0];
  for (const double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - mx);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<std::vector<double>> rows_of(const Tensor& m) {
  const int64_t b = m.dim(0), n = m.dim(1);
  std::vector<std::vector<double>> rows(static_cast<size_t>(b),
                                        std::vector<double>(static_cast<size_t>(n)));
  for (int64_t i = 0; i < b; ++i) {
    for (int64_t j = 0; j < n; ++j) rows[static_cast<size_t>(i)][static_cast<size_t>(j)] =
        m[i * n + j];
  }
  return rows;
}

std::vector<double> logit_column(const Tensor& m) {
  if (m.rank() != 2 || m.dim(1) != 1) throw std::invalid_argument("loss: expected (B,1) logits");
  std::vector<double> out(static_cast<size_t>(m.dim(0)));
  for (int64_t i = 0; i < m.dim(0); ++i) out[static_cast<size_t>(i)] = m[i];
  return out;
}

}  // namespace

double total_from_parts(const LossBreakdown& parts, const LossConfig& cfg) {
  return parts.cls + cfg.beta0 * parts.cls_aug +
         cfg.beta1 * (parts.cls_s + cfg.con_s_weight * parts.con_s) +
         cfg.beta2 * (parts.cls_c + parts.adv) + cfg.beta3 * parts.con_cls;
}

namespace exact {

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("loss: zero-norm feature vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double contrastive_loss(const std::vector<std::vector<double>>& z,
                        const std::vector<int64_t>& labels, double margin) {
  const size_t b = z.size();
  if (b == 0) throw std::invalid_argument("loss: empty batch");
  double acc = 0.0;
  for (size_t i = 0; i < b; ++i) {
    for (size_t j = 0; j < b; ++j) {
      const double s = cosine_similarity(z[i], z[j]);
      if (labels[i] == labels[j]) {
        acc += 1.0 - s;
      } else {
        acc += std::max(s - margin, 0.0);
      }
    }
  }
  return acc / (static_cast<double>(b) * static_cast<double>(b));
}

double softmax_cross_entropy(const std::vector<std::vector<double>>& logits,
                             const std::vector<int64_t>& labels) {
  double acc = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    const int64_t y = labels[i];
    if (y < 0 || y >= static_cast<int64_t>(logits[i].size())) {
      throw std::out_of_range("loss: label outside logit range");
    }
    const auto p = softmax_row(logits[i]);
    acc -= std::log(clamp_prob(p[static_cast<size_t>(y)]));
  }
  return acc / static_cast<double>(logits.size());
}

double uniform_cross_entropy(const std::vector<std::vector<double>>& logits) {
  double acc = 0.0;
  for (const auto& row : logits) {
    const auto p = softmax_row(row);
    double ce = 0.0;
    for (const double v : p) ce -= std::log(clamp_prob(v));
    acc += ce / static_cast<double>(row.size());
  }
  return acc / static_cast<double>(logits.size());
}

double binary_focal_loss(const std::vector<double>& probs, const std::vector<int>& labels,
                         double alpha, double gamma) {
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    const double p = clamp_prob(probs[i]);
    if (labels[i] == 1) {
      acc += -alpha * std::pow(1.0 - p, gamma) * std::log(p);
    } else {
      acc += -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
    }
  }
  return acc / static_cast<double>(probs.size());
}

double binary_cross_entropy(const std::vector<double>& probs, const std::vector<int>& labels) {
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    const double p = clamp_prob(probs[i]);
    acc += labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return acc / static_cast<double>(probs.size());
}

}  // namespace exact

LossNode bce_node(Tape& t, Var logit, const std::vector<int>& labels) {
  const auto z = logit_column(t.value(logit));
  std::vector<double> probs(z.size());
  for (size_t i = 0; i < z.size(); ++i) probs[i] = sigmoid(z[i]);
  const double loss = exact::binary_cross_entropy(probs, labels);

  const double inv_b = 1.0 / static_cast<double>(z.size());
  Var node = t.custom(Tensor::scalar(static_cast<float>(loss)), {logit},
                      [logit, probs, labels, inv_b](Tape& tt, int32_t self) {
                        const float g = tt.grad_buffer(self)[0];
                        Tensor& dz = tt.grad_buffer(logit.id);
                        for (size_t i = 0; i < probs.size(); ++i) {
                          const double p = probs[i];
                          if (p < kProbClamp || p > 1.0 - kProbClamp) continue;
                          dz[static_cast<int64_t>(i)] +=
                              g * static_cast<float>((p - labels[i]) * inv_b);
                        }
                      });
  return {node, loss};
}

LossNode focal_node(Tape& t, Var logit, const std::vector<int>& labels, double alpha,
                    double gamma) {
  const auto z = logit_column(t.value(logit));
  std::vector<double> probs(z.size());
  for (size_t i = 0; i < z.size(); ++i) probs[i] = sigmoid(z[i]);
  const double loss = exact::binary_focal_loss(probs, labels, alpha, gamma);

  const double inv_b = 1.0 / static_cast<double>(z.size());
  Var node = t.custom(
      Tensor::scalar(static_cast<float>(loss)), {logit},
      [logit, probs, labels, alpha, gamma, inv_b](Tape& tt, int32_t self) {
        const float g = tt.grad_buffer(self)[0];
        Tensor& dz = tt.grad_buffer(logit.id);
        for (size_t i = 0; i < probs.size(); ++i) {
          const double p = probs[i];
          if (p < kProbClamp || p > 1.0 - kProbClamp) continue;  // saturated, clamp kills grad
          double d;
          if (labels[i] == 1) {
            d = alpha * std::pow(1.0 - p, gamma) * (gamma * p * std::log(p) - (1.0 - p));
          } else {
            d = -(1.0 - alpha) * std::pow(p, gamma) *
                (gamma * (1.0 - p) * std::log(1.0 - p) - p);
          }
          dz[static_cast<int64_t>(i)] += g * static_cast<float>(d * inv_b);
        }
      });
  return {node, loss};
}

LossNode softmax_ce_node(Tape& t, Var logits, const std::vector<int64_t>& labels) {
  const auto rows = rows_of(t.value(logits));
  const double loss = exact::softmax_cross_entropy(rows, labels);

  std::vector<std::vector<double>> p(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) p[i] = softmax_row(rows[i]);
  const double inv_b = 1.0 / static_cast<double>(rows.size());
  Var node = t.custom(Tensor::scalar(static_cast<float>(loss)), {logits},
                      [logits, p, labels, inv_b](Tape& tt, int32_t self) {
                        const float g = tt.grad_buffer(self)[0];
                        Tensor& dz = tt.grad_buffer(logits.id);
                        const int64_t k = static_cast<int64_t>(p[0].size());
                        for (size_t i = 0; i < p.size(); ++i) {
                          for (int64_t j = 0; j < k; ++j) {
                            double d = p[i][static_cast<size_t>(j)];
                            if (labels[i] == j) d -= 1.0;
                            dz[static_cast<int64_t>(i) * k + j] +=
                                g * static_cast<float>(d * inv_b);
                          }
                        }
                      });
  return {node, loss};
}

LossNode uniform_ce_node(Tape& t, Var logits) {
  const auto rows = rows_of(t.value(logits));
  const double loss = exact::uniform_cross_entropy(rows);

  std::vector<std::vector<double>> p(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) p[i] = softmax_row(rows[i]);
  const double inv_b = 1.0 / static_cast<double>(rows.size());
  Var node = t.custom(Tensor::scalar(static_cast<float>(loss)), {logits},
                      [logits, p, inv_b](Tape& tt, int32_t self) {
                        const float g = tt.grad_buffer(self)[0];
                        Tensor& dz = tt.grad_buffer(logits.id);
                        const int64_t k = static_cast<int64_t>(p[0].size());
                        const double u = 1.0 / static_cast<double>(k);
                        for (size_t i = 0; i < p.size(); ++i) {
                          for (int64_t j = 0; j < k; ++j) {
                            dz[static_cast<int64_t>(i) * k + j] +=
                                g * static_cast<float>((p[i][static_cast<size_t>(j)] - u) * inv_b);
                          }
                        }
                      });
  return {node, loss};
}

LossNode contrastive_node(Tape& t, Var z, const std::vector<int64_t>& labels, double margin) {
  const auto rows = rows_of(t.value(z));
  const double loss = exact::contrastive_loss(rows, labels, margin);

  Var node = t.custom(
      Tensor::scalar(static_cast<float>(loss)), {z},
      [z, rows, labels, margin](Tape& tt, int32_t self) {
        const double g = tt.grad_buffer(self)[0];
        const size_t b = rows.size();
        const size_t n = rows[0].size();
        std::vector<double> norms(b);
        for (size_t i = 0; i < b; ++i) {
          double nn = 0.0;
          for (const double v : rows[i]) nn += v * v;
          norms[i] = std::sqrt(nn);
        }
        std::vector<std::vector<double>> acc(b, std::vector<double>(n, 0.0));
        const double inv_b2 = 1.0 / (static_cast<double>(b) * static_cast<double>(b));
        for (size_t i = 0; i < b; ++i) {
          for (size_t j = 0; j < b; ++j) {
            double dot = 0.0;
            for (size_t k = 0; k < n; ++k) dot += rows[i][k] * rows[j][k];
            const double s = dot / (norms[i] * norms[j]);
            // dL/ds for this ordered pair; the max() kink takes the zero
            // branch at equality.
            double w;
            if (labels[i] == labels[j]) {
              w = -inv_b2;
            } else {
              w = s > margin ? inv_b2 : 0.0;
            }
            if (w == 0.0) continue;
            // ds/dz_i = z_j/(|z_i||z_j|) - s z_i/|z_i|^2, and symmetrically.
            const double inv_ni = 1.0 / norms[i];
            const double inv_nj = 1.0 / norms[j];
            for (size_t k = 0; k < n; ++k) {
              acc[i][k] += w * (rows[j][k] * inv_ni * inv_nj - s * rows[i][k] * inv_ni * inv_ni);
              acc[j][k] += w * (rows[i][k] * inv_ni * inv_nj - s * rows[j][k] * inv_nj * inv_nj);
            }
          }
        }
        Tensor& dz = tt.grad_buffer(z.id);
        for (size_t i = 0; i < b; ++i) {
          for (size_t k = 0; k < n; ++k) {
            dz[static_cast<int64_t>(i * n + k)] += static_cast<float>(g * acc[i][k]);
          }
        }
      });
  return {node, loss};
}

Var weighted_sum_node(Tape& t, const std::vector<Var>& terms, const std::vector<double>& weights) {
  if (terms.size() != weights.size()) throw std::invalid_argument("loss: term/weight mismatch");
  double total = 0.0;
  for (size_t i = 0; i < terms.size(); ++i) {
    total += weights[i] * static_cast<double>(t.value(terms[i])[0]);
  }
  return t.custom(Tensor::scalar(static_cast<float>(total)), terms,
                  [terms, weights](Tape& tt, int32_t self) {
                    const float g = tt.grad_buffer(self)[0];
                    for (size_t i = 0; i < terms.size(); ++i) {
                      if (!tt.requires_grad(terms[i])) continue;
                      tt.grad_buffer(terms[i].id)[0] += g * static_cast<float>(weights[i]);
                    }
                  });
}

}  // namespace dsd::nn
