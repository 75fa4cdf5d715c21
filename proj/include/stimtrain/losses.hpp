#pragma once

// Classification and distillation losses with analytic logit gradients.
// Everything is computed in double; gradients are returned in the logits' type.

#include <span>
#include <string_view>
#include <vector>

#include "stimtrain/tensor.hpp"

namespace stimtrain::loss {

/// Floor applied to probabilities inside logarithms.
inline constexpr double kProbabilityFloor = 1e-12;
/// Floor applied to the logit magnitude before dividing by it.
inline constexpr double kMagnitudeFloor = 1e-12;

enum class Variant { kl, kl_minus };

std::string_view to_string(Variant v);
/// Throws ConfigError for anything other than "kl" / "kl_minus".
Variant parse_variant(std::string_view s);

/// Nonnegative entries summing to one (within 1e-6).
using ProbabilityVector = std::vector<double>;

struct LogitDecomposition {
  double magnitude = 0.0;
  std::vector<double> direction;
};

struct LossReport {
  double ce = 0.0;
  std::vector<double> kl_terms;
  double total = 0.0;
  double lambda = 0.0;

  double mean_kl() const;
};

template <typename T>
struct LossWithGrad {
  double value = 0.0;
  LogitsBatch<T> grad;  // dvalue/dlogits
};

/// Max-shifted softmax. Throws InputError on non-finite input.
ProbabilityVector softmax(std::span<const double> logits);
/// Throws InputError when `p` is not a probability vector.
void check_probability_vector(std::span<const double> p);

/// KL(p_t || p_s) = sum p_t log(p_t / p_s), with p_s floored.
double kl_divergence(std::span<const double> p_t, std::span<const double> p_s);

LogitDecomposition decompose_logits(std::span<const double> logits);

/// Mean over the batch of -log softmax(Z)_y.
template <typename T>
LossWithGrad<T> cross_entropy(const LogitsBatch<T>& logits, std::span<const int> labels);

/// Batch mean of KL(softmax(Z_t) || softmax(Z_s)); gradient is w.r.t. Z_s only.
template <typename T>
LossWithGrad<T> kl_logits(const LogitsBatch<T>& teacher, const LogitsBatch<T>& student);

/// Batch mean of KL(softmax(Z_t/|Z_t|) || softmax(Z_s/|Z_s|)); gradient w.r.t. Z_s only.
template <typename T>
LossWithGrad<T> kl_minus(const LogitsBatch<T>& teacher, const LogitsBatch<T>& student);

template <typename T>
LossWithGrad<T> distillation(Variant v, const LogitsBatch<T>& teacher, const LogitsBatch<T>& student);

template <typename T>
struct StimulativeLoss {
  LossReport report;
  LogitsBatch<T> main_grad;                // CE only: the teacher branch gets no distillation gradient
  std::vector<LogitsBatch<T>> sub_grads;   // (lambda / K) * d distillation / d Z_sub
};

/// total = CE(Z_m, y) + lambda * mean_k D(Z_m, Z_sub_k); D is KL or KL-.
template <typename T>
StimulativeLoss<T> stimulative_loss(const LogitsBatch<T>& main_logits, std::span<const int> labels,
                                    const std::vector<LogitsBatch<T>>& sub_logits, double lambda,
                                    Variant variant);

/// Per-sample top-k hit counts for k = 1 and k = min(5, classes).
template <typename T>
std::pair<int, int> topk_hits(const LogitsBatch<T>& logits, std::span<const int> labels);

}  // namespace stimtrain::loss
