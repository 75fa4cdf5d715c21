#include "stimtrain/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stimtrain/error.hpp"

namespace stimtrain::loss {
namespace {

const double kLogFloor = std::log(kProbabilityFloor);

void check_finite(std::span<const double> z) {
  for (const double v : z) {
    if (!std::isfinite(v)) throw InputError("logits contain non-finite values");
  }
}

// log softmax, max-shifted.
std::vector<double> log_softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (const double v : z) s += std::exp(v - m);
  const double lse = m + std::log(s);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

// KL(p || q) from log-probabilities; p = exp(lp), the log of q is floored.
double kl_from_logs(std::span<const double> lp, std::span<const double> lq) {
  double acc = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    const double p = std::exp(lp[i]);
    if (p == 0.0) continue;
    acc += p * (std::max(lp[i], kLogFloor) - std::max(lq[i], kLogFloor));
  }
  return std::max(acc, 0.0);
}

template <typename T>
std::vector<double> row_as_double(const LogitsBatch<T>& z, int i) {
  const auto r = z.row(i);
  std::vector<double> out(r.begin(), r.end());
  check_finite(out);
  return out;
}

template <typename T>
void check_same_shape(const LogitsBatch<T>& a, const LogitsBatch<T>& b) {
  if (a.batch != b.batch || a.classes != b.classes) {
    throw ShapeError("logit batches differ in shape: " + std::to_string(a.batch) + "x" +
                     std::to_string(a.classes) + " vs " + std::to_string(b.batch) + "x" +
                     std::to_string(b.classes));
  }
  if (a.batch < 1) throw ShapeError("empty logit batch");
}

std::vector<double> scaled_direction(std::span<const double> z, double& norm_used, bool& floored) {
  double sq = 0.0;
  for (const double v : z) sq += v * v;
  const double mag = std::sqrt(sq);
  floored = !(mag > kMagnitudeFloor);
  norm_used = floored ? kMagnitudeFloor : mag;
  std::vector<double> u(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) u[i] = z[i] / norm_used;
  return u;
}

}  // namespace

std::string_view to_string(Variant v) { return v == Variant::kl ? "kl" : "kl_minus"; }

Variant parse_variant(std::string_view s) {
  if (s == "kl") return Variant::kl;
  if (s == "kl_minus") return Variant::kl_minus;
  throw ConfigError("loss.variant: expected \"kl\" or \"kl_minus\", got \"" + std::string(s) + "\"");
}

double LossReport::mean_kl() const {
  if (kl_terms.empty()) return 0.0;
  return std::accumulate(kl_terms.begin(), kl_terms.end(), 0.0) / static_cast<double>(kl_terms.size());
}

ProbabilityVector softmax(std::span<const double> logits) {
  if (logits.empty()) throw InputError("softmax of an empty vector");
  check_finite(logits);
  const double m = *std::max_element(logits.begin(), logits.end());
  ProbabilityVector p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (auto& v : p) v /= s;
  return p;
}

void check_probability_vector(std::span<const double> p) {
  if (p.empty()) throw InputError("empty probability vector");
  double s = 0.0;
  for (const double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("probability entries must be finite and >= 0");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-6) throw InputError("probabilities sum to " + std::to_string(s));
}

double kl_divergence(std::span<const double> p_t, std::span<const double> p_s) {
  if (p_t.size() != p_s.size()) {
    throw ShapeError("kl_divergence: sizes " + std::to_string(p_t.size()) + " and " +
                     std::to_string(p_s.size()) + " differ");
  }
  check_probability_vector(p_t);
  check_probability_vector(p_s);
  double acc = 0.0;
  for (std::size_t i = 0; i < p_t.size(); ++i) {
    if (p_t[i] == 0.0) continue;
    acc += p_t[i] * (std::log(std::max(p_t[i], kProbabilityFloor)) -
                     std::log(std::max(p_s[i], kProbabilityFloor)));
  }
  return std::max(acc, 0.0);
}

LogitDecomposition decompose_logits(std::span<const double> logits) {
  check_finite(logits);
  double norm_used = 0.0;
  bool floored = false;
  LogitDecomposition d;
  d.direction = scaled_direction(logits, norm_used, floored);
  double sq = 0.0;
  for (const double v : logits) sq += v * v;
  d.magnitude = std::sqrt(sq);
  return d;
}

template <typename T>
LossWithGrad<T> cross_entropy(const LogitsBatch<T>& logits, std::span<const int> labels) {
  if (logits.batch < 1) throw ShapeError("empty logit batch");
  if (static_cast<int>(labels.size()) != logits.batch) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(logits.batch));
  }
  LossWithGrad<T> out{0.0, LogitsBatch<T>(logits.batch, logits.classes)};
  const double inv_b = 1.0 / logits.batch;
  for (int i = 0; i < logits.batch; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= logits.classes) {
      throw LabelError("label " + std::to_string(y) + " outside [0, " + std::to_string(logits.classes) + ")");
    }
    const auto z = row_as_double(logits, i);
    const auto lp = log_softmax(z);
    out.value += -lp[y] * inv_b;
    for (int k = 0; k < logits.classes; ++k) {
      out.grad.at(i, k) = static_cast<T>((std::exp(lp[k]) - (k == y ? 1.0 : 0.0)) * inv_b);
    }
  }
  return out;
}

template <typename T>
LossWithGrad<T> kl_logits(const LogitsBatch<T>& teacher, const LogitsBatch<T>& student) {
  check_same_shape(teacher, student);
  LossWithGrad<T> out{0.0, LogitsBatch<T>(student.batch, student.classes)};
  const double inv_b = 1.0 / student.batch;
  for (int i = 0; i < student.batch; ++i) {
    const auto lp = log_softmax(row_as_double(teacher, i));
    const auto lq = log_softmax(row_as_double(student, i));
    out.value += kl_from_logs(lp, lq) * inv_b;
    for (int k = 0; k < student.classes; ++k) {
      out.grad.at(i, k) = static_cast<T>((std::exp(lq[k]) - std::exp(lp[k])) * inv_b);
    }
  }
  return out;
}

template <typename T>
LossWithGrad<T> kl_minus(const LogitsBatch<T>& teacher, const LogitsBatch<T>& student) {
  check_same_shape(teacher, student);
  LossWithGrad<T> out{0.0, LogitsBatch<T>(student.batch, student.classes)};
  const double inv_b = 1.0 / student.batch;
  const std::size_t n = static_cast<std::size_t>(student.classes);
  for (int i = 0; i < student.batch; ++i) {
    double t_norm = 0.0;
    double s_norm = 0.0;
    bool t_floored = false;
    bool s_floored = false;
    const auto zt = row_as_double(teacher, i);
    const auto zs = row_as_double(student, i);
    const auto ut = scaled_direction(zt, t_norm, t_floored);
    const auto us = scaled_direction(zs, s_norm, s_floored);
    const auto lp = log_softmax(ut);
    const auto lq = log_softmax(us);
    out.value += kl_from_logs(lp, lq) * inv_b;

    // d/du_s = q - p; then through u = z / max(|z|, eps).
    std::vector<double> g(n);
    double dot = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      g[k] = std::exp(lq[k]) - std::exp(lp[k]);
      dot += g[k] * us[k];
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double dz = s_floored ? g[k] / s_norm : (g[k] - us[k] * dot) / s_norm;
      out.grad.at(i, static_cast<int>(k)) = static_cast<T>(dz * inv_b);
    }
  }
  return out;
}

template <typename T>
LossWithGrad<T> distillation(Variant v, const LogitsBatch<T>& teacher, const LogitsBatch<T>& student) {
  return v == Variant::kl ? kl_logits(teacher, student) : kl_minus(teacher, student);
}

template <typename T>
StimulativeLoss<T> stimulative_loss(const LogitsBatch<T>& main_logits, std::span<const int> labels,
                                    const std::vector<LogitsBatch<T>>& sub_logits, double lambda,
                                    Variant variant) {
  if (!(lambda >= 0.0)) throw ConfigError("loss.lambda: must be >= 0");
  StimulativeLoss<T> out;
  auto ce = cross_entropy(main_logits, labels);
  out.report.ce = ce.value;
  out.report.lambda = lambda;
  out.main_grad = std::move(ce.grad);
  const double weight = sub_logits.empty() ? 0.0 : lambda / static_cast<double>(sub_logits.size());
  for (const auto& z : sub_logits) {
    auto d = distillation(variant, main_logits, z);
    out.report.kl_terms.push_back(d.value);
    for (auto& g : d.grad.values) g = static_cast<T>(g * weight);
    out.sub_grads.push_back(std::move(d.grad));
  }
  out.report.total = out.report.ce + lambda * out.report.mean_kl();
  return out;
}

template <typename T>
std::pair<int, int> topk_hits(const LogitsBatch<T>& logits, std::span<const int> labels) {
  const int k5 = std::min(5, logits.classes);
  int top1 = 0;
  int top5 = 0;
  for (int i = 0; i < logits.batch; ++i) {
    const auto r = logits.row(i);
    const T target = r[labels[i]];
    // Rank = number of classes scoring strictly higher, ties broken by index.
    int rank = 0;
    for (int k = 0; k < logits.classes; ++k) {
      if (r[k] > target || (r[k] == target && k < labels[i])) ++rank;
    }
    top1 += rank == 0;
    top5 += rank < k5;
  }
  return {top1, top5};
}

#define STIMTRAIN_LOSS_INSTANTIATE(T)                                                            \
  template LossWithGrad<T> cross_entropy<T>(const LogitsBatch<T>&, std::span<const int>);       \
  template LossWithGrad<T> kl_logits<T>(const LogitsBatch<T>&, const LogitsBatch<T>&);          \
  template LossWithGrad<T> kl_minus<T>(const LogitsBatch<T>&, const LogitsBatch<T>&);           \
  template LossWithGrad<T> distillation<T>(Variant, const LogitsBatch<T>&, const LogitsBatch<T>&); \
  template StimulativeLoss<T> stimulative_loss<T>(const LogitsBatch<T>&, std::span<const int>,  \
                                                  const std::vector<LogitsBatch<T>>&, double,   \
                                                  Variant);                                     \
  template std::pair<int, int> topk_hits<T>(const LogitsBatch<T>&, std::span<const int>);

STIMTRAIN_LOSS_INSTANTIATE(float)
STIMTRAIN_LOSS_INSTANTIATE(double)

#undef STIMTRAIN_LOSS_INSTANTIATE

}  // namespace stimtrain::loss
