#include "aiq/cohort_kernels.hpp"

#include <cmath>
#include <vector>

#include "aiq/error.hpp"

namespace aiq::kernels {

namespace {

void check_batch_shape(std::span<const double> scores, std::span<const double> weights,
                       std::span<double> out) {
  if (weights.empty() || scores.size() != out.size() * weights.size()) {
    throw Error("length_mismatch", "score matrix does not match weights x subjects");
  }
}

std::size_t block_count(std::size_t n) { return (n + kBlock - 1) / kBlock; }

}  // namespace

Moments cohort_moments(std::span<const double> values) {
  if (values.empty()) throw Error("empty_cohort", "standard deviation of an empty cohort");
  const std::size_t n = values.size();
  const auto blocks = static_cast<std::ptrdiff_t>(block_count(n));
  std::vector<double> partial(static_cast<std::size_t>(blocks), 0.0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += values[i];
    partial[static_cast<std::size_t>(b)] = s;
  }
  double sum = 0.0;
  for (double p : partial) sum += p;
  const double mean = sum / static_cast<double>(n);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = values[i] - mean;
      s += d * d;
    }
    partial[static_cast<std::size_t>(b)] = s;
  }
  double ss = 0.0;
  for (double p : partial) ss += p;
  return {mean, std::sqrt(ss / static_cast<double>(n)), n};
}

void absolute_iq_batch(std::span<const double> scores, std::span<const double> weights,
                       std::span<double> out) {
  check_batch_shape(scores, weights, out);
  const std::size_t k = weights.size();
  const auto subjects = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < subjects; ++s) {
    const double* row = scores.data() + static_cast<std::size_t>(s) * k;
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += row[i] * weights[i];
    out[static_cast<std::size_t>(s)] = acc;
  }
}

void deviation_iq_batch(std::span<const double> absolute, const Moments& moments, std::span<double> out) {
  if (absolute.size() != out.size()) throw Error("length_mismatch", "output size differs from input");
  const auto n = static_cast<std::ptrdiff_t>(absolute.size());
  const double mean = moments.mean;
  const double s = moments.std_dev;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    out[idx] = s == 0.0 ? 100.0 : 100.0 + (absolute[idx] - mean) / s;
  }
}

namespace serial {

Moments cohort_moments(std::span<const double> values) {
  if (values.empty()) throw Error("empty_cohort", "standard deviation of an empty cohort");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size())), values.size()};
}

void absolute_iq_batch(std::span<const double> scores, std::span<const double> weights,
                       std::span<double> out) {
  check_batch_shape(scores, weights, out);
  for (std::size_t s = 0; s < out.size(); ++s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc += scores[s * weights.size() + i] * weights[i];
    out[s] = acc;
  }
}

void deviation_iq_batch(std::span<const double> absolute, const Moments& moments, std::span<double> out) {
  if (absolute.size() != out.size()) throw Error("length_mismatch", "output size differs from input");
  for (std::size_t i = 0; i < absolute.size(); ++i) {
    out[i] = moments.std_dev == 0.0 ? 100.0 : 100.0 + (absolute[i] - moments.mean) / moments.std_dev;
  }
}

}  // namespace serial

}  // namespace aiq::kernels
