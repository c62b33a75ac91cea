#pragma once

// Data-parallel inner loops of cohort scoring. The default versions use
// OpenMP over fixed-size blocks and combine block partials in block order, so
// results do not depend on the thread count. The serial namespace holds the
// straightforward loops the parallel versions are tested and benchmarked
// against.

#include <cstddef>
#include <span>

namespace aiq::kernels {

struct Moments {
  double mean = 0.0;
  double std_dev = 0.0;  // population form, divisor = count
  std::size_t count = 0;
};

inline constexpr std::size_t kBlock = 4096;

// Requires a non-empty input.
Moments cohort_moments(std::span<const double> values);

// scores is row-major, one row of `indicators` F_i values per subject.
void absolute_iq_batch(std::span<const double> scores, std::span<const double> weights,
                       std::span<double> out);

// S = 0 maps every subject to 100.
void deviation_iq_batch(std::span<const double> absolute, const Moments& moments,
                        std::span<double> out);

namespace serial {

Moments cohort_moments(std::span<const double> values);
void absolute_iq_batch(std::span<const double> scores, std::span<const double> weights,
                       std::span<double> out);
void deviation_iq_batch(std::span<const double> absolute, const Moments& moments,
                        std::span<double> out);

}  // namespace serial

}  // namespace aiq::kernels
