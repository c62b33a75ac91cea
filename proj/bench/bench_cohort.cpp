// Times the cohort kernels against their serial references on synthetic
// cohorts and checks the two agree.
//
//   aiq_bench [subjects ...]

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <vector>

#include <fmt/format.h>
#include <omp.h>

#include "aiq/cohort_kernels.hpp"
#include "aiq/scale.hpp"

namespace {

template <typename Fn>
double best_ms(Fn&& fn, int reps = 5) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::size_t> sizes;
  for (int i = 1; i < argc; ++i) sizes.push_back(std::strtoull(argv[i], nullptr, 10));
  if (sizes.empty()) sizes = {53, 10'000, 1'000'000};

  namespace k = aiq::kernels;
  const std::vector<double> weights = aiq::default_scale().weights();
  const std::size_t n_ind = weights.size();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick(0, 4);

  fmt::print("threads={}\n", omp_get_max_threads());
  fmt::print("{:>10} {:>12} {:>12} {:>8} {:>12}\n", "subjects", "serial ms", "openmp ms", "speedup", "max |diff|");
  for (std::size_t n : sizes) {
    std::vector<double> scores(n * n_ind);
    for (auto& s : scores) s = 25.0 * pick(rng);
    std::vector<double> a_ser(n), a_par(n), d_ser(n), d_par(n);

    const double t_ser = best_ms([&] {
      k::serial::absolute_iq_batch(scores, weights, a_ser);
      k::serial::deviation_iq_batch(a_ser, k::serial::cohort_moments(a_ser), d_ser);
    });
    const double t_par = best_ms([&] {
      k::absolute_iq_batch(scores, weights, a_par);
      k::deviation_iq_batch(a_par, k::cohort_moments(a_par), d_par);
    });
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(d_ser[i] - d_par[i]));
    fmt::print("{:>10} {:>12.3f} {:>12.3f} {:>8.2f} {:>12.3g}\n", n, t_ser, t_par, t_ser / t_par, diff);
  }
  return 0;
}
