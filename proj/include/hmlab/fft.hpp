#pragma once

// Thin FFTW wrapper: one in-place plan per (size, direction), created lazily
// under a mutex. Execution through fftw_execute_dft is thread-safe.

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace hmlab::detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int n, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    fftw_plan p = fftw_plan_dft_1d(n, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    plans_.emplace(key, p);
    return p;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [k, p] : plans_) fftw_destroy_plan(p);
  }
  std::mutex mu_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

// Unnormalized transforms. forward: X[k] = sum_j x[j] e^{-2 pi i jk/n}.
inline void fft_inplace(std::span<std::complex<double>> data, bool forward) {
  const int n = static_cast<int>(data.size());
  fftw_plan p = PlanCache::instance().get(n, forward ? FFTW_FORWARD : FFTW_BACKWARD);
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(p, ptr, ptr);
}

inline std::vector<std::complex<double>> fft(std::span<const std::complex<double>> in,
                                             bool forward) {
  std::vector<std::complex<double>> out(in.begin(), in.end());
  fft_inplace(out, forward);
  return out;
}

}  // namespace hmlab::detail
