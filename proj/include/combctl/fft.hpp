#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>

#include "combctl/error.hpp"

namespace combctl {

/// In-place complex FFT pair of one size. Plans use FFTW_ESTIMATE, which
/// keeps the chosen algorithm (and so every bit of output) independent of
/// timing. Planning goes through a global mutex because the FFTW planner is
/// not thread safe; execution is.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n), buffer_(fftw_alloc_complex(n), fftw_free) {
    if (!buffer_) throw NumericalFailure("Fft: allocation failed");
    std::lock_guard lock(planner_mutex());
    auto* buf = buffer_.get();
    forward_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    backward_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (forward_ == nullptr || backward_ == nullptr) throw NumericalFailure("Fft: planning failed");
  }

  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  ~Fft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  std::size_t size() const { return n_; }

  /// Unnormalized forward transform (exp(-i k x) kernel), in place.
  void forward(std::span<std::complex<double>> data) const { execute(forward_, data); }
  /// Unnormalized backward transform; forward followed by backward scales by n.
  void backward(std::span<std::complex<double>> data) const { execute(backward_, data); }

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  void execute(fftw_plan plan, std::span<std::complex<double>> data) const {
    if (data.size() != n_) throw GridMismatch("Fft: length mismatch");
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, p, p);
  }

  std::size_t n_;
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> buffer_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace combctl
