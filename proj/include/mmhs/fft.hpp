#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace mmhs {

// Real-input FFT of a fixed size backed by an FFTW plan. Instances are not
// shared between threads; construction and destruction are serialized
// internally because FFTW planning is not re-entrant.
class RealFft {
 public:
  explicit RealFft(std::size_t size);
  ~RealFft();

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&& other) noexcept;
  RealFft& operator=(RealFft&& other) noexcept;

  std::size_t size() const noexcept { return size_; }
  std::size_t bins() const noexcept { return size_ / 2 + 1; }

  // out.size() must equal bins().
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  // Unnormalized: inverse(forward(x)) == size() * x.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  void release() noexcept;

  std::size_t size_ = 0;
  double* real_ = nullptr;
  void* spectrum_ = nullptr;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace mmhs
