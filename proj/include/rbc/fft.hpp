#pragma once

#include <complex>
#include <map>
#include <memory>
#include <numbers>
#include <vector>

namespace rbc {

/// Complex DFT plan for a fixed size n. Recursive Cooley-Tukey with
/// specialized radix-2/3 butterflies and a generic-prime fallback, so any
/// n works but 2^a*3^b sizes (48, 96, ...) run fast. Unnormalized:
/// forward computes sum x_j e^{-2pi i jk/n}, inverse the conjugate sum.
class Fft {
 public:
  explicit Fft(int n) : n_(n), twiddle_(n) {
    const double step = -2.0 * std::numbers::pi / n;
    for (int k = 0; k < n; ++k)
      twiddle_[k] = std::polar(1.0, step * k);
  }

  int size() const { return n_; }

  void forward(const std::complex<double>* in, std::complex<double>* out) const {
    rec(in, out, n_, 1);
  }

  void inverse(const std::complex<double>* in, std::complex<double>* out) const {
    // ifft(x) = conj(fft(conj(x))), left unnormalized (caller divides by n).
    scratch_.resize(n_);
    for (int k = 0; k < n_; ++k) scratch_[k] = std::conj(in[k]);
    rec(scratch_.data(), out, n_, 1);
    for (int k = 0; k < n_; ++k) out[k] = std::conj(out[k]);
  }

 private:
  static int smallest_factor(int n) {
    if (n % 2 == 0) return 2;
    for (int p = 3; p * p <= n; p += 2)
      if (n % p == 0) return p;
    return n;
  }

  // twiddle e^{-2pi i a/n_sub} for n_sub | n_, via the shared root table
  std::complex<double> tw(long a, int n_sub) const {
    long idx = (a % n_sub) * (n_ / n_sub);
    return twiddle_[static_cast<size_t>(idx)];
  }

  void rec(const std::complex<double>* in, std::complex<double>* out, int n,
           int stride) const {
    if (n == 1) {
      out[0] = in[0];
      return;
    }
    const int p = smallest_factor(n);
    const int m = n / p;
    for (int r = 0; r < p; ++r)
      rec(in + static_cast<long>(r) * stride, out + static_cast<long>(r) * m, m,
          stride * p);

    // combine: X[q + s m] = sum_r (Y_r[q] W_n^{rq}) w_p^{rs}
    if (p == 2) {
      for (int q = 0; q < m; ++q) {
        const auto v0 = out[q];
        const auto v1 = out[m + q] * tw(q, n);
        out[q] = v0 + v1;
        out[m + q] = v0 - v1;
      }
    } else if (p == 3) {
      const std::complex<double> w1 = tw(1, 3), w2 = tw(2, 3);
      for (int q = 0; q < m; ++q) {
        const auto v0 = out[q];
        const auto v1 = out[m + q] * tw(q, n);
        const auto v2 = out[2 * m + q] * tw(2L * q, n);
        out[q] = v0 + v1 + v2;
        out[m + q] = v0 + w1 * v1 + w2 * v2;
        out[2 * m + q] = v0 + w2 * v1 + w1 * v2;
      }
    } else {
      buf_.resize(p);
      for (int q = 0; q < m; ++q) {
        for (int r = 0; r < p; ++r)
          buf_[r] = out[r * m + q] * tw(static_cast<long>(r) * q, n);
        for (int s = 0; s < p; ++s) {
          std::complex<double> acc = buf_[0];
          for (int r = 1; r < p; ++r) acc += buf_[r] * tw(static_cast<long>(r) * s, p);
          out[s * m + q] = acc;
        }
      }
    }
  }

  int n_;
  std::vector<std::complex<double>> twiddle_;
  mutable std::vector<std::complex<double>> scratch_;
  mutable std::vector<std::complex<double>> buf_;
};

/// Shared per-size plan cache.
inline const Fft& fft_plan(int n) {
  thread_local std::map<int, std::unique_ptr<Fft>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Fft>(n);
  return *slot;
}

}  // namespace rbc
