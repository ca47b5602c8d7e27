#include "iscsc/fftutil.hpp"

#include <mutex>

#include <fftw3.h>

namespace iscsc {

namespace {
std::mutex plan_mutex;  // FFTW plan creation is not thread-safe

VecC run(const VecC& x, int sign) {
  const int n = static_cast<int>(x.size());
  VecC out(n);
  if (n == 0) return out;
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    plan = fftw_plan_dft_1d(
        n,
        reinterpret_cast<fftw_complex*>(const_cast<cd*>(x.data())),
        reinterpret_cast<fftw_complex*>(out.data()), sign,
        FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace

VecC fft(const VecC& x) { return run(x, FFTW_FORWARD); }

VecC ifft(const VecC& x) {
  VecC y = run(x, FFTW_BACKWARD);
  if (y.size() > 0) y /= static_cast<double>(y.size());
  return y;
}

double bin_frequency(int k, int n, double fs) {
  const int kk = (k <= n / 2) ? k : k - n;
  return fs * kk / n;
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace iscsc
