#pragma once

// Thin FFTW wrappers (thread-safe plan creation, natural Eigen types).

#include "iscsc/scene.hpp"

namespace iscsc {

VecC fft(const VecC& x);
VecC ifft(const VecC& x);  // normalized: ifft(fft(x)) == x

// Frequency of bin k for an n-point transform at sample rate fs
// (negative above Nyquist).
double bin_frequency(int k, int n, double fs);

int next_pow2(int n);

}  // namespace iscsc
