// Built with -ffast-math so GCC dispatches these loops to libmvec.
// Keep this file free of NaN/Inf checks; fast-math assumes finite values.
#include "nto/vector_math.hpp"

#include <cmath>

namespace nto::vmath {

void sin(const double* __restrict in, double* __restrict out, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sin(in[i]);
}

void cos(const double* __restrict in, double* __restrict out, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) out[i] = std::cos(in[i]);
}

void exp(const double* __restrict in, double* __restrict out, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(in[i]);
}

void sin(const float* __restrict in, float* __restrict out, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sin(in[i]);
}

void exp(const float* __restrict in, float* __restrict out, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(in[i]);
}

}  // namespace nto::vmath
