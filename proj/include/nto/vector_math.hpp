#pragma once

#include <cstddef>

// Vectorized elementwise transcendentals. The implementation is compiled with
// glibc's SIMD math library enabled; results stay within a few ulp of libm.
namespace nto::vmath {

void sin(const double* in, double* out, std::size_t n);
void cos(const double* in, double* out, std::size_t n);
void exp(const double* in, double* out, std::size_t n);

void sin(const float* in, float* out, std::size_t n);
void exp(const float* in, float* out, std::size_t n);

}  // namespace nto::vmath
