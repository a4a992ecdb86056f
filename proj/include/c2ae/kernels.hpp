#pragma once

#include <cstddef>

namespace c2ae::kernels {

// Serial reference kernels. These stay the ground truth the OpenMP kernels
// are checked against; both sides accumulate each output element over k in
// ascending order, so results are bit-identical regardless of thread count.
namespace serial {

// c = a * b              a: ni x nk, b: nk x nj, c: ni x nj
void matmul(const double* a, const double* b, double* c,
            std::size_t ni, std::size_t nk, std::size_t nj);

// c = a * b^T            a: ni x nk, b: nj x nk, c: ni x nj
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t ni, std::size_t nk, std::size_t nj);

// c = a^T * b            a: nk x ni, b: nk x nj, c: ni x nj
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t ni, std::size_t nk, std::size_t nj);

}  // namespace serial

// OpenMP kernels, parallel over rows of the output.
void matmul(const double* a, const double* b, double* c,
            std::size_t ni, std::size_t nk, std::size_t nj);
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t ni, std::size_t nk, std::size_t nj);
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t ni, std::size_t nk, std::size_t nj);

}  // namespace c2ae::kernels
