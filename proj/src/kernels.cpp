#include "c2ae/kernels.hpp"

#include <algorithm>

namespace c2ae::kernels {

namespace serial {

void matmul(const double* a, const double* b, double* c,
            std::size_t ni, std::size_t nk, std::size_t nj) {
    std::fill(c, c + ni * nj, 0.0);
    for (std::size_t i = 0; i < ni; ++i) {
        double* crow = c + i * nj;
        for (std::size_t k = 0; k < nk; ++k) {
            const double aik = a[i * nk + k];
            const double* brow = b + k * nj;
            for (std::size_t j = 0; j < nj; ++j) crow[j] += aik * brow[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t ni, std::size_t nk, std::size_t nj) {
    for (std::size_t i = 0; i < ni; ++i) {
        const double* arow = a + i * nk;
        for (std::size_t j = 0; j < nj; ++j) {
            const double* brow = b + j * nk;
            double s = 0.0;
            for (std::size_t k = 0; k < nk; ++k) s += arow[k] * brow[k];
            c[i * nj + j] = s;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t ni, std::size_t nk, std::size_t nj) {
    for (std::size_t i = 0; i < ni; ++i) {
        double* crow = c + i * nj;
        std::fill(crow, crow + nj, 0.0);
        for (std::size_t k = 0; k < nk; ++k) {
            const double aki = a[k * ni + i];
            const double* brow = b + k * nj;
            for (std::size_t j = 0; j < nj; ++j) crow[j] += aki * brow[j];
        }
    }
}

}  // namespace serial

// The parallel loops split over output rows only; each element keeps the
// serial kernels' ascending-k accumulation, so no cross-thread reductions
// exist and the output is bit-identical to the serial reference.

void matmul(const double* a, const double* b, double* c,
            std::size_t ni, std::size_t nk, std::size_t nj) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(ni); ++i) {
        double* crow = c + i * nj;
        std::fill(crow, crow + nj, 0.0);
        for (std::size_t k = 0; k < nk; ++k) {
            const double aik = a[i * nk + k];
            const double* brow = b + k * nj;
            for (std::size_t j = 0; j < nj; ++j) crow[j] += aik * brow[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t ni, std::size_t nk, std::size_t nj) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(ni); ++i) {
        const double* arow = a + i * nk;
        for (std::size_t j = 0; j < nj; ++j) {
            const double* brow = b + j * nk;
            double s = 0.0;
            for (std::size_t k = 0; k < nk; ++k) s += arow[k] * brow[k];
            c[i * nj + j] = s;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t ni, std::size_t nk, std::size_t nj) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(ni); ++i) {
        double* crow = c + i * nj;
        std::fill(crow, crow + nj, 0.0);
        for (std::size_t k = 0; k < nk; ++k) {
            const double aki = a[k * ni + i];
            const double* brow = b + k * nj;
            for (std::size_t j = 0; j < nj; ++j) crow[j] += aki * brow[j];
        }
    }
}

}  // namespace c2ae::kernels
