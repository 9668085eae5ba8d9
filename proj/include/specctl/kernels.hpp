#pragma once
// Dense double-precision kernels used by the verifier network and the
// discrepancy metric. Every kernel has a scalar reference implementation;
// SIMD variants (AVX2+FMA on x86-64, NEON on aarch64) are selected once at
// runtime. Set SPECCTL_KERNELS=scalar to force the reference path.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace specctl::kernels {

struct KernelTable {
    const char* name;
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    double (*abs_diff_sum)(const double* a, const double* b, std::size_t n);
    // y = W x + b, W row-major rows x cols; bias may be null.
    void (*gemv)(const double* w, const double* x, const double* bias, double* y,
                 std::size_t rows, std::size_t cols);
};

const KernelTable& scalar_table();
// Returns nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// All variants usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

// The table used by the library, resolved on first call.
const KernelTable& active();

// Overrides the active table ("scalar", "avx2", "neon", "auto"). Returns
// false if the requested variant is unavailable; the active table is then
// left untouched.
bool select(std::string_view name);

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double abs_diff_sum(std::span<const double> a, std::span<const double> b) {
    return active().abs_diff_sum(a.data(), b.data(), a.size());
}

}  // namespace specctl::kernels
