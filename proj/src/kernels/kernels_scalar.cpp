#include "specctl/kernels.hpp"

#include <cmath>

namespace specctl::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double abs_diff_sum_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(a[i] - b[i]);
    return acc;
}

void gemv_scalar(const double* w, const double* x, const double* bias, double* y,
                 std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double v = dot_scalar(w + r * cols, x, cols);
        y[r] = bias ? v + bias[r] : v;
    }
}

constexpr KernelTable kScalar{"scalar", dot_scalar, axpy_scalar, abs_diff_sum_scalar,
                              gemv_scalar};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace specctl::kernels
