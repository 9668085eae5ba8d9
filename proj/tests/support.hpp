#pragma once
// Helpers shared by the unit tests and the acceptance runner.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "specctl/verifier.hpp"

namespace specctl::testing {

struct GradientPoint {
    VerifierParams params;
    TrainingBatch batch;
};

// Random parameters and batch with every residual at least `margin` away from
// zero, so the L1 objective is differentiable in a neighborhood.
inline GradientPoint random_non_tie_point(std::mt19937_64& rng, std::size_t visual, std::size_t ctx,
                                          std::size_t fused, std::size_t rows, double margin) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        GradientPoint pt;
        pt.params = init_verifier_params(visual, ctx, fused, 3, rng());
        for (std::size_t i = 0; i < pt.params.parameter_count(); ++i) pt.params.parameter(i) += 0.3 * u(rng);
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<double> x(visual + ctx), t(3);
            for (auto& v : x) v = u(rng);
            for (auto& v : t) v = u(rng);
            pt.batch.inputs.push_back(std::move(x));
            pt.batch.targets.push_back(std::move(t));
        }
        // Residual check through the unclamped forward pass.
        bool ok = true;
        for (std::size_t r = 0; r < rows && ok; ++r) {
            std::vector<double> h(fused), y(3);
            pt.params.fusion.apply(pt.batch.inputs[r], h);
            for (auto& v : h) v = std::tanh(v);
            pt.params.head.apply(h, y);
            for (std::size_t d = 0; d < 3; ++d) ok = ok && std::fabs(y[d] - pt.batch.targets[r][d]) > margin;
        }
        if (ok) return pt;
    }
}

// Central finite differences of l1_objective, one parameter at a time.
inline std::vector<double> numeric_gradient(const GradientPoint& pt, double h) {
    VerifierParams p = pt.params;
    std::vector<double> g(p.parameter_count());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double orig = p.parameter(i);
        p.parameter(i) = orig + h;
        const double up = l1_objective(p, pt.batch);
        p.parameter(i) = orig - h;
        const double down = l1_objective(p, pt.batch);
        p.parameter(i) = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// ||a - b|| / max(||a|| + ||b||, 1e-12)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), 1e-12);
}

}  // namespace specctl::testing
