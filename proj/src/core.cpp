#include "specctl/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specctl/errors.hpp"
#include "specctl/kernels.hpp"

namespace specctl {

ActionSpace::ActionSpace(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.empty()) throw ContractViolation("ActionSpace: dim must be >= 1");
    if (lower_.size() != upper_.size())
        throw ContractViolation("ActionSpace: lower/upper length mismatch");
    for (std::size_t i = 0; i < lower_.size(); ++i) {
        if (!(std::isfinite(lower_[i]) && std::isfinite(upper_[i]) && lower_[i] < upper_[i]))
            throw ContractViolation("ActionSpace: need lower < upper in dim " + std::to_string(i));
        total_range_ += upper_[i] - lower_[i];
    }
}

std::vector<double> ActionSpace::clamp(std::span<const double> values) const {
    if (values.size() != dim())
        throw ContractViolation("ActionSpace::clamp: expected " + std::to_string(dim()) +
                                " values, got " + std::to_string(values.size()));
    std::vector<double> out(values.begin(), values.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        // NaN maps to the lower bound so the result stays inside the space
        out[i] = std::isnan(out[i]) ? lower_[i] : std::clamp(out[i], lower_[i], upper_[i]);
    }
    return out;
}

bool ActionSpace::contains(std::span<const double> values) const {
    if (values.size() != dim()) return false;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!(values[i] >= lower_[i] && values[i] <= upper_[i])) return false;
    return true;
}

Action::Action(const ActionSpace& space, std::span<const double> values)
    : values_(space.clamp(values)) {}

DeviationScore::DeviationScore(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0))
        throw ContractViolation("DeviationScore outside [0,1]: " + std::to_string(value));
}

double l1_distance(const Action& a, const Action& b) {
    if (a.dim() != b.dim())
        throw ContractViolation("l1_distance: dimension mismatch (" + std::to_string(a.dim()) +
                                " vs " + std::to_string(b.dim()) + ")");
    return kernels::abs_diff_sum(a.values(), b.values());
}

DeviationScore normalize_discrepancy(double raw, const ActionSpace& space) {
    if (!(raw >= 0.0)) throw ContractViolation("normalize_discrepancy: raw must be >= 0");
    return DeviationScore(std::min(1.0, raw / space.total_range()));
}

}  // namespace specctl
