#pragma once
// Value types shared by every module, plus the two primitives the execution
// rule is built from: L1 distance between actions and its normalization into
// a [0, 1] deviation score.

#include <cstddef>
#include <span>
#include <vector>

namespace specctl {

using StepIndex = int;

class ActionSpace {
public:
    // Throws ContractViolation unless lower.size() == upper.size() >= 1 and
    // lower[i] < upper[i] for every i.
    ActionSpace(std::vector<double> lower, std::vector<double> upper);

    std::size_t dim() const { return lower_.size(); }
    std::span<const double> lower() const { return lower_; }
    std::span<const double> upper() const { return upper_; }
    // Sum of per-dimension ranges; strictly positive.
    double total_range() const { return total_range_; }

    std::vector<double> clamp(std::span<const double> values) const;
    bool contains(std::span<const double> values) const;

    bool operator==(const ActionSpace&) const = default;

private:
    std::vector<double> lower_;
    std::vector<double> upper_;
    double total_range_ = 0.0;
};

// An action is always inside its space: construction clamps.
class Action {
public:
    Action(const ActionSpace& space, std::span<const double> values);

    std::span<const double> values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t dim() const { return values_.size(); }

    bool operator==(const Action&) const = default;

private:
    std::vector<double> values_;
};

struct ActionChunk {
    std::vector<Action> actions;
    StepIndex planned_at = 0;

    std::size_t size() const { return actions.size(); }
};

struct PlanningContext {
    std::vector<double> vector;
    StepIndex planned_at = 0;

    bool operator==(const PlanningContext&) const = default;
};

struct Observation {
    std::vector<double> features;
    StepIndex step = 0;

    bool operator==(const Observation&) const = default;
};

struct ProprioState {
    std::vector<double> values;

    bool operator==(const ProprioState&) const = default;
};

class DeviationScore {
public:
    // Throws ContractViolation outside [0, 1].
    explicit DeviationScore(double value);
    double value() const { return value_; }

private:
    double value_;
};

// Sum of absolute coordinate differences. Throws ContractViolation on a
// dimension mismatch.
double l1_distance(const Action& a, const Action& b);

// min(1, raw / total_range). Throws ContractViolation for negative or NaN raw.
DeviationScore normalize_discrepancy(double raw, const ActionSpace& space);

}  // namespace specctl
