#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dgpmp/factor_graph.hpp"

namespace dgpmp {

struct LmSettings {
    double initial_lambda = 0.01;
    double lambda_up = 10.0;
    double lambda_down = 0.1;
    double max_lambda = 1e10;
    int max_iterations = 100;
    double abs_tolerance = 1e-12;  // on the error and on its decrease
    double rel_tolerance = 1e-6;
    // Undamped Gauss-Newton (λ = 0); tests only.
    bool gauss_newton = false;

    void validate() const;
};

enum class LmStatus {
    Converged,
    MaxIterations,
    DampingLimit,  // no damping up to max_lambda produced a decrease
    Singular,      // damped system could not be factorised
};

[[nodiscard]] std::string_view to_string(LmStatus status);

struct IterationRecord {
    int iteration = 0;
    double error = 0.0;
    double lambda = 0.0;
    double step_norm = 0.0;
    double wall_time = 0.0;  // seconds since the start of the solve
};

struct LmReport {
    LmStatus status = LmStatus::Converged;
    std::string message;
    double initial_error = 0.0;
    double final_error = 0.0;
    int iterations = 0;  // linearisations performed
    std::vector<IterationRecord> records;  // accepted steps only
};

struct LmResult {
    Trajectory trajectory;
    LmReport report;
};

// Damped Gauss-Newton over all support states; accepted steps strictly
// decrease total_error.
[[nodiscard]] LmResult lm_optimize(const FactorGraph& graph, const Trajectory& init, const LmSettings& settings = {});

}  // namespace dgpmp
