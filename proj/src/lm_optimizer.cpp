#include "dgpmp/lm_optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace dgpmp {

void LmSettings::validate() const {
    if (!(initial_lambda > 0) || !(max_lambda > 0)) {
        throw std::invalid_argument("LM damping values must be positive");
    }
    if (!(lambda_up > 1)) {
        throw std::invalid_argument("LM damping up-multiplier must exceed 1");
    }
    if (!(lambda_down > 0) || !(lambda_down < 1)) {
        throw std::invalid_argument("LM damping down-multiplier must lie in (0, 1)");
    }
    if (max_iterations < 1) {
        throw std::invalid_argument("LM needs at least one iteration");
    }
    if (!(abs_tolerance > 0) || !(rel_tolerance > 0)) {
        throw std::invalid_argument("LM tolerances must be positive");
    }
}

std::string_view to_string(LmStatus status) {
    switch (status) {
        case LmStatus::Converged: return "converged";
        case LmStatus::MaxIterations: return "max-iterations";
        case LmStatus::DampingLimit: return "damping-limit";
        case LmStatus::Singular: return "singular";
    }
    return "unknown";
}

namespace {

// Marquardt scaling: H + λ diag(H), with a floor so that weakly observed
// coordinates still get damped.
BlockTridiagonal damped(const BlockTridiagonal& h, double lambda) {
    BlockTridiagonal out = h;
    for (auto& d : out.diag) {
        for (int k = 0; k < 4; ++k) {
            d(k, k) += lambda * std::max(d(k, k), 1e-6);
        }
    }
    return out;
}

}  // namespace

LmResult lm_optimize(const FactorGraph& graph, const Trajectory& init, const LmSettings& settings) {
    settings.validate();
    if (init.states.size() != graph.num_variables()) {
        throw std::invalid_argument("lm_optimize: initial trajectory does not match graph");
    }
    for (const auto& s : init.states) {
        if (!s.is_finite()) {
            throw std::invalid_argument("lm_optimize: initial trajectory has non-finite states");
        }
    }

    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };

    LmResult result{init, {}};
    auto& report = result.report;
    Trajectory& current = result.trajectory;
    double error = total_error(graph, current);
    report.initial_error = error;
    report.status = LmStatus::MaxIterations;
    double lambda = settings.gauss_newton ? 0.0 : settings.initial_lambda;

    for (int iter = 1; iter <= settings.max_iterations; ++iter) {
        if (error <= settings.abs_tolerance) {
            report.status = LmStatus::Converged;
            break;
        }
        const NormalSystem sys = linearize(graph, current);
        const Eigen::VectorXd x = stack_states(current);
        report.iterations = iter;

        bool accepted = false;
        bool stop = false;
        while (!accepted) {
            const auto step = damped(sys.hessian, lambda).solve(-sys.gradient);
            if (!step) {
                if (settings.gauss_newton || lambda * settings.lambda_up > settings.max_lambda) {
                    report.status = LmStatus::Singular;
                    report.message = "damped normal equations are not positive definite at iteration " +
                                     std::to_string(iter);
                    stop = true;
                    break;
                }
                lambda = std::max(lambda, settings.initial_lambda) * settings.lambda_up;
                continue;
            }
            Trajectory candidate = current;
            unstack_states(x + *step, candidate);
            const double new_error = total_error(graph, candidate);
            if (std::isfinite(new_error) && new_error < error) {
                const double decrease = error - new_error;
                current = std::move(candidate);
                report.records.push_back({iter, new_error, lambda, step->norm(), elapsed()});
                spdlog::debug("LM iter {}: error {:.6e} lambda {:.1e} step {:.3e}", iter, new_error, lambda,
                              step->norm());
                const double previous = error;
                error = new_error;
                if (!settings.gauss_newton) {
                    lambda = std::max(lambda * settings.lambda_down, 1e-12);
                }
                accepted = true;
                if (decrease <= settings.abs_tolerance || decrease <= settings.rel_tolerance * previous ||
                    error <= settings.abs_tolerance) {
                    report.status = LmStatus::Converged;
                    stop = true;
                }
            } else {
                if (settings.gauss_newton) {
                    // Gauss-Newton cannot retry; no further decrease is reachable.
                    report.status = LmStatus::Converged;
                    report.message = "Gauss-Newton step did not decrease the error";
                    stop = true;
                    break;
                }
                lambda *= settings.lambda_up;
                if (lambda > settings.max_lambda) {
                    report.status = LmStatus::DampingLimit;
                    report.message = "no error decrease up to the damping limit at iteration " + std::to_string(iter);
                    stop = true;
                    break;
                }
            }
        }
        if (stop) {
            break;
        }
    }

    report.final_error = error;
    return result;
}

}  // namespace dgpmp
