#ifndef OQA_LBFGS_HPP
#define OQA_LBFGS_HPP

#include <functional>
#include <span>
#include <vector>

#include "oqa/common.hpp"

namespace oqa {

// Objective for minimization: writes the gradient into `grad` (same length as
// x) and returns the value.
using ObjectiveFn = std::function<double(std::span<const double>, std::span<double>)>;

struct LbfgsOptions {
    int memory = 10;
    int max_iters = 200;
    double grad_tol = 1e-6; // stop when ||grad||_inf falls below
    double c1 = 1e-4;       // sufficient decrease (Armijo)
    double c2 = 0.9;        // strong Wolfe curvature
    int max_linesearch = 60;
    // called after every accepted step with (iteration, value, ||grad||_inf)
    std::function<void(int, double, double)> on_iteration;
};

enum class LbfgsStatus {
    Converged,        // ||grad||_inf < grad_tol
    MaxIterations,
    LineSearchFailed, // returned best point seen so far
};

struct LbfgsResult {
    std::vector<double> x;
    double value = 0.0;
    std::vector<double> grad;
    LbfgsStatus status = LbfgsStatus::Converged;
    int iterations = 0;
    int evaluations = 0;
};

// Limited-memory BFGS with the two-loop recursion and a strong-Wolfe line
// search. A non-finite value or gradient at an accepted point raises
// NumericError; non-finite trial steps are treated as overshoots and the
// line search backs off.
LbfgsResult lbfgs_minimize(const ObjectiveFn& f, std::vector<double> x0,
                           const LbfgsOptions& opts = {});

} // namespace oqa

#endif // OQA_LBFGS_HPP
