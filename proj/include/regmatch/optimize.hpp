#pragma once

#include <functional>
#include <vector>

namespace regmatch::optimize {

using Objective = std::function<double(const std::vector<double>&)>;

struct Minimum {
    std::vector<double> x;
    double value = 0.0;
    std::vector<double> trace;  ///< best value after each iteration
    long evaluations = 0;
    bool reached_target = false;
};

/// Derivative-free simplex search; stops once the best value is <= target or the budget is spent.
/// A collapsed simplex is restarted around the best point (at most three times).
Minimum nelder_mead(const Objective& f, std::vector<double> x0, double target, long max_evals,
                    double initial_step = 0.5);

/// Quasi-Newton with central-difference gradients (step 1e-5 * (1 + |x_i|)) and Armijo backtracking.
Minimum finite_difference_bfgs(const Objective& f, std::vector<double> x0, double target, long max_evals);

}  // namespace regmatch::optimize
