#pragma once

#include <optional>
#include <string>
#include <vector>

#include "regmatch/ae_solver.hpp"
#include "regmatch/market.hpp"

namespace regmatch {

/// N x M x S covariates c_xy in R^S.
struct CovariateBasis {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t dims = 0;
    std::vector<double> data;  ///< index ((x * cols) + y) * dims + s

    CovariateBasis() = default;
    CovariateBasis(std::size_t n, std::size_t m, std::size_t s, double fill = 0.0)
        : rows{n}, cols{m}, dims{s}, data(n * m * s, fill) {}

    double& operator()(std::size_t x, std::size_t y, std::size_t s) { return data[(x * cols + y) * dims + s]; }
    double operator()(std::size_t x, std::size_t y, std::size_t s) const { return data[(x * cols + y) * dims + s]; }
};

/// Linear surplus model Phi_xy = lambda' c_xy.
struct SurplusModel {
    std::vector<double> lambda;
};

enum class Optimizer { nelder_mead, finite_difference_bfgs };

struct EstimationConfig {
    Optimizer optimizer = Optimizer::nelder_mead;
    double kl_tolerance = 1e-10;
    long max_outer_evals = 5000;
    std::optional<std::vector<double>> initial_lambda;  ///< zero vector when absent
    IpfpConfig inner{1e-13, 100'000};
};

struct FitReport {
    std::vector<double> kl_trace;  ///< divergence at each accepted iterate; non-increasing
    double final_kl = 0.0;
    long evaluations = 0;
    bool converged = false;        ///< final_kl <= kl_tolerance
    std::string optimizer;
};

struct EstimationResult {
    SurplusModel model;
    FitReport report;
};

/// Raised when the inner equilibrium solve fails at some parameter value.
class EstimationError : public Error {
    public:
        EstimationError(const std::string& what, std::vector<double> lambda)
            : Error(what), lambda_{std::move(lambda)} {}
        const std::vector<double>& lambda() const { return lambda_; }

    private:
        std::vector<double> lambda_;
};

SurplusMatrix surplus_from_covariates(const SurplusModel& model, const CovariateBasis& c);

/// KL divergence between the normalized distributions of two matchings over all type pairs (unmatched included).
double kl_divergence(const Matching& observed, const Matching& simulated);

/// sum_T observed_xy log(mu_xy / |mu|) where mu is the equilibrium at Phi = F_lambda(c) and taxes w.
double log_likelihood(const SurplusModel& model, const CovariateBasis& c, const Matching& observed, const TaxScheme& w,
                      const MarketSpec& spec, const IpfpConfig& inner = {1e-13, 100'000});

/** Nested fixed point estimation: minimize the divergence between observed and simulated matchings
 * over lambda, solving the tax-fixed equilibrium at every trial value. Taxes stay at their observed values.
 */
EstimationResult estimate(const Matching& observed, const CovariateBasis& c, const TaxScheme& w,
                          const MarketSpec& spec, const EstimationConfig& cfg = {});

}  // namespace regmatch
