#pragma once

#include <span>

#include "regmatch/market.hpp"

namespace regmatch {

/** Discrete choice of one agent type over a menu of options plus an implicit null option of utility 0.
 *
 * value() is E[max_k (u_k + e_k)] for the type's error distribution (up to an additive constant),
 * choice_probabilities() its gradient, and conjugate() its Legendre-Fenchel transform evaluated at
 * a vector of choice shares whose entries sum to 1 (null share first).
 */
class ChoiceModel {
    public:
        virtual ~ChoiceModel() = default;

        virtual double value(std::span<const double> utilities) const = 0;
        /// out has utilities.size() + 1 entries: out[0] is the null option.
        virtual void choice_probabilities(std::span<const double> utilities, std::span<double> out) const = 0;
        /// shares has one more entry than the menu: shares[0] is the null option.
        virtual double conjugate(std::span<const double> shares) const = 0;
};

/// i.i.d. standard Gumbel errors: log-sum-exp, softmax and negative Shannon entropy.
class GumbelChoice final : public ChoiceModel {
    public:
        double value(std::span<const double> utilities) const override;
        void choice_probabilities(std::span<const double> utilities, std::span<double> out) const override;
        double conjugate(std::span<const double> shares) const override;
};

/// Error distributions P_x (worker side) and Q_y (slot side) for every type.
class ErrorModel {
    public:
        virtual ~ErrorModel() = default;

        virtual const ChoiceModel& worker_side(std::size_t x) const = 0;
        virtual const ChoiceModel& slot_side(std::size_t y) const = 0;
};

/** Gumbel errors on both sides.
 *
 * The Euler-Mascheroni constant is omitted from every value, so absolute welfare figures are lower
 * than the expected-utility convention by gamma * (sum n + sum m). Gradients, equilibria and
 * welfare differences are unaffected.
 */
class GumbelLogitModel final : public ErrorModel {
    public:
        const ChoiceModel& worker_side(std::size_t) const override { return choice_; }
        const ChoiceModel& slot_side(std::size_t) const override { return choice_; }

    private:
        GumbelChoice choice_;
};

const ErrorModel& gumbel_logit();

/// Euler-Mascheroni constant; the offset between reported welfare and expected-utility welfare per unit mass.
inline constexpr double kEulerGamma = 0.57721566490153286061;

/// log(1 + sum_k exp(u_k)) without overflow.
double log1p_sum_exp(std::span<const double> u);

/// G(U) = sum_x n_x G_x(U_x.)
double g_value(const Matrix& U, const MarketSpec& spec, const ErrorModel& model = gumbel_logit());
/// N x (M+1) demand matrix; column 0 is the unmatched option y0, column y+1 is slot type y.
Matrix g_gradient(const Matrix& U, const MarketSpec& spec, const ErrorModel& model = gumbel_logit());

/// H(V) = sum_y m_y H_y(V_.y)
double h_value(const Matrix& V, const MarketSpec& spec, const ErrorModel& model = gumbel_logit());
/// (N+1) x M demand matrix; row 0 is the unmatched option x0, row x+1 is worker type x.
Matrix h_gradient(const Matrix& V, const MarketSpec& spec, const ErrorModel& model = gumbel_logit());

/// G*(mu) = sum_x n_x G*_x(mu_x. / n_x) over Y0.
double g_conjugate(const Matching& mu, const MarketSpec& spec, const ErrorModel& model = gumbel_logit());
/// H*(mu) = sum_y m_y H*_y(mu_.y / m_y) over X0.
double h_conjugate(const Matching& mu, const MarketSpec& spec, const ErrorModel& model = gumbel_logit());

/// E(mu) = -G*(mu) - H*(mu); mu must be strictly positive (entries below 1e-300 are rejected).
double entropy(const Matching& mu, const MarketSpec& spec, const ErrorModel& model = gumbel_logit());

}  // namespace regmatch
