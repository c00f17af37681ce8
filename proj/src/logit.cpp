#include "regmatch/logit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace regmatch {

namespace {

constexpr double kMinMass = 1e-300;
constexpr double kTiny = std::numeric_limits<double>::min();

void require_finite(const Matrix& a, const char* what) {
    for (double v : a.data)
        if (!std::isfinite(v)) throw RangeError(std::string(what) + " contains a non-finite entry");
}

void require_shape(const Matrix& a, const MarketSpec& spec, const char* what) {
    if (a.rows != spec.num_workers() || a.cols != spec.num_slots())
        throw DimensionError(std::string(what) + " must be " + std::to_string(spec.num_workers()) + "x" +
                             std::to_string(spec.num_slots()));
}

void require_positive(const Matching& mu) {
    auto check = [](double v) {
        if (!(v >= kMinMass)) throw RangeError("entropy requires strictly positive masses");
    };
    for (double v : mu.matched.data) check(v);
    for (double v : mu.unmatched_workers) check(v);
    for (double v : mu.unmatched_slots) check(v);
}

}  // namespace

double log1p_sum_exp(std::span<const double> u) {
    double shift = 0.0;
    for (double v : u) shift = std::max(shift, v);
    double s = std::exp(-shift);
    for (double v : u) s += std::exp(v - shift);
    return shift + std::log(s);
}

double GumbelChoice::value(std::span<const double> utilities) const { return log1p_sum_exp(utilities); }

void GumbelChoice::choice_probabilities(std::span<const double> utilities, std::span<double> out) const {
    double shift = 0.0;
    for (double v : utilities) shift = std::max(shift, v);
    out[0] = std::exp(-shift);
    double s = out[0];
    for (std::size_t k = 0; k < utilities.size(); ++k) {
        out[k + 1] = std::exp(utilities[k] - shift);
        s += out[k + 1];
    }
    for (double& p : out) p = std::max(p / s, kTiny);
}

double GumbelChoice::conjugate(std::span<const double> shares) const {
    double s = 0.0;
    for (double p : shares) s += p * std::log(p);
    return s;
}

const ErrorModel& gumbel_logit() {
    static const GumbelLogitModel model;
    return model;
}

double g_value(const Matrix& U, const MarketSpec& spec, const ErrorModel& model) {
    require_shape(U, spec, "U");
    require_finite(U, "U");
    double total = 0.0;
    for (std::size_t x = 0; x < U.rows; ++x)
        total += spec.n[x] * model.worker_side(x).value(std::span<const double>(&U.data[x * U.cols], U.cols));
    return total;
}

Matrix g_gradient(const Matrix& U, const MarketSpec& spec, const ErrorModel& model) {
    require_shape(U, spec, "U");
    require_finite(U, "U");
    Matrix out(U.rows, U.cols + 1);
    for (std::size_t x = 0; x < U.rows; ++x) {
        std::span<double> row(&out.data[x * out.cols], out.cols);
        model.worker_side(x).choice_probabilities(std::span<const double>(&U.data[x * U.cols], U.cols), row);
        for (double& p : row) p *= spec.n[x];
    }
    return out;
}

double h_value(const Matrix& V, const MarketSpec& spec, const ErrorModel& model) {
    require_shape(V, spec, "V");
    require_finite(V, "V");
    std::vector<double> column(V.rows);
    double total = 0.0;
    for (std::size_t y = 0; y < V.cols; ++y) {
        for (std::size_t x = 0; x < V.rows; ++x) column[x] = V(x, y);
        total += spec.m[y] * model.slot_side(y).value(column);
    }
    return total;
}

Matrix h_gradient(const Matrix& V, const MarketSpec& spec, const ErrorModel& model) {
    require_shape(V, spec, "V");
    require_finite(V, "V");
    Matrix out(V.rows + 1, V.cols);
    std::vector<double> column(V.rows), probs(V.rows + 1);
    for (std::size_t y = 0; y < V.cols; ++y) {
        for (std::size_t x = 0; x < V.rows; ++x) column[x] = V(x, y);
        model.slot_side(y).choice_probabilities(column, probs);
        for (std::size_t k = 0; k <= V.rows; ++k) out(k, y) = spec.m[y] * probs[k];
    }
    return out;
}

double g_conjugate(const Matching& mu, const MarketSpec& spec, const ErrorModel& model) {
    check_dimensions(spec, mu);
    require_positive(mu);
    std::vector<double> shares(spec.num_slots() + 1);
    double total = 0.0;
    for (std::size_t x = 0; x < spec.num_workers(); ++x) {
        shares[0] = mu.unmatched_workers[x] / spec.n[x];
        for (std::size_t y = 0; y < spec.num_slots(); ++y) shares[y + 1] = mu.matched(x, y) / spec.n[x];
        total += spec.n[x] * model.worker_side(x).conjugate(shares);
    }
    return total;
}

double h_conjugate(const Matching& mu, const MarketSpec& spec, const ErrorModel& model) {
    check_dimensions(spec, mu);
    require_positive(mu);
    std::vector<double> shares(spec.num_workers() + 1);
    double total = 0.0;
    for (std::size_t y = 0; y < spec.num_slots(); ++y) {
        shares[0] = mu.unmatched_slots[y] / spec.m[y];
        for (std::size_t x = 0; x < spec.num_workers(); ++x) shares[x + 1] = mu.matched(x, y) / spec.m[y];
        total += spec.m[y] * model.slot_side(y).conjugate(shares);
    }
    return total;
}

double entropy(const Matching& mu, const MarketSpec& spec, const ErrorModel& model) {
    return -g_conjugate(mu, spec, model) - h_conjugate(mu, spec, model);
}

}  // namespace regmatch
