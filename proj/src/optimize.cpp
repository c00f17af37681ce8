#include "regmatch/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace regmatch::optimize {

namespace {

class Counted {
    public:
        Counted(const Objective& f, long budget) : f_{f}, budget_{budget} {}
        double operator()(const std::vector<double>& x) {
            ++evals_;
            return f_(x);
        }
        bool exhausted() const { return evals_ >= budget_; }
        long evaluations() const { return evals_; }

    private:
        const Objective& f_;
        long budget_;
        long evals_ = 0;
};

std::vector<double> affine(const std::vector<double>& a, double s, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * (b[i] - a[i]);
    return out;
}

}  // namespace

Minimum nelder_mead(const Objective& f, std::vector<double> x0, double target, long max_evals, double initial_step) {
    Counted eval(f, max_evals);
    const std::size_t dim = x0.size();
    Minimum out;
    out.x = x0;
    out.value = eval(x0);
    out.trace.push_back(out.value);
    if (dim == 0) {
        out.evaluations = eval.evaluations();
        out.reached_target = out.value <= target;
        return out;
    }

    double step = initial_step;
    for (int restart = 0; restart < 4 && out.value > target && !eval.exhausted(); ++restart, step *= 0.1) {
        std::vector<std::vector<double>> pts{out.x};
        std::vector<double> vals{out.value};
        for (std::size_t i = 0; i < dim && !eval.exhausted(); ++i) {
            auto p = out.x;
            p[i] += step * std::max(1.0, std::abs(p[i]));
            vals.push_back(eval(p));
            pts.push_back(std::move(p));
        }
        if (pts.size() != dim + 1) break;

        std::vector<std::size_t> order(dim + 1);
        while (!eval.exhausted()) {
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
            const std::size_t best = order.front(), worst = order.back(), second = order[dim - 1];
            if (vals[best] < out.value) {
                out.value = vals[best];
                out.x = pts[best];
            }
            out.trace.push_back(out.value);
            if (out.value <= target) break;

            double diameter = 0.0;
            for (const auto& p : pts)
                for (std::size_t i = 0; i < dim; ++i) diameter = std::max(diameter, std::abs(p[i] - pts[best][i]));
            if (diameter <= 1e-12 * (1.0 + std::abs(pts[best][0])) || vals[worst] - vals[best] <= 1e-300) break;

            std::vector<double> centroid(dim, 0.0);
            for (std::size_t k = 0; k <= dim; ++k)
                if (k != worst)
                    for (std::size_t i = 0; i < dim; ++i) centroid[i] += pts[k][i] / static_cast<double>(dim);

            auto reflected = affine(centroid, -1.0, pts[worst]);
            const double fr = eval(reflected);
            if (fr < vals[best]) {
                auto expanded = affine(centroid, -2.0, pts[worst]);
                const double fe = eval(expanded);
                if (fe < fr) {
                    pts[worst] = std::move(expanded);
                    vals[worst] = fe;
                } else {
                    pts[worst] = std::move(reflected);
                    vals[worst] = fr;
                }
                continue;
            }
            if (fr < vals[second]) {
                pts[worst] = std::move(reflected);
                vals[worst] = fr;
                continue;
            }
            const bool outside = fr < vals[worst];
            auto contracted = outside ? affine(centroid, 0.5, reflected) : affine(centroid, 0.5, pts[worst]);
            const double fc = eval(contracted);
            if (outside ? fc <= fr : fc < vals[worst]) {
                pts[worst] = std::move(contracted);
                vals[worst] = fc;
                continue;
            }
            for (std::size_t k = 0; k <= dim && !eval.exhausted(); ++k) {
                if (k == best) continue;
                pts[k] = affine(pts[best], 0.5, pts[k]);
                vals[k] = eval(pts[k]);
            }
        }
        for (std::size_t k = 0; k < vals.size(); ++k) {
            if (vals[k] < out.value) {
                out.value = vals[k];
                out.x = pts[k];
            }
        }
        if (out.trace.back() != out.value) out.trace.push_back(out.value);
    }
    out.evaluations = eval.evaluations();
    out.reached_target = out.value <= target;
    return out;
}

Minimum finite_difference_bfgs(const Objective& f, std::vector<double> x0, double target, long max_evals) {
    Counted eval(f, max_evals);
    const std::size_t dim = x0.size();
    Minimum out;
    out.x = std::move(x0);
    out.value = eval(out.x);
    out.trace.push_back(out.value);

    auto gradient = [&](const std::vector<double>& x) {
        std::vector<double> g(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            const double h = 1e-5 * (1.0 + std::abs(x[i]));
            auto xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            g[i] = (eval(xp) - eval(xm)) / (2.0 * h);
        }
        return g;
    };

    std::vector<double> H(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) H[i * dim + i] = 1.0;
    std::vector<double> g = gradient(out.x);

    while (out.value > target && !eval.exhausted()) {
        std::vector<double> p(dim, 0.0);
        double slope = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = 0; j < dim; ++j) p[i] -= H[i * dim + j] * g[j];
            slope += p[i] * g[i];
        }
        if (slope >= 0.0) {
            // lost descent direction: reset the curvature estimate
            std::fill(H.begin(), H.end(), 0.0);
            for (std::size_t i = 0; i < dim; ++i) {
                H[i * dim + i] = 1.0;
                p[i] = -g[i];
            }
            slope = -std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
        }
        if (slope == 0.0) break;

        double alpha = 1.0, trial = 0.0;
        std::vector<double> x_new(dim);
        bool accepted = false;
        for (int k = 0; k < 50 && !eval.exhausted(); ++k, alpha *= 0.5) {
            for (std::size_t i = 0; i < dim; ++i) x_new[i] = out.x[i] + alpha * p[i];
            trial = eval(x_new);
            if (trial <= out.value + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;

        std::vector<double> g_new = gradient(x_new);
        std::vector<double> s(dim), y(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            s[i] = x_new[i] - out.x[i];
            y[i] = g_new[i] - g[i];
        }
        out.x = x_new;
        out.value = trial;
        out.trace.push_back(trial);
        g = std::move(g_new);

        const double sy = std::inner_product(s.begin(), s.end(), y.begin(), 0.0);
        if (sy > 1e-300) {
            // H <- (I - rho s y') H (I - rho y s') + rho s s'
            const double rho = 1.0 / sy;
            std::vector<double> Hy(dim, 0.0);
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t j = 0; j < dim; ++j) Hy[i] += H[i * dim + j] * y[j];
            const double yHy = std::inner_product(y.begin(), y.end(), Hy.begin(), 0.0);
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t j = 0; j < dim; ++j)
                    H[i * dim + j] += (1.0 + rho * yHy) * rho * s[i] * s[j] - rho * (Hy[i] * s[j] + s[i] * Hy[j]);
        }
        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        if (gmax <= 1e-14) break;
    }
    out.evaluations = eval.evaluations();
    out.reached_target = out.value <= target;
    return out;
}

}  // namespace regmatch::optimize
