#pragma once

// Derivative-free simplex minimizer (Nelder-Mead) with standard coefficients.
// Non-finite objective values are treated as +inf, which rejects the step.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "mra/geometry.hpp"

namespace mra {

struct NelderMeadOptions {
    int max_iters = 500;
    double tol = 1e-6;       // converged when the simplex value spread drops below this
    double init_step = 0.5;  // initial simplex edge along each coordinate
};

struct NelderMeadResult {
    Vector x;
    double fx = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

inline NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                                    const NelderMeadOptions& opts = {},
                                    std::vector<std::pair<Vector, double>>* trace = nullptr) {
    const int n = static_cast<int>(x0.size());
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

    NelderMeadResult res;
    auto eval = [&](const Vector& x) {
        double v = f(x);
        if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
        ++res.evaluations;
        if (trace) trace->emplace_back(x, v);
        return v;
    };

    std::vector<Vector> xs(static_cast<std::size_t>(n) + 1, x0);
    std::vector<double> fs(static_cast<std::size_t>(n) + 1);
    for (int i = 1; i <= n; ++i) xs[static_cast<std::size_t>(i)][i - 1] += opts.init_step;
    for (int i = 0; i <= n; ++i) fs[static_cast<std::size_t>(i)] = eval(xs[static_cast<std::size_t>(i)]);

    std::vector<int> order(static_cast<std::size_t>(n) + 1);
    for (int it = 0; it < opts.max_iters; ++it) {
        res.iterations = it + 1;
        for (int i = 0; i <= n; ++i) order[static_cast<std::size_t>(i)] = i;
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return fs[static_cast<std::size_t>(a)] < fs[static_cast<std::size_t>(b)]; });
        const int best = order.front(), worst = order.back(), second = order[static_cast<std::size_t>(n - 1)];
        const double spread = fs[static_cast<std::size_t>(worst)] - fs[static_cast<std::size_t>(best)];
        if (std::isfinite(spread) && spread < opts.tol) {
            res.converged = true;
            break;
        }

        Vector centroid = Vector::Zero(n);
        for (int i = 0; i <= n; ++i)
            if (i != worst) centroid += xs[static_cast<std::size_t>(i)];
        centroid /= n;

        const Vector xr = centroid + alpha * (centroid - xs[static_cast<std::size_t>(worst)]);
        const double fr = eval(xr);
        if (fr < fs[static_cast<std::size_t>(best)]) {
            const Vector xe = centroid + gamma * (xr - centroid);
            const double fe = eval(xe);
            if (fe < fr) {
                xs[static_cast<std::size_t>(worst)] = xe;
                fs[static_cast<std::size_t>(worst)] = fe;
            } else {
                xs[static_cast<std::size_t>(worst)] = xr;
                fs[static_cast<std::size_t>(worst)] = fr;
            }
            continue;
        }
        if (fr < fs[static_cast<std::size_t>(second)]) {
            xs[static_cast<std::size_t>(worst)] = xr;
            fs[static_cast<std::size_t>(worst)] = fr;
            continue;
        }
        const Vector xc = centroid + rho * (xs[static_cast<std::size_t>(worst)] - centroid);
        const double fc = eval(xc);
        if (fc < fs[static_cast<std::size_t>(worst)]) {
            xs[static_cast<std::size_t>(worst)] = xc;
            fs[static_cast<std::size_t>(worst)] = fc;
            continue;
        }
        for (int i = 0; i <= n; ++i) {
            if (i == best) continue;
            xs[static_cast<std::size_t>(i)] =
                xs[static_cast<std::size_t>(best)] +
                sigma * (xs[static_cast<std::size_t>(i)] - xs[static_cast<std::size_t>(best)]);
            fs[static_cast<std::size_t>(i)] = eval(xs[static_cast<std::size_t>(i)]);
        }
    }

    int best = 0;
    for (int i = 1; i <= n; ++i)
        if (fs[static_cast<std::size_t>(i)] < fs[static_cast<std::size_t>(best)]) best = i;
    res.x = xs[static_cast<std::size_t>(best)];
    res.fx = fs[static_cast<std::size_t>(best)];
    return res;
}

}  // namespace mra
