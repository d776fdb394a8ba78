#pragma once

// Maximum-likelihood parameter fitting: Nelder-Mead over log-parameters
// (log sigma^2, log kappa, log sigma^2_eps) of the approximate likelihood.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mra/executor.hpp"
#include "mra/nelder_mead.hpp"

namespace mra {

struct FitOptions {
    bool fix_nugget = false;    // 2-parameter search with nugget held at init value
    int max_iters = 500;
    double tol = 1e-6;          // simplex loglik spread
    double init_step = 0.5;     // in log-parameter space
    int workers = 1;
};

struct FitEvaluation {
    int index;
    CovarianceModel::Family family;
    double variance, range, nugget;
    double loglik;
};

struct FitResult {
    CovarianceModel model;
    double loglik = 0.0;
    int evaluations = 0;
    bool converged = false;
    std::vector<FitEvaluation> trace;
};

// The tree must have observations assigned and knots placed; leaf knots do not
// depend on theta, so the partition is reused across evaluations.
inline FitResult fit(const PartitionTree& tree, CovarianceModel::Family family,
                     const CovarianceModel& init, const FitOptions& opts = {}) {
    if (!(init.variance > 0) || !(init.range > 0) || (!opts.fix_nugget && !(init.nugget > 0)))
        throw std::invalid_argument("fit: initial parameters must be componentwise positive");

    FitResult result;
    auto model_at = [&](const Vector& x) {
        CovarianceModel m;
        m.family = family;
        m.variance = std::exp(x[0]);
        m.range = std::exp(x[1]);
        m.nugget = opts.fix_nugget ? init.nugget : std::exp(x[2]);
        return m;
    };
    auto objective = [&](const Vector& x) {
        const CovarianceModel m = model_at(x);
        double ll;
        try {
            ll = loglikelihood(tree, m, opts.workers);
        } catch (const std::runtime_error&) {
            return std::numeric_limits<double>::infinity();  // rejected step
        }
        result.trace.push_back({static_cast<int>(result.trace.size()), family, m.variance, m.range,
                                m.nugget, ll});
        return -ll;
    };

    Vector x0(opts.fix_nugget ? 2 : 3);
    x0[0] = std::log(init.variance);
    x0[1] = std::log(init.range);
    if (!opts.fix_nugget) x0[2] = std::log(init.nugget);

    {
        const double f0 = objective(x0);
        if (!std::isfinite(f0))
            throw std::invalid_argument("fit: loglikelihood not finite at the initial parameters");
        result.trace.clear();
    }

    NelderMeadOptions nm;
    nm.max_iters = opts.max_iters;
    nm.tol = opts.tol;
    nm.init_step = opts.init_step;
    const auto nmres = nelder_mead(objective, x0, nm);

    result.model = model_at(nmres.x);
    result.loglik = -nmres.fx;
    result.evaluations = nmres.evaluations;
    result.converged = nmres.converged;
    return result;
}

}  // namespace mra
