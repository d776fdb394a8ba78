#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "mra/fit.hpp"
#include "mra/oracle.hpp"

using namespace mra;
using testref::unit_domain;

namespace {

PartitionTree sim_tree(int n, const CovarianceModel& truth, std::uint64_t seed) {
    auto tree = build_partition(unit_domain(1), {4, 4});
    const Matrix S = regular_grid_1d(n);
    const Vector y = simulate_1d_circulant(truth, n, seed);
    assign_locations(tree, S, &y);
    place_knots(tree, KnotStrategy::equidistant_uniform(8, 2));
    return tree;
}

CovarianceModel truth_model() {
    CovarianceModel m;
    m.family = CovarianceModel::Family::Matern15;
    m.variance = 0.95;
    m.range = 0.05;
    m.nugget = 0.05;
    return m;
}

}  // namespace

TEST_CASE("nelder-mead minimizes a shifted quadratic", "[fit]") {
    Vector x0 = Vector::Zero(3);
    auto f = [](const Vector& x) {
        Vector c(3);
        c << 1.0, -2.0, 0.5;
        return (x - c).squaredNorm();
    };
    NelderMeadOptions opts;
    opts.tol = 1e-10;
    opts.max_iters = 2000;
    const auto res = nelder_mead(f, x0, opts);
    CHECK(res.converged);
    CHECK(res.fx < 1e-6);
    CHECK(std::abs(res.x[1] + 2.0) < 1e-3);
}

TEST_CASE("fitting from the truth does not lose likelihood", "[fit]") {
    const auto truth = truth_model();
    auto tree = sim_tree(1024, truth, 101);
    const double ll0 = loglikelihood(tree, truth);

    FitOptions opts;
    opts.max_iters = 150;
    const auto res = fit(tree, truth.family, truth, opts);
    CHECK(res.loglik >= ll0 - 1e-6);

    // best-so-far trace is non-decreasing by construction of accepted steps
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& e : res.trace) {
        const double next_best = std::max(best, e.loglik);
        CHECK(next_best >= best);
        best = next_best;
    }
    CHECK(best == Catch::Approx(res.loglik).margin(1e-9));
}

TEST_CASE("fixed-nugget search never moves the nugget", "[fit]") {
    const auto truth = truth_model();
    auto tree = sim_tree(512, truth, 102);
    FitOptions opts;
    opts.fix_nugget = true;
    opts.max_iters = 60;
    const auto res = fit(tree, truth.family, truth, opts);
    CHECK(res.model.nugget == truth.nugget);
    for (const auto& e : res.trace) CHECK(e.nugget == truth.nugget);
}

TEST_CASE("invalid initial parameters are rejected up front", "[fit]") {
    const auto truth = truth_model();
    auto tree = sim_tree(128, truth, 103);
    CovarianceModel bad = truth;
    bad.variance = -1.0;
    CHECK_THROWS_AS(fit(tree, truth.family, bad, {}), std::invalid_argument);
    bad = truth;
    bad.nugget = 0.0;  // log-parameterized 3-parameter search needs nugget > 0
    CHECK_THROWS_AS(fit(tree, truth.family, bad, {}), std::invalid_argument);
    FitOptions fixed;
    fixed.fix_nugget = true;
    fixed.max_iters = 1;
    CHECK_NOTHROW(fit(tree, truth.family, bad, fixed));
}
