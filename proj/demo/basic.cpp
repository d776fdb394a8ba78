// Minimal end-to-end walkthrough: simulate a 1-D dataset, build a 3-level
// partition, compare the approximate log-likelihood with the dense one, and
// predict on a grid.

#include <iostream>

#include "mra/executor.hpp"
#include "mra/oracle.hpp"

int main() {
    using namespace mra;

    CovarianceModel model;
    model.family = CovarianceModel::Family::Matern15;
    model.variance = 0.95;
    model.range = 0.05;
    model.nugget = 0.05;

    const int n = 512;
    const Matrix S = regular_grid_1d(n);
    const Vector y = simulate_1d_circulant(model, n, 42, 1.0 / n);

    Domain domain;
    domain.lower = Vector::Zero(1);
    domain.upper = Vector::Ones(1);
    PartitionTree tree = build_partition(domain, {4, 4, 4});
    assign_locations(tree, S, &y);
    place_knots(tree, KnotStrategy::equidistant_uniform(8, 3));

    const double approx = loglikelihood(tree, model, 4);
    const double exact = exact_loglik(model, S, y);
    std::cout << "approximate loglik: " << approx << "\n";
    std::cout << "exact loglik:       " << exact << "\n";

    const PriorFactors prior = compute_prior(tree, model);
    const PosteriorFactors post = run_upward(tree, prior, 4);
    const Matrix SP = regular_grid_1d(25);
    const auto pd = run_downward(tree, model, prior, post, SP, 4);
    const auto [mean, var] = predict_marginals(pd);
    std::cout << "first prediction: mean " << mean[0] << ", sd " << std::sqrt(var[0]) << "\n";
    return 0;
}
