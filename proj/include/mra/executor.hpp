#pragma once

// Tree-parallel scheduling of the upward (inference) and downward (prediction)
// sweeps. Regions at one resolution run concurrently; a parent merges only
// after all of its children finished. Outputs are bitwise independent of the
// worker count because every region computes the same expression and children
// are always reduced in ascending order.

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mra/predict.hpp"

namespace mra {

struct TraceEvent {
    int node;
    std::string stage;
    double t_start;
    double t_end;
    int worker;
};
using ScheduleTrace = std::vector<TraceEvent>;

namespace detail {

inline double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

// Static block-free work distribution over [0, count) with an atomic cursor.
template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn) {
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i, 0);
        return;
    }
    std::atomic<int> cursor{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&](int worker) {
        try {
            for (;;) {
                const int i = cursor.fetch_add(1);
                if (i >= count) break;
                fn(i, worker);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(body, w);
    body(0);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

// Upward sweep over the whole tree. worker_count = 1 is exactly the serial
// algorithm; larger counts parallelize within each resolution.
inline PosteriorFactors run_upward(const PartitionTree& tree, const PriorFactors& prior,
                                   int worker_count = 1, ScheduleTrace* trace = nullptr) {
    if (worker_count < 1) throw std::invalid_argument("run_upward: worker_count must be >= 1");
    const int M = tree.depth();

    PosteriorFactors post;
    post.Ktilde_inv.resize(static_cast<std::size_t>(tree.total_nodes()));
    post.Ktilde_chol.resize(static_cast<std::size_t>(tree.total_nodes()));
    post.A.resize(static_cast<std::size_t>(tree.total_nodes()));
    post.omega.resize(static_cast<std::size_t>(tree.total_nodes()));
    post.d.assign(static_cast<std::size_t>(tree.total_nodes()), 0.0);
    post.u.assign(static_cast<std::size_t>(tree.total_nodes()), 0.0);
    post.n_obs = tree.n_obs;

    std::vector<RegionSummary> slots(static_cast<std::size_t>(tree.total_nodes()));
    std::mutex trace_mutex;
    auto record = [&](int node, const char* stage, double t0, int worker) {
        if (!trace) return;
        std::lock_guard<std::mutex> lock(trace_mutex);
        trace->push_back({node, stage, t0, detail::now_seconds(), worker});
    };

    // leaves first, then one resolution at a time toward the root
    detail::parallel_for(tree.n_leaves(), worker_count, [&](int q, int worker) {
        const double t0 = detail::now_seconds();
        const int node = tree.node_id(M, q);
        slots[static_cast<std::size_t>(node)] = leaf_summaries(tree, prior, node);
        post.d[static_cast<std::size_t>(node)] = slots[static_cast<std::size_t>(node)].d;
        post.u[static_cast<std::size_t>(node)] = slots[static_cast<std::size_t>(node)].u;
        record(node, "leaf-summarize", t0, worker);
    });
    for (int m = M - 1; m >= 0; --m) {
        detail::parallel_for(tree.level_count(m), worker_count, [&](int q, int worker) {
            const double t0 = detail::now_seconds();
            const int node = tree.node_id(m, q);
            const int J = tree.branching[static_cast<std::size_t>(m)];
            std::vector<const RegionSummary*> children(static_cast<std::size_t>(J));
            for (int j = 0; j < J; ++j)
                children[static_cast<std::size_t>(j)] =
                    &slots[static_cast<std::size_t>(tree.child(node, j))];
            slots[static_cast<std::size_t>(node)] =
                merge_and_update(tree, prior, node, children, post);
            record(node, "merge-update", t0, worker);
        });
        for (int j = tree.level_offset[static_cast<std::size_t>(m) + 1];
             j < tree.level_offset[static_cast<std::size_t>(m) + 2]; ++j)
            slots[static_cast<std::size_t>(j)] = RegionSummary{};
    }
    post.d[0] = slots[0].d;
    post.u[0] = slots[0].u;
    return post;
}

inline double loglikelihood(const PartitionTree& tree, const CovarianceModel& model,
                            int worker_count = 1) {
    const PriorFactors prior = compute_prior(tree, model);
    return run_upward(tree, prior, worker_count).loglik();
}

// Downward sweep: leaf-parallel prior prediction quantities and basis sweep.
inline PredictiveDistribution run_downward(const PartitionTree& tree, const CovarianceModel& model,
                                           const PriorFactors& prior, const PosteriorFactors& post,
                                           const Matrix& SP, int worker_count = 1,
                                           ScheduleTrace* trace = nullptr) {
    if (worker_count < 1) throw std::invalid_argument("run_downward: worker_count must be >= 1");
    const int M = tree.depth();

    PredictiveDistribution pd;
    pd.tree = &tree;
    pd.buckets = bucket_predictions(tree, SP);
    pd.n_pred = pd.buckets.total;
    pd.leaves.resize(static_cast<std::size_t>(tree.n_leaves()));
    pd.eta_mean.resize(static_cast<std::size_t>(tree.total_nodes()));
    pd.Ktchol.resize(static_cast<std::size_t>(tree.total_nodes()));
    for (int node = 0; node < tree.level_offset[static_cast<std::size_t>(M)]; ++node) {
        const auto& chol = post.Ktilde_chol[static_cast<std::size_t>(node)];
        pd.Ktchol[static_cast<std::size_t>(node)] = &chol;
        const auto& omega = post.omega[static_cast<std::size_t>(node)];
        pd.eta_mean[static_cast<std::size_t>(node)] =
            chol.dim() ? Vector(chol.solve(omega.back())) : Vector(0);
    }

    std::vector<int> occupied;
    for (int q = 0; q < tree.n_leaves(); ++q)
        if (!pd.buckets.rows[static_cast<std::size_t>(q)].empty()) occupied.push_back(q);

    std::mutex trace_mutex;
    detail::parallel_for(static_cast<int>(occupied.size()), worker_count, [&](int i, int worker) {
        const double t0 = detail::now_seconds();
        const int q = occupied[static_cast<std::size_t>(i)];
        const int node = tree.node_id(M, q);
        const auto pp = compute_pred_prior_leaf(tree, model, prior, node,
                                                pd.buckets.pts[static_cast<std::size_t>(q)]);
        pd.leaves[static_cast<std::size_t>(q)] =
            posterior_basis_sweep_leaf(tree, prior, post, node, pp);
        if (trace) {
            std::lock_guard<std::mutex> lock(trace_mutex);
            trace->push_back({node, "leaf-predict", t0, detail::now_seconds(), worker});
        }
    });
    return pd;
}

}  // namespace mra
