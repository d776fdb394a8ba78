#pragma once

// Recursive domain partitioning, observation bucketing and knot placement.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mra {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Point = Eigen::RowVectorXd;

// Region index sequence (j1,...,jm), 0-based; empty path is the root.
using RegionPath = std::vector<int>;

inline std::string path_to_string(const RegionPath& p) {
    if (p.empty()) return "(root)";
    std::string s;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) s += '.';
        s += std::to_string(p[i]);
    }
    return s;
}

struct Domain {
    Vector lower;
    Vector upper;

    int dim() const { return static_cast<int>(lower.size()); }

    void validate() const {
        if (lower.size() < 1 || lower.size() != upper.size())
            throw std::invalid_argument("domain: dimension must be >= 1 with matching bounds");
        for (int k = 0; k < dim(); ++k)
            if (!(lower[k] < upper[k]))
                throw std::invalid_argument("domain: lower bound must be below upper bound on every axis");
    }

    bool contains(const Point& s) const {
        for (int k = 0; k < dim(); ++k)
            if (s[k] < lower[k] || s[k] > upper[k]) return false;
        return true;
    }
};

struct Box {
    Vector lower;
    Vector upper;
};

struct KnotStrategy {
    enum class Variant { EquidistantInterior, ChildBoundaries, UserSupplied };

    Variant variant = Variant::EquidistantInterior;
    // r_m for non-leaf resolutions m = 0..M-1.
    std::vector<int> knots_per_level;
    std::function<Matrix(const Box&, const RegionPath&)> user_knots;

    static KnotStrategy equidistant(std::vector<int> r_per_level) {
        KnotStrategy s;
        s.variant = Variant::EquidistantInterior;
        s.knots_per_level = std::move(r_per_level);
        return s;
    }
    static KnotStrategy equidistant_uniform(int r, int levels) {
        return equidistant(std::vector<int>(static_cast<std::size_t>(levels), r));
    }
    // 1-D only: knots on the internal boundaries of the region's children.
    static KnotStrategy child_boundaries(int levels, const std::vector<int>& branching) {
        KnotStrategy s;
        s.variant = Variant::ChildBoundaries;
        for (int m = 0; m < levels; ++m) s.knots_per_level.push_back(branching.at(m) - 1);
        return s;
    }
    static KnotStrategy user(std::function<Matrix(const Box&, const RegionPath&)> fn,
                             std::vector<int> r_per_level) {
        KnotStrategy s;
        s.variant = Variant::UserSupplied;
        s.user_knots = std::move(fn);
        s.knots_per_level = std::move(r_per_level);
        return s;
    }
};

// Fully-built region hierarchy. Regions at level m are stored contiguously;
// node ids are level_offset[m] + q with q the mixed-radix index of the path.
// Immutable once built (build -> assign -> place_knots); concurrent reads are safe.
struct PartitionTree {
    Domain domain;
    std::vector<int> branching;      // J_1..J_M; children of a level-m region: branching[m]
    std::vector<int> level_offset;   // size M+2; level_offset[M+1] == total node count
    std::vector<Box> boxes;          // by node id
    std::vector<Matrix> knots;       // by node id; leaves hold their observation locations

    // leaf buckets, by leaf ordinal (leaf id - level_offset[M])
    std::vector<Matrix> leaf_locations;
    std::vector<Vector> leaf_values;
    std::vector<std::vector<int>> leaf_source_rows;
    int n_obs = 0;
    bool has_values = false;

    int depth() const { return static_cast<int>(branching.size()); }
    int dim() const { return domain.dim(); }
    int total_nodes() const { return level_offset.back(); }
    int level_count(int m) const { return level_offset[m + 1] - level_offset[m]; }
    int node_id(int m, int q) const { return level_offset[m] + q; }

    int node_level(int id) const {
        int m = 0;
        while (id >= level_offset[m + 1]) ++m;
        return m;
    }
    int node_local(int id) const { return id - level_offset[node_level(id)]; }
    bool is_leaf(int id) const { return id >= level_offset[depth()]; }

    int parent(int id) const {
        const int m = node_level(id);
        return node_id(m - 1, node_local(id) / branching[m - 1]);
    }
    int child(int id, int j) const {
        const int m = node_level(id);
        return node_id(m + 1, node_local(id) * branching[m] + j);
    }

    // Axis along which level-m regions are split into their children.
    int split_axis(int m) const { return m % dim(); }

    RegionPath path_of(int id) const {
        const int m = node_level(id);
        RegionPath p(static_cast<std::size_t>(m));
        int q = node_local(id);
        for (int l = m - 1; l >= 0; --l) {
            p[static_cast<std::size_t>(l)] = q % branching[l];
            q /= branching[l];
        }
        return p;
    }

    int id_of(const RegionPath& p) const {
        int q = 0;
        for (std::size_t l = 0; l < p.size(); ++l) q = q * branching[l] + p[l];
        return node_id(static_cast<int>(p.size()), q);
    }

    // Ancestor chain of a leaf: node ids at levels 0..M (last entry is the leaf).
    std::vector<int> ancestors(int leaf_id) const {
        std::vector<int> chain(static_cast<std::size_t>(depth()) + 1);
        int id = leaf_id;
        for (int m = depth(); m >= 0; --m) {
            chain[static_cast<std::size_t>(m)] = id;
            if (m > 0) id = parent(id);
        }
        return chain;
    }

    int leaf_ordinal(int leaf_id) const { return leaf_id - level_offset[depth()]; }
    int n_leaves() const { return level_count(depth()); }

    // Leaf claiming a location under the half-open rule (upper domain face closed).
    int locate_leaf(const Point& s) const {
        int q = 0;
        Vector lo = domain.lower, hi = domain.upper;
        for (int m = 0; m < depth(); ++m) {
            const int J = branching[m];
            const int a = split_axis(m);
            const double w = (hi[a] - lo[a]) / J;
            int j = static_cast<int>(std::floor((s[a] - lo[a]) / w));
            j = std::max(0, std::min(J - 1, j));
            lo[a] += j * w;
            hi[a] = lo[a] + w;
            q = q * J + j;
        }
        return node_id(depth(), q);
    }
};

namespace detail {
PartitionTree build_partition_unchecked(const Domain& domain, const std::vector<int>& branching);
}

inline PartitionTree build_partition(const Domain& domain, const std::vector<int>& branching) {
    if (branching.empty())
        throw std::invalid_argument("build_partition: branching sequence must not be empty");
    for (int J : branching)
        if (J < 1) throw std::invalid_argument("build_partition: branching values must be >= 1");
    return detail::build_partition_unchecked(domain, branching);
}

// Depth-0 tree (single region): the exact-process 0-RA case.
inline PartitionTree trivial_partition(const Domain& domain) {
    return detail::build_partition_unchecked(domain, {});
}

inline PartitionTree detail::build_partition_unchecked(const Domain& domain,
                                                       const std::vector<int>& branching) {
    domain.validate();
    PartitionTree tree;
    tree.domain = domain;
    tree.branching = branching;

    const int M = static_cast<int>(branching.size());
    tree.level_offset.assign(static_cast<std::size_t>(M) + 2, 0);
    int count = 1;
    for (int m = 0; m <= M; ++m) {
        tree.level_offset[static_cast<std::size_t>(m) + 1] =
            tree.level_offset[static_cast<std::size_t>(m)] + count;
        if (m < M) count *= branching[static_cast<std::size_t>(m)];
    }

    tree.boxes.resize(static_cast<std::size_t>(tree.total_nodes()));
    tree.knots.resize(static_cast<std::size_t>(tree.total_nodes()));
    tree.boxes[0] = Box{domain.lower, domain.upper};
    for (int m = 0; m < M; ++m) {
        const int J = branching[static_cast<std::size_t>(m)];
        const int a = tree.split_axis(m);
        for (int q = 0; q < tree.level_count(m); ++q) {
            const Box& b = tree.boxes[static_cast<std::size_t>(tree.node_id(m, q))];
            const double w = (b.upper[a] - b.lower[a]) / J;
            for (int j = 0; j < J; ++j) {
                Box cb{b.lower, b.upper};
                cb.lower[a] = b.lower[a] + j * w;
                cb.upper[a] = (j == J - 1) ? b.upper[a] : b.lower[a] + (j + 1) * w;
                tree.boxes[static_cast<std::size_t>(tree.child(tree.node_id(m, q), j))] = cb;
            }
        }
    }

    tree.leaf_locations.assign(static_cast<std::size_t>(tree.n_leaves()), Matrix(0, domain.dim()));
    tree.leaf_values.assign(static_cast<std::size_t>(tree.n_leaves()), Vector(0));
    tree.leaf_source_rows.assign(static_cast<std::size_t>(tree.n_leaves()), {});
    return tree;
}

// Buckets each location into its unique leaf. Values are optional.
inline void assign_locations(PartitionTree& tree, const Matrix& locations,
                             const Vector* values = nullptr) {
    if (locations.cols() != tree.dim() && locations.rows() > 0)
        throw std::invalid_argument("assign_locations: location dimension does not match domain");
    if (values && values->size() != locations.rows())
        throw std::invalid_argument("assign_locations: values length does not match locations");

    const int n = static_cast<int>(locations.rows());
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(tree.n_leaves()));
    for (int i = 0; i < n; ++i) {
        Point s = locations.row(i);
        if (!tree.domain.contains(s))
            throw std::invalid_argument("assign_locations: location " + std::to_string(i) +
                                        " lies outside the domain");
        rows[static_cast<std::size_t>(tree.leaf_ordinal(tree.locate_leaf(s)))].push_back(i);
    }

    for (int q = 0; q < tree.n_leaves(); ++q) {
        const auto& r = rows[static_cast<std::size_t>(q)];
        Matrix locs(static_cast<Eigen::Index>(r.size()), tree.dim());
        Vector vals(values ? static_cast<Eigen::Index>(r.size()) : 0);
        for (std::size_t i = 0; i < r.size(); ++i) {
            locs.row(static_cast<Eigen::Index>(i)) = locations.row(r[i]);
            if (values) vals[static_cast<Eigen::Index>(i)] = (*values)[r[i]];
        }
        tree.leaf_locations[static_cast<std::size_t>(q)] = std::move(locs);
        tree.leaf_values[static_cast<std::size_t>(q)] = std::move(vals);
        tree.leaf_source_rows[static_cast<std::size_t>(q)] = r;
    }
    tree.n_obs = n;
    tree.has_values = values != nullptr;
}

namespace detail {

inline Matrix equidistant_knots(const Box& box, int r, int dim) {
    Matrix out(r, dim);
    if (r == 0) return out;
    if (dim == 1) {
        for (int i = 0; i < r; ++i)
            out(i, 0) = box.lower[0] + (i + 0.5) / r * (box.upper[0] - box.lower[0]);
        return out;
    }
    // near-balanced lattice, first r points in axis order
    int k = 1;
    while (std::pow(k, dim) < r) ++k;
    std::vector<int> idx(static_cast<std::size_t>(dim), 0);
    for (int i = 0; i < r; ++i) {
        for (int a = 0; a < dim; ++a)
            out(i, a) = box.lower[a] +
                        (idx[static_cast<std::size_t>(a)] + 0.5) / k * (box.upper[a] - box.lower[a]);
        for (int a = dim - 1; a >= 0; --a) {
            if (++idx[static_cast<std::size_t>(a)] < k) break;
            idx[static_cast<std::size_t>(a)] = 0;
        }
    }
    return out;
}

}  // namespace detail

// Places knots at all non-leaf resolutions; leaf knots become the leaf's
// observation locations, so assign_locations must run first.
inline void place_knots(PartitionTree& tree, const KnotStrategy& strategy) {
    const int M = tree.depth();
    if (static_cast<int>(strategy.knots_per_level.size()) != M)
        throw std::invalid_argument("place_knots: knot counts must be given for resolutions 0..M-1");
    for (int m = 0; m < M; ++m) {
        const int r = strategy.knots_per_level[static_cast<std::size_t>(m)];
        if (r < 0) throw std::invalid_argument("place_knots: negative knot count");
        if (r == 0 && m > 0)
            throw std::invalid_argument("place_knots: zero knots only allowed at resolution 0");
    }
    if (strategy.variant == KnotStrategy::Variant::ChildBoundaries) {
        if (tree.dim() != 1)
            throw std::invalid_argument("place_knots: child-boundaries knots support d=1 only");
        for (int m = 0; m < M; ++m)
            if (strategy.knots_per_level[static_cast<std::size_t>(m)] != tree.branching[static_cast<std::size_t>(m)] - 1)
                throw std::invalid_argument(
                    "place_knots: child-boundaries requires r = J-1 at every resolution");
    }

    for (int m = 0; m < M; ++m) {
        const int r = strategy.knots_per_level[static_cast<std::size_t>(m)];
        for (int q = 0; q < tree.level_count(m); ++q) {
            const int id = tree.node_id(m, q);
            const Box& box = tree.boxes[static_cast<std::size_t>(id)];
            Matrix k;
            switch (strategy.variant) {
                case KnotStrategy::Variant::EquidistantInterior:
                    k = detail::equidistant_knots(box, r, tree.dim());
                    break;
                case KnotStrategy::Variant::ChildBoundaries: {
                    const int J = tree.branching[static_cast<std::size_t>(m)];
                    k.resize(J - 1, 1);
                    for (int j = 1; j < J; ++j)
                        k(j - 1, 0) = box.lower[0] + j * (box.upper[0] - box.lower[0]) / J;
                    break;
                }
                case KnotStrategy::Variant::UserSupplied:
                    k = strategy.user_knots(box, tree.path_of(id));
                    if (k.rows() != r || (k.rows() > 0 && k.cols() != tree.dim()))
                        throw std::invalid_argument("place_knots: user knot block has wrong shape");
                    break;
            }
            tree.knots[static_cast<std::size_t>(id)] = std::move(k);
        }
    }
    for (int q = 0; q < tree.n_leaves(); ++q)
        tree.knots[static_cast<std::size_t>(tree.node_id(M, q))] =
            tree.leaf_locations[static_cast<std::size_t>(q)];
}

}  // namespace mra
