// Command-line front end: simulation, likelihood evaluation, ML fitting,
// prediction, scoring, competitor comparison and benchmarks.
//
// Every output file is stamped with the config hash and seed (sidecar JSON)
// so a run can be replayed bit for bit.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mra/executor.hpp"
#include "mra/fit.hpp"
#include "mra/io.hpp"
#include "mra/metrics.hpp"
#include "mra/oracle.hpp"

namespace fs = std::filesystem;
using namespace mra;

namespace {

struct Globals {
    std::string config_path;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out_dir = ".";
    std::string trace_path;
    Json config = Json::object();

    std::string hash() const { return config_hash(config); }
    std::string out(const std::string& name) const { return (fs::path(out_dir) / name).string(); }

    void load() {
        if (!config_path.empty()) config = load_json(config_path);
        fs::create_directories(out_dir);
    }

    void sidecar(const std::string& for_file, Json extra = Json::object()) const {
        extra["config_hash"] = hash();
        extra["seed"] = seed;
        std::ofstream(for_file + ".meta.json") << extra.dump(2) << "\n";
    }
};

double elapsed(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_trace(const Globals& g, const ScheduleTrace& trace) {
    if (g.trace_path.empty()) return;
    std::ofstream out(g.trace_path);
    out << "region,stage,start,end,worker\n";
    for (const auto& e : trace)
        out << e.node << "," << e.stage << "," << format_double(e.t_start) << ","
            << format_double(e.t_end) << "," << e.worker << "\n";
}

// Data per the config's "data" key: either a CSV path or a simulation spec.
struct Dataset {
    Matrix S;
    Vector y;
};

Dataset load_dataset(const Globals& g) {
    Dataset d;
    if (!g.config.contains("data"))
        throw std::invalid_argument("config: missing 'data' (csv path or simulation spec)");
    const Json& data = g.config.at("data");
    if (data.contains("csv")) {
        auto [S, y] = read_locations(read_csv(data.at("csv").get<std::string>()));
        d.S = std::move(S);
        d.y = std::move(y);
        return d;
    }
    if (data.contains("simulate")) {
        const Json& sim = data.at("simulate");
        const int n = sim.at("n").get<int>();
        const CovarianceModel model = model_from_json(g.config.value("model", Json::object()));
        const int dim = sim.value("dim", 1);
        if (dim == 1 && sim.value("grid", true)) {
            d.S = regular_grid_1d(n);
            d.y = simulate_1d_circulant(model, n, g.seed, 1.0 / n);
        } else {
            std::mt19937_64 rng(g.seed);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            d.S.resize(n, dim);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < dim; ++k) d.S(i, k) = unif(rng);
            d.y = simulate_dense(model, d.S, g.seed + 1);
        }
        return d;
    }
    throw std::invalid_argument("config: 'data' must contain 'csv' or 'simulate'");
}

PartitionConfig partition_config(const Globals& g, int dim) {
    return partition_from_json(g.config.value("partition", Json::object()), dim);
}

// Default M-RA layout for a 1-D size n when the config gives no partition:
// r = 30 knots per region, J = 4 children, depth chosen so leaves hold ~r points.
PartitionConfig default_mra_partition(int n) {
    PartitionConfig pc;
    pc.domain.lower = Vector::Zero(1);
    pc.domain.upper = Vector::Ones(1);
    int M = 0;
    double per_leaf = n;
    while (per_leaf > 60.0) {
        ++M;
        per_leaf /= 4.0;
    }
    pc.branching.assign(static_cast<std::size_t>(M), 4);
    pc.knots_per_level.assign(static_cast<std::size_t>(M), 30);
    return pc;
}

PartitionTree tree_for(const Globals& g, const Dataset& d) {
    PartitionConfig pc = g.config.contains("partition")
                             ? partition_config(g, static_cast<int>(d.S.cols()))
                             : default_mra_partition(static_cast<int>(d.S.rows()));
    return build_tree(pc, d.S, d.y.size() ? &d.y : nullptr);
}

void write_predictions(const Globals& g, const std::string& name, const Matrix& SP,
                       const Vector& mean, const Vector& var) {
    std::vector<std::string> header;
    for (int k = 0; k < SP.cols(); ++k) header.push_back("x" + std::to_string(k));
    header.push_back("mean");
    header.push_back("sd");
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < SP.rows(); ++i) {
        std::vector<double> row;
        for (int k = 0; k < SP.cols(); ++k) row.push_back(SP(i, k));
        row.push_back(mean[i]);
        row.push_back(std::sqrt(std::max(0.0, var[i])));
        rows.push_back(std::move(row));
    }
    const std::string path = g.out(name);
    write_csv(path, header, rows);
    g.sidecar(path);
}

int cmd_simulate(const Globals& g) {
    const Dataset d = load_dataset(g);
    std::vector<std::string> header;
    for (int k = 0; k < d.S.cols(); ++k) header.push_back("x" + std::to_string(k));
    header.push_back("y");
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < d.S.rows(); ++i) {
        std::vector<double> row;
        for (int k = 0; k < d.S.cols(); ++k) row.push_back(d.S(i, k));
        row.push_back(d.y[i]);
        rows.push_back(std::move(row));
    }
    const std::string path = g.out("simulated.csv");
    write_csv(path, header, rows);
    g.sidecar(path, Json{{"n", d.S.rows()}});
    std::cout << "wrote " << path << " (n=" << d.S.rows() << ")\n";
    return 0;
}

int cmd_loglik(const Globals& g) {
    const Dataset d = load_dataset(g);
    if (!d.y.size()) throw std::invalid_argument("loglik: data has no values");
    const PartitionTree tree = tree_for(g, d);
    const CovarianceModel model = model_from_json(g.config.value("model", Json::object()));

    const auto t0 = std::chrono::steady_clock::now();
    const PriorFactors prior = compute_prior(tree, model);
    ScheduleTrace trace;
    const PosteriorFactors post =
        run_upward(tree, prior, g.workers, g.trace_path.empty() ? nullptr : &trace);
    const double ll = post.loglik();
    const double secs = elapsed(t0);
    write_trace(g, trace);

    Json out{{"loglik", ll}, {"n", tree.n_obs}, {"time_s", secs}};
    const std::string path = g.out("loglik.json");
    out["config_hash"] = g.hash();
    out["seed"] = g.seed;
    std::ofstream(path) << out.dump(2) << "\n";
    std::cout << format_double(ll) << "\n";
    return 0;
}

int cmd_fit(const Globals& g) {
    const Dataset d = load_dataset(g);
    if (!d.y.size()) throw std::invalid_argument("fit: data has no values");
    const PartitionTree tree = tree_for(g, d);
    const Json mj = g.config.value("model", Json::object());
    const CovarianceModel init = model_from_json(
        g.config.contains("fit_init") ? g.config.at("fit_init") : mj);

    FitOptions opts;
    opts.workers = g.workers;
    if (g.config.contains("fit")) {
        const Json& f = g.config.at("fit");
        opts.fix_nugget = f.value("fix_nugget", false);
        opts.max_iters = f.value("max_iters", 500);
        opts.tol = f.value("tol", 1e-6);
    }
    CovarianceModel::Family family = model_from_json(mj).family;
    const FitResult res = fit(tree, family, init, opts);

    std::vector<std::vector<double>> rows;
    for (const auto& e : res.trace)
        rows.push_back({static_cast<double>(e.index), e.variance, e.range, e.nugget, e.loglik});
    const std::string trace_path = g.out("fit_trace.csv");
    write_csv(trace_path, {"iteration", "variance", "range", "nugget", "loglik"}, rows);
    g.sidecar(trace_path);

    Json out{{"variance", res.model.variance}, {"range", res.model.range},
             {"nugget", res.model.nugget},    {"loglik", res.loglik},
             {"evaluations", res.evaluations}, {"converged", res.converged},
             {"config_hash", g.hash()},        {"seed", g.seed}};
    std::ofstream(g.out("fit.json")) << out.dump(2) << "\n";
    std::cout << "variance=" << format_double(res.model.variance)
              << " range=" << format_double(res.model.range)
              << " nugget=" << format_double(res.model.nugget)
              << " loglik=" << format_double(res.loglik) << "\n";
    return 0;
}

Matrix prediction_locations(const Globals& g, int dim) {
    if (g.config.contains("predict")) {
        const Json& p = g.config.at("predict");
        if (p.contains("csv")) {
            auto [SP, yp] = read_locations(read_csv(p.at("csv").get<std::string>()));
            return SP;
        }
        if (p.contains("grid")) {
            if (dim != 1)
                throw std::invalid_argument("config: predict.grid supported for 1-D domains only");
            return regular_grid_1d(p.at("grid").get<int>());
        }
    }
    throw std::invalid_argument("config: missing 'predict' (csv path or grid size)");
}

int cmd_predict(const Globals& g) {
    const Dataset d = load_dataset(g);
    if (!d.y.size()) throw std::invalid_argument("predict: data has no values");
    const PartitionTree tree = tree_for(g, d);
    const CovarianceModel model = model_from_json(g.config.value("model", Json::object()));
    const Matrix SP = prediction_locations(g, tree.dim());

    const PriorFactors prior = compute_prior(tree, model);
    const PosteriorFactors post = run_upward(tree, prior, g.workers);
    ScheduleTrace trace;
    const PredictiveDistribution pd = run_downward(tree, model, prior, post, SP, g.workers,
                                                   g.trace_path.empty() ? nullptr : &trace);
    write_trace(g, trace);
    const auto [mean, var] = predict_marginals(pd);
    write_predictions(g, "predictions.csv", SP, mean, var);

    const int n_samples = g.config.contains("predict")
                              ? g.config.at("predict").value("samples", 0)
                              : 0;
    if (n_samples > 0) {
        const Matrix draws = sample_predictive(pd, n_samples, g.seed);
        std::vector<std::string> header;
        for (Eigen::Index i = 0; i < draws.cols(); ++i) header.push_back("p" + std::to_string(i));
        std::vector<std::vector<double>> rows;
        for (Eigen::Index r = 0; r < draws.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(draws.cols()));
            for (Eigen::Index c = 0; c < draws.cols(); ++c) row[static_cast<std::size_t>(c)] = draws(r, c);
            rows.push_back(std::move(row));
        }
        const std::string spath = g.out("samples.csv");
        write_csv(spath, header, rows);
        g.sidecar(spath);
    }
    std::cout << "wrote " << g.out("predictions.csv") << " (" << SP.rows() << " locations)\n";
    return 0;
}

int cmd_score(const Globals& g, const std::string& pred_path, const std::string& truth_path) {
    const CsvTable pred = read_csv(pred_path);
    const CsvTable truth = read_csv(truth_path);
    const Vector mean = pred.column("mean");
    const Vector sd = pred.column("sd");
    const Vector y = truth.column("y");
    if (mean.size() != y.size())
        throw std::invalid_argument("score: prediction and truth row counts differ");

    ScoreReport r;
    r.n = static_cast<int>(y.size());
    r.rmspe = rmspe(y, mean);
    Vector var = sd.array().square();
    r.crps = mean_crps(y, mean, var);
    double ls = 0.0;  // sum of marginal normal log densities
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double v = std::max(var[i], 1e-300);
        const double e = y[i] - mean[i];
        ls += -0.5 * (std::log(2.0 * M_PI * v) + e * e / v);
    }
    r.log_score = ls;

    Json out{{"n", r.n},        {"rmspe", r.rmspe},          {"crps", r.crps},
             {"log_score", r.log_score}, {"config_hash", g.hash()}, {"seed", g.seed}};
    const std::string path = g.out("score.json");
    std::ofstream(path) << out.dump(2) << "\n";
    std::cout << out.dump(2) << "\n";
    return 0;
}

struct Caps {
    int dense = 4096;
    int dl = 100000;
    int mra = 1000000;
};

Caps caps_from(const Globals& g) {
    Caps c;
    if (g.config.contains("caps")) {
        const Json& j = g.config.at("caps");
        c.dense = j.value("dense", c.dense);
        c.dl = j.value("dl", c.dl);
        c.mra = j.value("mra", c.mra);
    }
    return c;
}

// 1-RA layouts used as comparison points (full-scale-approximation style and
// the independent-blocks special case with no resolution-0 knots).
PartitionConfig one_ra_partition(int r0, int J) {
    PartitionConfig pc;
    pc.domain.lower = Vector::Zero(1);
    pc.domain.upper = Vector::Ones(1);
    pc.branching = {std::max(2, J)};
    pc.knots_per_level = {r0};
    return pc;
}

int cmd_compare(const Globals& g) {
    const Dataset d = load_dataset(g);
    if (!d.y.size()) throw std::invalid_argument("compare: data has no values");
    const int n = static_cast<int>(d.S.rows());
    const Caps caps = caps_from(g);
    std::vector<std::string> competitors =
        g.config.value("competitors", std::vector<std::string>{"exact", "mra"});

    std::vector<std::vector<double>> rows;
    Json summary = Json::array();
    for (const std::string& name : competitors) {
        double ll = std::numeric_limits<double>::quiet_NaN();
        double secs = 0.0;
        std::string note;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if (name == "exact") {
                if (n > caps.dense) {
                    note = "skipped: cap";
                } else {
                    ll = exact_loglik(model_from_json(g.config.value("model", Json::object())),
                                      d.S, d.y);
                }
            } else if (name == "dl-exact") {
                if (n > caps.dl) {
                    note = "skipped: cap";
                } else if (d.S.cols() != 1) {
                    note = "skipped: 1-D only";
                } else {
                    const CovarianceModel m =
                        model_from_json(g.config.value("model", Json::object()));
                    ll = durbin_levinson_loglik(model_acvf(m, n, 1.0 / n), d.y);
                }
            } else if (name == "mra" || name == "fsa-fast" || name == "fsa-slow" ||
                       name == "block") {
                if (n > caps.mra) {
                    note = "skipped: cap";
                } else {
                    PartitionConfig pc;
                    if (name == "mra") {
                        pc = g.config.contains("partition")
                                 ? partition_config(g, static_cast<int>(d.S.cols()))
                                 : default_mra_partition(n);
                    } else if (name == "fsa-fast") {
                        pc = one_ra_partition(240, (n + 239) / 240);
                    } else if (name == "fsa-slow") {
                        pc = one_ra_partition((n + 63) / 64, 64);
                    } else {
                        pc = one_ra_partition(0, 64);
                    }
                    PartitionTree tree = build_tree(pc, d.S, &d.y);
                    ll = loglikelihood(tree, model_from_json(g.config.value("model", Json::object())),
                                       g.workers);
                }
            } else if (name == "local") {
                note = "skipped: prediction-only competitor";
            } else {
                note = "skipped: unknown competitor";
            }
        } catch (const std::exception& e) {
            note = std::string("failed: ") + e.what();
        }
        secs = elapsed(t0);
        rows.push_back({static_cast<double>(rows.size()), static_cast<double>(n), ll, secs});
        summary.push_back(
            Json{{"competitor", name}, {"n", n}, {"loglik", ll}, {"time_s", secs}, {"note", note}});
        std::cout << name << ": "
                  << (note.empty() ? "loglik=" + format_double(ll) : note)
                  << " (" << format_double(secs) << " s)\n";
    }
    const std::string cpath = g.out("compare.csv");
    write_csv(cpath, {"index", "n", "loglik", "time_s"}, rows);
    g.sidecar(cpath);
    Json out{{"results", summary}, {"config_hash", g.hash()}, {"seed", g.seed}};
    std::ofstream(g.out("compare.json")) << out.dump(2) << "\n";
    return 0;
}

int cmd_bench(const Globals& g) {
    std::vector<int> ns = g.config.contains("bench")
                              ? g.config.at("bench").value("ns", std::vector<int>{1920, 7680, 30720})
                              : std::vector<int>{1920, 7680, 30720};
    const std::string mode =
        g.config.contains("bench") ? g.config.at("bench").value("mode", std::string("mra")) : "mra";
    CovarianceModel model = model_from_json(g.config.value("model", Json::object()));

    std::vector<std::vector<double>> rows;
    std::vector<double> logn, logt;
    for (int n : ns) {
        const Matrix S = regular_grid_1d(n);
        const Vector y = simulate_1d_circulant(model, n, g.seed, 1.0 / n);
        const auto t0 = std::chrono::steady_clock::now();
        double ll;
        if (mode == "dense") {
            ll = exact_loglik(model, S, y);
        } else {
            PartitionTree tree = build_tree(default_mra_partition(n), S, &y);
            ll = loglikelihood(tree, model, g.workers);
        }
        const double secs = elapsed(t0);
        rows.push_back({static_cast<double>(n), secs, ll});
        logn.push_back(std::log(static_cast<double>(n)));
        logt.push_back(std::log(std::max(secs, 1e-9)));
        std::cout << "n=" << n << " time=" << format_double(secs) << " s\n";
    }
    // least-squares slope of log time against log n
    const std::size_t k = logn.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < k; ++i) {
        mx += logn[i];
        my += logt[i];
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += (logn[i] - mx) * (logn[i] - mx);
        sxy += (logn[i] - mx) * (logt[i] - my);
    }
    const double slope = sxy / sxx;

    const std::string path = g.out("bench.csv");
    write_csv(path, {"n", "time_s", "loglik"}, rows);
    g.sidecar(path, Json{{"slope", slope}, {"mode", mode}});
    std::cout << "slope=" << format_double(slope) << "\n";
    return 0;
}

int cmd_partition_info(const Globals& g) {
    const Dataset d = load_dataset(g);
    const PartitionTree tree = tree_for(g, d);
    Json levels = Json::array();
    for (int m = 0; m <= tree.depth(); ++m) {
        int knot_total = 0;
        for (int q = 0; q < tree.level_count(m); ++q)
            knot_total += static_cast<int>(tree.knots[static_cast<std::size_t>(tree.node_id(m, q))].rows());
        levels.push_back(Json{{"resolution", m},
                              {"regions", tree.level_count(m)},
                              {"knots_total", knot_total}});
    }
    int min_leaf = tree.n_obs, max_leaf = 0;
    for (int q = 0; q < tree.n_leaves(); ++q) {
        const int c = static_cast<int>(tree.leaf_locations[static_cast<std::size_t>(q)].rows());
        min_leaf = std::min(min_leaf, c);
        max_leaf = std::max(max_leaf, c);
    }
    Json out{{"depth", tree.depth()},     {"dim", tree.dim()},
             {"n_obs", tree.n_obs},       {"levels", levels},
             {"leaf_min", min_leaf},      {"leaf_max", max_leaf},
             {"config_hash", g.hash()},   {"seed", g.seed}};
    std::cout << out.dump(2) << "\n";
    std::ofstream(g.out("partition.json")) << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-resolution Gaussian-process approximation"};
    app.require_subcommand(1);

    Globals g;
    app.add_option("--config", g.config_path, "JSON experiment config");
    app.add_option("--seed", g.seed, "RNG seed");
    app.add_option("--workers", g.workers, "worker thread count");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--trace-schedule", g.trace_path, "write a CSV task log to this path");

    auto* simulate = app.add_subcommand("simulate", "draw data from the model");
    auto* loglik = app.add_subcommand("loglik", "evaluate the approximate log-likelihood");
    auto* fit_cmd = app.add_subcommand("fit", "maximum-likelihood parameter fit");
    auto* predict = app.add_subcommand("predict", "posterior predictive means and sds");
    auto* score = app.add_subcommand("score", "score predictions against truth");
    std::string pred_path, truth_path;
    score->add_option("predictions", pred_path, "predictions CSV (mean, sd)")->required();
    score->add_option("truth", truth_path, "truth CSV (column y)")->required();
    auto* compare = app.add_subcommand("compare", "run the configured competitor set");
    auto* bench = app.add_subcommand("bench", "time likelihood evaluation over an n-ladder");
    auto* pinfo = app.add_subcommand("partition-info", "summarize the partition");

    CLI11_PARSE(app, argc, argv);

    try {
        g.load();
        if (simulate->parsed()) return cmd_simulate(g);
        if (loglik->parsed()) return cmd_loglik(g);
        if (fit_cmd->parsed()) return cmd_fit(g);
        if (predict->parsed()) return cmd_predict(g);
        if (score->parsed()) return cmd_score(g, pred_path, truth_path);
        if (compare->parsed()) return cmd_compare(g);
        if (bench->parsed()) return cmd_bench(g);
        if (pinfo->parsed()) return cmd_partition_info(g);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
