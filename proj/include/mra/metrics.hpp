#pragma once

// Scoring of predictive distributions against held-out truth.

#include <cmath>
#include <stdexcept>

#include "mra/geometry.hpp"

namespace mra {

inline double rmspe(const Vector& truth, const Vector& mean) {
    if (truth.size() != mean.size()) throw std::invalid_argument("rmspe: size mismatch");
    if (truth.size() == 0) return 0.0;
    return std::sqrt((truth - mean).squaredNorm() / static_cast<double>(truth.size()));
}

// Closed-form CRPS of a normal predictive distribution,
//   crps = sd * (z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi)),  z = (y - mean)/sd.
// The sd -> 0 limit is |y - mean|.
inline double crps_normal(double y, double mean, double sd) {
    if (sd < 0) throw std::invalid_argument("crps_normal: negative standard deviation");
    if (sd == 0) return std::abs(y - mean);
    const double z = (y - mean) / sd;
    const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    return sd * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(M_PI));
}

inline double mean_crps(const Vector& truth, const Vector& mean, const Vector& var) {
    if (truth.size() != mean.size() || truth.size() != var.size())
        throw std::invalid_argument("mean_crps: size mismatch");
    if (truth.size() == 0) return 0.0;
    double s = 0.0;
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
        const double v = var[i];
        if (v < 0 && v > -1e-12) {
            s += crps_normal(truth[i], mean[i], 0.0);  // tolerate tiny negative round-off
        } else {
            s += crps_normal(truth[i], mean[i], std::sqrt(v));
        }
    }
    return s / static_cast<double>(truth.size());
}

// Relative log-score of a likelihood value against a reference (both columns
// are emitted: an unambiguous difference plus a ratio for table parity).
struct LogScoreComparison {
    double difference;
    double ratio;
};

inline LogScoreComparison log_score(double loglik, double reference) {
    if (!std::isfinite(loglik) || !std::isfinite(reference))
        throw std::invalid_argument("log_score: inputs must be finite");
    return {loglik - reference, loglik / reference};
}

struct ScoreReport {
    double rmspe = 0.0;
    double crps = 0.0;       // averaged over prediction locations
    double log_score = 0.0;  // joint log density of the truth under the predictive
    int n = 0;
};

}  // namespace mra
