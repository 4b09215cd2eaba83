#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hhfs/likelihood.hpp"
#include "hhfs/model.hpp"

namespace hhfs {

struct SquareMatrix {
    std::size_t n = 0;
    std::vector<double> a;  // row-major n*n

    static SquareMatrix zero(std::size_t n) { return {n, std::vector<double>(n * n, 0.0)}; }
    double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

struct FitConfig {
    int restarts = 8;
    int max_iterations = 500;
    /// Gradient tolerance relative to the objective scale: a restart counts
    /// as converged once ||g||_2 <= tol * max(1, |objective|).
    double tol = 1e-6;
    double prior_sd = 1.0;
    int ci_samples = 100000;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = all hardware threads
    double grad_step = 1e-5;
    double hess_step = 1e-4;
};

struct RestartDiagnostic {
    int index = 0;
    double objective = 0.0;  // log-posterior at the restart's endpoint
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;  // met the gradient tolerance
    bool stalled = false;    // line search exhausted / objective stopped moving
    std::string note;
    std::vector<double> trace;  // log-posterior after each accepted step
};

struct ReportRow {
    std::string label;
    double point = 0.0;   // MAP transform
    double median = 0.0;  // sampled posterior median
    double lo = 0.0;      // 2.5 percentile
    double hi = 0.0;      // 97.5 percentile
};

struct FitResult {
    ModelParams theta_map;
    SquareMatrix covariance;
    std::vector<ReportRow> report;
    std::vector<RestartDiagnostic> restarts;
    double log_posterior = 0.0;
    int best_restart = -1;
};

/// MAP fit with multi-restart BFGS (restart 0 starts at the prior mode, the
/// rest at N(0, 0.5^2) draws), Laplace covariance, and the transformed
/// credible-interval report. Deterministic given config.seed, for any thread
/// count. Throws FitError with per-restart traces if no restart converges.
FitResult fit(const Cohort&, const FitConfig& = {});

/// Inverse of the symmetrized finite-difference Hessian of
/// `negative_log_posterior` at theta_map. Throws NumericalError (reporting
/// the offending eigenvalue and suggesting stronger prior precision) if the
/// Hessian is not positive definite.
SquareMatrix laplace_covariance(const std::function<double(const std::vector<double>&)>& negative_log_posterior,
                                const std::vector<double>& theta_map, double hess_step = 1e-4);
SquareMatrix laplace_covariance(const Cohort&, const ModelParams& theta_map,
                                double prior_sd = 1.0, double hess_step = 1e-4, int threads = 0);

/// Draws n_samples from N(theta_map, covariance), maps each through decode,
/// and reports per-quantity median and 2.5/97.5 percentiles next to the MAP
/// transform. Rows: 1-q and p2..p6 in percent, then exp of every alpha, beta,
/// gamma coefficient in feature-list order. Requires covariance positive
/// semi-definite (a zero matrix yields width-zero intervals).
std::vector<ReportRow> report_intervals(const ModelParams& theta_map, const SquareMatrix& covariance,
                                        const FeatureConfig&, int n_samples = 100000,
                                        std::uint64_t seed = 1);

/// Labels of the report rows for a feature configuration, in report order.
std::vector<std::string> report_labels(const FeatureConfig&);

}  // namespace hhfs
