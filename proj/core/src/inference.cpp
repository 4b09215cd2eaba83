#include "hhfs/inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hhfs/errors.hpp"
#include "hhfs/finalsize.hpp"
#include "hhfs/parallel.hpp"
#include "hhfs/rng.hpp"

namespace hhfs {

namespace {

constexpr std::uint64_t kRestartStream = 0x5254u;  // restart start points
constexpr std::uint64_t kReportStream = 0x4349u;   // interval sampling

using Objective = std::function<double(const std::vector<double>&)>;

struct MinimizeOutcome {
    std::vector<double> x;
    double f = 0.0;
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
    bool stalled = false;
    std::string note;
    std::vector<double> accepted;  // f after each accepted step
};

/// BFGS with Armijo backtracking: identity initial inverse Hessian, reset on
/// non-descent directions or degenerate curvature pairs.
MinimizeOutcome minimize_bfgs(const Objective& f, const std::vector<double>& start,
                              const FitConfig& cfg) {
    const std::size_t kappa = start.size();
    MinimizeOutcome out;
    out.x = start;

    Eigen::Map<const Eigen::VectorXd> x0(start.data(), static_cast<Eigen::Index>(kappa));
    Eigen::VectorXd x = x0;
    std::vector<double> xv = start;

    double fx;
    try {
        fx = f(xv);
    } catch (const NumericalError& e) {
        out.f = std::numeric_limits<double>::quiet_NaN();
        out.note = e.what();
        return out;
    }
    if (!std::isfinite(fx)) {
        out.f = fx;
        out.note = "non-finite objective at the start point";
        return out;
    }
    out.accepted.push_back(fx);

    auto gradient = [&](const std::vector<double>& at) {
        std::vector<double> g = numerical_gradient(f, at, cfg.grad_step);
        return Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(kappa)).eval();
    };

    Eigen::VectorXd g;
    try {
        g = gradient(xv);
    } catch (const NumericalError& e) {
        out.f = fx;
        out.note = e.what();
        return out;
    }

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(kappa),
                                                  static_cast<Eigen::Index>(kappa));
    int stall_count = 0;
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        out.iterations = iter;
        out.grad_norm = g.norm();
        if (out.grad_norm <= cfg.tol * std::max(1.0, std::abs(fx))) {
            out.converged = true;
            break;
        }

        Eigen::VectorXd d = -(H * g);
        double slope = d.dot(g);
        if (!(slope < 0.0)) {
            H.setIdentity();
            d = -g;
            slope = -g.squaredNorm();
            if (!(slope < 0.0)) {
                out.converged = true;  // exact zero gradient
                break;
            }
        }

        double alpha = 1.0;
        double f_new = 0.0;
        bool accepted = false;
        std::vector<double> x_new(kappa);
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t k = 0; k < kappa; ++k)
                x_new[k] = x[static_cast<Eigen::Index>(k)] + alpha * d[static_cast<Eigen::Index>(k)];
            // an overflowing trial point counts as a rejected step, not a failure
            try {
                f_new = f(x_new);
            } catch (const NumericalError&) {
                f_new = std::numeric_limits<double>::infinity();
            }
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            out.stalled = true;
            out.note = "line search exhausted";
            break;
        }

        Eigen::VectorXd g_new;
        try {
            g_new = gradient(x_new);
        } catch (const NumericalError& e) {
            out.stalled = true;
            out.note = e.what();
            break;
        }

        Eigen::Map<Eigen::VectorXd> xn(x_new.data(), static_cast<Eigen::Index>(kappa));
        Eigen::VectorXd s = xn - x;
        Eigen::VectorXd yv = g_new - g;
        double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            double rho = 1.0 / sy;
            Eigen::MatrixXd I = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(kappa),
                                                          static_cast<Eigen::Index>(kappa));
            H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) +
                rho * s * s.transpose();
        } else {
            H.setIdentity();
        }

        double drop = fx - f_new;
        x = xn;
        xv = x_new;
        fx = f_new;
        g = g_new;
        out.accepted.push_back(fx);

        if (drop <= 1e-13 * std::max(1.0, std::abs(fx))) {
            if (++stall_count >= 2) {
                out.iterations = iter + 1;
                out.grad_norm = g.norm();
                out.stalled = true;
                out.note = "objective stopped improving";
                break;
            }
        } else {
            stall_count = 0;
        }
    }

    out.x = xv;
    out.f = fx;
    if (!out.converged && !out.stalled && out.note.empty()) out.note = "iteration limit reached";
    return out;
}

Eigen::MatrixXd to_eigen(const std::vector<double>& flat, std::size_t n) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * n + j];
    return m;
}

double percentile(std::vector<double>& sorted_inplace, double q) {
    std::sort(sorted_inplace.begin(), sorted_inplace.end());
    const std::size_t n = sorted_inplace.size();
    if (n == 1) return sorted_inplace[0];
    double h = q * static_cast<double>(n - 1);
    std::size_t lo = static_cast<std::size_t>(h);
    if (lo >= n - 1) return sorted_inplace[n - 1];
    double w = h - static_cast<double>(lo);
    return sorted_inplace[lo] * (1.0 - w) + sorted_inplace[lo + 1] * w;
}

/// Reported quantities for one decoded parameter vector: 1-q and p2..p6 in
/// percent, then exp of each covariate coefficient.
void report_quantities(const EpiParams& epi, std::vector<double>& out) {
    out.clear();
    out.push_back((1.0 - std::exp(-epi.Lambda)) * 100.0);
    for (int n = 2; n <= max_household_size; ++n) out.push_back(sitp(epi, n) * 100.0);
    for (double a : epi.alpha) out.push_back(std::exp(a));
    for (double b : epi.beta) out.push_back(std::exp(b));
    for (double c : epi.gamma) out.push_back(std::exp(c));
}

}  // namespace

std::vector<std::string> report_labels(const FeatureConfig& cfg) {
    std::vector<std::string> labels;
    labels.push_back("1-q");
    for (int n = 2; n <= max_household_size; ++n) labels.push_back("p" + std::to_string(n));
    for (const auto& f : cfg.external) labels.push_back("exp(alpha_" + f + ")");
    for (const auto& f : cfg.susceptibility) labels.push_back("exp(beta_" + f + ")");
    for (const auto& f : cfg.transmissibility) labels.push_back("exp(gamma_" + f + ")");
    return labels;
}

SquareMatrix laplace_covariance(const Objective& negative_log_posterior,
                                const std::vector<double>& theta_map, double hess_step) {
    std::size_t kappa = theta_map.size();
    std::vector<double> hess = numerical_hessian(negative_log_posterior, theta_map, hess_step);
    Eigen::MatrixXd H = to_eigen(hess, kappa);
    Eigen::MatrixXd S = 0.5 * (H + H.transpose());

    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
        std::ostringstream os;
        os << "laplace_covariance: Hessian is not positive definite (smallest eigenvalue "
           << es.eigenvalues().minCoeff()
           << "); the optimum may be a saddle or the model unidentifiable - consider a "
              "stronger prior (smaller prior_sd)";
        throw NumericalError(os.str());
    }
    Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(S.rows(), S.cols()));
    cov = (0.5 * (cov + cov.transpose())).eval();

    SquareMatrix out = SquareMatrix::zero(kappa);
    for (std::size_t i = 0; i < kappa; ++i)
        for (std::size_t j = 0; j < kappa; ++j)
            out.at(i, j) = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return out;
}

SquareMatrix laplace_covariance(const Cohort& cohort, const ModelParams& theta_map,
                                double prior_sd, double hess_step, int threads) {
    LikelihoodEvaluator ev(cohort, threads);
    auto objective = [&](const std::vector<double>& th) {
        return -ev.log_posterior(ModelParams{th}, prior_sd);
    };
    return laplace_covariance(objective, theta_map.theta, hess_step);
}

std::vector<ReportRow> report_intervals(const ModelParams& theta_map,
                                        const SquareMatrix& covariance, const FeatureConfig& cfg,
                                        int n_samples, std::uint64_t seed) {
    cfg.validate();
    const std::size_t kappa = cfg.param_count();
    if (theta_map.theta.size() != kappa)
        throw ConfigError("report_intervals: parameter vector length mismatch");
    if (covariance.n != kappa)
        throw ConfigError("report_intervals: covariance dimension mismatch");
    if (n_samples < 1) throw ConfigError("report_intervals: n_samples must be >= 1");

    // PSD factor via LDLT so that degenerate (including zero) covariances
    // still sample; tiny negative pivots from rounding are clamped.
    Eigen::MatrixXd cov = to_eigen(covariance.a, kappa);
    cov = (0.5 * (cov + cov.transpose())).eval();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("report_intervals: covariance factorization failed");
    Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd factor = ldlt.transpositionsP().transpose() *
                             (Eigen::MatrixXd(ldlt.matrixL()) * d.asDiagonal());

    std::vector<std::string> labels = report_labels(cfg);
    const std::size_t rows = labels.size();

    std::vector<double> point;
    report_quantities(decode(theta_map, cfg), point);

    std::vector<std::vector<double>> samples(rows);
    for (auto& s : samples) s.reserve(static_cast<std::size_t>(n_samples));

    rng::Stream stream(rng::stream_key(seed, kReportStream, 0));
    Eigen::VectorXd z(static_cast<Eigen::Index>(kappa));
    ModelParams draw;
    draw.theta.resize(kappa);
    std::vector<double> q;
    for (int s = 0; s < n_samples; ++s) {
        for (std::size_t k = 0; k < kappa; ++k) z[static_cast<Eigen::Index>(k)] = stream.normal();
        Eigen::VectorXd shift = factor * z;
        for (std::size_t k = 0; k < kappa; ++k)
            draw.theta[k] = theta_map.theta[k] + shift[static_cast<Eigen::Index>(k)];
        report_quantities(decode(draw, cfg), q);
        for (std::size_t r = 0; r < rows; ++r) samples[r].push_back(q[r]);
    }

    std::vector<ReportRow> report(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        report[r].label = labels[r];
        report[r].point = point[r];
        report[r].lo = percentile(samples[r], 0.025);
        report[r].median = percentile(samples[r], 0.5);
        report[r].hi = percentile(samples[r], 0.975);
    }
    return report;
}

FitResult fit(const Cohort& cohort, const FitConfig& cfg) {
    if (cohort.households.empty()) throw ConfigError("fit: cohort is empty");
    if (cfg.restarts < 1) throw ConfigError("fit: restarts must be >= 1");
    if (!(cfg.prior_sd > 0.0)) throw ConfigError("fit: prior_sd must be positive");

    int threads = resolve_threads(cfg.threads);
    LikelihoodEvaluator ev(cohort, threads);
    const std::size_t kappa = cohort.config.param_count();
    auto objective = [&](const std::vector<double>& th) {
        return -ev.log_posterior(ModelParams{th}, cfg.prior_sd);
    };

    FitResult result;
    result.restarts.reserve(static_cast<std::size_t>(cfg.restarts));

    std::vector<MinimizeOutcome> outcomes;
    outcomes.reserve(static_cast<std::size_t>(cfg.restarts));
    for (int r = 0; r < cfg.restarts; ++r) {
        std::vector<double> start(kappa, 0.0);
        if (r > 0) {
            rng::Stream stream(rng::stream_key(cfg.seed, kRestartStream, static_cast<std::uint64_t>(r)));
            for (auto& v : start) v = 0.5 * stream.normal();
        }
        MinimizeOutcome mo = minimize_bfgs(objective, start, cfg);

        RestartDiagnostic diag;
        diag.index = r;
        diag.objective = -mo.f;
        diag.iterations = mo.iterations;
        diag.grad_norm = mo.grad_norm;
        diag.converged = mo.converged;
        diag.stalled = mo.stalled;
        diag.note = mo.note;
        diag.trace.reserve(mo.accepted.size());
        for (double v : mo.accepted) diag.trace.push_back(-v);
        result.restarts.push_back(std::move(diag));
        outcomes.push_back(std::move(mo));
    }

    // a converged restart beats any stalled one: stalled endpoints can sit on
    // steep ridges where the curvature summary is meaningless
    auto better = [](const MinimizeOutcome& a, const MinimizeOutcome& b) {
        if (a.converged != b.converged) return a.converged;
        return a.f < b.f;
    };
    int best = -1;
    for (int r = 0; r < cfg.restarts; ++r) {
        const auto& mo = outcomes[static_cast<std::size_t>(r)];
        if (!(mo.converged || mo.stalled) || !std::isfinite(mo.f)) continue;
        if (best < 0 || better(mo, outcomes[static_cast<std::size_t>(best)])) best = r;
    }
    if (best < 0) {
        std::ostringstream os;
        os << "fit: no restart converged;";
        for (const auto& diag : result.restarts)
            os << " [restart " << diag.index << ": objective " << diag.objective << ", "
               << diag.iterations << " iterations, grad " << diag.grad_norm << ", "
               << (diag.note.empty() ? "no note" : diag.note) << "]";
        throw FitError(os.str());
    }

    const auto& winner = outcomes[static_cast<std::size_t>(best)];
    result.best_restart = best;
    result.theta_map.theta = winner.x;
    result.log_posterior = -winner.f;
    result.covariance = laplace_covariance(objective, winner.x, cfg.hess_step);
    result.report = report_intervals(result.theta_map, result.covariance, cohort.config,
                                     cfg.ci_samples, cfg.seed);
    return result;
}

}  // namespace hhfs
