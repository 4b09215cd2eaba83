#include "hhfs/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "hhfs/errors.hpp"
#include "hhfs/finalsize.hpp"
#include "hhfs/parallel.hpp"

namespace hhfs {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kProbFloor = 1e-300;
}

void Cohort::validate() const {
    config.validate();
    for (const auto& hh : households) hh.validate(config);
}

LikelihoodEvaluator::LikelihoodEvaluator(const Cohort& cohort, int threads)
    : config_(cohort.config), threads_(resolve_threads(threads)) {
    cohort.validate();
    n_households_ = cohort.households.size();
    std::size_t p = config_.feature_count();
    if (p > 64) throw ConfigError("more than 64 feature columns are not supported");

    // Group by (n, multiset of rows). Rows are encoded as bit codes and
    // sorted; the outcome mask is permuted onto the sorted order, which keeps
    // the grouping exact while merging households that differ only by
    // participant relabeling.
    struct Key {
        int n;
        std::vector<std::uint64_t> codes;
        bool operator<(const Key& o) const {
            return std::tie(n, codes) < std::tie(o.n, o.codes);
        }
    };
    struct Group {
        std::map<std::uint32_t, std::pair<double, std::string>> masks;
    };
    std::map<Key, Group> groups;

    std::vector<std::uint64_t> codes;
    std::array<int, max_household_size> order{};
    for (const auto& hh : cohort.households) {
        int n = hh.size;
        codes.assign(n, 0);
        for (int i = 0; i < n; ++i) {
            std::uint64_t c = 0;
            const std::uint8_t* row = hh.x.data() + static_cast<std::size_t>(i) * p;
            for (std::size_t k = 0; k < p; ++k)
                if (row[k]) c |= std::uint64_t{1} << k;
            codes[static_cast<std::size_t>(i)] = c;
        }
        std::iota(order.begin(), order.begin() + n, 0);
        std::stable_sort(order.begin(), order.begin() + n,
                         [&](int a, int b) { return codes[a] < codes[b]; });

        Key key;
        key.n = n;
        key.codes.resize(n);
        std::uint32_t mask = 0;
        for (int c = 0; c < n; ++c) {
            key.codes[static_cast<std::size_t>(c)] = codes[static_cast<std::size_t>(order[c])];
            if (hh.y[static_cast<std::size_t>(order[c])]) mask |= 1u << c;
        }
        auto& slot = groups[std::move(key)].masks[mask];
        slot.first += 1.0;
        if (slot.second.empty()) slot.second = hh.id;
    }

    patterns_.reserve(groups.size());
    for (auto& [key, group] : groups) {
        Pattern pat;
        pat.n = key.n;
        pat.x.assign(static_cast<std::size_t>(key.n) * p, 0);
        for (int i = 0; i < key.n; ++i)
            for (std::size_t k = 0; k < p; ++k)
                if (key.codes[static_cast<std::size_t>(i)] >> k & 1)
                    pat.x[static_cast<std::size_t>(i) * p + k] = 1;
        pat.needed = 0;
        pat.masks.reserve(group.masks.size());
        for (auto& [mask, cw] : group.masks) {
            pat.needed |= mask;
            pat.masks.push_back({mask, cw.first, std::move(cw.second)});
        }
        patterns_.push_back(std::move(pat));
    }
}

double LikelihoodEvaluator::log_likelihood(const ModelParams& params) const {
    for (double th : params.theta)
        if (!std::isfinite(th)) throw NumericalError("log_likelihood: non-finite parameter");
    EpiParams epi = decode(params, config_);
    std::vector<double> partial(patterns_.size(), 0.0);
    parallel_for(patterns_.size(), threads_, [&](std::size_t g) {
        const Pattern& pat = patterns_[g];
        HouseholdTerms terms = household_terms(pat.n, pat.x, epi, config_);
        double p[64];
        solve_submasks(terms, pat.needed, {p, std::size_t{1} << pat.n});
        double acc = 0.0;
        for (const MaskCount& mc : pat.masks) {
            double prob = p[mc.mask];
            // every outcome has strictly positive probability at finite
            // parameters, so a zero, negative, or NaN value here is lost
            // floating-point precision in an extreme region; flooring keeps
            // the objective finite and steeply unfavorable there
            if (!(prob >= kProbFloor)) prob = kProbFloor;
            acc += mc.count * std::log(prob);
        }
        partial[g] = acc;
    });
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

double LikelihoodEvaluator::log_posterior(const ModelParams& params, double prior_sd) const {
    if (!(prior_sd > 0.0)) throw ConfigError("log_posterior: prior_sd must be positive");
    double lp = log_likelihood(params);
    double log_sd = std::log(prior_sd);
    for (double th : params.theta)
        lp += -0.5 * kLogTwoPi - log_sd - 0.5 * (th / prior_sd) * (th / prior_sd);
    return lp;
}

double log_likelihood(const Cohort& cohort, const ModelParams& params, int threads) {
    return LikelihoodEvaluator(cohort, threads).log_likelihood(params);
}

double log_posterior(const Cohort& cohort, const ModelParams& params, double prior_sd,
                     int threads) {
    return LikelihoodEvaluator(cohort, threads).log_posterior(params, prior_sd);
}

std::vector<double> numerical_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       const std::vector<double>& theta, double h) {
    std::size_t kappa = theta.size();
    std::vector<double> g(kappa, 0.0);
    std::vector<double> point = theta;
    for (std::size_t k = 0; k < kappa; ++k) {
        point[k] = theta[k] + h;
        double up = f(point);
        point[k] = theta[k] - h;
        double down = f(point);
        point[k] = theta[k];
        if (!std::isfinite(up) || !std::isfinite(down))
            throw NumericalError("numerical_gradient: non-finite objective at coordinate " +
                                 std::to_string(k));
        g[k] = (up - down) / (2.0 * h);
    }
    return g;
}

std::vector<double> numerical_hessian(const std::function<double(const std::vector<double>&)>& f,
                                      const std::vector<double>& theta, double h) {
    std::size_t kappa = theta.size();
    std::vector<double> hess(kappa * kappa, 0.0);
    std::vector<double> point = theta;

    double f0 = f(point);
    if (!std::isfinite(f0))
        throw NumericalError("numerical_hessian: non-finite objective at the expansion point");

    auto check = [](double v, std::size_t k, std::size_t l) {
        if (!std::isfinite(v))
            throw NumericalError("numerical_hessian: non-finite objective at coordinates (" +
                                 std::to_string(k) + ", " + std::to_string(l) + ")");
        return v;
    };

    for (std::size_t k = 0; k < kappa; ++k) {
        point[k] = theta[k] + h;
        double up = check(f(point), k, k);
        point[k] = theta[k] - h;
        double down = check(f(point), k, k);
        point[k] = theta[k];
        hess[k * kappa + k] = (up - 2.0 * f0 + down) / (h * h);
    }
    for (std::size_t k = 0; k < kappa; ++k) {
        for (std::size_t l = k + 1; l < kappa; ++l) {
            double v = 0.0;
            for (int sk : {+1, -1}) {
                for (int sl : {+1, -1}) {
                    point[k] = theta[k] + sk * h;
                    point[l] = theta[l] + sl * h;
                    v += sk * sl * check(f(point), k, l);
                }
            }
            point[k] = theta[k];
            point[l] = theta[l];
            double mixed = v / (4.0 * h * h);
            hess[k * kappa + l] = mixed;
            hess[l * kappa + k] = mixed;
        }
    }
    return hess;
}

}  // namespace hhfs
