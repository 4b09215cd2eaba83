#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hhfs/model.hpp"

namespace hhfs {

struct Cohort {
    FeatureConfig config;
    std::vector<Household> households;

    void validate() const;
};

/// Precomputed index for repeated likelihood evaluations over one cohort.
/// Households are grouped by (size, sorted feature rows): every group shares
/// a single outcome sweep per parameter value, and each group only sweeps the
/// submask lattice of the outcomes that actually occur in it. Evaluation
/// parallelizes over groups; the final reduction runs in a fixed order, so
/// results are identical for every thread count.
class LikelihoodEvaluator {
public:
    explicit LikelihoodEvaluator(const Cohort& cohort, int threads = 1);

    double log_likelihood(const ModelParams&) const;

    /// log_likelihood plus the N(0, prior_sd^2) log prior on every natural
    /// parameter, normalizing constant included.
    double log_posterior(const ModelParams&, double prior_sd = 1.0) const;

    std::size_t pattern_count() const { return patterns_.size(); }
    std::size_t household_count() const { return n_households_; }
    const FeatureConfig& config() const { return config_; }

private:
    struct MaskCount {
        std::uint32_t mask;
        double count;
        std::string witness;  // a household id, for error reporting
    };
    struct Pattern {
        int n;
        std::vector<std::uint8_t> x;   // rows in canonical (sorted) order
        std::uint32_t needed;          // union of observed outcome masks
        std::vector<MaskCount> masks;  // ascending by mask
    };

    FeatureConfig config_;
    std::vector<Pattern> patterns_;
    std::size_t n_households_ = 0;
    int threads_ = 1;
};

double log_likelihood(const Cohort&, const ModelParams&, int threads = 1);
double log_posterior(const Cohort&, const ModelParams&, double prior_sd = 1.0, int threads = 1);

/// Central-difference gradient (f(theta+h e_k) - f(theta-h e_k)) / 2h.
/// Throws NumericalError naming the coordinate if an evaluation is non-finite.
std::vector<double> numerical_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       const std::vector<double>& theta, double h = 1e-5);

/// Central-difference Hessian with a symmetric four-point off-diagonal
/// stencil; returned row-major. Throws NumericalError naming the coordinate
/// pair if an evaluation is non-finite.
std::vector<double> numerical_hessian(const std::function<double(const std::vector<double>&)>& f,
                                      const std::vector<double>& theta, double h = 1e-4);

}  // namespace hhfs
