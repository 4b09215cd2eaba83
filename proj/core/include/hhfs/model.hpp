#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hhfs {

inline constexpr int max_household_size = 6;

/// Ordered feature-name lists defining the covariate layout. A household
/// feature matrix has one column per entry of external ++ susceptibility ++
/// transmissibility (the same underlying feature may appear in several
/// roles). The natural parameter vector is laid out as
///   theta = (log Lambda, log lambda, log vartheta, tan(pi*eta/4),
///            alpha..., beta..., gamma...)
/// so param_count() == 4 + feature_count().
struct FeatureConfig {
    std::vector<std::string> external;          // alpha coefficients
    std::vector<std::string> susceptibility;    // beta coefficients
    std::vector<std::string> transmissibility;  // gamma coefficients

    std::size_t feature_count() const {
        return external.size() + susceptibility.size() + transmissibility.size();
    }
    std::size_t param_count() const { return 4 + feature_count(); }

    /// Name of column k in the concatenated external ++ susceptibility ++
    /// transmissibility layout.
    const std::string& feature_name(std::size_t k) const {
        if (k < external.size()) return external[k];
        k -= external.size();
        if (k < susceptibility.size()) return susceptibility[k];
        return transmissibility[k - susceptibility.size()];
    }

    /// Rejects duplicate or empty names within a role list.
    void validate() const;

    /// Age bands and patient-facing work as external/susceptibility
    /// modifiers; age bands and gene-pattern classes as transmissibility
    /// modifiers. param_count() == 13.
    static FeatureConfig defaults();

    bool operator==(const FeatureConfig&) const = default;
};

/// Natural (unconstrained) parameter vector; theta.size() must equal the
/// FeatureConfig's param_count().
struct ModelParams {
    std::vector<double> theta;
};

/// Interpretable parameters. Lambda is the baseline cumulative external
/// exposure, lambda the baseline person-to-person rate, vartheta the
/// infectious-period variance (unit mean), eta in (-2, 2) the household-size
/// exponent; alpha/beta/gamma are log-scale covariate effects matching the
/// FeatureConfig role lists.
struct EpiParams {
    double Lambda = 0.0;
    double lambda = 0.0;
    double vartheta = 1.0;
    double eta = 0.0;
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> gamma;
};

/// One household: n participants, an n x p row-major binary feature matrix,
/// and n binary outcomes.
struct Household {
    std::string id;
    int size = 0;
    std::vector<std::uint8_t> x;
    std::vector<std::uint8_t> y;

    /// Outcome bitmask; participant 0 is the least significant bit.
    std::uint32_t outcome_mask() const;

    /// Checks the size bounds, vector shapes, and that all entries are 0/1.
    void validate(const FeatureConfig&) const;

    std::span<const std::uint8_t> row(const FeatureConfig& cfg, int i) const;
    std::span<const std::uint8_t> alpha_slice(const FeatureConfig& cfg, int i) const;
    std::span<const std::uint8_t> beta_slice(const FeatureConfig& cfg, int i) const;
    std::span<const std::uint8_t> gamma_slice(const FeatureConfig& cfg, int i) const;
};

/// theta -> interpretable parameters. Throws ConfigError on a length mismatch.
EpiParams decode(const ModelParams&, const FeatureConfig&);

/// Interpretable parameters -> theta. Requires Lambda, lambda, vartheta > 0
/// and eta in (-2, 2); inverse of decode to round-off.
ModelParams encode(const EpiParams&, const FeatureConfig&);

/// Probability that an individual with external-role features x_alpha escapes
/// infection from outside the household: exp(-Lambda * exp(alpha . x_alpha)).
double external_escape_prob(const EpiParams&, std::span<const std::uint8_t> x_alpha);

/// Transmission rate from infector j to susceptible i in a household of size n:
/// n^eta * lambda * exp(beta . x_beta_i) * exp(gamma . x_gamma_j).
double pairwise_rate(const EpiParams&, int n, std::span<const std::uint8_t> x_beta_i,
                     std::span<const std::uint8_t> x_gamma_j);

/// Baseline susceptible-infectious transmission probability in a household of
/// size n: 1 - phi(n^eta * lambda).
double sitp(const EpiParams&, int n);

}  // namespace hhfs
