#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hhfs/ingest.hpp"
#include "hhfs/likelihood.hpp"
#include "hhfs/model.hpp"
#include "hhfs/rng.hpp"

namespace hhfs {

/// A household composition to simulate: size and the row-major binary
/// feature matrix in FeatureConfig column order.
struct HouseholdTemplate {
    int size = 0;
    std::vector<std::uint8_t> x;
};

struct SimConfig {
    EpiParams epi;
    FeatureConfig config;
    std::vector<HouseholdTemplate> templates;
    std::int64_t replicates = 100000;
    std::uint64_t seed = 1;
    int threads = 0;
};

/// Minimal fixed point of the exposure map: starting from the externally
/// infected set {i : external_i > threshold_i}, repeatedly add any i with
///   external_i + sum_{j infected} rates[i*n+j] * periods[j] > threshold_i
/// until stable. Pure and independent of the insertion order (the map is
/// monotone). rates[i*n+j] is the force exerted on i by an infected j.
std::uint32_t sellke_fixed_point(std::span<const double> external,
                                 std::span<const double> thresholds,
                                 std::span<const double> periods,
                                 std::span<const double> rates);

/// One stochastic outcome of the within-household model. Draws, in fixed
/// order, an Exp(1) threshold per individual then a Gamma(1/vartheta,
/// vartheta) infectious period per individual (skipped, with periods
/// pinned to 1, when vartheta < 1e-8), and resolves the fixed point.
/// Accepts sizes up to 32 so oversized households remain simulable even
/// though the analysis caps at 6.
std::uint32_t simulate_household(const HouseholdTemplate&, const EpiParams&, const FeatureConfig&,
                                 rng::Stream&);

struct FrequencyTable {
    int n = 0;
    std::int64_t replicates = 0;
    std::vector<std::int64_t> counts;  ///< 2^n outcome counts

    std::vector<double> frequencies() const;
};

/// Empirical outcome distribution per template. Replicate r of template t
/// uses the stream keyed by (seed, t, r), so results are independent of
/// the thread count and schedule. Template sizes must be in [1, 6].
std::vector<FrequencyTable> outcome_frequencies(const SimConfig&);

/// Synthetic-population recipe for end-to-end cohort generation.
struct PopulationSpec {
    std::size_t households = 1000;
    /// weight of household sizes 1..6
    std::vector<double> size_weights = {0.29, 0.35, 0.15, 0.13, 0.06, 0.02};
    double child_2_11 = 0.079;
    double child_12_16 = 0.053;
    double patient_facing_adult = 0.037;
    /// latent strain mix carried by any infected individual; remainder is
    /// the low-viral-load Other class
    double strain_or_n_s = 0.72;
    double strain_or_n = 0.097;
    Date window_start{std::chrono::year(2020), std::chrono::month(9), std::chrono::day(1)};
    Date window_end{std::chrono::year(2020), std::chrono::month(11), std::chrono::day(14)};

    void validate() const;
};

struct GeneratedCohort {
    Cohort cohort;                     ///< observed covariates (patterns on positives only)
    std::vector<VisitRecord> records;  ///< flat-file visit rows
    EpiParams truth;
    std::int64_t positives = 0;
};

/// Draws a synthetic cohort from the exact generative model. Each member
/// carries latent age/work/strain attributes; the transmission dynamics
/// use the full latent covariates while the returned Cohort and visit
/// records reveal gene patterns only for members who test positive, which
/// is what a survey observes. Visits follow the enrolment schedule
/// (weekly for a month, then every 28 days) inside the window; infected
/// members test positive at their second visit. Deterministic given seed.
GeneratedCohort generate_cohort(const EpiParams& epi, const FeatureConfig& config,
                                const PopulationSpec& pop, std::uint64_t seed);

}  // namespace hhfs
