#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hhfs/model.hpp"

namespace hhfs {

/// Laplace transform of the unit-mean, variance-vartheta Gamma
/// infectious-period distribution evaluated at s:
///   phi(s, vartheta) = (1 + vartheta*s)^(-1/vartheta),
/// with the analytic limit exp(-s) used below vartheta = 1e-8.
/// Requires s >= 0 and vartheta > 0; returns a value in (0, 1].
double phi(double s, double vartheta);
double log_phi(double s, double vartheta);

/// Final-size probabilities over the 2^n outcomes of one household, indexed
/// by the little-endian participant bitmask (participant 0 = lowest bit).
struct OutcomeDistribution {
    int n = 0;
    std::vector<double> p;

    std::size_t dim() const { return p.size(); }
};

/// Per-household inputs to the outcome equations. The person-to-person rate
/// factorizes as lambda_ij = base * sus_i * inf_j (i != j), which is what
/// makes the per-outcome escape pressures cheap to accumulate.
struct HouseholdTerms {
    int n = 0;
    double base = 0.0;      // n^eta * lambda
    double vartheta = 1.0;
    std::array<double, max_household_size> exposure{};  // Lambda_i
    std::array<double, max_household_size> sus{};       // exp(beta . x_i)
    std::array<double, max_household_size> inf{};       // exp(gamma . x_j)
};

HouseholdTerms household_terms(int n, std::span<const std::uint8_t> x, const EpiParams&,
                               const FeatureConfig&);

/// Computes P_V for every submask V of `mask` into p (which must have 1<<n
/// slots); entries outside the submask lattice of `mask` are left untouched.
/// Outcome probabilities depend only on equations indexed by submasks, so a
/// partial sweep is exact for the outcomes it covers.
void solve_submasks(const HouseholdTerms&, std::uint32_t mask, std::span<double> p);

/// The triangular system the distribution satisfies. Row A holds the outcome
/// equation indexed by bitmask A: sum over submasks V of A of entry(A, V) *
/// P_V equals 1, so ascending-mask sweeps solve it by back-substitution.
/// Entries are reciprocals of probability products (always >= 1) and are
/// stored as logs to dodge overflow; structural zeros are marked NaN.
struct FinalSizeSystem {
    int n = 0;
    std::vector<double> log_entries;  // (1<<n)^2, row-major

    std::size_t dim() const { return std::size_t{1} << n; }
    bool in_support(std::uint32_t row, std::uint32_t col) const { return (col & ~row) == 0; }
    double log_entry(std::uint32_t row, std::uint32_t col) const {
        return log_entries[(std::size_t{row} << n) + col];
    }
    /// exp of the stored log; 0 off support. May overflow to +inf for extreme
    /// parameters; use log_entry where that matters.
    double entry(std::uint32_t row, std::uint32_t col) const;
};

FinalSizeSystem build_system(const Household&, const EpiParams&, const FeatureConfig&);

/// Full final-size distribution of one household. Throws NumericalError
/// (carrying the household id and parameters) on non-finite intermediates or
/// a broken normalization.
OutcomeDistribution solve(const Household&, const EpiParams&, const FeatureConfig&);

/// Probability of the household's observed outcome y; equals
/// solve(...).p[hh.outcome_mask()] but only sweeps the submasks of y.
double household_prob(const Household&, const EpiParams&, const FeatureConfig&);

/// 0.5 * sum |a_k - b_k| between two distributions on the same index set.
double total_variation_distance(std::span<const double> a, std::span<const double> b);

}  // namespace hhfs
