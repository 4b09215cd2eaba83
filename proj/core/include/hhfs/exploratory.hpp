#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hhfs/model.hpp"

namespace hhfs {

/// Gene-target bits for a single positive test pattern.
inline constexpr int gene_or = 1;
inline constexpr int gene_n = 2;
inline constexpr int gene_s = 4;

/// Parses a pattern token such as "OR+N+S" or "N" into a gene bitmask.
/// "NA" and the empty string give 0 (no gene hits).
/// Throws ConfigError on an unknown target name.
int parse_pattern(const std::string& text);

/// Canonical text for a gene bitmask ("OR+N+S", "N", ...); 0 gives "NA".
std::string format_pattern(int genes);

/// Across a participant's positive visits, the pattern with the fewest
/// target failures (most gene hits). Ties prefer the set containing S,
/// then OR, then N. Throws ConfigError on empty input.
int maximal_pattern(const std::vector<int>& visit_genes);

enum class PatternClass { or_n_s, or_n, other };

/// OR+N+S -> or_n_s, OR+N -> or_n, anything else -> other.
PatternClass classify_pattern(int genes);

std::string pattern_class_label(PatternClass c);

/// Per-household inputs for the exploratory statistics.
struct ExploreHousehold {
    std::vector<std::uint8_t> positive;  ///< 1 = tested positive this tranche
    std::vector<std::uint8_t> split;     ///< binary stratifier (default: over 16)

    std::size_t size() const { return positive.size(); }
};

/// Counts of households of size l with k positives, sizes 2..6 only.
struct AttackHistogram {
    static constexpr int min_size = 2;

    /// z[k][l]; valid for l in [2,6], k in [0,l].
    std::array<std::array<std::int64_t, max_household_size + 1>, max_household_size + 1> z{};

    std::int64_t at(int k, int l) const { return z[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)]; }
    std::int64_t size_total(int l) const;
};

/// Builds the attack-rate histogram. Households of size 1 or above 6 are
/// skipped (the displayed size range is 2..6).
AttackHistogram histogram(const std::vector<ExploreHousehold>& households);

/// One point per eligible household: (positive fraction among split=1
/// members, positive fraction among split=0 members).
struct DensityField {
    std::vector<std::array<double, 2>> points;
    int grid_dim = 0;        ///< cells per axis over [0,1]^2
    double width = 0.125;    ///< square-kernel side length
    std::vector<double> values;  ///< cell-averaged density, row-major (y major)
    std::size_t excluded = 0;    ///< ineligible household count

    double at(int ix, int iy) const {
        return values[static_cast<std::size_t>(iy) * static_cast<std::size_t>(grid_dim) +
                      static_cast<std::size_t>(ix)];
    }
};

/// Square-kernel density estimate of the two-group positivity points.
/// Eligibility requires at least one positive member and at least one
/// member on each side of the split. Each point spreads mass 1/N uniformly
/// over its width-w box clipped to [0,1]^2 (boundary renormalization);
/// values are cell averages, so the lattice sum times cell area is exactly
/// 1 whenever any point is eligible.
DensityField density_points(const std::vector<ExploreHousehold>& households,
                            double width = 0.125, int grid_dim = 64);

/// Ordered-pair contingency table over participant states with Pearson
/// residuals. Callers restrict the household set (the published analysis
/// uses households with at least one positive).
struct PairTable {
    std::vector<std::string> states;
    std::vector<std::int64_t> y;       ///< ordered-pair counts, row-major
    std::vector<double> expected;
    std::vector<double> residual;      ///< (Y-E)/sqrt(E); 0 when E=0 and Y=0; +inf when E=0, Y>0
    std::vector<std::int64_t> z;       ///< per-state individual counts
    std::int64_t denom = 0;            ///< sum of n_a (n_a - 1)
    std::int64_t individuals = 0;      ///< sum of n_a

    std::size_t dim() const { return states.size(); }
    std::int64_t y_at(std::size_t a, std::size_t b) const { return y[a * dim() + b]; }
    double e_at(std::size_t a, std::size_t b) const { return expected[a * dim() + b]; }
    double r_at(std::size_t a, std::size_t b) const { return residual[a * dim() + b]; }
};

/// Default state list for pattern-clustering tables.
std::vector<std::string> default_pair_states();

/// Builds Y from ordered distinct within-household pairs, the expected
/// table E_AB = pi_A pi_B sum n_a(n_a-1) with pi = z / total individuals,
/// and the Pearson residuals. State values index into `labels`.
/// Throws ConfigError on an empty household set or an out-of-range state.
PairTable pair_residuals(const std::vector<std::vector<int>>& household_states,
                         const std::vector<std::string>& labels);

}  // namespace hhfs
