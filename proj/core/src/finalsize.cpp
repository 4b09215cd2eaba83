#include "hhfs/finalsize.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include "hhfs/errors.hpp"

namespace hhfs {

namespace {

constexpr double kVarthetaFloor = 1e-8;
constexpr std::uint32_t lowest_bit_index(std::uint32_t v) {
    return static_cast<std::uint32_t>(std::countr_zero(v));
}

std::string describe(const EpiParams& epi) {
    std::ostringstream os;
    os << "Lambda=" << epi.Lambda << " lambda=" << epi.lambda << " vartheta=" << epi.vartheta
       << " eta=" << epi.eta;
    return os.str();
}

void check_finite(const EpiParams& epi, const std::string& household_id) {
    bool ok = std::isfinite(epi.Lambda) && std::isfinite(epi.lambda) &&
              std::isfinite(epi.vartheta) && std::isfinite(epi.eta);
    for (double v : epi.alpha) ok = ok && std::isfinite(v);
    for (double v : epi.beta) ok = ok && std::isfinite(v);
    for (double v : epi.gamma) ok = ok && std::isfinite(v);
    if (!ok)
        throw NumericalError("non-finite parameters for household '" + household_id + "' (" +
                             describe(epi) + ")");
}

}  // namespace

double log_phi(double s, double vartheta) {
    if (vartheta < kVarthetaFloor) return -s;
    return -std::log1p(vartheta * s) / vartheta;
}

double phi(double s, double vartheta) {
    if (!(s >= 0.0)) throw NumericalError("phi: requires s >= 0");
    if (!(vartheta > 0.0)) throw NumericalError("phi: requires vartheta > 0");
    return std::exp(log_phi(s, vartheta));
}

HouseholdTerms household_terms(int n, std::span<const std::uint8_t> x, const EpiParams& epi,
                               const FeatureConfig& cfg) {
    HouseholdTerms t;
    t.n = n;
    t.base = std::pow(n, epi.eta) * epi.lambda;
    t.vartheta = epi.vartheta;
    std::size_t p = cfg.feature_count();
    std::size_t na = cfg.external.size();
    std::size_t nb = cfg.susceptibility.size();
    std::size_t ng = cfg.transmissibility.size();
    for (int i = 0; i < n; ++i) {
        const std::uint8_t* row = x.data() + static_cast<std::size_t>(i) * p;
        double da = 0.0, db = 0.0, dg = 0.0;
        for (std::size_t k = 0; k < na; ++k)
            if (row[k]) da += epi.alpha[k];
        for (std::size_t k = 0; k < nb; ++k)
            if (row[na + k]) db += epi.beta[k];
        for (std::size_t k = 0; k < ng; ++k)
            if (row[na + nb + k]) dg += epi.gamma[k];
        t.exposure[i] = epi.Lambda * std::exp(da);
        t.sus[i] = std::exp(db);
        t.inf[i] = std::exp(dg);
    }
    return t;
}

void solve_submasks(const HouseholdTerms& t, std::uint32_t mask, std::span<double> p) {
    double total_exposure = 0.0, total_sus = 0.0;
    for (int i = 0; i < t.n; ++i) {
        total_exposure += t.exposure[i];
        total_sus += t.sus[i];
    }

    // Subset sums over members of A, built by peeling the lowest bit.
    double sum_exposure[64], sum_sus[64], log_phi_sum[64];
    double lp[max_household_size];

    std::uint32_t A = 0;
    for (;;) {
        double esc;
        if (A == 0) {
            sum_exposure[0] = 0.0;
            sum_sus[0] = 0.0;
            esc = std::exp(-total_exposure);
            p[0] = esc;
        } else {
            std::uint32_t low = lowest_bit_index(A);
            std::uint32_t rest = A & (A - 1);
            sum_exposure[A] = sum_exposure[rest] + t.exposure[low];
            sum_sus[A] = sum_sus[rest] + t.sus[low];
            esc = std::exp(-(total_exposure - sum_exposure[A]));

            // Escape pressure each potential infector j in A exerts on the
            // members outside A, through the rank-one rate structure.
            double outside = t.base * (total_sus - sum_sus[A]);
            for (std::uint32_t j = 0; j < static_cast<std::uint32_t>(t.n); ++j)
                if (A & (1u << j)) lp[j] = log_phi(outside * t.inf[j], t.vartheta);

            // Outcome equation A: sum over submasks V of P_V / prod_{j in V}
            // phi_j = esc(A). All true terms are bounded by esc(A), so the
            // exponentials stay tame wherever probabilities are nonzero.
            double acc = 0.0;
            std::uint32_t V = 0;
            log_phi_sum[0] = 0.0;
            for (;;) {
                if (V != 0)
                    log_phi_sum[V] = log_phi_sum[V & (V - 1)] + lp[lowest_bit_index(V)];
                if (V == A) break;
                if (p[V] != 0.0) acc += p[V] * std::exp(-log_phi_sum[V]);
                V = (V - A) & A;
            }
            double residual = esc - acc;
            p[A] = residual > 0.0 ? residual * std::exp(log_phi_sum[A]) : 0.0;
        }
        if (A == mask) break;
        A = (A - mask) & mask;
    }
}

FinalSizeSystem build_system(const Household& hh, const EpiParams& epi, const FeatureConfig& cfg) {
    check_finite(epi, hh.id);
    hh.validate(cfg);
    HouseholdTerms t = household_terms(hh.size, hh.x, epi, cfg);
    std::uint32_t full = (1u << hh.size) - 1;

    FinalSizeSystem sys;
    sys.n = hh.size;
    sys.log_entries.assign(sys.dim() * sys.dim(), std::numeric_limits<double>::quiet_NaN());

    double total_exposure = 0.0, total_sus = 0.0;
    for (int i = 0; i < t.n; ++i) {
        total_exposure += t.exposure[i];
        total_sus += t.sus[i];
    }

    double sum_exposure[64], sum_sus[64], log_phi_sum[64];
    double lp[max_household_size];
    for (std::uint32_t A = 0; A <= full; ++A) {
        if (A == 0) {
            sum_exposure[0] = 0.0;
            sum_sus[0] = 0.0;
        } else {
            std::uint32_t low = lowest_bit_index(A);
            std::uint32_t rest = A & (A - 1);
            sum_exposure[A] = sum_exposure[rest] + t.exposure[low];
            sum_sus[A] = sum_sus[rest] + t.sus[low];
        }
        double log_esc = -(total_exposure - sum_exposure[A]);
        double outside = t.base * (total_sus - sum_sus[A]);
        for (std::uint32_t j = 0; j < static_cast<std::uint32_t>(t.n); ++j)
            if (A & (1u << j)) lp[j] = log_phi(outside * t.inf[j], t.vartheta);

        std::uint32_t V = 0;
        for (;;) {
            log_phi_sum[V] = V == 0 ? 0.0 : log_phi_sum[V & (V - 1)] + lp[lowest_bit_index(V)];
            sys.log_entries[(std::size_t{A} << sys.n) + V] = -(log_phi_sum[V] + log_esc);
            if (V == A) break;
            V = (V - A) & A;
        }
    }
    return sys;
}

double FinalSizeSystem::entry(std::uint32_t row, std::uint32_t col) const {
    if (!in_support(row, col)) return 0.0;
    return std::exp(log_entry(row, col));
}

OutcomeDistribution solve(const Household& hh, const EpiParams& epi, const FeatureConfig& cfg) {
    check_finite(epi, hh.id);
    hh.validate(cfg);
    HouseholdTerms t = household_terms(hh.size, hh.x, epi, cfg);
    std::uint32_t full = (1u << hh.size) - 1;

    OutcomeDistribution dist;
    dist.n = hh.size;
    dist.p.assign(std::size_t{1} << hh.size, 0.0);
    solve_submasks(t, full, dist.p);

    double sum = 0.0;
    for (double v : dist.p) {
        if (!std::isfinite(v))
            throw NumericalError("solve: non-finite outcome probability for household '" + hh.id +
                                 "' (" + describe(epi) + ")");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-10)
        throw NumericalError("solve: outcome probabilities sum to " + std::to_string(sum) +
                             " for household '" + hh.id + "' (" + describe(epi) + ")");
    return dist;
}

double household_prob(const Household& hh, const EpiParams& epi, const FeatureConfig& cfg) {
    check_finite(epi, hh.id);
    hh.validate(cfg);
    HouseholdTerms t = household_terms(hh.size, hh.x, epi, cfg);
    std::uint32_t mask = hh.outcome_mask();
    double p[64];
    solve_submasks(t, mask, {p, std::size_t{1} << hh.size});
    double v = p[mask];
    if (!std::isfinite(v))
        throw NumericalError("household_prob: non-finite probability for household '" + hh.id +
                             "' (" + describe(epi) + ")");
    return v;
}

double total_variation_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return 0.5 * s;
}

}  // namespace hhfs
