#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "hhfs/errors.hpp"
#include "hhfs/finalsize.hpp"
#include "hhfs/model.hpp"
#include "hhfs/rng.hpp"

using namespace hhfs;

namespace {

FeatureConfig empty_config() { return FeatureConfig{}; }

EpiParams baseline(double Lambda, double lambda, double vartheta, double eta) {
    EpiParams epi;
    epi.Lambda = Lambda;
    epi.lambda = lambda;
    epi.vartheta = vartheta;
    epi.eta = eta;
    return epi;
}

Household bare_household(int n) {
    Household hh;
    hh.id = "t" + std::to_string(n);
    hh.size = n;
    hh.y.assign(static_cast<std::size_t>(n), 0);
    return hh;
}

EpiParams random_epi(const FeatureConfig& cfg, rng::Stream& s) {
    EpiParams epi;
    epi.Lambda = 0.002 + 2.0 * s.uniform01();
    epi.lambda = 0.01 + 3.0 * s.uniform01();
    epi.vartheta = 0.05 + 3.0 * s.uniform01();
    epi.eta = 1.9 * (2.0 * s.uniform01() - 1.0);
    epi.alpha.assign(cfg.external.size(), 0.0);
    epi.beta.assign(cfg.susceptibility.size(), 0.0);
    epi.gamma.assign(cfg.transmissibility.size(), 0.0);
    for (auto& v : epi.alpha) v = s.normal() * 0.7;
    for (auto& v : epi.beta) v = s.normal() * 0.7;
    for (auto& v : epi.gamma) v = s.normal() * 0.7;
    return epi;
}

}  // namespace

TEST_CASE("phi matches the closed form and its limits") {
    CHECK(phi(1.0, 0.5) == doctest::Approx(4.0 / 9.0).epsilon(1e-14));
    CHECK(phi(0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(phi(2.0, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    // vartheta -> 0 limit is exp(-s); the branch takes over below 1e-8
    CHECK(phi(1.7, 1e-9) == doctest::Approx(std::exp(-1.7)).epsilon(1e-12));
    CHECK(phi(1.7, 1e-6) == doctest::Approx(std::exp(-1.7)).epsilon(1e-5));

    CHECK(log_phi(3.0, 0.5) == doctest::Approx(std::log(phi(3.0, 0.5))).epsilon(1e-13));

    CHECK_THROWS_AS(phi(-0.1, 1.0), NumericalError);
    CHECK_THROWS_AS(phi(1.0, -1.0), NumericalError);
}

TEST_CASE("single-person household splits mass by the escape probability") {
    auto cfg = empty_config();
    auto epi = baseline(0.4, 0.8, 1.0, 0.0);
    auto hh = bare_household(1);
    auto dist = solve(hh, epi, cfg);
    REQUIRE(dist.p.size() == 2);
    double q = std::exp(-0.4);
    CHECK(dist.p[0] == doctest::Approx(q).epsilon(1e-12));
    CHECK(dist.p[1] == doctest::Approx(1.0 - q).epsilon(1e-12));
}

TEST_CASE("two-person worked example") {
    auto cfg = empty_config();
    auto epi = baseline(0.01, 0.5, 1.0, 0.0);
    auto hh = bare_household(2);
    auto dist = solve(hh, epi, cfg);
    REQUIRE(dist.p.size() == 4);

    const double Q = std::exp(-0.01);
    CHECK(dist.p[0] == doctest::Approx(Q * Q).epsilon(1e-12));
    // one-infected outcomes carry the transmission escape factor phi(lambda)
    const double expected_single = Q * (1.0 - Q) / 1.5;
    CHECK(dist.p[1] == doctest::Approx(expected_single).epsilon(1e-12));
    CHECK(dist.p[2] == doctest::Approx(expected_single).epsilon(1e-12));
    CHECK(dist.p[3] == doctest::Approx(1.0 - Q * Q - 2.0 * expected_single).epsilon(1e-12));
}

TEST_CASE("two-person closed forms hold for 100 random parameter draws") {
    auto cfg = empty_config();
    auto hh = bare_household(2);
    rng::Stream s(rng::stream_key(21, 0, 0));
    for (int rep = 0; rep < 100; ++rep) {
        auto epi = random_epi(cfg, s);
        auto dist = solve(hh, epi, cfg);
        const double Q = std::exp(-epi.Lambda);
        const double rate = std::pow(2.0, epi.eta) * epi.lambda;
        CHECK(dist.p[0] == doctest::Approx(Q * Q).epsilon(1e-10));
        CHECK(dist.p[1] ==
              doctest::Approx(Q * (1.0 - Q) * phi(rate, epi.vartheta)).epsilon(1e-10));
        CHECK(dist.p[2] ==
              doctest::Approx(Q * (1.0 - Q) * phi(rate, epi.vartheta)).epsilon(1e-10));
    }
}

TEST_CASE("three-person distribution matches direct enumeration") {
    // Independent check coded from the outcome equations: each equation
    // indexed by a subset A says sum_{V subseteq A} P_V / prod_{j in V}
    // phi(pressure from outside A onto j) = prod_{i notin A} Q_i.
    auto cfg = empty_config();
    auto epi = baseline(0.3, 0.9, 0.7, -0.4);
    auto hh = bare_household(3);
    auto dist = solve(hh, epi, cfg);

    const int n = 3;
    const double rate = std::pow(3.0, epi.eta) * epi.lambda;
    std::vector<double> p(8, 0.0);
    for (std::uint32_t a = 0; a < 8; ++a) {
        int outside = n - std::popcount(a);
        double rhs = std::exp(-epi.Lambda * outside);
        for (std::uint32_t v = 0; v < a; ++v) {
            if ((v & ~a) != 0) continue;
            double denom = 1.0;
            for (int j = 0; j < n; ++j)
                if (v & (1u << j)) denom *= phi(rate * outside, epi.vartheta);
            rhs -= p[v] / denom;
        }
        double self = 1.0;
        for (int j = 0; j < n; ++j)
            if (a & (1u << j)) self *= phi(rate * outside, epi.vartheta);
        p[a] = rhs * self;
    }
    for (std::uint32_t m = 0; m < 8; ++m) CHECK(dist.p[m] == doctest::Approx(p[m]).epsilon(1e-10));
}

TEST_CASE("probabilities normalize for 1000 random covariate households") {
    auto cfg = FeatureConfig::defaults();
    rng::Stream s(rng::stream_key(22, 0, 0));
    for (int rep = 0; rep < 1000; ++rep) {
        int n = 1 + static_cast<int>(s.below(6));
        Household hh = bare_household(n);
        hh.x.resize(static_cast<std::size_t>(n) * cfg.feature_count());
        for (auto& v : hh.x) v = s.below(2) ? 1 : 0;
        auto epi = random_epi(cfg, s);
        auto dist = solve(hh, epi, cfg);
        double total = std::accumulate(dist.p.begin(), dist.p.end(), 0.0);
        CHECK(std::abs(total - 1.0) <= 1e-10);
        for (double v : dist.p) CHECK(v >= 0.0);
    }
}

TEST_CASE("raising the external exposure lowers the all-negative probability") {
    auto cfg = empty_config();
    auto hh = bare_household(4);
    double previous = 1.0;
    for (double Lambda : {0.01, 0.05, 0.2, 0.8, 2.0}) {
        auto epi = baseline(Lambda, 0.6, 1.0, -0.2);
        double p0 = solve(hh, epi, cfg).p[0];
        CHECK(p0 < previous);
        previous = p0;
    }
}

TEST_CASE("permuting participants permutes the distribution consistently") {
    FeatureConfig cfg;
    cfg.external = {"f"};
    cfg.susceptibility = {"f"};
    cfg.transmissibility = {"f"};

    EpiParams epi = baseline(0.2, 0.7, 1.3, 0.5);
    epi.alpha = {0.6};
    epi.beta = {-0.4};
    epi.gamma = {0.8};

    Household hh = bare_household(3);
    hh.x = {1, 1, 1, 0, 0, 0, 1, 1, 1};  // members 0 and 2 flagged, member 1 not

    Household swapped = hh;  // swap members 0 and 1
    swapped.x = {0, 0, 0, 1, 1, 1, 1, 1, 1};

    auto a = solve(hh, epi, cfg);
    auto b = solve(swapped, epi, cfg);

    auto apply_swap = [](std::uint32_t m) {
        std::uint32_t bit0 = m & 1u, bit1 = (m >> 1) & 1u;
        return (m & ~3u) | (bit0 << 1) | bit1;
    };
    for (std::uint32_t m = 0; m < 8; ++m)
        CHECK(a.p[m] == doctest::Approx(b.p[apply_swap(m)]).epsilon(1e-12));

    // identical members: swapping them is a no-op
    Household sym = bare_household(2);
    sym.x = {1, 1, 1, 1, 1, 1};
    auto d = solve(sym, epi, cfg);
    CHECK(d.p[1] == doctest::Approx(d.p[2]).epsilon(1e-12));
}

TEST_CASE("zero transmission factorizes into independent external infections") {
    auto cfg = FeatureConfig::defaults();
    rng::Stream s(rng::stream_key(23, 0, 0));
    EpiParams epi = random_epi(cfg, s);
    epi.lambda = 1e-300;  // effectively zero while staying in the valid domain

    Household hh = bare_household(4);
    hh.x.resize(4 * cfg.feature_count());
    for (auto& v : hh.x) v = s.below(2) ? 1 : 0;

    auto dist = solve(hh, epi, cfg);
    for (std::uint32_t m = 0; m < dist.dim(); ++m) {
        double expected = 1.0;
        for (int i = 0; i < 4; ++i) {
            double q = external_escape_prob(epi, hh.alpha_slice(cfg, i));
            expected *= (m & (1u << i)) ? 1.0 - q : q;
        }
        CHECK(dist.p[m] == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("household_prob agrees with the full solve") {
    auto cfg = FeatureConfig::defaults();
    rng::Stream s(rng::stream_key(24, 0, 0));
    for (int rep = 0; rep < 50; ++rep) {
        int n = 1 + static_cast<int>(s.below(6));
        Household hh = bare_household(n);
        hh.x.resize(static_cast<std::size_t>(n) * cfg.feature_count());
        for (auto& v : hh.x) v = s.below(2) ? 1 : 0;
        for (auto& v : hh.y) v = s.below(2) ? 1 : 0;
        auto epi = random_epi(cfg, s);
        double direct = household_prob(hh, epi, cfg);
        double full = solve(hh, epi, cfg).p[hh.outcome_mask()];
        CHECK(direct == doctest::Approx(full).epsilon(1e-12));
    }
}

TEST_CASE("system support is the submask lattice") {
    auto cfg = empty_config();
    auto epi = baseline(0.1, 0.5, 1.0, 0.0);
    auto hh = bare_household(3);
    auto system = build_system(hh, epi, cfg);
    CHECK(system.dim() == 8);
    for (std::uint32_t r = 0; r < 8; ++r)
        for (std::uint32_t c = 0; c < 8; ++c) {
            if ((c & ~r) == 0) {
                CHECK(system.in_support(r, c));
                CHECK(std::isfinite(system.log_entry(r, c)));
                CHECK(system.entry(r, c) >= 1.0);  // reciprocals of probabilities
            } else {
                CHECK_FALSE(system.in_support(r, c));
                CHECK(system.entry(r, c) == 0.0);
            }
        }

    // row equations evaluated at the solved distribution hold exactly
    auto dist = solve(hh, epi, cfg);
    for (std::uint32_t r = 0; r < 8; ++r) {
        double lhs = 0.0;
        for (std::uint32_t c = 0; c <= r; ++c)
            if (system.in_support(r, c)) lhs += system.entry(r, c) * dist.p[c];
        CHECK(lhs == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("non-finite parameters are rejected up front") {
    auto cfg = empty_config();
    auto hh = bare_household(2);
    auto epi = baseline(std::nan(""), 0.5, 1.0, 0.0);
    CHECK_THROWS_AS(solve(hh, epi, cfg), NumericalError);
    CHECK_THROWS_AS(household_prob(hh, epi, cfg), NumericalError);
}

TEST_CASE("total variation distance") {
    std::vector<double> a = {0.5, 0.5, 0.0};
    std::vector<double> b = {0.25, 0.25, 0.5};
    CHECK(total_variation_distance(a, b) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(total_variation_distance(a, a) == doctest::Approx(0.0));
}
