#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "hhfs/errors.hpp"
#include "hhfs/model.hpp"
#include "hhfs/rng.hpp"

using namespace hhfs;

namespace {

EpiParams random_epi(const FeatureConfig& cfg, rng::Stream& s) {
    EpiParams epi;
    epi.Lambda = std::exp(s.normal());
    epi.lambda = std::exp(s.normal());
    epi.vartheta = std::exp(s.normal());
    epi.eta = 1.9 * (2.0 * s.uniform01() - 1.0);
    for (std::size_t k = 0; k < cfg.external.size(); ++k) epi.alpha.push_back(s.normal());
    for (std::size_t k = 0; k < cfg.susceptibility.size(); ++k) epi.beta.push_back(s.normal());
    for (std::size_t k = 0; k < cfg.transmissibility.size(); ++k) epi.gamma.push_back(s.normal());
    return epi;
}

}  // namespace

TEST_CASE("default feature layout has 13 parameters") {
    auto cfg = FeatureConfig::defaults();
    CHECK(cfg.external.size() == 3);
    CHECK(cfg.susceptibility.size() == 2);
    CHECK(cfg.transmissibility.size() == 4);
    CHECK(cfg.feature_count() == 9);
    CHECK(cfg.param_count() == 13);
    CHECK_NOTHROW(cfg.validate());

    CHECK(cfg.feature_name(0) == "age_2_11");
    CHECK(cfg.feature_name(3) == "age_2_11");
    CHECK(cfg.feature_name(5) == "age_2_11");
    CHECK(cfg.feature_name(7) == "pattern_OR_N");
    CHECK(cfg.feature_name(8) == "pattern_other");
}

TEST_CASE("feature config validation rejects empty and duplicate names") {
    FeatureConfig cfg;
    cfg.external = {"a", "a"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.external = {"a", ""};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.external = {"a"};
    cfg.susceptibility = {"a"};  // same name in another role is fine
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("decode then encode is the identity within 1e-12") {
    auto cfg = FeatureConfig::defaults();
    rng::Stream s(rng::stream_key(11, 0, 0));
    for (int rep = 0; rep < 200; ++rep) {
        ModelParams theta;
        for (std::size_t k = 0; k < cfg.param_count(); ++k) theta.theta.push_back(2.0 * s.normal());
        EpiParams epi = decode(theta, cfg);
        ModelParams back = encode(epi, cfg);
        REQUIRE(back.theta.size() == theta.theta.size());
        for (std::size_t k = 0; k < theta.theta.size(); ++k)
            CHECK(back.theta[k] == doctest::Approx(theta.theta[k]).epsilon(1e-12));
    }
}

TEST_CASE("encode then decode is the identity on the valid domain") {
    auto cfg = FeatureConfig::defaults();
    rng::Stream s(rng::stream_key(12, 0, 0));
    for (int rep = 0; rep < 200; ++rep) {
        EpiParams epi = random_epi(cfg, s);
        EpiParams back = decode(encode(epi, cfg), cfg);
        CHECK(back.Lambda == doctest::Approx(epi.Lambda).epsilon(1e-12));
        CHECK(back.lambda == doctest::Approx(epi.lambda).epsilon(1e-12));
        CHECK(back.vartheta == doctest::Approx(epi.vartheta).epsilon(1e-12));
        CHECK(back.eta == doctest::Approx(epi.eta).epsilon(1e-12));
    }
}

TEST_CASE("decoded eta always lies in (-2, 2)") {
    auto cfg = FeatureConfig::defaults();
    for (double raw : {-1e9, -17.0, -1.0, 0.0, 0.3, 5.0, 1e12}) {
        ModelParams theta;
        theta.theta.assign(cfg.param_count(), 0.0);
        theta.theta[3] = raw;
        EpiParams epi = decode(theta, cfg);
        CHECK(epi.eta > -2.0);
        CHECK(epi.eta < 2.0);
    }
}

TEST_CASE("encode rejects out-of-domain parameters") {
    auto cfg = FeatureConfig::defaults();
    rng::Stream s(rng::stream_key(13, 0, 0));
    EpiParams good = random_epi(cfg, s);
    CHECK_NOTHROW(encode(good, cfg));

    auto bad = good;
    bad.Lambda = 0.0;
    CHECK_THROWS_AS(encode(bad, cfg), ConfigError);
    bad = good;
    bad.vartheta = -1.0;
    CHECK_THROWS_AS(encode(bad, cfg), ConfigError);
    bad = good;
    bad.eta = 2.0;
    CHECK_THROWS_AS(encode(bad, cfg), ConfigError);
    bad = good;
    bad.alpha.push_back(0.0);
    CHECK_THROWS_AS(encode(bad, cfg), ConfigError);
}

TEST_CASE("decode rejects a wrong-length parameter vector") {
    auto cfg = FeatureConfig::defaults();
    ModelParams theta;
    theta.theta.assign(cfg.param_count() - 1, 0.0);
    CHECK_THROWS_AS(decode(theta, cfg), ConfigError);
}

TEST_CASE("sitp is decreasing in n iff eta is negative") {
    auto cfg = FeatureConfig::defaults();
    rng::Stream s(rng::stream_key(14, 0, 0));
    EpiParams epi = random_epi(cfg, s);

    epi.eta = -0.7;
    for (int n = 2; n < 6; ++n) CHECK(sitp(epi, n) > sitp(epi, n + 1));

    epi.eta = 0.0;
    for (int n = 2; n < 6; ++n) CHECK(sitp(epi, n) == doctest::Approx(sitp(epi, n + 1)).epsilon(1e-14));

    epi.eta = 0.7;
    for (int n = 2; n < 6; ++n) CHECK(sitp(epi, n) < sitp(epi, n + 1));
}

TEST_CASE("pairwise rate is log-linear in the two feature rows") {
    auto cfg = FeatureConfig::defaults();
    rng::Stream s(rng::stream_key(15, 0, 0));
    EpiParams epi = random_epi(cfg, s);

    const std::size_t p = cfg.feature_count();
    std::vector<std::uint8_t> xi(p), xj(p), zero(p, 0);
    for (auto& v : xi) v = s.below(2) ? 1 : 0;
    for (auto& v : xj) v = s.below(2) ? 1 : 0;

    auto beta_of = [&](const std::vector<std::uint8_t>& x) {
        return std::span<const std::uint8_t>(x.data() + cfg.external.size(),
                                             cfg.susceptibility.size());
    };
    auto gamma_of = [&](const std::vector<std::uint8_t>& x) {
        return std::span<const std::uint8_t>(
            x.data() + cfg.external.size() + cfg.susceptibility.size(),
            cfg.transmissibility.size());
    };

    int n = 4;
    double lhs = pairwise_rate(epi, n, beta_of(xi), gamma_of(xj)) *
                 pairwise_rate(epi, n, beta_of(zero), gamma_of(zero));
    double rhs = pairwise_rate(epi, n, beta_of(xi), gamma_of(zero)) *
                 pairwise_rate(epi, n, beta_of(zero), gamma_of(xj));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("external escape probability matches its formula") {
    auto cfg = FeatureConfig::defaults();
    EpiParams epi;
    epi.Lambda = 0.25;
    epi.alpha = {std::log(2.0), 0.5, -0.3};
    epi.beta = {0.0, 0.0};
    epi.gamma = {0.0, 0.0, 0.0, 0.0};

    std::vector<std::uint8_t> x = {1, 0, 0};
    CHECK(external_escape_prob(epi, {x.data(), x.size()}) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-14));

    std::vector<std::uint8_t> none = {0, 0, 0};
    CHECK(external_escape_prob(epi, {none.data(), none.size()}) ==
          doctest::Approx(std::exp(-0.25)).epsilon(1e-14));
}

TEST_CASE("outcome mask is little-endian in participant order") {
    Household hh;
    hh.size = 3;
    hh.y = {1, 0, 1};
    CHECK(hh.outcome_mask() == 0b101u);
    hh.y = {0, 0, 0};
    CHECK(hh.outcome_mask() == 0u);
}

TEST_CASE("household validation rejects bad shapes and values") {
    auto cfg = FeatureConfig::defaults();
    Household hh;
    hh.id = "h";
    hh.size = 2;
    hh.x.assign(2 * cfg.feature_count(), 0);
    hh.y = {0, 1};
    CHECK_NOTHROW(hh.validate(cfg));

    auto bad = hh;
    bad.size = 7;
    bad.x.assign(7 * cfg.feature_count(), 0);
    bad.y.assign(7, 0);
    CHECK_THROWS_AS(bad.validate(cfg), ConfigError);

    bad = hh;
    bad.x[0] = 2;
    CHECK_THROWS_AS(bad.validate(cfg), ConfigError);

    bad = hh;
    bad.y = {0, 2};
    CHECK_THROWS_AS(bad.validate(cfg), ConfigError);

    bad = hh;
    bad.x.pop_back();
    CHECK_THROWS_AS(bad.validate(cfg), ConfigError);
}
