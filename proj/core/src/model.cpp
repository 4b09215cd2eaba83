#include "hhfs/model.hpp"

#include <cmath>
#include <set>

#include "hhfs/errors.hpp"
#include "hhfs/finalsize.hpp"

namespace hhfs {

namespace {

constexpr double kPi = 3.14159265358979323846;

double dot(std::span<const double> coeff, std::span<const std::uint8_t> bits) {
    double s = 0.0;
    for (std::size_t k = 0; k < coeff.size(); ++k)
        if (bits[k]) s += coeff[k];
    return s;
}

void check_role(const std::vector<std::string>& names, const char* role) {
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty()) throw ConfigError(std::string(role) + ": empty feature name");
        if (!seen.insert(n).second)
            throw ConfigError(std::string(role) + ": duplicate feature name '" + n + "'");
    }
}

}  // namespace

void FeatureConfig::validate() const {
    check_role(external, "external");
    check_role(susceptibility, "susceptibility");
    check_role(transmissibility, "transmissibility");
}

FeatureConfig FeatureConfig::defaults() {
    FeatureConfig cfg;
    cfg.external = {"age_2_11", "age_12_16", "patient_facing"};
    cfg.susceptibility = {"age_2_11", "age_12_16"};
    cfg.transmissibility = {"age_2_11", "age_12_16", "pattern_OR_N", "pattern_other"};
    return cfg;
}

std::uint32_t Household::outcome_mask() const {
    std::uint32_t m = 0;
    for (int i = 0; i < size; ++i)
        if (y[static_cast<std::size_t>(i)]) m |= 1u << i;
    return m;
}

void Household::validate(const FeatureConfig& cfg) const {
    if (size < 1 || size > max_household_size)
        throw ConfigError("household " + id + ": size " + std::to_string(size) +
                          " outside [1, " + std::to_string(max_household_size) + "]");
    std::size_t p = cfg.feature_count();
    if (x.size() != static_cast<std::size_t>(size) * p)
        throw ConfigError("household " + id + ": feature matrix has " +
                          std::to_string(x.size()) + " entries, expected " +
                          std::to_string(static_cast<std::size_t>(size) * p));
    if (y.size() != static_cast<std::size_t>(size))
        throw ConfigError("household " + id + ": outcome vector has " +
                          std::to_string(y.size()) + " entries, expected " +
                          std::to_string(size));
    for (auto v : x)
        if (v > 1) throw ConfigError("household " + id + ": non-binary feature value");
    for (auto v : y)
        if (v > 1) throw ConfigError("household " + id + ": non-binary outcome value");
}

std::span<const std::uint8_t> Household::row(const FeatureConfig& cfg, int i) const {
    std::size_t p = cfg.feature_count();
    return {x.data() + static_cast<std::size_t>(i) * p, p};
}

std::span<const std::uint8_t> Household::alpha_slice(const FeatureConfig& cfg, int i) const {
    return row(cfg, i).subspan(0, cfg.external.size());
}

std::span<const std::uint8_t> Household::beta_slice(const FeatureConfig& cfg, int i) const {
    return row(cfg, i).subspan(cfg.external.size(), cfg.susceptibility.size());
}

std::span<const std::uint8_t> Household::gamma_slice(const FeatureConfig& cfg, int i) const {
    return row(cfg, i).subspan(cfg.external.size() + cfg.susceptibility.size(),
                               cfg.transmissibility.size());
}

EpiParams decode(const ModelParams& params, const FeatureConfig& cfg) {
    if (params.theta.size() != cfg.param_count())
        throw ConfigError("parameter vector has " + std::to_string(params.theta.size()) +
                          " entries, expected " + std::to_string(cfg.param_count()));
    const auto& th = params.theta;
    EpiParams epi;
    epi.Lambda = std::exp(th[0]);
    epi.lambda = std::exp(th[1]);
    epi.vartheta = std::exp(th[2]);
    epi.eta = (4.0 / kPi) * std::atan(th[3]);
    auto it = th.begin() + 4;
    epi.alpha.assign(it, it + cfg.external.size());
    it += cfg.external.size();
    epi.beta.assign(it, it + cfg.susceptibility.size());
    it += cfg.susceptibility.size();
    epi.gamma.assign(it, it + cfg.transmissibility.size());
    return epi;
}

ModelParams encode(const EpiParams& epi, const FeatureConfig& cfg) {
    if (!(epi.Lambda > 0.0) || !(epi.lambda > 0.0) || !(epi.vartheta > 0.0))
        throw ConfigError("encode requires Lambda, lambda, vartheta > 0");
    if (!(epi.eta > -2.0 && epi.eta < 2.0))
        throw ConfigError("encode requires eta in (-2, 2)");
    if (epi.alpha.size() != cfg.external.size() ||
        epi.beta.size() != cfg.susceptibility.size() ||
        epi.gamma.size() != cfg.transmissibility.size())
        throw ConfigError("encode: coefficient lengths do not match the feature lists");
    ModelParams params;
    params.theta.reserve(cfg.param_count());
    params.theta.push_back(std::log(epi.Lambda));
    params.theta.push_back(std::log(epi.lambda));
    params.theta.push_back(std::log(epi.vartheta));
    params.theta.push_back(std::tan(kPi * epi.eta / 4.0));
    params.theta.insert(params.theta.end(), epi.alpha.begin(), epi.alpha.end());
    params.theta.insert(params.theta.end(), epi.beta.begin(), epi.beta.end());
    params.theta.insert(params.theta.end(), epi.gamma.begin(), epi.gamma.end());
    return params;
}

double external_escape_prob(const EpiParams& epi, std::span<const std::uint8_t> x_alpha) {
    return std::exp(-epi.Lambda * std::exp(dot(epi.alpha, x_alpha)));
}

double pairwise_rate(const EpiParams& epi, int n, std::span<const std::uint8_t> x_beta_i,
                     std::span<const std::uint8_t> x_gamma_j) {
    return std::pow(n, epi.eta) * epi.lambda *
           std::exp(dot(epi.beta, x_beta_i) + dot(epi.gamma, x_gamma_j));
}

double sitp(const EpiParams& epi, int n) {
    return 1.0 - phi(std::pow(n, epi.eta) * epi.lambda, epi.vartheta);
}

}  // namespace hhfs
