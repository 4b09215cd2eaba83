#include "hhfs/sellke.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hhfs/errors.hpp"
#include "hhfs/parallel.hpp"

namespace hhfs {

namespace {

constexpr std::uint64_t kCohortStream = 0x434f48u;

void validate_template(const HouseholdTemplate& t, const FeatureConfig& cfg, int max_size) {
    if (t.size < 1 || t.size > max_size)
        throw ConfigError("household template size " + std::to_string(t.size) +
                          " outside [1, " + std::to_string(max_size) + "]");
    const std::size_t p = cfg.feature_count();
    if (t.x.size() != static_cast<std::size_t>(t.size) * p)
        throw ConfigError("household template feature matrix has wrong shape");
    for (auto v : t.x)
        if (v > 1) throw ConfigError("household template features must be 0/1");
}

double dot(std::span<const double> coef, const std::uint8_t* x) {
    double s = 0.0;
    for (std::size_t k = 0; k < coef.size(); ++k) s += coef[k] * x[k];
    return s;
}

struct RateTable {
    std::vector<double> external;  // cumulative external exposure per member
    std::vector<double> rates;     // n x n, force on i from infected j
};

RateTable build_rates(int n, const std::uint8_t* x, std::size_t p, const EpiParams& epi,
                      const FeatureConfig& cfg) {
    const std::size_t na = cfg.external.size();
    const std::size_t nb = cfg.susceptibility.size();
    RateTable t;
    t.external.resize(static_cast<std::size_t>(n));
    t.rates.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        t.external[static_cast<std::size_t>(i)] =
            epi.Lambda * std::exp(dot(epi.alpha, x + static_cast<std::size_t>(i) * p));
    const double base = std::pow(static_cast<double>(n), epi.eta) * epi.lambda;
    for (int i = 0; i < n; ++i) {
        double sus = std::exp(dot(epi.beta, x + static_cast<std::size_t>(i) * p + na));
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            double inf = std::exp(dot(epi.gamma, x + static_cast<std::size_t>(j) * p + na + nb));
            t.rates[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                    static_cast<std::size_t>(j)] = base * sus * inf;
        }
    }
    return t;
}

void check_param_shape(const EpiParams& epi, const FeatureConfig& cfg) {
    if (epi.alpha.size() != cfg.external.size() || epi.beta.size() != cfg.susceptibility.size() ||
        epi.gamma.size() != cfg.transmissibility.size())
        throw ConfigError("coefficient vectors do not match the feature lists");
    if (!(epi.Lambda >= 0.0) || !(epi.lambda >= 0.0) || !(epi.vartheta >= 0.0) ||
        !std::isfinite(epi.eta))
        throw ConfigError("simulation parameters must be finite and nonnegative");
}

}  // namespace

std::uint32_t sellke_fixed_point(std::span<const double> external,
                                 std::span<const double> thresholds,
                                 std::span<const double> periods, std::span<const double> rates) {
    const std::size_t n = external.size();
    if (thresholds.size() != n || periods.size() != n || rates.size() != n * n)
        throw ConfigError("sellke_fixed_point: input shape mismatch");

    std::uint32_t infected = 0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (infected & (1u << i)) continue;
            double pressure = external[i];
            for (std::size_t j = 0; j < n; ++j)
                if (infected & (1u << j)) pressure += rates[i * n + j] * periods[j];
            if (pressure > thresholds[i]) {
                infected |= 1u << i;
                changed = true;
            }
        }
    }
    return infected;
}

std::uint32_t simulate_household(const HouseholdTemplate& t, const EpiParams& epi,
                                 const FeatureConfig& cfg, rng::Stream& stream) {
    cfg.validate();
    validate_template(t, cfg, 32);
    check_param_shape(epi, cfg);
    const std::size_t n = static_cast<std::size_t>(t.size);

    std::vector<double> thresholds(n);
    for (auto& v : thresholds) v = stream.exponential();
    std::vector<double> periods(n, 1.0);
    if (epi.vartheta >= 1e-8)
        for (auto& v : periods) v = stream.gamma(1.0 / epi.vartheta, epi.vartheta);

    RateTable rt = build_rates(t.size, t.x.data(), cfg.feature_count(), epi, cfg);
    return sellke_fixed_point(rt.external, thresholds, periods, rt.rates);
}

std::vector<double> FrequencyTable::frequencies() const {
    std::vector<double> f(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        f[i] = static_cast<double>(counts[i]) / static_cast<double>(replicates);
    return f;
}

std::vector<FrequencyTable> outcome_frequencies(const SimConfig& sim) {
    sim.config.validate();
    check_param_shape(sim.epi, sim.config);
    if (sim.replicates < 1) throw ConfigError("outcome_frequencies: replicates must be >= 1");
    for (const auto& t : sim.templates) validate_template(t, sim.config, max_household_size);

    const int threads = resolve_threads(sim.threads);
    std::vector<FrequencyTable> out;
    out.reserve(sim.templates.size());

    for (std::size_t ti = 0; ti < sim.templates.size(); ++ti) {
        const auto& tpl = sim.templates[ti];
        const std::size_t n = static_cast<std::size_t>(tpl.size);
        const std::size_t dim = std::size_t{1} << tpl.size;
        const RateTable rt = build_rates(tpl.size, tpl.x.data(), sim.config.feature_count(),
                                         sim.epi, sim.config);
        const bool unit_periods = sim.epi.vartheta < 1e-8;

        const std::size_t chunks = static_cast<std::size_t>(threads);
        std::vector<std::vector<std::int64_t>> local(chunks,
                                                     std::vector<std::int64_t>(dim, 0));
        const std::int64_t reps = sim.replicates;
        parallel_for(chunks, threads, [&](std::size_t c) {
            const std::int64_t lo = reps * static_cast<std::int64_t>(c) /
                                    static_cast<std::int64_t>(chunks);
            const std::int64_t hi = reps * static_cast<std::int64_t>(c + 1) /
                                    static_cast<std::int64_t>(chunks);
            auto& counts = local[c];
            std::vector<double> thresholds(n);
            std::vector<double> periods(n, 1.0);
            for (std::int64_t r = lo; r < hi; ++r) {
                rng::Stream stream(rng::stream_key(sim.seed, ti, static_cast<std::uint64_t>(r)));
                for (auto& v : thresholds) v = stream.exponential();
                if (!unit_periods)
                    for (auto& v : periods) v = stream.gamma(1.0 / sim.epi.vartheta, sim.epi.vartheta);
                counts[sellke_fixed_point(rt.external, thresholds, periods, rt.rates)]++;
            }
        });

        FrequencyTable table;
        table.n = tpl.size;
        table.replicates = reps;
        table.counts.assign(dim, 0);
        for (const auto& counts : local)
            for (std::size_t k = 0; k < dim; ++k) table.counts[k] += counts[k];
        out.push_back(std::move(table));
    }
    return out;
}

void PopulationSpec::validate() const {
    if (households < 1) throw ConfigError("population: households must be >= 1");
    if (size_weights.empty() || size_weights.size() > static_cast<std::size_t>(max_household_size))
        throw ConfigError("population: size_weights must list sizes 1..6");
    double sum = 0.0;
    for (double w : size_weights) {
        if (!(w >= 0.0)) throw ConfigError("population: size weights must be nonnegative");
        sum += w;
    }
    if (!(sum > 0.0)) throw ConfigError("population: size weights sum to zero");
    for (double q : {child_2_11, child_12_16, patient_facing_adult, strain_or_n_s, strain_or_n})
        if (!(q >= 0.0) || !(q <= 1.0))
            throw ConfigError("population: prevalences must lie in [0,1]");
    if (child_2_11 + child_12_16 > 1.0) throw ConfigError("population: age bands exceed 1");
    if (strain_or_n_s + strain_or_n > 1.0) throw ConfigError("population: strain mix exceeds 1");
    if (!window_start.ok() || !window_end.ok() || window_end < window_start)
        throw ConfigError("population: invalid visit window");
}

GeneratedCohort generate_cohort(const EpiParams& epi, const FeatureConfig& cfg,
                                const PopulationSpec& pop, std::uint64_t seed) {
    cfg.validate();
    check_param_shape(epi, cfg);
    pop.validate();

    const std::size_t p = cfg.feature_count();

    struct Member {
        int age = 0;
        bool pf = false;
        int strain = 0;  // gene mask carried if infected
    };

    auto feature_bit = [](const Member& m, const std::string& name, bool reveal) -> std::uint8_t {
        if (name == "age_2_11") return m.age <= 11 ? 1 : 0;
        if (name == "age_12_16") return m.age >= 12 && m.age <= 16 ? 1 : 0;
        if (name == "patient_facing") return m.pf ? 1 : 0;
        if (name == "pattern_OR_N")
            return reveal && classify_pattern(m.strain) == PatternClass::or_n ? 1 : 0;
        if (name == "pattern_other")
            return reveal && classify_pattern(m.strain) == PatternClass::other ? 1 : 0;
        throw ConfigError("unknown feature name '" + name + "'");
    };

    std::vector<double> cumulative(pop.size_weights.size());
    double total = 0.0;
    for (std::size_t k = 0; k < pop.size_weights.size(); ++k) {
        total += pop.size_weights[k];
        cumulative[k] = total;
    }
    for (auto& c : cumulative) c /= total;

    const long window_days =
        (std::chrono::sys_days(pop.window_end) - std::chrono::sys_days(pop.window_start)).count();
    const std::uint64_t enrol_span = static_cast<std::uint64_t>(std::min(13L, window_days)) + 1;

    GeneratedCohort out;
    out.truth = epi;
    out.cohort.config = cfg;
    out.cohort.households.reserve(pop.households);

    char buf[32];
    std::size_t next_pid = 1;
    for (std::size_t h = 0; h < pop.households; ++h) {
        rng::Stream stream(rng::stream_key(seed, kCohortStream, static_cast<std::uint64_t>(h)));

        double u = stream.uniform01();
        int n = 1;
        for (std::size_t k = 0; k < cumulative.size(); ++k)
            if (u < cumulative[k]) {
                n = static_cast<int>(k) + 1;
                break;
            }

        std::vector<Member> members(static_cast<std::size_t>(n));
        for (auto& m : members) {
            double band = stream.uniform01();
            if (band < pop.child_2_11)
                m.age = 2 + static_cast<int>(stream.below(10));
            else if (band < pop.child_2_11 + pop.child_12_16)
                m.age = 12 + static_cast<int>(stream.below(5));
            else
                m.age = 17 + static_cast<int>(stream.below(74));
            m.pf = m.age > 16 && stream.uniform01() < pop.patient_facing_adult;
            double s = stream.uniform01();
            if (s < pop.strain_or_n_s)
                m.strain = gene_or | gene_n | gene_s;
            else if (s < pop.strain_or_n_s + pop.strain_or_n)
                m.strain = gene_or | gene_n;
            else
                m.strain = gene_n;
        }

        std::vector<std::uint8_t> latent(static_cast<std::size_t>(n) * p);
        for (int i = 0; i < n; ++i)
            for (std::size_t k = 0; k < p; ++k)
                latent[static_cast<std::size_t>(i) * p + k] =
                    feature_bit(members[static_cast<std::size_t>(i)], cfg.feature_name(k), true);

        std::vector<double> thresholds(static_cast<std::size_t>(n));
        for (auto& v : thresholds) v = stream.exponential();
        std::vector<double> periods(static_cast<std::size_t>(n), 1.0);
        if (epi.vartheta >= 1e-8)
            for (auto& v : periods) v = stream.gamma(1.0 / epi.vartheta, epi.vartheta);

        RateTable rt = build_rates(n, latent.data(), p, epi, cfg);
        std::uint32_t infected = sellke_fixed_point(rt.external, thresholds, periods, rt.rates);

        Date enrol{std::chrono::sys_days(pop.window_start) +
                   std::chrono::days(static_cast<long>(stream.below(enrol_span)))};
        std::vector<Date> visits;
        for (long step = 0;; step = step < 21 ? step + 7 : step + 28) {
            Date d{std::chrono::sys_days(enrol) + std::chrono::days(step)};
            if (pop.window_end < d) break;
            visits.push_back(d);
        }
        const std::size_t reveal = visits.size() > 1 ? 1 : 0;

        std::snprintf(buf, sizeof(buf), "%07zu", h + 1);
        std::string hid = buf;

        Household hh;
        hh.id = hid;
        hh.size = n;
        hh.x.resize(static_cast<std::size_t>(n) * p);
        hh.y.resize(static_cast<std::size_t>(n));

        for (int i = 0; i < n; ++i) {
            const bool pos = (infected >> i) & 1u;
            const Member& m = members[static_cast<std::size_t>(i)];
            for (std::size_t k = 0; k < p; ++k)
                hh.x[static_cast<std::size_t>(i) * p + k] = feature_bit(m, cfg.feature_name(k), pos);
            hh.y[static_cast<std::size_t>(i)] = pos ? 1 : 0;
            if (pos) ++out.positives;

            std::snprintf(buf, sizeof(buf), "%09zu", next_pid++);
            std::string pid = buf;
            for (std::size_t v = 0; v < visits.size(); ++v) {
                VisitRecord rec;
                rec.hid = hid;
                rec.pid = pid;
                rec.visit_date = visits[v];
                rec.age = m.age;
                rec.work_pf = m.pf;
                if (pos && v == reveal) {
                    rec.test_result = TestResult::positive;
                    rec.pattern = m.strain;
                }
                out.records.push_back(std::move(rec));
            }
        }
        out.cohort.households.push_back(std::move(hh));
    }
    return out;
}

}  // namespace hhfs
