#include "hhfs/config_io.hpp"

#include <fstream>

#include <json.hpp>

#include "hhfs/errors.hpp"
#include "hhfs/version.hpp"

namespace hhfs {

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        json j = json::parse(in);
        if (!j.is_object()) throw ConfigError("'" + path + "': top level must be an object");
        int version = j.value("schema_version", -1);
        if (version != schema_version)
            throw ConfigError("'" + path + "': schema_version must be " +
                              std::to_string(schema_version));
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
}

void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    out.flush();
    if (!out) throw ConfigError("write failed for '" + path + "'");
}

std::vector<std::string> name_list(const json& j, const char* key, const std::string& path) {
    if (!j.contains(key) || !j.at(key).is_array())
        throw ConfigError("'" + path + "': missing feature list '" + key + "'");
    std::vector<std::string> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_string()) throw ConfigError("'" + path + "': '" + key + "' entries must be strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::vector<double> number_list(const json& j, const char* key, const std::string& path) {
    if (!j.contains(key) || !j.at(key).is_array())
        throw ConfigError("'" + path + "': missing numeric list '" + key + "'");
    std::vector<double> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_number()) throw ConfigError("'" + path + "': '" + key + "' entries must be numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

double number_field(const json& j, const char* key, const std::string& path) {
    if (!j.contains(key) || !j.at(key).is_number())
        throw ConfigError("'" + path + "': missing numeric field '" + key + "'");
    return j.at(key).get<double>();
}

FeatureConfig feature_config_from(const json& j, const std::string& path) {
    FeatureConfig cfg;
    cfg.external = name_list(j, "external", path);
    cfg.susceptibility = name_list(j, "susceptibility", path);
    cfg.transmissibility = name_list(j, "transmissibility", path);
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
    return cfg;
}

json feature_config_to(const FeatureConfig& cfg) {
    return json{{"external", cfg.external},
                {"susceptibility", cfg.susceptibility},
                {"transmissibility", cfg.transmissibility}};
}

EpiParams epi_from(const json& j, const FeatureConfig& cfg, const std::string& path) {
    EpiParams epi;
    epi.Lambda = number_field(j, "Lambda", path);
    epi.lambda = number_field(j, "lambda", path);
    epi.vartheta = number_field(j, "vartheta", path);
    epi.eta = number_field(j, "eta", path);
    epi.alpha = number_list(j, "alpha", path);
    epi.beta = number_list(j, "beta", path);
    epi.gamma = number_list(j, "gamma", path);
    if (epi.alpha.size() != cfg.external.size() || epi.beta.size() != cfg.susceptibility.size() ||
        epi.gamma.size() != cfg.transmissibility.size())
        throw ConfigError("'" + path + "': coefficient lists do not match the feature lists");
    return epi;
}

json epi_to(const EpiParams& epi) {
    return json{{"Lambda", epi.Lambda}, {"lambda", epi.lambda}, {"vartheta", epi.vartheta},
                {"eta", epi.eta},       {"alpha", epi.alpha},   {"beta", epi.beta},
                {"gamma", epi.gamma}};
}

}  // namespace

FeatureConfig load_feature_config(const std::string& path) {
    return feature_config_from(load_json(path), path);
}

void save_feature_config(const std::string& path, const FeatureConfig& config) {
    config.validate();
    json j = feature_config_to(config);
    j["schema_version"] = schema_version;
    save_json(path, j);
}

std::vector<TrancheSpec> load_tranches(const std::string& path) {
    json j = load_json(path);
    try {
    if (!j.contains("tranches") || !j.at("tranches").is_array())
        throw ConfigError("'" + path + "': missing 'tranches' array");
    std::vector<TrancheSpec> out;
    for (const auto& tj : j.at("tranches")) {
        if (!tj.is_object() || !tj.contains("name") || !tj.contains("start") || !tj.contains("end"))
            throw ConfigError("'" + path + "': each tranche needs name, start, end");
        TrancheSpec t;
        t.name = tj.at("name").is_string() ? tj.at("name").get<std::string>()
                                           : tj.at("name").dump();
        try {
            t.start = parse_date(tj.at("start").get<std::string>());
            t.end = parse_date(tj.at("end").get<std::string>());
        } catch (const json::exception& e) {
            throw ConfigError("'" + path + "': " + e.what());
        }
        out.push_back(std::move(t));
    }
    validate_tranches(out);
    return out;
    } catch (const json::exception& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
}

void save_tranches(const std::string& path, const std::vector<TrancheSpec>& tranches) {
    validate_tranches(tranches);
    json arr = json::array();
    for (const auto& t : tranches)
        arr.push_back(json{{"name", t.name},
                           {"start", format_date(t.start)},
                           {"end", format_date(t.end)}});
    save_json(path, json{{"schema_version", schema_version}, {"tranches", arr}});
}

SimulateSpec load_simulate_spec(const std::string& path) {
    json j = load_json(path);
    try {
    SimulateSpec spec;
    if (!j.contains("features") || !j.at("features").is_object())
        throw ConfigError("'" + path + "': missing 'features' object");
    spec.features = feature_config_from(j.at("features"), path);
    if (!j.contains("params") || !j.at("params").is_object())
        throw ConfigError("'" + path + "': missing 'params' object");
    spec.epi = epi_from(j.at("params"), spec.features, path);

    if (j.contains("replicates")) {
        if (!j.at("replicates").is_number_integer())
            throw ConfigError("'" + path + "': 'replicates' must be an integer");
        spec.replicates = j.at("replicates").get<std::int64_t>();
        if (spec.replicates < 1) throw ConfigError("'" + path + "': 'replicates' must be >= 1");
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer())
            throw ConfigError("'" + path + "': 'seed' must be an integer");
        spec.seed = j.at("seed").get<std::uint64_t>();
    }

    const std::size_t p = spec.features.feature_count();
    if (j.contains("templates")) {
        if (!j.at("templates").is_array())
            throw ConfigError("'" + path + "': 'templates' must be an array");
        for (const auto& tj : j.at("templates")) {
            if (!tj.is_object() || !tj.contains("size") || !tj.contains("x"))
                throw ConfigError("'" + path + "': each template needs size and x");
            HouseholdTemplate t;
            t.size = tj.at("size").get<int>();
            if (!tj.at("x").is_array())
                throw ConfigError("'" + path + "': template 'x' must be an array of rows");
            for (const auto& row : tj.at("x")) {
                if (!row.is_array() || row.size() != p)
                    throw ConfigError("'" + path + "': template rows must have " +
                                      std::to_string(p) + " entries");
                for (const auto& v : row) {
                    int b = v.get<int>();
                    if (b != 0 && b != 1)
                        throw ConfigError("'" + path + "': template features must be 0/1");
                    t.x.push_back(static_cast<std::uint8_t>(b));
                }
            }
            if (t.x.size() != static_cast<std::size_t>(t.size) * p)
                throw ConfigError("'" + path + "': template 'x' must have 'size' rows");
            spec.templates.push_back(std::move(t));
        }
    }

    if (j.contains("population")) {
        const json& pj = j.at("population");
        if (!pj.is_object()) throw ConfigError("'" + path + "': 'population' must be an object");
        spec.has_population = true;
        PopulationSpec& pop = spec.population;
        if (!pj.contains("households") || !pj.at("households").is_number_integer())
            throw ConfigError("'" + path + "': population needs an integer 'households'");
        auto hh = pj.at("households").get<std::int64_t>();
        if (hh < 1) throw ConfigError("'" + path + "': population households must be >= 1");
        pop.households = static_cast<std::size_t>(hh);
        if (pj.contains("size_weights")) pop.size_weights = number_list(pj, "size_weights", path);
        if (pj.contains("child_2_11")) pop.child_2_11 = number_field(pj, "child_2_11", path);
        if (pj.contains("child_12_16")) pop.child_12_16 = number_field(pj, "child_12_16", path);
        if (pj.contains("patient_facing_adult"))
            pop.patient_facing_adult = number_field(pj, "patient_facing_adult", path);
        if (pj.contains("strain_or_n_s")) pop.strain_or_n_s = number_field(pj, "strain_or_n_s", path);
        if (pj.contains("strain_or_n")) pop.strain_or_n = number_field(pj, "strain_or_n", path);
        try {
            if (pj.contains("window_start"))
                pop.window_start = parse_date(pj.at("window_start").get<std::string>());
            if (pj.contains("window_end"))
                pop.window_end = parse_date(pj.at("window_end").get<std::string>());
        } catch (const json::exception& e) {
            throw ConfigError("'" + path + "': " + e.what());
        }
        try {
            pop.validate();
        } catch (const ConfigError& e) {
            throw ConfigError("'" + path + "': " + e.what());
        }
    }

    if (spec.templates.empty() && !spec.has_population)
        throw ConfigError("'" + path + "': need 'templates' or 'population'");
    return spec;
    } catch (const json::exception& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
}

void save_truth(const std::string& path, const EpiParams& epi, const FeatureConfig& config,
                std::uint64_t seed) {
    json j{{"schema_version", schema_version},
           {"seed", seed},
           {"params", epi_to(epi)},
           {"features", feature_config_to(config)}};
    save_json(path, j);
}

}  // namespace hhfs
