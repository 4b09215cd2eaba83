#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hhfs/ingest.hpp"
#include "hhfs/model.hpp"
#include "hhfs/sellke.hpp"

namespace hhfs {

/// All structured files carry {"schema_version": 1}; a different value is
/// rejected so stale artifacts fail loudly.

FeatureConfig load_feature_config(const std::string& path);
void save_feature_config(const std::string& path, const FeatureConfig& config);

std::vector<TrancheSpec> load_tranches(const std::string& path);
void save_tranches(const std::string& path, const std::vector<TrancheSpec>& tranches);

/// Simulation recipe: interpretable parameters plus a feature layout, and
/// at least one of a template list (for outcome frequencies) or a
/// population block (for cohort generation).
struct SimulateSpec {
    EpiParams epi;
    FeatureConfig features;
    std::int64_t replicates = 100000;
    std::uint64_t seed = 1;
    std::vector<HouseholdTemplate> templates;
    bool has_population = false;
    PopulationSpec population;
};

SimulateSpec load_simulate_spec(const std::string& path);

/// Ground-truth parameter file emitted beside generated cohorts.
void save_truth(const std::string& path, const EpiParams& epi, const FeatureConfig& config,
                std::uint64_t seed);

}  // namespace hhfs
