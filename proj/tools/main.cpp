#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hhfs/config_io.hpp"
#include "hhfs/errors.hpp"
#include "hhfs/exploratory.hpp"
#include "hhfs/finalsize.hpp"
#include "hhfs/inference.hpp"
#include "hhfs/ingest.hpp"
#include "hhfs/likelihood.hpp"
#include "hhfs/model.hpp"
#include "hhfs/sellke.hpp"
#include "hhfs/version.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* csv_header_comment = "# schema_version=1\n";

struct CommonOptions {
    std::string input;
    std::string tranches_path;
    std::string features_path;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    int threads = 0;
};

std::vector<hhfs::TrancheSpec> resolve_tranches(const CommonOptions& opt) {
    if (opt.tranches_path.empty()) return hhfs::default_tranches();
    return hhfs::load_tranches(opt.tranches_path);
}

hhfs::FeatureConfig resolve_features(const CommonOptions& opt) {
    if (opt.features_path.empty()) return hhfs::FeatureConfig::defaults();
    return hhfs::load_feature_config(opt.features_path);
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw hhfs::ConfigError("cannot open output file '" + path.string() + "'");
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw hhfs::ConfigError("cannot create output directory '" + dir + "'");
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

void write_histogram(const fs::path& path, const hhfs::AttackHistogram& h) {
    auto out = open_out(path);
    out << csv_header_comment << "positives";
    for (int l = hhfs::AttackHistogram::min_size; l <= hhfs::max_household_size; ++l)
        out << ",size_" << l;
    out << '\n';
    for (int k = 0; k <= hhfs::max_household_size; ++k) {
        out << k;
        for (int l = hhfs::AttackHistogram::min_size; l <= hhfs::max_household_size; ++l)
            out << ',' << (k <= l ? h.at(k, l) : 0);
        out << '\n';
    }
}

void write_density(const fs::path& path, const hhfs::DensityField& field) {
    auto out = open_out(path);
    out << csv_header_comment << "x,y,value\n";
    const double cell = field.grid_dim > 0 ? 1.0 / field.grid_dim : 0.0;
    for (int iy = 0; iy < field.grid_dim; ++iy)
        for (int ix = 0; ix < field.grid_dim; ++ix)
            out << (ix + 0.5) * cell << ',' << (iy + 0.5) * cell << ',' << field.at(ix, iy)
                << '\n';
}

void write_pairs(const fs::path& pairs_path, const fs::path& residuals_path,
                 const hhfs::PairTable& table) {
    auto pairs = open_out(pairs_path);
    pairs << csv_header_comment << "state_a,state_b,observed,expected\n";
    auto residuals = open_out(residuals_path);
    residuals << csv_header_comment << "state_a,state_b,residual\n";
    for (std::size_t a = 0; a < table.dim(); ++a)
        for (std::size_t b = 0; b < table.dim(); ++b) {
            pairs << table.states[a] << ',' << table.states[b] << ',' << table.y_at(a, b) << ','
                  << table.e_at(a, b) << '\n';
            double r = table.r_at(a, b);
            residuals << table.states[a] << ',' << table.states[b] << ',';
            if (std::isinf(r))
                residuals << "inf";
            else
                residuals << r;
            residuals << '\n';
        }
}

void write_features_summary(const fs::path& path,
                            const std::vector<hhfs::TrancheCohort>& tranches) {
    auto out = open_out(path);
    out << csv_header_comment << "statistic";
    for (const auto& t : tranches) out << ",tranche_" << t.tranche;
    out << '\n';
    auto row = [&](const char* name, auto getter) {
        out << name;
        for (const auto& t : tranches) out << ',' << getter(t);
        out << '\n';
    };
    row("participants", [](const auto& t) { return t.summary.participants; });
    row("households", [](const auto& t) { return t.summary.households; });
    row("positive_individuals", [](const auto& t) { return t.summary.positive_individuals; });
    row("households_with_positive",
        [](const auto& t) { return t.summary.households_with_positive; });
    row("children_under_12", [](const auto& t) { return t.summary.children_under_12; });
    row("children_12_16", [](const auto& t) { return t.summary.children_12_16; });
    row("or_n_s_positives", [](const auto& t) { return t.summary.or_n_s_positives; });
    row("or_n_positives", [](const auto& t) { return t.summary.or_n_positives; });
    row("patient_facing", [](const auto& t) { return t.summary.patient_facing; });
    row("households_size_7_plus_dropped", [](const auto& t) { return t.dropped_large; });
}

int cmd_explore(const CommonOptions& opt, double kernel_width) {
    ensure_dir(opt.out_dir);
    auto tranches = resolve_tranches(opt);
    auto features = resolve_features(opt);
    auto parsed = hhfs::parse_flat_file(opt.input);
    print_warnings(parsed.warnings);

    std::vector<std::string> episode_warnings;
    auto built = hhfs::build_all_tranches(parsed.records, tranches, features, &episode_warnings);
    print_warnings(episode_warnings);

    const fs::path out_dir(opt.out_dir);
    for (const auto& t : built) {
        print_warnings(t.warnings);
        write_histogram(out_dir / ("hist_" + t.tranche + ".csv"), hhfs::histogram(t.explore));
        write_density(out_dir / ("density_" + t.tranche + ".csv"),
                      hhfs::density_points(t.explore, kernel_width));
        hhfs::PairTable table;
        if (!t.pair_states.empty()) {
            table = hhfs::pair_residuals(t.pair_states, t.state_labels);
        } else {
            table.states = t.state_labels;
            table.y.assign(table.states.size() * table.states.size(), 0);
            table.expected.assign(table.y.size(), 0.0);
            table.residual.assign(table.y.size(), 0.0);
            table.z.assign(table.states.size(), 0);
        }
        write_pairs(out_dir / ("pairs_" + t.tranche + ".csv"),
                    out_dir / ("residuals_" + t.tranche + ".csv"), table);
    }
    write_features_summary(out_dir / "features_summary.csv", built);
    return 0;
}

json matrix_to_json(const hhfs::SquareMatrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.n; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.n; ++j) row.push_back(m.at(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_fit(const CommonOptions& opt, const hhfs::FitConfig& fit_cfg) {
    ensure_dir(opt.out_dir);
    auto tranches = resolve_tranches(opt);
    auto features = resolve_features(opt);
    auto parsed = hhfs::parse_flat_file(opt.input);
    print_warnings(parsed.warnings);

    std::vector<std::string> episode_warnings;
    auto built = hhfs::build_all_tranches(parsed.records, tranches, features, &episode_warnings);
    print_warnings(episode_warnings);

    const fs::path out_dir(opt.out_dir);
    auto baseline = open_out(out_dir / "baseline_by_tranche.csv");
    baseline << csv_header_comment << "tranche,label,point,lo,median,hi\n";
    auto effects = open_out(out_dir / "effects_by_tranche.csv");
    effects << csv_header_comment << "tranche,label,point,lo,median,hi\n";

    int succeeded = 0, attempted = 0;
    for (const auto& t : built) {
        print_warnings(t.warnings);
        if (t.cohort.households.empty()) {
            std::cerr << "tranche " << t.tranche << ": no households, skipped\n";
            continue;
        }
        ++attempted;
        hhfs::FitResult result;
        try {
            result = hhfs::fit(t.cohort, fit_cfg);
        } catch (const hhfs::NumericalError& e) {
            std::cerr << "tranche " << t.tranche << ": fit failed: " << e.what() << '\n';
            continue;
        }
        ++succeeded;

        json restarts = json::array();
        for (const auto& r : result.restarts)
            restarts.push_back(json{{"index", r.index},
                                    {"objective", r.objective},
                                    {"iterations", r.iterations},
                                    {"grad_norm", r.grad_norm},
                                    {"converged", r.converged},
                                    {"stalled", r.stalled},
                                    {"note", r.note}});
        json report = json::array();
        for (const auto& row : result.report)
            report.push_back(json{{"label", row.label},
                                  {"point", row.point},
                                  {"lo", row.lo},
                                  {"median", row.median},
                                  {"hi", row.hi}});
        json j{{"schema_version", hhfs::schema_version},
               {"tranche", t.tranche},
               {"theta_map", result.theta_map.theta},
               {"log_posterior", result.log_posterior},
               {"best_restart", result.best_restart},
               {"covariance", matrix_to_json(result.covariance)},
               {"restarts", restarts},
               {"report", report}};
        auto out = open_out(out_dir / ("fit_" + t.tranche + ".json"));
        out << j.dump(2) << '\n';

        for (const auto& row : result.report) {
            bool is_effect = row.label.rfind("exp(", 0) == 0;
            auto& target = is_effect ? effects : baseline;
            target << t.tranche << ',' << row.label << ',' << row.point << ',' << row.lo << ','
                   << row.median << ',' << row.hi << '\n';
        }
        std::cout << "tranche " << t.tranche << ": log posterior " << result.log_posterior
                  << ", best restart " << result.best_restart << '\n';
    }
    if (attempted > 0 && succeeded == 0) throw hhfs::FitError("all tranche fits failed");
    return 0;
}

int cmd_simulate(const CommonOptions& opt, bool seed_given) {
    ensure_dir(opt.out_dir);
    hhfs::SimulateSpec spec = hhfs::load_simulate_spec(opt.input);
    if (seed_given) spec.seed = opt.seed;
    const fs::path out_dir(opt.out_dir);

    hhfs::save_truth((out_dir / "truth.json").string(), spec.epi, spec.features, spec.seed);

    if (!spec.templates.empty()) {
        hhfs::SimConfig sim;
        sim.epi = spec.epi;
        sim.config = spec.features;
        sim.templates = spec.templates;
        sim.replicates = spec.replicates;
        sim.seed = spec.seed;
        sim.threads = opt.threads;
        auto tables = hhfs::outcome_frequencies(sim);

        auto out = open_out(out_dir / "frequencies.csv");
        out << csv_header_comment
            << "template,bitmask,count,frequency,model_probability,tv_distance\n";
        for (std::size_t ti = 0; ti < tables.size(); ++ti) {
            const auto& table = tables[ti];
            hhfs::Household hh;
            hh.id = "template_" + std::to_string(ti);
            hh.size = table.n;
            hh.x = spec.templates[ti].x;
            hh.y.assign(static_cast<std::size_t>(table.n), 0);
            auto dist = hhfs::solve(hh, spec.epi, spec.features);
            auto freq = table.frequencies();
            double tv = 0.0;
            for (std::size_t m = 0; m < freq.size(); ++m) tv += std::abs(freq[m] - dist.p[m]);
            tv /= 2.0;
            for (std::size_t m = 0; m < freq.size(); ++m)
                out << ti << ',' << m << ',' << table.counts[m] << ',' << freq[m] << ','
                    << dist.p[m] << ',' << tv << '\n';
            std::cout << "template " << ti << ": TV distance " << tv << '\n';
        }
    }

    if (spec.has_population) {
        auto generated =
            hhfs::generate_cohort(spec.epi, spec.features, spec.population, spec.seed);
        hhfs::write_flat_file((out_dir / "flat.csv").string(), generated.records);
        std::cout << "generated " << generated.cohort.households.size() << " households, "
                  << generated.positives << " positive individuals\n";
    }
    return 0;
}

int cmd_solve(const CommonOptions& opt, bool to_file) {
    hhfs::SimulateSpec spec = hhfs::load_simulate_spec(opt.input);
    if (spec.templates.empty())
        throw hhfs::ConfigError("solve needs at least one template in '" + opt.input + "'");

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (to_file) {
        ensure_dir(opt.out_dir);
        file = open_out(fs::path(opt.out_dir) / "solve.csv");
        out = &file;
        *out << csv_header_comment;
    }
    *out << "template,bitmask,probability\n";
    for (std::size_t ti = 0; ti < spec.templates.size(); ++ti) {
        hhfs::Household hh;
        hh.id = "template_" + std::to_string(ti);
        hh.size = spec.templates[ti].size;
        hh.x = spec.templates[ti].x;
        hh.y.assign(static_cast<std::size_t>(hh.size), 0);
        auto dist = hhfs::solve(hh, spec.epi, spec.features);
        for (std::size_t m = 0; m < dist.p.size(); ++m)
            *out << ti << ',' << m << ',' << dist.p[m] << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Household transmission model: exploration, fitting, simulation"};
    app.require_subcommand(1);

    CommonOptions opt;
    hhfs::FitConfig fit_cfg;
    double kernel_width = 0.125;

    auto add_common = [&](CLI::App* cmd, bool needs_input) {
        auto* in = cmd->add_option("--input", opt.input, "input file path");
        if (needs_input) in->required();
        cmd->add_option("--tranches", opt.tranches_path, "tranche windows JSON");
        cmd->add_option("--features", opt.features_path, "feature layout JSON");
        cmd->add_option("--out", opt.out_dir, "output directory");
        cmd->add_option("--seed", opt.seed, "random seed");
        cmd->add_option("--threads", opt.threads, "worker threads (0 = all cores)");
    };

    auto* explore = app.add_subcommand("explore", "attack histograms, density fields, pair residuals");
    add_common(explore, true);
    explore->add_option("--kernel-width", kernel_width, "square kernel width");

    auto* fit = app.add_subcommand("fit", "MAP fit with Laplace intervals per tranche");
    add_common(fit, true);
    fit->add_option("--prior-sd", fit_cfg.prior_sd, "prior standard deviation");
    fit->add_option("--restarts", fit_cfg.restarts, "optimizer restarts");
    fit->add_option("--ci-samples", fit_cfg.ci_samples, "posterior transform samples");

    auto* simulate = app.add_subcommand("simulate", "synthetic cohorts and outcome frequencies");
    add_common(simulate, true);

    auto* solve = app.add_subcommand("solve", "print outcome distributions for templates");
    add_common(solve, true);
    bool solve_to_file = false;
    solve->add_flag("--write", solve_to_file, "write solve.csv to --out instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(explore)) return cmd_explore(opt, kernel_width);
        if (app.got_subcommand(fit)) {
            fit_cfg.seed = opt.seed;
            fit_cfg.threads = opt.threads;
            return cmd_fit(opt, fit_cfg);
        }
        if (app.got_subcommand(simulate))
            return cmd_simulate(opt, simulate->count("--seed") > 0);
        if (app.got_subcommand(solve)) return cmd_solve(opt, solve_to_file);
    } catch (const hhfs::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const hhfs::NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
