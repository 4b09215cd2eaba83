#include "hhfs/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "hhfs/errors.hpp"

namespace hhfs {

namespace {

std::chrono::sys_days to_days(const Date& d) { return std::chrono::sys_days(d); }

long days_between(const Date& a, const Date& b) {
    return (to_days(b) - to_days(a)).count();
}

/// Distance in days from a date to the closed window [start, end]; 0 inside.
long window_distance(const Date& d, const TrancheSpec& t) {
    if (d < t.start) return days_between(d, t.start);
    if (d > t.end) return days_between(t.end, d);
    return 0;
}

bool in_window(const Date& d, const TrancheSpec& t) { return !(d < t.start) && !(t.end < d); }

int parse_int_strict(const std::string& s, const char* what, std::size_t row) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(std::string("invalid ") + what + " '" + s + "'", row);
    return value;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = line.find(',', pos);
        if (next == std::string::npos) {
            fields.push_back(line.substr(pos));
            break;
        }
        fields.push_back(line.substr(pos, next - pos));
        pos = next + 1;
    }
    return fields;
}

}  // namespace

Date parse_date(const std::string& text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw ConfigError("invalid date '" + text + "' (expected YYYY-MM-DD)");
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!std::isdigit(static_cast<unsigned char>(text[i])))
            throw ConfigError("invalid date '" + text + "' (expected YYYY-MM-DD)");
    int y = std::stoi(text.substr(0, 4));
    int m = std::stoi(text.substr(5, 2));
    int d = std::stoi(text.substr(8, 2));
    Date date{std::chrono::year(y), std::chrono::month(static_cast<unsigned>(m)),
              std::chrono::day(static_cast<unsigned>(d))};
    if (!date.ok()) throw ConfigError("nonexistent calendar date '" + text + "'");
    return date;
}

std::string format_date(const Date& date) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

std::vector<TrancheSpec> default_tranches() {
    return {
        {"1", parse_date("2020-04-26"), parse_date("2020-08-31")},
        {"2", parse_date("2020-09-01"), parse_date("2020-11-14")},
        {"3", parse_date("2020-11-15"), parse_date("2020-12-31")},
        {"4", parse_date("2021-01-01"), parse_date("2021-02-14")},
        {"5", parse_date("2021-02-15"), parse_date("2021-04-29")},
        {"6", parse_date("2021-04-30"), parse_date("2021-07-15")},
    };
}

void validate_tranches(const std::vector<TrancheSpec>& tranches) {
    if (tranches.empty()) throw ConfigError("tranche list is empty");
    std::set<std::string> names;
    for (std::size_t i = 0; i < tranches.size(); ++i) {
        const auto& t = tranches[i];
        if (t.name.empty()) throw ConfigError("tranche with empty name");
        if (!names.insert(t.name).second) throw ConfigError("duplicate tranche name '" + t.name + "'");
        if (t.end < t.start)
            throw ConfigError("tranche '" + t.name + "' ends before it starts");
        if (i > 0 && !(tranches[i - 1].end < t.start))
            throw ConfigError("tranche '" + t.name + "' overlaps or precedes '" +
                              tranches[i - 1].name + "'");
    }
}

ParseResult parse_flat_records(std::istream& in) {
    ParseResult result;
    std::string line;
    std::size_t row = 0;

    if (!std::getline(in, line)) throw ParseError("missing header row", 1);
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != flat_file_header)
        throw ParseError("header must be exactly '" + std::string(flat_file_header) + "'", 1);

    std::set<std::pair<std::string, Date>> seen;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv(line);
        if (fields.size() != 7)
            throw ParseError("expected 7 fields, found " + std::to_string(fields.size()), row);

        VisitRecord rec;
        rec.row = row;
        rec.hid = fields[0];
        rec.pid = fields[1];
        if (rec.hid.empty()) throw ParseError("empty HID", row);
        if (rec.pid.empty()) throw ParseError("empty PID", row);
        try {
            rec.visit_date = parse_date(fields[2]);
        } catch (const ConfigError& e) {
            throw ParseError(e.what(), row);
        }
        rec.age = parse_int_strict(fields[3], "age", row);
        if (rec.age < 2) throw ParseError("age " + std::to_string(rec.age) + " below survey eligibility", row);

        if (fields[4] == "Negative")
            rec.test_result = TestResult::negative;
        else if (fields[4] == "Positive")
            rec.test_result = TestResult::positive;
        else
            throw ParseError("invalid test_result '" + fields[4] + "'", row);

        if (fields[5] == "Yes")
            rec.work_pf = true;
        else if (fields[5] == "No")
            rec.work_pf = false;
        else
            throw ParseError("invalid work_pf '" + fields[5] + "'", row);

        try {
            rec.pattern = parse_pattern(fields[6]);
        } catch (const ConfigError& e) {
            throw ParseError(e.what(), row);
        }
        if (rec.test_result == TestResult::negative && rec.pattern != 0) {
            result.warnings.push_back("row " + std::to_string(row) +
                                      ": negative result with pattern '" + fields[6] +
                                      "'; pattern ignored");
            rec.pattern = 0;
        }

        if (!seen.insert({rec.pid, rec.visit_date}).second) {
            result.warnings.push_back("row " + std::to_string(row) + ": duplicate visit for PID " +
                                      rec.pid + " on " + fields[2] + "; first occurrence kept");
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

ParseResult parse_flat_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open input file '" + path + "'");
    return parse_flat_records(in);
}

void write_flat_records(std::ostream& out, const std::vector<VisitRecord>& records) {
    out << flat_file_header << '\n';
    for (const auto& r : records) {
        out << r.hid << ',' << r.pid << ',' << format_date(r.visit_date) << ',' << r.age << ','
            << (r.test_result == TestResult::positive ? "Positive" : "Negative") << ','
            << (r.work_pf ? "Yes" : "No") << ',' << format_pattern(r.pattern) << '\n';
    }
}

void write_flat_file(const std::string& path, const std::vector<VisitRecord>& records) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");
    write_flat_records(out, records);
    out.flush();
    if (!out) throw ConfigError("write failed for '" + path + "'");
}

std::vector<HouseholdVisits> group_households(const std::vector<VisitRecord>& records) {
    std::map<std::string, std::map<std::string, std::vector<VisitRecord>>> tree;
    for (const auto& r : records) tree[r.hid][r.pid].push_back(r);

    std::vector<HouseholdVisits> out;
    out.reserve(tree.size());
    for (auto& [hid, members] : tree) {
        HouseholdVisits hh;
        hh.hid = hid;
        hh.members.reserve(members.size());
        for (auto& [pid, visits] : members) {
            std::sort(visits.begin(), visits.end(), [](const VisitRecord& a, const VisitRecord& b) {
                return a.visit_date < b.visit_date;
            });
            hh.members.push_back(ParticipantRecords{pid, std::move(visits)});
        }
        out.push_back(std::move(hh));
    }
    return out;
}

EpisodeAssignment assign_tranche_positivity(const std::vector<HouseholdVisits>& households,
                                            const std::vector<TrancheSpec>& tranches) {
    validate_tranches(tranches);
    EpisodeAssignment out;
    for (const auto& hh : households) {
        bool any = false;
        Date first{};
        for (const auto& m : hh.members)
            for (const auto& v : m.visits)
                if (v.test_result == TestResult::positive && (!any || v.visit_date < first)) {
                    any = true;
                    first = v.visit_date;
                }
        if (!any) continue;
        int idx = -1;
        for (std::size_t t = 0; t < tranches.size(); ++t)
            if (in_window(first, tranches[t])) {
                idx = static_cast<int>(t);
                break;
            }
        if (idx < 0) {
            out.excluded.push_back(hh.hid);
            out.warnings.push_back("household " + hh.hid + ": first positive on " +
                                   format_date(first) +
                                   " lies in no tranche; household excluded");
        } else {
            out.episode[hh.hid] = idx;
        }
    }
    return out;
}

ParticipantFeatures build_features(const ParticipantRecords& member, const TrancheSpec& tranche,
                                   bool in_episode, std::vector<std::string>& warnings) {
    ParticipantFeatures f;
    f.pid = member.pid;

    const VisitRecord* prev = nullptr;
    bool seen_in_window = false;
    int min_age = 0;
    bool pf = false;
    for (const auto& v : member.visits) {
        if (!in_window(v.visit_date, tranche)) continue;
        if (prev && v.age < prev->age - 1)
            warnings.push_back("participant " + member.pid + ": age drops from " +
                               std::to_string(prev->age) + " to " + std::to_string(v.age) +
                               " between " + format_date(prev->visit_date) + " and " +
                               format_date(v.visit_date));
        if (!seen_in_window || v.age < min_age) min_age = v.age;
        pf = pf || v.work_pf;
        seen_in_window = true;
        prev = &v;
    }

    if (seen_in_window) {
        f.age = min_age;
        f.patient_facing = pf;
    } else {
        const VisitRecord* nearest = nullptr;
        long best = 0;
        for (const auto& v : member.visits) {
            long d = window_distance(v.visit_date, tranche);
            if (!nearest || d < best) {
                nearest = &v;
                best = d;
            }
        }
        if (!nearest) throw ConfigError("participant " + member.pid + " has no visits");
        f.age = nearest->age;
        f.patient_facing = nearest->work_pf;
        f.age_from_fallback = true;
    }

    f.age_2_11 = f.age <= 11;
    f.age_12_16 = f.age >= 12 && f.age <= 16;

    if (in_episode) {
        std::vector<int> patterns;
        for (const auto& v : member.visits)
            if (v.test_result == TestResult::positive) patterns.push_back(v.pattern);
        if (!patterns.empty()) {
            f.positive = true;
            f.pattern = maximal_pattern(patterns);
            PatternClass c = classify_pattern(f.pattern);
            f.pattern_or_n = c == PatternClass::or_n;
            f.pattern_other = c == PatternClass::other;
        }
    }
    return f;
}

namespace {

std::uint8_t feature_value(const ParticipantFeatures& f, const std::string& name) {
    if (name == "age_2_11") return f.age_2_11 ? 1 : 0;
    if (name == "age_12_16") return f.age_12_16 ? 1 : 0;
    if (name == "patient_facing") return f.patient_facing ? 1 : 0;
    if (name == "pattern_OR_N") return f.pattern_or_n ? 1 : 0;
    if (name == "pattern_other") return f.pattern_other ? 1 : 0;
    throw ConfigError("unknown feature name '" + name + "'");
}

int state_index(const ParticipantFeatures& f) {
    if (!f.positive) return 3;
    switch (classify_pattern(f.pattern)) {
        case PatternClass::or_n_s: return 0;
        case PatternClass::or_n: return 1;
        default: return 2;
    }
}

}  // namespace

TrancheCohort build_cohort(const std::vector<HouseholdVisits>& households,
                           const EpisodeAssignment& episodes,
                           const std::vector<TrancheSpec>& tranches, int tranche_index,
                           const FeatureConfig& config) {
    validate_tranches(tranches);
    config.validate();
    if (tranche_index < 0 || static_cast<std::size_t>(tranche_index) >= tranches.size())
        throw ConfigError("tranche index out of range");
    const TrancheSpec& window = tranches[static_cast<std::size_t>(tranche_index)];

    std::set<std::string> excluded(episodes.excluded.begin(), episodes.excluded.end());

    TrancheCohort out;
    out.tranche = window.name;
    out.cohort.config = config;
    out.state_labels = default_pair_states();

    const std::size_t p = config.feature_count();
    std::size_t fallback_members = 0;

    for (const auto& hh : households) {
        if (excluded.count(hh.hid)) continue;
        bool visited = false;
        for (const auto& m : hh.members) {
            for (const auto& v : m.visits)
                if (in_window(v.visit_date, window)) {
                    visited = true;
                    break;
                }
            if (visited) break;
        }
        if (!visited) continue;

        const std::size_t n = hh.members.size();
        if (n > static_cast<std::size_t>(max_household_size)) {
            ++out.dropped_large;
            continue;
        }

        auto it = episodes.episode.find(hh.hid);
        bool in_episode = it != episodes.episode.end() && it->second == tranche_index;

        Household model_hh;
        model_hh.id = hh.hid;
        model_hh.size = static_cast<int>(n);
        model_hh.x.resize(n * p);
        model_hh.y.resize(n);

        ExploreHousehold ex;
        ex.positive.resize(n);
        ex.split.resize(n);
        std::vector<int> states(n);

        bool any_pos = false;
        for (std::size_t i = 0; i < n; ++i) {
            ParticipantFeatures f =
                build_features(hh.members[i], window, in_episode, out.warnings);
            if (f.age_from_fallback) ++fallback_members;
            for (std::size_t k = 0; k < p; ++k)
                model_hh.x[i * p + k] = feature_value(f, config.feature_name(k));
            model_hh.y[i] = f.positive ? 1 : 0;
            ex.positive[i] = f.positive ? 1 : 0;
            ex.split[i] = f.age > 16 ? 1 : 0;
            states[i] = state_index(f);
            any_pos = any_pos || f.positive;

            ++out.summary.participants;
            if (f.positive) ++out.summary.positive_individuals;
            if (f.age <= 11) ++out.summary.children_under_12;
            if (f.age_12_16) ++out.summary.children_12_16;
            if (f.patient_facing) ++out.summary.patient_facing;
            if (f.positive) {
                PatternClass c = classify_pattern(f.pattern);
                if (c == PatternClass::or_n_s) ++out.summary.or_n_s_positives;
                if (c == PatternClass::or_n) ++out.summary.or_n_positives;
            }
        }
        ++out.summary.households;
        if (any_pos) {
            ++out.summary.households_with_positive;
            out.pair_states.push_back(std::move(states));
        }
        out.cohort.households.push_back(std::move(model_hh));
        out.explore.push_back(std::move(ex));
    }

    if (fallback_members > 0)
        out.warnings.push_back(std::to_string(fallback_members) +
                               " member(s) had no visit in tranche " + window.name +
                               "; nearest-visit features used");
    return out;
}

std::vector<TrancheCohort> build_all_tranches(const std::vector<VisitRecord>& records,
                                              const std::vector<TrancheSpec>& tranches,
                                              const FeatureConfig& config,
                                              std::vector<std::string>* episode_warnings) {
    auto grouped = group_households(records);
    auto episodes = assign_tranche_positivity(grouped, tranches);
    if (episode_warnings)
        episode_warnings->insert(episode_warnings->end(), episodes.warnings.begin(),
                                 episodes.warnings.end());
    std::vector<TrancheCohort> out;
    out.reserve(tranches.size());
    for (std::size_t t = 0; t < tranches.size(); ++t)
        out.push_back(build_cohort(grouped, episodes, tranches, static_cast<int>(t), config));
    return out;
}

}  // namespace hhfs
