#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hhfs/exploratory.hpp"
#include "hhfs/likelihood.hpp"
#include "hhfs/model.hpp"

namespace hhfs {

using Date = std::chrono::year_month_day;

/// Parses an ISO-8601 calendar date (YYYY-MM-DD). Throws ConfigError on a
/// malformed or non-existent date.
Date parse_date(const std::string& text);

std::string format_date(const Date& date);

enum class TestResult : std::uint8_t { negative, positive };

/// One survey visit: a row of the flat file.
struct VisitRecord {
    std::string hid;
    std::string pid;
    Date visit_date{};
    int age = 0;
    TestResult test_result = TestResult::negative;
    bool work_pf = false;
    int pattern = 0;      ///< gene bitmask; 0 means NA
    std::size_t row = 0;  ///< 1-based source line for diagnostics

    /// Value identity; the source line number is ignored.
    bool operator==(const VisitRecord& o) const {
        return hid == o.hid && pid == o.pid && visit_date == o.visit_date && age == o.age &&
               test_result == o.test_result && work_pf == o.work_pf && pattern == o.pattern;
    }
};

/// Calendar window the analysis is stratified into; dates inclusive.
struct TrancheSpec {
    std::string name;
    Date start{};
    Date end{};
};

/// The six analysis windows used throughout: 2020-04-26 .. 2021-07-15.
std::vector<TrancheSpec> default_tranches();

/// Requires chronological order, no overlap, start <= end, unique names.
void validate_tranches(const std::vector<TrancheSpec>& tranches);

inline constexpr const char* flat_file_header = "HID,PID,visit_date,age,test_result,work_pf,pattern";

struct ParseResult {
    std::vector<VisitRecord> records;
    std::vector<std::string> warnings;
};

/// Parses the canonical CSV dialect of the flat file. The header row must
/// match flat_file_header exactly. Malformed dates, enums, or ages (< 2)
/// throw ParseError with the row number; duplicate (PID, visit_date) rows
/// and Negative rows carrying a pattern are kept (first wins) with a
/// warning.
ParseResult parse_flat_file(const std::string& path);
ParseResult parse_flat_records(std::istream& in);

/// Writes records in the canonical dialect. Throws ConfigError on I/O
/// failure.
void write_flat_file(const std::string& path, const std::vector<VisitRecord>& records);
void write_flat_records(std::ostream& out, const std::vector<VisitRecord>& records);

/// All visits of one participant, date-ascending.
struct ParticipantRecords {
    std::string pid;
    std::vector<VisitRecord> visits;
};

/// All participants of one household, pid-ascending.
struct HouseholdVisits {
    std::string hid;
    std::vector<ParticipantRecords> members;
};

/// Groups records into the household/participant hierarchy with a sorted,
/// input-order-independent layout.
std::vector<HouseholdVisits> group_households(const std::vector<VisitRecord>& records);

/// Household-level positivity episodes under the first-positive rule.
struct EpisodeAssignment {
    /// hid -> tranche index of the household's earliest positive visit.
    std::map<std::string, int> episode;
    /// Households whose earliest positive date lies in no tranche; these
    /// are excluded from all tranche cohorts.
    std::vector<std::string> excluded;
    std::vector<std::string> warnings;
};

/// Finds each ever-positive household's episode tranche: the tranche
/// containing the earliest positive visit date across all members. All of
/// the household's positives attach to that tranche; in any other tranche
/// the household reads all-negative.
EpisodeAssignment assign_tranche_positivity(const std::vector<HouseholdVisits>& households,
                                            const std::vector<TrancheSpec>& tranches);

/// Per-participant tranche features before FeatureConfig selection.
struct ParticipantFeatures {
    std::string pid;
    int age = 0;              ///< minimum age observed in the tranche
    bool age_from_fallback = false;  ///< no in-tranche visit; nearest used
    bool age_2_11 = false;
    bool age_12_16 = false;
    bool patient_facing = false;
    bool positive = false;    ///< ever positive, shown under the episode tranche only
    int pattern = 0;          ///< maximal pattern over positive visits; 0 if none
    bool pattern_or_n = false;
    bool pattern_other = false;
};

/// Evaluates one member's features for a tranche window. Ages use the
/// minimum recorded inside the window, falling back to the visit nearest
/// the window when the member was not seen in it; patient-facing uses the
/// max rule. Pattern features are filled only when `in_episode` is true
/// and the member has a positive visit. Appends data-quality warnings
/// (age decreasing by more than a year between consecutive visits).
ParticipantFeatures build_features(const ParticipantRecords& member, const TrancheSpec& tranche,
                                   bool in_episode, std::vector<std::string>& warnings);

/// Table-shaped per-tranche counts for the summary report.
struct SummaryCounts {
    std::int64_t participants = 0;
    std::int64_t households = 0;
    std::int64_t positive_individuals = 0;
    std::int64_t households_with_positive = 0;
    std::int64_t children_under_12 = 0;
    std::int64_t children_12_16 = 0;
    std::int64_t or_n_s_positives = 0;
    std::int64_t or_n_positives = 0;
    std::int64_t patient_facing = 0;
};

/// One tranche's model-ready cohort plus exploratory inputs and counts.
struct TrancheCohort {
    std::string tranche;
    Cohort cohort;
    std::vector<ExploreHousehold> explore;        ///< split = over 16
    std::vector<std::vector<int>> pair_states;    ///< households with 1+ positive
    std::vector<std::string> state_labels;        ///< OR+N+S, OR+N, Other, Negative
    SummaryCounts summary;
    std::size_t dropped_large = 0;                ///< households of size 7+
    std::vector<std::string> warnings;
};

/// Builds the cohort for one tranche: households with at least one visit
/// in the window, composition from the full-study PID set, outcomes under
/// the episode rule, features selected by name from FeatureConfig
/// (age_2_11, age_12_16, patient_facing, pattern_OR_N, pattern_other).
/// Unknown feature names throw ConfigError.
TrancheCohort build_cohort(const std::vector<HouseholdVisits>& households,
                           const EpisodeAssignment& episodes,
                           const std::vector<TrancheSpec>& tranches, int tranche_index,
                           const FeatureConfig& config);

/// Convenience pipeline: group + assign + per-tranche builds. Episode
/// assignment warnings are appended to *episode_warnings when given.
std::vector<TrancheCohort> build_all_tranches(const std::vector<VisitRecord>& records,
                                              const std::vector<TrancheSpec>& tranches,
                                              const FeatureConfig& config,
                                              std::vector<std::string>* episode_warnings = nullptr);

}  // namespace hhfs
