#pragma once

#include "dms/identity.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dms {

/// Rows are ground truth, columns prediction. Classes are 0-based.
struct ConfusionMatrix {
    int n_classes = 0;
    std::vector<std::int64_t> counts; // row-major n x n

    explicit ConfusionMatrix(int n = 0);

    std::int64_t at(int truth, int predicted) const;
    std::int64_t& at(int truth, int predicted);
    std::int64_t total() const noexcept;
    std::int64_t row_sum(int truth) const;

    bool operator==(const ConfusionMatrix&) const = default;
};

/// Throws DimensionError if any class lies outside [0, n_classes).
ConfusionMatrix confusion(const std::vector<std::pair<int, int>>& pairs, int n_classes);

/// trace / total; MetricError on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

/// counts[pos][pos] / row_sum(pos); MetricError when the row is empty.
double recall(const ConfusionMatrix& cm, int positive_class);

/// Class names as header row and column, then the counts.
std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);

/// Aligned plain-text table of the same data.
std::string confusion_table(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);

struct IdTrial {
    std::string label; // database name for registered identities
    std::vector<Embedding> queries;
};

/// Registered labels must name records in `database`; unregistered ones
/// must not.
struct IdTrialSet {
    std::vector<IdTrial> registered;
    std::vector<IdTrial> unregistered;
    IdentityDatabase database;

    /// Throws MetricError when a label is on the wrong side of the database.
    void validate() const;
};

struct IdMetrics {
    std::int64_t registered_queries = 0;
    std::int64_t unregistered_queries = 0;
    std::int64_t correct = 0;
    std::int64_t false_accepts = 0;       // unregistered query matched
    std::int64_t false_rejects = 0;       // registered query unmatched
    std::int64_t misidentifications = 0;  // registered query matched to another id

    double accuracy = 0.0;
    double far = 0.0;
    double frr = 0.0;
    double misid_rate = 0.0; // over registered queries

    bool operator==(const IdMetrics&) const = default;
};

/// Runs identify on every query. With `only` set, queries of the other
/// modality are skipped. MetricError if either population ends up empty.
IdMetrics evaluate_identification(const IdTrialSet& trials, const MatchThresholds& thresholds,
                                  std::optional<Modality> only = std::nullopt);

struct SweepPoint {
    double threshold = 0.0;
    IdMetrics metrics;
};

/// One evaluation per threshold over the queries of `modality`, whose
/// threshold is replaced by each value in turn. Thresholds must be
/// ascending (InvalidArgument otherwise).
std::vector<SweepPoint> sweep_threshold(const IdTrialSet& trials, Modality modality,
                                        const std::vector<double>& thresholds);

/// "threshold,far,frr,misid,accuracy" then one row per point.
std::string metrics_csv(const std::vector<SweepPoint>& points);

/// Human-readable summary of one evaluation.
std::string metrics_report(const IdMetrics& m);

struct SyntheticTrialParams {
    int registered = 15;
    int unregistered = 10;
    int queries_per_identity = 20;
    int enroll_captures = 3;
    int dim = 128;
    double noise = 0.05;
};

/// Mock-embedding trial set. Every identity owns separate RGB and IR
/// directions; registered ones are enrolled from `enroll_captures` captures
/// per modality, and queries alternate RGB, IR.
IdTrialSet make_synthetic_trials(std::uint64_t seed, const SyntheticTrialParams& params = {});

/// Query file for evaluate-id:
///
///   dms-trials v1 dim=<D>
///   <registered|unregistered> <len>:<label> <rgb|ir> <D reals>
///
/// Consecutive lines with the same population and label form one trial.
std::pair<std::vector<IdTrial>, std::vector<IdTrial>> parse_trials(std::string_view text, int& dim);
std::string serialize_trials(const IdTrialSet& trials);
IdTrialSet load_trials(const std::filesystem::path& queries, const std::filesystem::path& database);

} // namespace dms
