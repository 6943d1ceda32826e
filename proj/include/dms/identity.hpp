#pragma once

#include "dms/backends.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dms {

inline constexpr double kRgbMatchThreshold = 0.65;
inline constexpr double kIrMatchThreshold = 0.575;
inline constexpr std::size_t kManualEnrollCaptures = 3;

/// Cosine of the angle between two equal-length, non-zero vectors.
/// Throws DimensionError on length mismatch, InvalidArgument on a zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Folds one more embedding into a mean that currently represents `count`
/// images: stored * count/(count+1) + added * 1/(count+1).
std::pair<std::vector<double>, std::int64_t> update_embedding(std::span<const double> stored,
                                                              std::int64_t count,
                                                              std::span<const double> added);

/// Mean of every embedding folded in for one modality. Not renormalised.
struct ModalityTemplate {
    std::vector<double> mean;
    std::int64_t count = 0;
    bool operator==(const ModalityTemplate&) const = default;
};

struct IdentityRecord {
    std::int64_t id = 0;
    std::string name;
    std::optional<ModalityTemplate> rgb;
    std::optional<ModalityTemplate> ir;

    const std::optional<ModalityTemplate>& get(Modality m) const { return m == Modality::rgb ? rgb : ir; }
    std::optional<ModalityTemplate>& get(Modality m) { return m == Modality::rgb ? rgb : ir; }
    bool operator==(const IdentityRecord&) const = default;
};

struct MatchThresholds {
    double rgb = kRgbMatchThreshold;
    double ir = kIrMatchThreshold;

    double get(Modality m) const noexcept { return m == Modality::rgb ? rgb : ir; }
};

struct MatchResult {
    bool matched = false;
    std::int64_t id = 0; // meaningful only when matched
    /// Best similarity seen; absent when no record carries the query's modality.
    std::optional<double> similarity;
    Modality modality = Modality::rgb;

    bool operator==(const MatchResult&) const = default;
};

/// Driver identity store. Readers share, writers are exclusive. When bound
/// to a file every mutation rewrites it atomically.
///
/// File layout (one record per line, ids ascending):
///
///   dms-identity-db v1 dim=<D> records=<N>
///   <id> <len>:<name> <rgb 0|1> <rgb count> [D reals] <ir 0|1> <ir count> [D reals]
///
/// Reals use 17 significant digits; an absent modality is written "0 0"
/// with no reals.
class IdentityDatabase {
public:
    explicit IdentityDatabase(int dim = 128);
    IdentityDatabase(IdentityDatabase&& other) noexcept;
    IdentityDatabase& operator=(IdentityDatabase&& other) noexcept;
    IdentityDatabase(const IdentityDatabase&) = delete;
    IdentityDatabase& operator=(const IdentityDatabase&) = delete;

    /// Loads `path` if it exists, otherwise starts empty with `dim`; later
    /// mutations are written back to `path`.
    static IdentityDatabase open(const std::filesystem::path& path, int dim = 128);
    static IdentityDatabase load(const std::filesystem::path& path);
    static IdentityDatabase parse(std::string_view text);

    std::string serialize() const;
    void save(const std::filesystem::path& path) const;

    int dim() const noexcept { return dim_; }
    std::size_t size() const;
    std::vector<IdentityRecord> records() const;
    std::optional<IdentityRecord> find(std::int64_t id) const;
    std::optional<std::int64_t> id_of(std::string_view name) const;

    /// New identity whose per-modality template is the mean of that
    /// modality's captures. Requires at least `min_rgb_captures` RGB captures.
    IdentityRecord enroll(std::string name, const std::vector<Embedding>& captures,
                          std::size_t min_rgb_captures = kManualEnrollCaptures);

    /// Best same-modality match by cosine similarity; ties go to the lowest id.
    MatchResult identify(const Embedding& query, const MatchThresholds& thresholds = {}) const;

    /// Registers `query` as a new identity named name_prefix + id.
    IdentityRecord auto_register(const Embedding& query, std::string_view name_prefix);

    /// Folds `query` into the record's template for its modality.
    IdentityRecord reinforce(std::int64_t id, const Embedding& query);

private:
    void check_query(const Embedding& e) const;
    IdentityRecord& record_locked(std::int64_t id);
    void persist_locked() const;
    std::string serialize_locked() const;

    int dim_;
    std::vector<IdentityRecord> records_;
    std::int64_t next_id_ = 1;
    std::optional<std::filesystem::path> path_;
    std::unique_ptr<std::shared_mutex> mutex_;
};

} // namespace dms
