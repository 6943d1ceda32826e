#pragma once

#include "dms/image.hpp"
#include "dms/modality.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dms {

struct SampleRecord {
    std::string sample_id;
    std::string image_path;
    std::string person_id;
    std::string label;
    Modality modality = Modality::rgb;

    bool operator==(const SampleRecord&) const = default;
};

/// Train/val/test ratios. Always given and stored in that order.
struct SplitFractions {
    double train = 0.0;
    double val = 0.0;
    double test = 0.0;

    std::array<double, 3> as_array() const { return {train, val, test}; }
    /// Throws InvalidArgument unless all are >= 0 and they sum to 1 within 1e-9.
    void validate() const;
    bool operator==(const SplitFractions&) const = default;
};

enum class Split { none, train, val, test };

const char* to_string(Split s) noexcept;

struct SplitManifest {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
    SplitFractions fractions;

    /// Split of a sample id, or Split::none when it is in no list.
    Split split_of(const std::string& sample_id) const;
};

/// On-disk manifest: declared label set, optional fractions, and one
/// record per line with its split assignment.
///
///   dms-manifest v1 labels=<l1,l2,...> fractions=<train,val,test | ->
///   <sample_id>\t<image_path>\t<person_id>\t<label>\t<rgb|ir>\t<train|val|test|->
struct Manifest {
    std::vector<std::string> labels;
    std::optional<SplitFractions> fractions;
    std::vector<SampleRecord> samples;
    std::vector<Split> splits; // parallel to samples

    std::string serialize() const;
    static Manifest parse(std::string_view text);

    static Manifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    /// Manifest over `samples` (all unassigned) whose label set is the
    /// sorted distinct labels found in them.
    static Manifest from_samples(std::vector<SampleRecord> samples);

    /// Copies the split assignment of each sample from `split`.
    void apply(const SplitManifest& split);
};

/// Resolves a sample to pixels. Must throw on failure; callers wrap the
/// error with the sample id.
using ImageLoader = std::function<Image(const SampleRecord&)>;

/// Reads PNM files; relative image paths resolve against `base_dir`.
ImageLoader pnm_file_loader(std::filesystem::path base_dir);

struct DuplicateRemoval {
    SampleRecord sample;
    std::string duplicate_of;
    DHash hash;
};

struct DedupResult {
    std::vector<SampleRecord> kept;
    std::vector<DuplicateRemoval> removed;
};

/// Drops every sample whose dHash equals that of an earlier sample; the
/// first of each hash group survives.
DedupResult dedup_exact(const std::vector<SampleRecord>& samples, const ImageLoader& load);

struct BrightnessRemoval {
    SampleRecord sample;
    double mean = 0.0;
};

struct BrightnessResult {
    std::vector<SampleRecord> kept;
    std::vector<BrightnessRemoval> removed;
};

inline constexpr double kBrightnessLow = 20.0;
inline constexpr double kBrightnessHigh = 235.0;

/// Removes samples whose mean brightness is strictly below `low` or
/// strictly above `high`.
BrightnessResult filter_brightness(const std::vector<SampleRecord>& samples, const ImageLoader& load,
                                   double low = kBrightnessLow, double high = kBrightnessHigh);

/// Greedy deficit assignment of whole groups, in the given order: each
/// group goes to the split whose (target - current) sample count is largest,
/// ties to the earlier split. Returns a split index 0..2 per group.
std::vector<int> assign_groups_greedy(const std::vector<std::size_t>& group_sizes,
                                      const SplitFractions& fractions);

/// Assigns whole persons to splits. Persons are ordered by id, shuffled
/// by `seed`, then placed with assign_groups_greedy.
SplitManifest split_person_disjoint(const std::vector<SampleRecord>& samples,
                                    const SplitFractions& fractions, std::uint64_t seed);

/// Largest-remainder apportionment of n items; ties in remainder go to
/// the earlier split.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitFractions& fractions);

/// Per-label shuffle (labels in sorted order, samples ordered by id before
/// shuffling) and largest-remainder apportionment of each label.
SplitManifest split_stratified(const std::vector<SampleRecord>& samples,
                               const SplitFractions& fractions, std::uint64_t seed);

} // namespace dms
