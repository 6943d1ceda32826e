#include "dms/dataset.hpp"

#include "dms/error.hpp"
#include "dms/rng.hpp"
#include "dms/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace dms {

namespace {

constexpr std::string_view kManifestMagic = "dms-manifest";
constexpr std::string_view kManifestVersion = "v1";

void require_unique_ids(const std::vector<SampleRecord>& samples) {
    std::unordered_set<std::string> seen;
    for (const auto& s : samples) {
        if (!seen.insert(s.sample_id).second) {
            throw DatasetError("duplicate sample_id '" + s.sample_id + "'");
        }
    }
}

Image load_sample(const SampleRecord& s, const ImageLoader& load) {
    try {
        return load(s);
    } catch (const std::exception& e) {
        throw DatasetError("sample '" + s.sample_id + "': " + e.what());
    }
}

Split parse_split(std::string_view t) {
    if (t == "train") return Split::train;
    if (t == "val") return Split::val;
    if (t == "test") return Split::test;
    if (t == "-") return Split::none;
    throw ParseError("unknown split '" + std::string(t) + "'");
}

void check_field(const std::string& value, const char* name) {
    if (value.empty()) throw DatasetError(std::string("empty ") + name);
    if (value.find_first_of("\t\n\r") != std::string::npos) {
        throw DatasetError(std::string(name) + " '" + value + "' contains a tab or newline");
    }
}

SplitManifest manifest_from_assignment(const std::vector<SampleRecord>& samples,
                                       const std::vector<int>& split_of_sample,
                                       const SplitFractions& fractions) {
    SplitManifest m;
    m.fractions = fractions;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        switch (split_of_sample[i]) {
        case 0: m.train.push_back(samples[i].sample_id); break;
        case 1: m.val.push_back(samples[i].sample_id); break;
        default: m.test.push_back(samples[i].sample_id); break;
        }
    }
    return m;
}

} // namespace

void SplitFractions::validate() const {
    for (double f : as_array()) {
        if (!(f >= 0.0) || !std::isfinite(f)) {
            throw InvalidArgument("split fractions must be finite and non-negative");
        }
    }
    const double sum = train + val + test;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InvalidArgument("split fractions sum to " + text::format_shortest(sum) +
                              ", expected 1");
    }
}

const char* to_string(Split s) noexcept {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::none: break;
    }
    return "-";
}

Split SplitManifest::split_of(const std::string& sample_id) const {
    auto has = [&](const std::vector<std::string>& v) {
        return std::find(v.begin(), v.end(), sample_id) != v.end();
    };
    if (has(train)) return Split::train;
    if (has(val)) return Split::val;
    if (has(test)) return Split::test;
    return Split::none;
}

// --- manifest I/O ---

std::string Manifest::serialize() const {
    std::string out;
    out += kManifestMagic;
    out += ' ';
    out += kManifestVersion;
    out += " labels=";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) out += ',';
        out += labels[i];
    }
    out += " fractions=";
    if (fractions) {
        out += text::format_shortest(fractions->train) + "," +
               text::format_shortest(fractions->val) + "," +
               text::format_shortest(fractions->test);
    } else {
        out += '-';
    }
    out += '\n';
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        out += s.sample_id + '\t' + s.image_path + '\t' + s.person_id + '\t' + s.label + '\t' +
               to_string(s.modality) + '\t' + to_string(i < splits.size() ? splits[i] : Split::none) +
               '\n';
    }
    return out;
}

Manifest Manifest::parse(std::string_view content) {
    const auto all = text::lines(content);
    if (all.empty()) throw ParseError("manifest: empty input");
    const auto head = text::tokens(all.front());
    if (head.size() != 4 || head[0] != kManifestMagic || head[1] != kManifestVersion) {
        throw ParseError("manifest line 1: expected 'dms-manifest v1 labels=... fractions=...'");
    }
    Manifest m;
    const auto label_field = text::expect_key(head[2], "labels");
    if (!label_field.empty()) {
        for (auto l : text::split(label_field, ',')) m.labels.emplace_back(l);
    }
    const auto frac_field = text::expect_key(head[3], "fractions");
    if (frac_field != "-") {
        const auto parts = text::split(frac_field, ',');
        if (parts.size() != 3) throw ParseError("manifest line 1: fractions need three values");
        m.fractions = SplitFractions{text::parse_double(parts[0], "train fraction"),
                                     text::parse_double(parts[1], "val fraction"),
                                     text::parse_double(parts[2], "test fraction")};
    }
    const std::set<std::string, std::less<>> label_set(m.labels.begin(), m.labels.end());
    std::unordered_set<std::string> ids;
    for (std::size_t ln = 1; ln < all.size(); ++ln) {
        if (all[ln].empty()) continue;
        const auto f = text::split(all[ln], '\t');
        const std::string where = "manifest line " + std::to_string(ln + 1);
        if (f.size() != 6) throw ParseError(where + ": expected 6 tab-separated fields");
        SampleRecord s{std::string(f[0]), std::string(f[1]), std::string(f[2]), std::string(f[3]),
                       parse_modality(f[4])};
        if (!ids.insert(s.sample_id).second) {
            throw ParseError(where + ": duplicate sample_id '" + s.sample_id + "'");
        }
        if (!label_set.contains(s.label)) {
            throw ParseError(where + ": label '" + s.label + "' not in the declared label set");
        }
        m.samples.push_back(std::move(s));
        m.splits.push_back(parse_split(f[5]));
    }
    return m;
}

Manifest Manifest::load(const std::filesystem::path& path) {
    try {
        return parse(text::read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void Manifest::save(const std::filesystem::path& path) const {
    text::write_file_atomic(path, serialize());
}

Manifest Manifest::from_samples(std::vector<SampleRecord> samples) {
    Manifest m;
    std::set<std::string> labels;
    for (const auto& s : samples) {
        check_field(s.sample_id, "sample_id");
        check_field(s.image_path, "image_path");
        check_field(s.person_id, "person_id");
        check_field(s.label, "label");
        if (s.label.find_first_of(", ") != std::string::npos) {
            throw DatasetError("label '" + s.label + "' may not contain commas or spaces");
        }
        labels.insert(s.label);
    }
    require_unique_ids(samples);
    m.labels.assign(labels.begin(), labels.end());
    m.splits.assign(samples.size(), Split::none);
    m.samples = std::move(samples);
    return m;
}

void Manifest::apply(const SplitManifest& split) {
    std::unordered_map<std::string, Split> lookup;
    for (const auto& id : split.train) lookup[id] = Split::train;
    for (const auto& id : split.val) lookup[id] = Split::val;
    for (const auto& id : split.test) lookup[id] = Split::test;
    splits.assign(samples.size(), Split::none);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (auto it = lookup.find(samples[i].sample_id); it != lookup.end()) splits[i] = it->second;
    }
    fractions = split.fractions;
}

ImageLoader pnm_file_loader(std::filesystem::path base_dir) {
    return [base = std::move(base_dir)](const SampleRecord& s) {
        std::filesystem::path p(s.image_path);
        if (p.is_relative()) p = base / p;
        return read_pnm_file(p.string());
    };
}

// --- curation ---

DedupResult dedup_exact(const std::vector<SampleRecord>& samples, const ImageLoader& load) {
    std::vector<DHash> hashes;
    hashes.reserve(samples.size());
    for (const auto& s : samples) hashes.push_back(dhash(load_sample(s, load)));

    DedupResult r;
    std::unordered_map<std::uint64_t, std::size_t> first_with_hash;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto [it, inserted] = first_with_hash.emplace(hashes[i].bits, i);
        if (inserted) {
            r.kept.push_back(samples[i]);
        } else {
            r.removed.push_back({samples[i], samples[it->second].sample_id, hashes[i]});
        }
    }
    return r;
}

BrightnessResult filter_brightness(const std::vector<SampleRecord>& samples, const ImageLoader& load,
                                   double low, double high) {
    if (!(low < high)) throw InvalidArgument("brightness filter needs low < high");
    BrightnessResult r;
    for (const auto& s : samples) {
        const double mean = mean_brightness(load_sample(s, load));
        if (mean > high || mean < low) {
            r.removed.push_back({s, mean});
        } else {
            r.kept.push_back(s);
        }
    }
    return r;
}

// --- splitting ---

std::vector<int> assign_groups_greedy(const std::vector<std::size_t>& group_sizes,
                                      const SplitFractions& fractions) {
    fractions.validate();
    double total = 0.0;
    for (auto g : group_sizes) total += static_cast<double>(g);
    const auto f = fractions.as_array();
    std::array<double, 3> filled{};
    std::vector<int> out;
    out.reserve(group_sizes.size());
    for (auto g : group_sizes) {
        int best = 0;
        double best_deficit = f[0] * total - filled[0];
        for (int s = 1; s < 3; ++s) {
            const double d = f[static_cast<std::size_t>(s)] * total - filled[static_cast<std::size_t>(s)];
            if (d > best_deficit) {
                best = s;
                best_deficit = d;
            }
        }
        filled[static_cast<std::size_t>(best)] += static_cast<double>(g);
        out.push_back(best);
    }
    return out;
}

SplitManifest split_person_disjoint(const std::vector<SampleRecord>& samples,
                                    const SplitFractions& fractions, std::uint64_t seed) {
    fractions.validate();
    require_unique_ids(samples);
    std::map<std::string, std::size_t> sizes;
    for (const auto& s : samples) ++sizes[s.person_id];
    if (sizes.size() < 3) {
        throw DatasetError("person-disjoint split is infeasible: " + std::to_string(sizes.size()) +
                           " distinct persons for 3 splits");
    }

    std::vector<std::string> persons;
    for (const auto& [p, n] : sizes) persons.push_back(p);
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(persons));

    std::vector<std::size_t> ordered_sizes;
    for (const auto& p : persons) ordered_sizes.push_back(sizes[p]);
    const auto assignment = assign_groups_greedy(ordered_sizes, fractions);

    std::unordered_map<std::string, int> split_of_person;
    for (std::size_t i = 0; i < persons.size(); ++i) split_of_person[persons[i]] = assignment[i];
    std::vector<int> split_of_sample;
    split_of_sample.reserve(samples.size());
    for (const auto& s : samples) split_of_sample.push_back(split_of_person[s.person_id]);
    return manifest_from_assignment(samples, split_of_sample, fractions);
}

std::array<std::size_t, 3> apportion(std::size_t n, const SplitFractions& fractions) {
    fractions.validate();
    const auto f = fractions.as_array();
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        const double quota = static_cast<double>(n) * f[s];
        // Guard against quotas like 3.9999999999999996 that are integers in exact arithmetic.
        const double whole = std::floor(quota + 1e-9);
        counts[s] = static_cast<std::size_t>(whole);
        remainder[s] = std::max(0.0, quota - whole);
        assigned += counts[s];
    }
    while (assigned > n) {
        // Only reachable through rounding slop on the guard above.
        for (std::size_t s = 3; s-- > 0;) {
            if (counts[s] > 0) {
                --counts[s];
                --assigned;
                break;
            }
        }
    }
    std::array<bool, 3> bumped{};
    while (assigned < n) {
        std::size_t best = 3;
        for (std::size_t s = 0; s < 3; ++s) {
            if (bumped[s]) continue;
            if (best == 3 || remainder[s] > remainder[best]) best = s;
        }
        ++counts[best];
        bumped[best] = true;
        ++assigned;
    }
    return counts;
}

SplitManifest split_stratified(const std::vector<SampleRecord>& samples,
                               const SplitFractions& fractions, std::uint64_t seed) {
    fractions.validate();
    require_unique_ids(samples);

    std::map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < samples.size(); ++i) by_label[samples[i].label].push_back(i);

    Rng rng(seed);
    std::vector<int> split_of_sample(samples.size(), 0);
    for (auto& [label, members] : by_label) {
        std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            return samples[a].sample_id < samples[b].sample_id;
        });
        rng.shuffle(std::span<std::size_t>(members));
        const auto counts = apportion(members.size(), fractions);
        std::size_t k = 0;
        for (int s = 0; s < 3; ++s) {
            for (std::size_t c = 0; c < counts[static_cast<std::size_t>(s)]; ++c) {
                split_of_sample[members[k++]] = s;
            }
        }
    }
    return manifest_from_assignment(samples, split_of_sample, fractions);
}

} // namespace dms
