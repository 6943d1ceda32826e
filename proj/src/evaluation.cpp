#include "dms/evaluation.hpp"

#include "dms/error.hpp"
#include "dms/rng.hpp"
#include "dms/scenario.hpp"
#include "dms/text.hpp"

#include <algorithm>
#include <cstdio>

namespace dms {

ConfusionMatrix::ConfusionMatrix(int n) : n_classes(n) {
    if (n < 0) throw InvalidArgument("class count must be non-negative");
    counts.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
}

std::int64_t ConfusionMatrix::at(int truth, int predicted) const {
    if (truth < 0 || truth >= n_classes || predicted < 0 || predicted >= n_classes) {
        throw DimensionError("class index out of range");
    }
    return counts[static_cast<std::size_t>(truth) * n_classes + predicted];
}

std::int64_t& ConfusionMatrix::at(int truth, int predicted) {
    if (truth < 0 || truth >= n_classes || predicted < 0 || predicted >= n_classes) {
        throw DimensionError("class index out of range");
    }
    return counts[static_cast<std::size_t>(truth) * n_classes + predicted];
}

std::int64_t ConfusionMatrix::total() const noexcept {
    std::int64_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

std::int64_t ConfusionMatrix::row_sum(int truth) const {
    std::int64_t s = 0;
    for (int p = 0; p < n_classes; ++p) s += at(truth, p);
    return s;
}

ConfusionMatrix confusion(const std::vector<std::pair<int, int>>& pairs, int n_classes) {
    ConfusionMatrix cm(n_classes);
    for (const auto& [t, p] : pairs) {
        if (t < 0 || t >= n_classes || p < 0 || p >= n_classes) {
            throw DimensionError("pair (" + std::to_string(t) + "," + std::to_string(p) +
                                 ") outside " + std::to_string(n_classes) + " classes");
        }
        ++cm.at(t, p);
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw MetricError("accuracy of an empty confusion matrix is undefined");
    std::int64_t trace = 0;
    for (int i = 0; i < cm.n_classes; ++i) trace += cm.at(i, i);
    return static_cast<double>(trace) / static_cast<double>(total);
}

double recall(const ConfusionMatrix& cm, int positive_class) {
    if (positive_class < 0 || positive_class >= cm.n_classes) {
        throw DimensionError("positive class out of range");
    }
    const auto row = cm.row_sum(positive_class);
    if (row == 0) throw MetricError("recall undefined: no ground-truth samples of the positive class");
    return static_cast<double>(cm.at(positive_class, positive_class)) / static_cast<double>(row);
}

namespace {

void check_names(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
    if (names.size() != static_cast<std::size_t>(cm.n_classes)) {
        throw DimensionError("expected " + std::to_string(cm.n_classes) + " class names, got " +
                             std::to_string(names.size()));
    }
}

double ratio(std::int64_t num, std::int64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
    check_names(cm, class_names);
    std::string out = "truth\\predicted";
    for (const auto& n : class_names) out += ',' + n;
    out += '\n';
    for (int t = 0; t < cm.n_classes; ++t) {
        out += class_names[t];
        for (int p = 0; p < cm.n_classes; ++p) out += ',' + std::to_string(cm.at(t, p));
        out += '\n';
    }
    return out;
}

std::string confusion_table(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
    check_names(cm, class_names);
    std::size_t w = 5;
    for (const auto& n : class_names) w = std::max(w, n.size());
    for (auto c : cm.counts) w = std::max(w, std::to_string(c).size());
    auto pad = [w](const std::string& s) { return std::string(w - std::min(w, s.size()), ' ') + s; };
    std::string out = pad("");
    for (const auto& n : class_names) out += ' ' + pad(n);
    out += '\n';
    for (int t = 0; t < cm.n_classes; ++t) {
        out += pad(class_names[t]);
        for (int p = 0; p < cm.n_classes; ++p) out += ' ' + pad(std::to_string(cm.at(t, p)));
        out += '\n';
    }
    return out;
}

void IdTrialSet::validate() const {
    for (const auto& t : registered) {
        if (!database.id_of(t.label)) throw MetricError("registered label '" + t.label + "' not in database");
    }
    for (const auto& t : unregistered) {
        if (database.id_of(t.label)) throw MetricError("unregistered label '" + t.label + "' is in database");
    }
}

IdMetrics evaluate_identification(const IdTrialSet& trials, const MatchThresholds& thresholds,
                                  std::optional<Modality> only) {
    IdMetrics m;
    auto wanted = [&](const Embedding& q) { return !only || q.modality == *only; };
    for (const auto& t : trials.registered) {
        const auto own = trials.database.id_of(t.label);
        if (!own) throw MetricError("registered label '" + t.label + "' not in database");
        for (const auto& q : t.queries) {
            if (!wanted(q)) continue;
            ++m.registered_queries;
            const auto r = trials.database.identify(q, thresholds);
            if (!r.matched) ++m.false_rejects;
            else if (r.id != *own) ++m.misidentifications;
            else ++m.correct;
        }
    }
    for (const auto& t : trials.unregistered) {
        if (trials.database.id_of(t.label)) throw MetricError("unregistered label '" + t.label + "' is in database");
        for (const auto& q : t.queries) {
            if (!wanted(q)) continue;
            ++m.unregistered_queries;
            if (trials.database.identify(q, thresholds).matched) ++m.false_accepts;
            else ++m.correct;
        }
    }
    if (m.registered_queries == 0 || m.unregistered_queries == 0) {
        throw MetricError("identification metrics need queries from both populations");
    }
    m.accuracy = ratio(m.correct, m.registered_queries + m.unregistered_queries);
    m.far = ratio(m.false_accepts, m.unregistered_queries);
    m.frr = ratio(m.false_rejects, m.registered_queries);
    m.misid_rate = ratio(m.misidentifications, m.registered_queries);
    return m;
}

std::vector<SweepPoint> sweep_threshold(const IdTrialSet& trials, Modality modality,
                                        const std::vector<double>& thresholds) {
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
        throw InvalidArgument("sweep thresholds must be ascending");
    }
    std::vector<SweepPoint> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) {
        MatchThresholds th;
        (modality == Modality::rgb ? th.rgb : th.ir) = t;
        out.push_back({t, evaluate_identification(trials, th, modality)});
    }
    return out;
}

std::string metrics_csv(const std::vector<SweepPoint>& points) {
    std::string out = "threshold,far,frr,misid,accuracy\n";
    for (const auto& p : points) {
        out += text::format_shortest(p.threshold) + ',' + text::format_shortest(p.metrics.far) + ',' +
               text::format_shortest(p.metrics.frr) + ',' + text::format_shortest(p.metrics.misid_rate) + ',' +
               text::format_shortest(p.metrics.accuracy) + '\n';
    }
    return out;
}

std::string metrics_report(const IdMetrics& m) {
    auto pct = [](double v) { return text::format_fixed(100.0 * v, 2) + "%"; };
    std::string out;
    out += "registered queries:   " + std::to_string(m.registered_queries) + '\n';
    out += "unregistered queries: " + std::to_string(m.unregistered_queries) + '\n';
    out += "accuracy: " + pct(m.accuracy) + " (" + std::to_string(m.correct) + ")\n";
    out += "FAR:      " + pct(m.far) + " (" + std::to_string(m.false_accepts) + ")\n";
    out += "FRR:      " + pct(m.frr) + " (" + std::to_string(m.false_rejects) + ")\n";
    out += "misid:    " + pct(m.misid_rate) + " (" + std::to_string(m.misidentifications) + ")\n";
    return out;
}

IdTrialSet make_synthetic_trials(std::uint64_t seed, const SyntheticTrialParams& p) {
    if (p.registered < 1 || p.unregistered < 1 || p.queries_per_identity < 1 || p.enroll_captures < 1) {
        throw InvalidArgument("synthetic trial counts must be positive");
    }
    const MockEmbeddingGenerator gen(p.dim, p.noise);
    IdTrialSet set{{}, {}, IdentityDatabase(p.dim)};
    // identity k owns seeds mix(seed, 2k) for RGB and mix(seed, 2k+1) for IR
    auto identity_seed = [&](int k, Modality m) {
        return mix_seed(seed, 2 * static_cast<std::uint64_t>(k) + (m == Modality::ir ? 1 : 0));
    };
    auto queries = [&](int k) {
        std::vector<Embedding> qs;
        for (int q = 0; q < p.queries_per_identity; ++q) {
            const Modality m = q % 2 == 0 ? Modality::rgb : Modality::ir;
            qs.push_back({gen.sample(identity_seed(k, m), 1000 + static_cast<std::uint64_t>(q)), m});
        }
        return qs;
    };
    const int total = p.registered + p.unregistered;
    for (int k = 0; k < total; ++k) {
        char label[32];
        std::snprintf(label, sizeof label, "person-%02d", k + 1);
        if (k < p.registered) {
            std::vector<Embedding> caps;
            for (const Modality m : {Modality::rgb, Modality::ir}) {
                for (int c = 0; c < p.enroll_captures; ++c) {
                    caps.push_back({gen.sample(identity_seed(k, m), static_cast<std::uint64_t>(c)), m});
                }
            }
            set.database.enroll(label, caps, static_cast<std::size_t>(p.enroll_captures));
            set.registered.push_back({label, queries(k)});
        } else {
            set.unregistered.push_back({label, queries(k)});
        }
    }
    return set;
}

std::pair<std::vector<IdTrial>, std::vector<IdTrial>> parse_trials(std::string_view content, int& dim) {
    const auto all = text::lines(content);
    if (all.empty()) throw ParseError("trials: empty file");
    const auto head = text::tokens(all[0]);
    if (head.size() != 3 || head[0] != "dms-trials" || head[1] != "v1") {
        throw ParseError("trials line 1: expected 'dms-trials v1 dim=<D>'");
    }
    dim = static_cast<int>(text::parse_int(text::expect_key(head[2], "dim"), "dim"));
    if (dim < 1) throw ParseError("trials line 1: dim must be positive");

    std::pair<std::vector<IdTrial>, std::vector<IdTrial>> out;
    for (std::size_t i = 1; i < all.size(); ++i) {
        const std::string where = "trials line " + std::to_string(i + 1);
        std::string_view line = all[i];
        if (line.empty() || line.front() == '#') continue;
        const auto sp = line.find(' ');
        if (sp == std::string_view::npos) throw ParseError(where + ": truncated");
        const auto pop = line.substr(0, sp);
        if (pop != "registered" && pop != "unregistered") {
            throw ParseError(where + ": population must be registered or unregistered");
        }
        line.remove_prefix(sp + 1);
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) throw ParseError(where + ": label must be <len>:<label>");
        const auto len = text::parse_uint(line.substr(0, colon), "label length");
        if (colon + 1 + len > line.size()) throw ParseError(where + ": label runs past end of line");
        std::string label(line.substr(colon + 1, len));
        const auto rest = text::tokens(line.substr(colon + 1 + len));
        if (rest.size() != static_cast<std::size_t>(dim) + 1) {
            throw ParseError(where + ": expected modality and " + std::to_string(dim) + " values");
        }
        Embedding e;
        e.modality = parse_modality(rest[0]);
        e.values.reserve(static_cast<std::size_t>(dim));
        for (std::size_t j = 1; j < rest.size(); ++j) e.values.push_back(text::parse_double(rest[j], "value"));
        auto& list = pop == "registered" ? out.first : out.second;
        if (list.empty() || list.back().label != label) list.push_back({std::move(label), {}});
        list.back().queries.push_back(std::move(e));
    }
    return out;
}

std::string serialize_trials(const IdTrialSet& trials) {
    std::string out = "dms-trials v1 dim=" + std::to_string(trials.database.dim()) + '\n';
    auto emit = [&](const char* pop, const std::vector<IdTrial>& list) {
        for (const auto& t : list) {
            for (const auto& q : t.queries) {
                out += std::string(pop) + ' ' + std::to_string(t.label.size()) + ':' + t.label + ' ' +
                       to_string(q.modality);
                for (double v : q.values) out += ' ' + text::format_g17(v);
                out += '\n';
            }
        }
    };
    emit("registered", trials.registered);
    emit("unregistered", trials.unregistered);
    return out;
}

IdTrialSet load_trials(const std::filesystem::path& queries, const std::filesystem::path& database) {
    int dim = 0;
    auto [reg, unreg] = parse_trials(text::read_file(queries), dim);
    IdTrialSet set{std::move(reg), std::move(unreg), IdentityDatabase::load(database)};
    if (set.database.dim() != dim) {
        throw DimensionError("trials dim " + std::to_string(dim) + " does not match database dim " +
                             std::to_string(set.database.dim()));
    }
    set.validate();
    return set;
}

} // namespace dms
