#include "dms/cli.hpp"

#include "dms/dataset.hpp"
#include "dms/error.hpp"
#include "dms/evaluation.hpp"
#include "dms/pipeline.hpp"
#include "dms/text.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace dms {

namespace {

// Usage problems found after CLI11 has accepted the command line.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    std::replace(s.begin(), s.end(), '\t', ' ');
    return s;
}

// Data goes to --out when given, otherwise to the output stream.
void emit(const std::string& out_path, std::ostream& out, const std::string& data) {
    if (out_path.empty()) out << data;
    else text::write_file_atomic(out_path, data);
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

SplitFractions parse_fractions(const std::string& s) {
    const auto parts = text::split(s, ',');
    if (parts.size() != 3) throw UsageError("--fractions expects train,val,test");
    SplitFractions f;
    try {
        f.train = text::parse_double(parts[0], "train fraction");
        f.val = text::parse_double(parts[1], "val fraction");
        f.test = text::parse_double(parts[2], "test fraction");
    } catch (const ParseError& e) {
        throw UsageError(e.what());
    }
    return f;
}

// Lines "<rgb|ir> v1 v2 ...", '#' comments allowed.
std::vector<Embedding> read_embeddings(const std::string& path) {
    std::vector<Embedding> out;
    std::size_t ln = 0;
    const std::string content = text::read_file(path);
    for (auto line : text::lines(content)) {
        ++ln;
        if (line.empty() || line.front() == '#') continue;
        const auto tok = text::tokens(line);
        if (tok.size() < 2) throw ParseError(path + " line " + std::to_string(ln) + ": expected modality and values");
        Embedding e;
        e.modality = parse_modality(tok[0]);
        for (std::size_t i = 1; i < tok.size(); ++i) e.values.push_back(text::parse_double(tok[i], "value"));
        out.push_back(std::move(e));
    }
    return out;
}

ImageLoader loader_for(const std::string& manifest, const std::string& images_dir) {
    const std::filesystem::path base =
        images_dir.empty() ? std::filesystem::path(manifest).parent_path() : std::filesystem::path(images_dir);
    return pnm_file_loader(base);
}

// Keeps the header and split columns of `m` for the surviving samples.
Manifest restrict(const Manifest& m, const std::vector<SampleRecord>& kept) {
    Manifest r;
    r.labels = m.labels;
    r.fractions = m.fractions;
    std::size_t j = 0;
    for (std::size_t i = 0; i < m.samples.size() && j < kept.size(); ++i) {
        if (m.samples[i] == kept[j]) {
            r.samples.push_back(m.samples[i]);
            r.splits.push_back(m.splits[i]);
            ++j;
        }
    }
    return r;
}

IdTrialSet trial_source(bool synthetic, const std::optional<std::uint64_t>& seed, double noise,
                        const std::string& trials, const std::string& db) {
    if (synthetic) {
        if (!trials.empty() || !db.empty()) throw UsageError("--synthetic excludes --trials/--db");
        if (!seed) throw UsageError("--synthetic requires --seed");
        SyntheticTrialParams p;
        p.noise = noise;
        return make_synthetic_trials(*seed, p);
    }
    if (trials.empty() || db.empty()) throw UsageError("need --synthetic or both --trials and --db");
    return load_trials(trials, db);
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Driver monitoring toolkit: dataset prep, identity, pipeline runs, evaluation", "dms"};
    app.set_version_flag("--version", std::string("dms ") + kVersion);
    app.require_subcommand(1);

    // prep-dedup / prep-filter
    std::string manifest, out_path, report, images_dir;
    auto* dedup = app.add_subcommand("prep-dedup", "Drop exact dHash duplicates from a manifest");
    auto* filter = app.add_subcommand("prep-filter", "Drop too-dark or too-bright images from a manifest");
    double low = kBrightnessLow, high = kBrightnessHigh;
    for (auto* sc : {dedup, filter}) {
        sc->add_option("--manifest", manifest, "Input manifest")->required();
        sc->add_option("--out", out_path, "Output manifest (default: stdout)");
        sc->add_option("--report", report, "Removal report file");
        sc->add_option("--images-dir", images_dir, "Base for relative image paths (default: manifest dir)");
    }
    filter->add_option("--low", low, "Lower mean-brightness bound");
    filter->add_option("--high", high, "Upper mean-brightness bound");

    // prep-split
    auto* split = app.add_subcommand("prep-split", "Assign train/val/test splits");
    std::string mode, fractions;
    std::uint64_t split_seed = 0;
    split->add_option("--manifest", manifest, "Input manifest")->required();
    split->add_option("--mode", mode, "person | stratified")->required()->check(CLI::IsMember({"person", "stratified"}));
    split->add_option("--fractions", fractions, "train,val,test (always in this order)")->required();
    split->add_option("--seed", split_seed, "Shuffle seed")->required();
    split->add_option("--out", out_path, "Output manifest (default: stdout)");

    // enroll / identify
    std::string db, embeddings, name;
    std::optional<int> dim;
    std::size_t min_rgb = kManualEnrollCaptures;
    auto* enroll = app.add_subcommand("enroll", "Add an identity from embedding captures");
    enroll->add_option("--db", db, "Identity database file (created if missing)")->required();
    enroll->add_option("--name", name, "Identity name")->required();
    enroll->add_option("--embeddings", embeddings, "Captures, one '<rgb|ir> values...' per line")->required();
    enroll->add_option("--dim", dim, "Embedding dimension, checked against an existing database (default 128)");
    enroll->add_option("--min-rgb", min_rgb, "Minimum RGB captures");

    double rgb_thr = kRgbMatchThreshold, ir_thr = kIrMatchThreshold;
    auto* identify = app.add_subcommand("identify", "Match embeddings against the database");
    identify->add_option("--db", db, "Identity database file")->required()->check(CLI::ExistingFile);
    identify->add_option("--embeddings", embeddings, "Queries, one '<rgb|ir> values...' per line")->required();
    identify->add_option("--rgb-threshold", rgb_thr, "RGB cosine threshold");
    identify->add_option("--ir-threshold", ir_thr, "IR cosine threshold");

    // run
    std::string scenario, frames_dir, config_path;
    std::vector<std::string> sets;
    auto* run = app.add_subcommand("run", "Run the pipeline over a scripted scenario");
    run->add_option("--scenario", scenario, "Scenario script driving the mock backends")->required();
    run->add_option("--frames", frames_dir, "Directory of frame_<n>.rgb.pnm / frame_<n>.ir.pnm pairs");
    run->add_option("--config", config_path, "key=value config file");
    run->add_option("--set", sets, "Override one config key (key=value), repeatable");
    run->add_option("--db", db, "Identity database file (enables identification)");
    run->add_option("--out", out_path, "Trace file (default: stdout)");

    // evaluate-id / sweep
    bool synthetic = false;
    std::optional<std::uint64_t> eval_seed;
    double noise = 0.05;
    std::string trials, format = "table", modality = "rgb";
    auto* eval_id = app.add_subcommand("evaluate-id", "Identification accuracy, FAR, FRR");
    auto* sweep = app.add_subcommand("sweep", "Threshold sweep of FAR/FRR as CSV");
    for (auto* sc : {eval_id, sweep}) {
        sc->add_flag("--synthetic", synthetic, "Use the synthetic 15+10 identity trial set");
        sc->add_option("--seed", eval_seed, "Seed of the synthetic trial set");
        sc->add_option("--noise", noise, "Mock embedding noise of the synthetic set");
        sc->add_option("--trials", trials, "Query file (dms-trials v1)");
        sc->add_option("--db", db, "Identity database for --trials");
        sc->add_option("--out", out_path, "Output file (default: stdout)");
    }
    eval_id->add_option("--rgb-threshold", rgb_thr, "RGB cosine threshold");
    eval_id->add_option("--ir-threshold", ir_thr, "IR cosine threshold");
    eval_id->add_option("--format", format, "table | csv")->check(CLI::IsMember({"table", "csv"}));
    int steps = 101;
    double from = 0.0, to = 1.0;
    sweep->add_option("--modality", modality, "rgb | ir")->check(CLI::IsMember({"rgb", "ir"}));
    sweep->add_option("--steps", steps, "Number of evenly spaced thresholds")->check(CLI::PositiveNumber);
    sweep->add_option("--from", from, "First threshold");
    sweep->add_option("--to", to, "Last threshold");

    // evaluate-gaze
    std::string pairs_path;
    int classes = kGazeRegions;
    std::optional<int> positive;
    auto* eval_gaze = app.add_subcommand("evaluate-gaze", "Confusion matrix, accuracy and recall");
    eval_gaze->add_option("--pairs", pairs_path, "Lines '<truth> <predicted>', classes 1..N")->required();
    eval_gaze->add_option("--classes", classes, "Number of classes")->check(CLI::PositiveNumber);
    eval_gaze->add_option("--positive", positive, "Report recall of this class only (1..N)");
    eval_gaze->add_option("--format", format, "table | csv")->check(CLI::IsMember({"table", "csv"}));
    eval_gaze->add_option("--out", out_path, "Output file (default: stdout)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << app.help();
        return 2;
    }

    try {
        if (dedup->parsed()) {
            const Manifest m = Manifest::load(manifest);
            const auto r = dedup_exact(m.samples, loader_for(manifest, images_dir));
            emit(out_path, out, restrict(m, r.kept).serialize());
            std::string rep;
            for (const auto& d : r.removed) {
                rep += d.sample.sample_id + '\t' + d.duplicate_of + '\t' + hex(d.hash.bits) + '\n';
            }
            if (!report.empty()) text::write_file_atomic(report, rep);
            err << "kept " << r.kept.size() << ", removed " << r.removed.size() << '\n';
        } else if (filter->parsed()) {
            const Manifest m = Manifest::load(manifest);
            const auto r = filter_brightness(m.samples, loader_for(manifest, images_dir), low, high);
            emit(out_path, out, restrict(m, r.kept).serialize());
            std::string rep;
            for (const auto& d : r.removed) rep += d.sample.sample_id + '\t' + text::format_fixed(d.mean, 3) + '\n';
            if (!report.empty()) text::write_file_atomic(report, rep);
            err << "kept " << r.kept.size() << ", removed " << r.removed.size() << '\n';
        } else if (split->parsed()) {
            const SplitFractions f = parse_fractions(fractions);
            Manifest m = Manifest::load(manifest);
            const SplitManifest s = mode == "person" ? split_person_disjoint(m.samples, f, split_seed)
                                                     : split_stratified(m.samples, f, split_seed);
            m.apply(s);
            emit(out_path, out, m.serialize());
            err << "train " << s.train.size() << ", val " << s.val.size() << ", test " << s.test.size() << '\n';
        } else if (enroll->parsed()) {
            const int d = dim ? *dim : std::filesystem::exists(db) ? IdentityDatabase::load(db).dim() : 128;
            auto database = IdentityDatabase::open(db, d);
            const auto rec = database.enroll(name, read_embeddings(embeddings), min_rgb);
            out << rec.id << '\t' << rec.name << '\n';
        } else if (identify->parsed()) {
            const auto database = IdentityDatabase::load(db);
            for (const auto& q : read_embeddings(embeddings)) {
                const auto r = database.identify(q, {rgb_thr, ir_thr});
                const std::string sim = r.similarity ? text::format_fixed(*r.similarity, 6) : "-";
                if (r.matched) out << "matched\t" << r.id << '\t' << database.find(r.id)->name << '\t' << sim << '\n';
                else out << "unmatched\t-\t-\t" << sim << '\n';
            }
        } else if (run->parsed()) {
            PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);
            for (const auto& kv : sets) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
                cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
            }
            cfg.validate();
            const ScriptedBackend backend(ScenarioScript::load(scenario));
            std::optional<IdentityDatabase> database;
            if (!db.empty()) database = IdentityDatabase::open(db, backend.script().dim);
            std::unique_ptr<FrameSource> source;
            if (frames_dir.empty()) source = std::make_unique<ScenarioFrameSource>(backend.script());
            else source = std::make_unique<PnmDirectorySource>(frames_dir);
            std::ostringstream trace;
            trace << trace_header() << '\n';
            run_stream(*source, backend.backends(), cfg, database ? &*database : nullptr,
                       [&](const FrameOutput& o) { trace << o.to_record() << '\n'; });
            emit(out_path, out, trace.str());
        } else if (eval_id->parsed()) {
            const IdTrialSet set = trial_source(synthetic, eval_seed, noise, trials, db);
            const IdMetrics m = evaluate_identification(set, {rgb_thr, ir_thr});
            std::string data;
            if (format == "csv") {
                data = "rgb_threshold,ir_threshold,far,frr,misid,accuracy\n" + text::format_shortest(rgb_thr) + ',' +
                       text::format_shortest(ir_thr) + ',' + text::format_shortest(m.far) + ',' +
                       text::format_shortest(m.frr) + ',' + text::format_shortest(m.misid_rate) + ',' +
                       text::format_shortest(m.accuracy) + '\n';
            } else {
                data = metrics_report(m);
            }
            emit(out_path, out, data);
        } else if (sweep->parsed()) {
            if (!(from <= to)) throw UsageError("--from must not exceed --to");
            const IdTrialSet set = trial_source(synthetic, eval_seed, noise, trials, db);
            std::vector<double> ts;
            for (int i = 0; i < steps; ++i) {
                ts.push_back(steps == 1 ? from : from + (to - from) * i / (steps - 1));
            }
            emit(out_path, out, metrics_csv(sweep_threshold(set, parse_modality(modality), ts)));
        } else if (eval_gaze->parsed()) {
            std::vector<std::pair<int, int>> pairs;
            std::size_t ln = 0;
            const std::string content = text::read_file(pairs_path);
            for (auto line : text::lines(content)) {
                ++ln;
                if (line.empty() || line.front() == '#') continue;
                const auto tok = text::tokens(line);
                if (tok.size() != 2) throw ParseError(pairs_path + " line " + std::to_string(ln) + ": expected two classes");
                pairs.emplace_back(static_cast<int>(text::parse_int(tok[0], "truth")) - 1,
                                   static_cast<int>(text::parse_int(tok[1], "prediction")) - 1);
            }
            const ConfusionMatrix cm = confusion(pairs, classes);
            std::vector<std::string> names;
            for (int c = 0; c < classes; ++c) {
                names.push_back(classes == kGazeRegions ? gaze_region_names()[c] : std::to_string(c + 1));
            }
            std::string data;
            if (format == "csv") {
                data = confusion_csv(cm, names);
            } else {
                data = confusion_table(cm, names);
                data += "accuracy: " + text::format_fixed(100.0 * accuracy(cm), 2) + "%\n";
                for (int c = 0; c < classes; ++c) {
                    if (positive && *positive - 1 != c) continue;
                    data += "recall " + names[c] + ": ";
                    data += cm.row_sum(c) == 0 ? std::string("-") : text::format_fixed(100.0 * recall(cm, c), 2) + "%";
                    data += '\n';
                }
            }
            emit(out_path, out, data);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        err << "error\tkind=" << e.kind() << "\tmessage=" << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error\tkind=internal\tmessage=" << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}

} // namespace dms
