#include "dms/scenario.hpp"

#include "dms/error.hpp"
#include "dms/rng.hpp"
#include "dms/text.hpp"

#include <algorithm>
#include <cmath>

namespace dms {

namespace {

constexpr std::string_view kScenarioMagic = "dms-scenario";
constexpr std::string_view kScenarioVersion = "v1";
constexpr std::uint64_t kBaseStream = 0x1D5EED;

std::vector<double> random_unit(Rng& rng, int dim) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (double& x : v) {
            x = rng.gaussian();
            norm2 += x * x;
        }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    return v;
}

std::string format_detections(const std::vector<FaceDetection>& dets) {
    if (dets.empty()) return "-";
    std::string out;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const auto& d = dets[i];
        if (i) out += ';';
        out += std::to_string(d.box.x) + ',' + std::to_string(d.box.y) + ',' +
               std::to_string(d.box.w) + ',' + std::to_string(d.box.h) + ',' +
               text::format_shortest(d.confidence);
    }
    return out;
}

std::vector<FaceDetection> parse_detections(std::string_view field) {
    std::vector<FaceDetection> out;
    if (field == "-") return out;
    for (auto item : text::split(field, ';')) {
        const auto p = text::split(item, ',');
        if (p.size() != 5) throw ParseError("detection '" + std::string(item) + "' needs x,y,w,h,conf");
        FaceDetection d;
        d.box = {static_cast<int>(text::parse_int(p[0], "detection x")),
                 static_cast<int>(text::parse_int(p[1], "detection y")),
                 static_cast<int>(text::parse_int(p[2], "detection w")),
                 static_cast<int>(text::parse_int(p[3], "detection h"))};
        d.confidence = text::parse_double(p[4], "detection confidence");
        out.push_back(d);
    }
    return out;
}

bool parse_flag(std::string_view t, const char* what) {
    if (t == "0") return false;
    if (t == "1") return true;
    throw ParseError(std::string(what) + " must be 0 or 1, got '" + std::string(t) + "'");
}

} // namespace

// --- mock embeddings ---

MockEmbeddingGenerator::MockEmbeddingGenerator(int dim, double noise) : dim_(dim), noise_(noise) {
    if (dim < 1) throw InvalidArgument("embedding dimension must be positive");
    if (!(noise >= 0.0) || !std::isfinite(noise)) {
        throw InvalidArgument("embedding noise must be finite and non-negative");
    }
}

std::vector<double> MockEmbeddingGenerator::base(std::uint64_t identity_seed) const {
    Rng rng(mix_seed(identity_seed, kBaseStream));
    return random_unit(rng, dim_);
}

std::vector<double> MockEmbeddingGenerator::sample(std::uint64_t identity_seed,
                                                   std::uint64_t nonce) const {
    std::vector<double> v = base(identity_seed);
    if (noise_ == 0.0) return v;
    Rng rng(mix_seed(mix_seed(identity_seed, kBaseStream), nonce));
    const auto dir = random_unit(rng, dim_);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] += noise_ * dir[i];
        norm2 += v[i] * v[i];
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    return v;
}

// --- scenario script ---

void ScenarioScript::validate() const {
    if (dim < 1) throw ParseError("scenario: dim must be positive");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ParseError("scenario: noise must be >= 0");
    if (width < 1 || height < 1) throw ParseError("scenario: frame size must be positive");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        const std::string where = "scenario frame " + std::to_string(f.frame_index);
        if (i > 0 && f.frame_index <= frames[i - 1].frame_index) {
            throw ParseError(where + ": frame indices must be strictly increasing");
        }
        if (f.gaze_region < 1 || f.gaze_region > kGazeRegions) {
            throw ParseError(where + ": gaze region must be in 1..9");
        }
        for (const auto* list : {&f.rgb_detections, &f.ir_detections}) {
            for (const auto& d : *list) {
                if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
                    throw ParseError(where + ": detection confidence outside [0,1]");
                }
                const BoundingBox c = clamp_box(d.box, width, height);
                if (d.box.w <= 0 || d.box.h <= 0 || c.w <= 0 || c.h <= 0) {
                    throw ParseError(where + ": detection box does not overlap the frame");
                }
            }
        }
    }
}

const ScriptedFrame* ScenarioScript::find(std::int64_t frame_index) const {
    auto it = std::lower_bound(frames.begin(), frames.end(), frame_index,
                               [](const ScriptedFrame& f, std::int64_t idx) { return f.frame_index < idx; });
    if (it == frames.end() || it->frame_index != frame_index) return nullptr;
    return &*it;
}

std::string ScenarioScript::serialize() const {
    std::string out;
    out += std::string(kScenarioMagic) + ' ' + std::string(kScenarioVersion) +
           " dim=" + std::to_string(dim) + " noise=" + text::format_shortest(noise) +
           " width=" + std::to_string(width) + " height=" + std::to_string(height) + '\n';
    for (const auto& f : frames) {
        out += std::to_string(f.frame_index) + ' ' + format_detections(f.rgb_detections) + ' ' +
               format_detections(f.ir_detections) + ' ' + std::to_string(f.gaze_region) + ' ' +
               (f.occluded_rgb ? '1' : '0') + ' ' + (f.occluded_ir ? '1' : '0') + ' ' +
               std::to_string(f.identity_seed) + '\n';
    }
    return out;
}

ScenarioScript ScenarioScript::parse(std::string_view content) {
    const auto all = text::lines(content);
    std::size_t ln = 0;
    while (ln < all.size() && (text::tokens(all[ln]).empty() || all[ln].front() == '#')) ++ln;
    if (ln == all.size()) throw ParseError("scenario: missing header");
    const auto head = text::tokens(all[ln]);
    if ((head.size() != 4 && head.size() != 6) || head[0] != kScenarioMagic ||
        head[1] != kScenarioVersion) {
        throw ParseError("scenario line " + std::to_string(ln + 1) +
                         ": expected 'dms-scenario v1 dim=<D> noise=<n> [width=<W> height=<H>]'");
    }
    ScenarioScript s;
    s.dim = static_cast<int>(text::parse_int(text::expect_key(head[2], "dim"), "dim"));
    s.noise = text::parse_double(text::expect_key(head[3], "noise"), "noise");
    if (head.size() == 6) {
        s.width = static_cast<int>(text::parse_int(text::expect_key(head[4], "width"), "width"));
        s.height = static_cast<int>(text::parse_int(text::expect_key(head[5], "height"), "height"));
    }
    for (++ln; ln < all.size(); ++ln) {
        const auto t = text::tokens(all[ln]);
        if (t.empty() || t[0].front() == '#') continue;
        const std::string where = "scenario line " + std::to_string(ln + 1);
        if (t.size() != 7) throw ParseError(where + ": expected 7 fields");
        try {
            ScriptedFrame f;
            f.frame_index = text::parse_int(t[0], "frame index");
            f.rgb_detections = parse_detections(t[1]);
            f.ir_detections = parse_detections(t[2]);
            f.gaze_region = static_cast<int>(text::parse_int(t[3], "gaze region"));
            f.occluded_rgb = parse_flag(t[4], "occluded_rgb");
            f.occluded_ir = parse_flag(t[5], "occluded_ir");
            f.identity_seed = text::parse_uint(t[6], "identity seed");
            s.frames.push_back(std::move(f));
        } catch (const ParseError& e) {
            throw ParseError(where + ": " + e.what());
        }
    }
    s.validate();
    return s;
}

ScenarioScript ScenarioScript::load(const std::filesystem::path& path) {
    try {
        return parse(text::read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void ScenarioScript::save(const std::filesystem::path& path) const {
    text::write_file_atomic(path, serialize());
}

// --- scripted backend ---

ScriptedBackend::ScriptedBackend(ScenarioScript script)
    : script_(std::move(script)), generator_(script_.dim, script_.noise) {
    script_.validate();
}

const ScriptedFrame& ScriptedBackend::frame(const InferenceContext& ctx) const {
    const ScriptedFrame* f = script_.find(ctx.frame_index);
    if (!f) throw BackendError("no scripted outputs for frame " + std::to_string(ctx.frame_index));
    return *f;
}

std::vector<FaceDetection> ScriptedBackend::detect(const Image&, const InferenceContext& ctx) const {
    const auto& f = frame(ctx);
    return ctx.modality == Modality::rgb ? f.rgb_detections : f.ir_detections;
}

GazePrediction ScriptedBackend::classify(const Image&, const InferenceContext& ctx) const {
    std::array<double, kGazeRegions> scores;
    scores.fill(0.01);
    const int region = frame(ctx).gaze_region;
    scores[static_cast<std::size_t>(region - 1)] = 0.92;
    return {region, scores};
}

double ScriptedBackend::occlusion_score(const Image&, const InferenceContext& ctx) const {
    const auto& f = frame(ctx);
    const bool occluded = ctx.modality == Modality::rgb ? f.occluded_rgb : f.occluded_ir;
    return occluded ? 0.95 : 0.05;
}

std::vector<double> ScriptedBackend::embed(const Image&, const InferenceContext& ctx) const {
    return generator_.sample(frame(ctx).identity_seed, capture_nonce(ctx.frame_index, ctx.modality));
}

std::uint64_t ScriptedBackend::capture_nonce(std::int64_t frame_index, Modality modality) {
    return mix_seed(static_cast<std::uint64_t>(frame_index), modality == Modality::rgb ? 1 : 2);
}

} // namespace dms
