#include "dms/pipeline.hpp"

#include "dms/error.hpp"
#include "dms/text.hpp"

#include <algorithm>
#include <regex>

namespace dms {

namespace {

// Everything observed while processing one frame, before it is turned
// into a FrameOutput.
struct Tick {
    std::optional<AcquisitionResult> face;     // feeds gaze (and identification)
    std::optional<AcquisitionResult> rgb_probe; // RGB detection made while in IR mode
    OcclusionEvents occlusion;
    std::optional<AlertEvent> alert;
};

bool occluded(const OcclusionClassifier& classifier, const Image& img, std::int64_t frame,
              Modality m, const PipelineConfig& config) {
    return classify_occlusion(classifier, img, {frame, m}, config.occlusion_threshold).occluded;
}

void enter_alert(PipelineState& s, Tick& t) {
    s.mode = Mode::alert;
    s.consecutive_dual_occlusions = 0;
    s.consecutive_rgb_failures = 0;
    s.consecutive_rgb_successes = 0;
    t.face.reset();
    t.alert = AlertEvent::raised;
}

void count_dual_occlusion(PipelineState& s, Tick& t, bool both, const PipelineConfig& config) {
    if (!both) {
        s.consecutive_dual_occlusions = 0;
        return;
    }
    if (++s.consecutive_dual_occlusions >= config.occlusion_alert_frames) enter_alert(s, t);
}

void rgb_primary(PipelineState& s, Tick& t, const FrameBundle& b, EnhancedIr& ir,
                 const Backends& be, const PipelineConfig& config) {
    const std::int64_t f = b.frame_index;
    if (auto face = try_detect(be.detector, b.rgb, {f, Modality::rgb}, config.acquisition)) {
        note_detection(s.acquisition, *face, f);
        t.face = std::move(face);
        s.consecutive_rgb_failures = 0;
        s.consecutive_dual_occlusions = 0;
        return;
    }

    const bool rgb_occluded = occluded(be.occlusion, b.rgb, f, Modality::rgb, config);
    t.occlusion.rgb = rgb_occluded;
    if (!rgb_occluded) {
        s.consecutive_dual_occlusions = 0;
        t.face = try_estimate(s.acquisition, b.rgb, ir, config.acquisition);
        if (++s.consecutive_rgb_failures >= config.rgb_fail_switch_frames) {
            s.mode = Mode::ir_primary;
            s.consecutive_rgb_failures = 0;
            s.consecutive_rgb_successes = 0;
        }
        return;
    }

    // Occluded RGB: the failure is explained, so the no-face streak restarts.
    s.consecutive_rgb_failures = 0;
    const bool ir_occluded = occluded(be.occlusion, ir.raw(), f, Modality::ir, config);
    t.occlusion.ir = ir_occluded;
    count_dual_occlusion(s, t, ir_occluded, config);
    if (s.mode == Mode::alert) return;
    if (auto face = try_detect(be.detector, ir.enhanced(), {f, Modality::ir}, config.acquisition)) {
        note_detection(s.acquisition, *face, f);
        t.face = std::move(face);
    }
}

void ir_primary(PipelineState& s, Tick& t, const FrameBundle& b, EnhancedIr& ir,
                const Backends& be, const PipelineConfig& config) {
    const std::int64_t f = b.frame_index;
    t.rgb_probe = try_detect(be.detector, b.rgb, {f, Modality::rgb}, config.acquisition);
    s.consecutive_rgb_successes = t.rgb_probe ? s.consecutive_rgb_successes + 1 : 0;

    if (auto face = try_detect(be.detector, ir.enhanced(), {f, Modality::ir}, config.acquisition)) {
        note_detection(s.acquisition, *face, f);
        t.face = std::move(face);
        s.consecutive_dual_occlusions = 0;
    } else {
        const bool ir_occluded = occluded(be.occlusion, ir.raw(), f, Modality::ir, config);
        t.occlusion.ir = ir_occluded;
        if (!ir_occluded) {
            s.consecutive_dual_occlusions = 0;
            t.face = try_estimate(s.acquisition, b.rgb, ir, config.acquisition);
        } else if (t.rgb_probe) {
            // A face was found in RGB, so RGB is not obstructed.
            s.consecutive_dual_occlusions = 0;
        } else {
            const bool rgb_occluded = occluded(be.occlusion, b.rgb, f, Modality::rgb, config);
            t.occlusion.rgb = rgb_occluded;
            count_dual_occlusion(s, t, rgb_occluded, config);
            if (s.mode == Mode::alert) return;
        }
    }

    if (s.consecutive_rgb_successes >= config.rgb_recover_frames) {
        s.mode = Mode::rgb_primary;
        s.consecutive_rgb_successes = 0;
        s.consecutive_rgb_failures = 0;
    }
}

void alert_mode(PipelineState& s, Tick& t, const FrameBundle& b, EnhancedIr& ir,
                const Backends& be, const PipelineConfig& config) {
    const std::int64_t f = b.frame_index;
    t.occlusion.rgb = occluded(be.occlusion, b.rgb, f, Modality::rgb, config);
    t.occlusion.ir = occluded(be.occlusion, ir.raw(), f, Modality::ir, config);
    if (*t.occlusion.rgb || *t.occlusion.ir) return;

    auto found = try_detect(be.detector, b.rgb, {f, Modality::rgb}, config.acquisition);
    if (!found) found = try_detect(be.detector, ir.enhanced(), {f, Modality::ir}, config.acquisition);
    if (!found) return;

    const std::optional<std::int64_t> driver = s.current_driver;
    const int since_id = s.frames_since_id;
    s = PipelineState{};
    s.current_driver = driver;
    s.frames_since_id = since_id;
    note_detection(s.acquisition, *found, f);
    t.alert = AlertEvent::cleared;
}

Image gaze_input(const Image& face_crop, const PipelineConfig& config) {
    if (!config.gaze_preprocess) return face_crop;
    return center_crop(resize(face_crop, config.gaze_resize, config.gaze_resize), config.gaze_crop,
                       config.gaze_crop);
}

std::optional<Identification> identify_driver(PipelineState& s, const Tick& t, std::int64_t frame,
                                              const Backends& be, const PipelineConfig& config,
                                              IdentityDatabase& db) {
    // RGB crops are preferred; in IR mode the RGB probe may supply one.
    const AcquisitionResult* source = nullptr;
    if (t.face && t.face->modality == Modality::rgb) {
        source = &*t.face;
    } else if (t.rgb_probe) {
        source = &*t.rgb_probe;
    } else if (t.face) {
        source = &*t.face;
    }
    if (!source) return std::nullopt;

    const Embedding query = extract_embedding(be.embedder, source->crop, {frame, source->modality});
    Identification id;
    id.match = db.identify(query, config.match);
    if (id.match.matched) {
        s.current_driver = id.match.id;
        if (config.reinforce_on_match) db.reinforce(id.match.id, query);
    } else if (config.auto_register) {
        const IdentityRecord r = db.auto_register(query, config.auto_register_prefix);
        id.registered_id = r.id;
        s.current_driver = r.id;
    } else {
        s.current_driver.reset();
    }
    s.frames_since_id = 0;
    return id;
}

std::string sanitize(std::string msg) {
    std::replace_if(msg.begin(), msg.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
    return msg;
}

} // namespace

const char* to_string(Mode m) noexcept {
    switch (m) {
    case Mode::ir_primary: return "IR_PRIMARY";
    case Mode::alert: return "ALERT";
    case Mode::rgb_primary: break;
    }
    return "RGB_PRIMARY";
}

FrameOutput step(PipelineState& state, const FrameBundle& bundle, const Backends& backends,
                 const PipelineConfig& config, IdentityDatabase* db) {
    PipelineState next = state;
    FrameOutput out;
    out.frame_index = bundle.frame_index;
    try {
        EnhancedIr ir(bundle.ir, config.acquisition.clahe);
        Tick tick;
        const Mode before = state.mode;
        switch (before) {
        case Mode::rgb_primary: rgb_primary(next, tick, bundle, ir, backends, config); break;
        case Mode::ir_primary: ir_primary(next, tick, bundle, ir, backends, config); break;
        case Mode::alert: alert_mode(next, tick, bundle, ir, backends, config); break;
        }

        const bool active = before != Mode::alert && next.mode != Mode::alert;
        if (active && tick.face) {
            out.gaze = classify_gaze(backends.gaze, gaze_input(tick.face->crop, config),
                                     {bundle.frame_index, tick.face->modality});
            out.face = FaceSource{tick.face->outcome, tick.face->modality, tick.face->box};
        }
        if (active) {
            ++next.frames_since_id;
            if (db && next.frames_since_id >= config.id_period_frames) {
                out.identification = identify_driver(next, tick, bundle.frame_index, backends, config, *db);
            }
        }
        out.occlusion = tick.occlusion;
        out.alert = tick.alert;
    } catch (const BackendError& e) {
        FrameOutput degraded;
        degraded.frame_index = bundle.frame_index;
        degraded.mode = state.mode;
        degraded.degraded = sanitize(e.what());
        return degraded;
    }
    state = std::move(next);
    out.mode = state.mode;
    return out;
}

std::string trace_header() {
    return "# frame\tmode\tgaze\tface\tocc_rgb\tocc_ir\talert\tidentity\tdegraded";
}

std::string FrameOutput::to_record() const {
    auto flag = [](const std::optional<bool>& b) -> std::string {
        if (!b) return "-";
        return *b ? "1" : "0";
    };
    std::string r = std::to_string(frame_index);
    r += '\t';
    r += to_string(mode);
    r += '\t';
    r += gaze ? std::to_string(gaze->region) : "-";
    r += '\t';
    r += face ? std::string(to_string(face->outcome)) + ":" + to_string(face->modality) : "-";
    r += '\t' + flag(occlusion.rgb) + '\t' + flag(occlusion.ir) + '\t';
    r += alert ? (*alert == AlertEvent::raised ? "raised" : "cleared") : "-";
    r += '\t';
    if (identification) {
        const MatchResult& m = identification->match;
        const std::string sim = m.similarity ? text::format_fixed(*m.similarity, 6) : "-";
        if (m.matched) {
            r += std::string("matched:") + to_string(m.modality) + ":" + std::to_string(m.id) + ":" + sim;
        } else if (identification->registered_id) {
            r += std::string("registered:") + to_string(m.modality) + ":" +
                 std::to_string(*identification->registered_id) + ":" + sim;
        } else {
            r += std::string("unmatched:") + to_string(m.modality) + ":-:" + sim;
        }
    } else {
        r += '-';
    }
    r += '\t';
    r += degraded ? *degraded : "-";
    return r;
}

// --- frame sources ---

FrameBundle synthesize_frame(const ScenarioScript& script, std::int64_t frame_index) {
    FrameBundle b;
    b.frame_index = frame_index;
    b.rgb = Image(script.width, script.height, 3);
    b.ir = Image(script.width, script.height, 1);
    const auto phase = static_cast<unsigned>(frame_index & 0xFF);
    auto rgb = b.rgb.data();
    auto ir = b.ir.data();
    std::size_t i = 0;
    for (int y = 0; y < script.height; ++y) {
        for (int x = 0; x < script.width; ++x, ++i) {
            const unsigned base = static_cast<unsigned>(x * 7 + y * 5) + phase;
            rgb[3 * i] = static_cast<std::uint8_t>(base);
            rgb[3 * i + 1] = static_cast<std::uint8_t>(base * 3 + 17);
            rgb[3 * i + 2] = static_cast<std::uint8_t>(255 - (base & 0xFF));
            ir[i] = static_cast<std::uint8_t>(64 + ((x * 3 + y * 11 + phase) & 0x7F));
        }
    }
    return b;
}

std::optional<FrameBundle> ScenarioFrameSource::next() {
    if (pos_ >= script_.frames.size()) return std::nullopt;
    return synthesize_frame(script_, script_.frames[pos_++].frame_index);
}

PnmDirectorySource::PnmDirectorySource(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    static const std::regex pattern(R"(frame_(\d+)\.rgb\.pnm)");
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        std::smatch m;
        if (!std::regex_match(name, m, pattern)) continue;
        const std::filesystem::path ir = dir / ("frame_" + m[1].str() + ".ir.pnm");
        if (!std::filesystem::exists(ir)) throw IoError("missing IR pair " + ir.string());
        frames_.push_back({text::parse_int(m[1].str(), "frame index"), entry.path(), ir});
    }
    std::sort(frames_.begin(), frames_.end(), [](const Entry& a, const Entry& b) { return a.index < b.index; });
}

std::optional<FrameBundle> PnmDirectorySource::next() {
    if (pos_ >= frames_.size()) return std::nullopt;
    const Entry& e = frames_[pos_++];
    return FrameBundle{e.index, read_pnm_file(e.rgb.string()), read_pnm_file(e.ir.string())};
}

PipelineState run_stream(FrameSource& source, const Backends& backends, const PipelineConfig& config,
                         IdentityDatabase* db, const std::function<void(const FrameOutput&)>& sink,
                         PipelineState initial) {
    config.validate();
    PipelineState state = std::move(initial);
    std::optional<std::int64_t> last;
    while (auto bundle = source.next()) {
        if (last && bundle->frame_index <= *last) {
            throw InvalidArgument("frame indices must be strictly increasing (" +
                                  std::to_string(bundle->frame_index) + " after " +
                                  std::to_string(*last) + ")");
        }
        last = bundle->frame_index;
        sink(step(state, *bundle, backends, config, db));
    }
    return state;
}

std::vector<FrameOutput> run_stream(FrameSource& source, const Backends& backends,
                                    const PipelineConfig& config, IdentityDatabase* db,
                                    PipelineState* final_state) {
    std::vector<FrameOutput> outputs;
    PipelineState s = run_stream(source, backends, config, db,
                                 [&](const FrameOutput& o) { outputs.push_back(o); });
    if (final_state) *final_state = std::move(s);
    return outputs;
}

} // namespace dms
