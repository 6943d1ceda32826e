#pragma once

#include "dms/backends.hpp"
#include "dms/face_acquisition.hpp"
#include "dms/identity.hpp"
#include "dms/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dms {

enum class Mode { rgb_primary, ir_primary, alert };

const char* to_string(Mode m) noexcept;

/// Every tunable of the per-frame state machine. Frame counts are
/// hysteresis lengths: a transition fires on the N-th consecutive frame.
struct PipelineConfig {
    int occlusion_alert_frames = 10;
    int rgb_fail_switch_frames = 30;
    int rgb_recover_frames = 15;
    int id_period_frames = 300;
    AcquisitionConfig acquisition;
    double occlusion_threshold = kDefaultOcclusionThreshold;
    MatchThresholds match;
    bool auto_register = false;
    std::string auto_register_prefix = "driver-";
    bool reinforce_on_match = false;
    bool gaze_preprocess = true;
    int gaze_resize = 256;
    int gaze_crop = 224;

    /// Throws ConfigError naming the first bad field.
    void validate() const;

    /// Sets one field from its config-file key; throws ConfigError for
    /// unknown keys or unparsable values.
    void set(std::string_view key, std::string_view value);

    /// Flat "key=value" lines, '#' comments allowed.
    static PipelineConfig parse(std::string_view text);
    static PipelineConfig load(const std::filesystem::path& path);
    std::string serialize() const;
};

struct PipelineState {
    Mode mode = Mode::rgb_primary;
    AcquisitionState acquisition;
    int consecutive_rgb_failures = 0;
    int consecutive_rgb_successes = 0;
    int consecutive_dual_occlusions = 0;
    int frames_since_id = 0;
    std::optional<std::int64_t> current_driver;

    bool operator==(const PipelineState&) const = default;
};

/// Synchronised RGB + IR pair for one tick.
struct FrameBundle {
    std::int64_t frame_index = 0;
    Image rgb;
    Image ir;
};

enum class AlertEvent { raised, cleared };

/// Occlusion classifier verdicts evaluated this frame; unset = not run.
struct OcclusionEvents {
    std::optional<bool> rgb;
    std::optional<bool> ir;
    bool operator==(const OcclusionEvents&) const = default;
};

struct FaceSource {
    AcquisitionOutcome outcome = AcquisitionOutcome::none;
    Modality modality = Modality::rgb;
    BoundingBox box;
    bool operator==(const FaceSource&) const = default;
};

struct Identification {
    MatchResult match;
    std::optional<std::int64_t> registered_id; // set when auto-registration ran
    bool operator==(const Identification&) const = default;
};

struct FrameOutput {
    std::int64_t frame_index = 0;
    Mode mode = Mode::rgb_primary; // after processing
    std::optional<GazePrediction> gaze;
    std::optional<FaceSource> face; // crop that fed the gaze classifier
    OcclusionEvents occlusion;
    std::optional<AlertEvent> alert;
    std::optional<Identification> identification;
    std::optional<std::string> degraded; // backend failure message

    bool operator==(const FrameOutput&) const = default;

    /// One tab-separated trace line (no newline), fields in the order of
    /// trace_header().
    std::string to_record() const;
};

/// "# frame mode gaze face occ_rgb occ_ir alert identity degraded", tab-separated.
std::string trace_header();

/// Advances the state machine by one frame. Backend failures leave `state`
/// untouched and come back as a degraded output. `db` may be null, which
/// disables identification.
FrameOutput step(PipelineState& state, const FrameBundle& bundle, const Backends& backends,
                 const PipelineConfig& config, IdentityDatabase* db);

class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual std::optional<FrameBundle> next() = 0;
};

/// Deterministic synthetic frames, one per scripted frame index.
class ScenarioFrameSource final : public FrameSource {
public:
    explicit ScenarioFrameSource(const ScenarioScript& script) : script_(script) {}
    std::optional<FrameBundle> next() override;

private:
    const ScenarioScript& script_;
    std::size_t pos_ = 0;
};

/// Textured synthetic pair of the scenario's frame size.
FrameBundle synthesize_frame(const ScenarioScript& script, std::int64_t frame_index);

/// Paired files frame_<n>.rgb.pnm / frame_<n>.ir.pnm, in index order.
class PnmDirectorySource final : public FrameSource {
public:
    explicit PnmDirectorySource(const std::filesystem::path& dir);
    std::optional<FrameBundle> next() override;
    std::size_t size() const noexcept { return frames_.size(); }

private:
    struct Entry {
        std::int64_t index;
        std::filesystem::path rgb;
        std::filesystem::path ir;
    };
    std::vector<Entry> frames_;
    std::size_t pos_ = 0;
};

/// Folds `step` over the source. Throws InvalidArgument if frame indices
/// are not strictly increasing.
PipelineState run_stream(FrameSource& source, const Backends& backends, const PipelineConfig& config,
                         IdentityDatabase* db, const std::function<void(const FrameOutput&)>& sink,
                         PipelineState initial = {});

std::vector<FrameOutput> run_stream(FrameSource& source, const Backends& backends,
                                    const PipelineConfig& config, IdentityDatabase* db,
                                    PipelineState* final_state = nullptr);

} // namespace dms
