#pragma once

#include "dms/backends.hpp"

#include <cstdint>
#include <optional>

namespace dms {

struct AcquisitionConfig {
    double conf_threshold = kDefaultDetectorConfidence;
    bool estimated_bb_enabled = true;
    int max_estimated_frames = 5;
    double estimated_bb_expand = 0.20;
    ClaheParams clahe;
};

/// Largest-area detection with confidence >= threshold; the earliest one
/// wins an area tie.
std::optional<FaceDetection> select_face(const std::vector<FaceDetection>& detections, double threshold);

/// The IR frame of a tick plus its CLAHE enhancement, computed on first use.
class EnhancedIr {
public:
    EnhancedIr(const Image& raw, const ClaheParams& params) : raw_(raw), params_(params) {}

    const Image& raw() const noexcept { return raw_; }
    const Image& enhanced();
    bool computed() const noexcept { return enhanced_.has_value(); }

private:
    const Image& raw_;
    ClaheParams params_;
    std::optional<Image> enhanced_;
};

enum class AcquisitionOutcome { none, detected, estimated };

const char* to_string(AcquisitionOutcome o) noexcept;

struct AcquisitionResult {
    AcquisitionOutcome outcome = AcquisitionOutcome::none;
    BoundingBox box;
    Modality modality = Modality::rgb;
    double confidence = 0.0; // detected only
    /// Frame the box came from: this frame when detected, the last real
    /// detection's frame when estimated.
    std::int64_t source_frame = 0;
    Image crop; // empty when outcome is none

    bool has_face() const noexcept { return outcome != AcquisitionOutcome::none; }
};

struct LastDetection {
    BoundingBox box;
    Modality modality = Modality::rgb;
    std::int64_t frame_index = 0;
    bool operator==(const LastDetection&) const = default;
};

struct AcquisitionState {
    std::optional<LastDetection> last_detection;
    int consecutive_estimated = 0;

    void reset() noexcept { *this = {}; }
    bool operator==(const AcquisitionState&) const = default;
};

/// One detector pass over `img` (already enhanced for IR). Returns the
/// selected face cropped from `img`, or nothing.
std::optional<AcquisitionResult> try_detect(const FaceDetector& detector, const Image& img,
                                            const InferenceContext& ctx, const AcquisitionConfig& config);

/// Records a real detection: remembers its box and clears the estimate budget.
void note_detection(AcquisitionState& state, const AcquisitionResult& detected, std::int64_t frame_index);

/// Estimated box from the last real detection, expanded once and cropped
/// from the same modality. Consumes one unit of the estimate budget.
std::optional<AcquisitionResult> try_estimate(AcquisitionState& state, const Image& rgb, EnhancedIr& ir,
                                              const AcquisitionConfig& config);

/// Full fallback chain for one frame: RGB detection, then detection on the
/// CLAHE-enhanced IR frame, then the estimated box, else none.
AcquisitionResult acquire(AcquisitionState& state, const Image& rgb, const Image& ir,
                          std::int64_t frame_index, const FaceDetector& detector,
                          const AcquisitionConfig& config = {});

} // namespace dms
