#include "dms/face_acquisition.hpp"

#include "dms/error.hpp"

namespace dms {

std::optional<FaceDetection> select_face(const std::vector<FaceDetection>& detections, double threshold) {
    std::optional<FaceDetection> best;
    for (const auto& d : detections) {
        if (d.confidence < threshold) continue;
        if (!best || d.box.area() > best->box.area()) best = d;
    }
    return best;
}

const Image& EnhancedIr::enhanced() {
    if (!enhanced_) enhanced_ = clahe(to_grayscale(raw_), params_);
    return *enhanced_;
}

const char* to_string(AcquisitionOutcome o) noexcept {
    switch (o) {
    case AcquisitionOutcome::detected: return "detected";
    case AcquisitionOutcome::estimated: return "estimated";
    case AcquisitionOutcome::none: break;
    }
    return "none";
}

std::optional<AcquisitionResult> try_detect(const FaceDetector& detector, const Image& img,
                                            const InferenceContext& ctx, const AcquisitionConfig& config) {
    const auto face = select_face(detect_faces(detector, img, ctx), config.conf_threshold);
    if (!face) return std::nullopt;
    const BoundingBox box = clamp_box(face->box, img.width(), img.height());
    if (box.w <= 0 || box.h <= 0) return std::nullopt;
    AcquisitionResult r;
    r.outcome = AcquisitionOutcome::detected;
    r.box = box;
    r.modality = ctx.modality;
    r.confidence = face->confidence;
    r.source_frame = ctx.frame_index;
    r.crop = crop(img, box);
    return r;
}

void note_detection(AcquisitionState& state, const AcquisitionResult& detected, std::int64_t frame_index) {
    state.last_detection = LastDetection{detected.box, detected.modality, frame_index};
    state.consecutive_estimated = 0;
}

std::optional<AcquisitionResult> try_estimate(AcquisitionState& state, const Image& rgb, EnhancedIr& ir,
                                              const AcquisitionConfig& config) {
    if (!config.estimated_bb_enabled || !state.last_detection ||
        state.consecutive_estimated >= config.max_estimated_frames) {
        return std::nullopt;
    }
    const LastDetection& last = *state.last_detection;
    const Image& source = last.modality == Modality::rgb ? rgb : ir.enhanced();
    AcquisitionResult r;
    r.outcome = AcquisitionOutcome::estimated;
    r.box = expand_box(last.box, config.estimated_bb_expand, source.width(), source.height());
    r.modality = last.modality;
    r.source_frame = last.frame_index;
    r.crop = crop(source, r.box);
    ++state.consecutive_estimated;
    return r;
}

AcquisitionResult acquire(AcquisitionState& state, const Image& rgb, const Image& ir,
                          std::int64_t frame_index, const FaceDetector& detector,
                          const AcquisitionConfig& config) {
    EnhancedIr enhanced(ir, config.clahe);
    for (const Modality m : {Modality::rgb, Modality::ir}) {
        const Image& img = m == Modality::rgb ? rgb : enhanced.enhanced();
        if (auto r = try_detect(detector, img, {frame_index, m}, config)) {
            note_detection(state, *r, frame_index);
            return std::move(*r);
        }
    }
    if (auto r = try_estimate(state, rgb, enhanced, config)) return std::move(*r);
    AcquisitionResult none;
    none.source_frame = frame_index;
    return none;
}

} // namespace dms
