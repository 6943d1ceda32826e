#include "dms/backends.hpp"

#include "dms/error.hpp"

#include <cmath>
#include <string>

namespace dms {

namespace {

template <typename F>
auto guarded(const char* what, F&& call) {
    try {
        return call();
    } catch (const BackendError&) {
        throw;
    } catch (const std::exception& e) {
        throw BackendError(std::string(what) + " failed: " + e.what());
    }
}

int argmax_region(const std::array<double, kGazeRegions>& scores) {
    int best = 0;
    for (int r = 1; r < kGazeRegions; ++r) {
        if (scores[static_cast<std::size_t>(r)] > scores[static_cast<std::size_t>(best)]) best = r;
    }
    return best + 1;
}

void check_scores(const std::array<double, kGazeRegions>& scores) {
    double sum = 0.0;
    for (double s : scores) {
        if (!std::isfinite(s) || s < 0.0) throw BackendError("gaze scores must be finite and >= 0");
        sum += s;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw BackendError("gaze scores sum to " + std::to_string(sum) + ", expected 1");
    }
}

} // namespace

const std::array<const char*, kGazeRegions>& gaze_region_names() {
    static const std::array<const char*, kGazeRegions> names{
        "left_mirror", "left",  "front",        "center_mirror",  "front_right",
        "right_mirror", "right", "infotainment", "steering_wheel"};
    return names;
}

GazePrediction gaze_from_scores(const std::array<double, kGazeRegions>& scores) {
    check_scores(scores);
    return {argmax_region(scores), scores};
}

OcclusionPrediction occlusion_from_score(double score, double threshold) {
    if (!(score >= 0.0 && score <= 1.0)) {
        throw BackendError("occlusion score " + std::to_string(score) + " outside [0,1]");
    }
    return {score >= threshold, score};
}

void validate_embedding(const Embedding& e) {
    if (e.values.empty()) throw InvalidArgument("embedding is empty");
    double norm2 = 0.0;
    for (double v : e.values) {
        if (!std::isfinite(v)) throw InvalidArgument("embedding has a non-finite entry");
        norm2 += v * v;
    }
    if (norm2 == 0.0) throw InvalidArgument("embedding has zero norm");
}

std::vector<FaceDetection> detect_faces(const FaceDetector& detector, const Image& img,
                                        const InferenceContext& ctx) {
    auto found = guarded("face detector", [&] { return detector.detect(img, ctx); });
    for (const auto& d : found) {
        if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
            throw BackendError("face detector returned confidence outside [0,1]");
        }
        if (d.box.w <= 0 || d.box.h <= 0) {
            throw BackendError("face detector returned an empty box");
        }
    }
    return found;
}

GazePrediction classify_gaze(const GazeClassifier& classifier, const Image& face_crop,
                             const InferenceContext& ctx) {
    if (face_crop.empty()) throw InvalidArgument("gaze classification needs a non-empty crop");
    const GazePrediction p = guarded("gaze classifier", [&] { return classifier.classify(face_crop, ctx); });
    check_scores(p.scores);
    if (p.region != argmax_region(p.scores)) {
        throw BackendError("gaze classifier region " + std::to_string(p.region) +
                           " disagrees with its scores");
    }
    return p;
}

OcclusionPrediction classify_occlusion(const OcclusionClassifier& classifier, const Image& img,
                                       const InferenceContext& ctx, double threshold) {
    const double score = guarded("occlusion classifier", [&] { return classifier.occlusion_score(img, ctx); });
    return occlusion_from_score(score, threshold);
}

Embedding extract_embedding(const EmbeddingExtractor& extractor, const Image& face_crop,
                            const InferenceContext& ctx) {
    if (face_crop.empty()) throw InvalidArgument("embedding extraction needs a non-empty crop");
    Embedding e{guarded("embedding extractor", [&] { return extractor.embed(face_crop, ctx); }),
                ctx.modality};
    try {
        validate_embedding(e);
    } catch (const InvalidArgument& err) {
        throw BackendError(std::string("embedding extractor: ") + err.what());
    }
    return e;
}

} // namespace dms
