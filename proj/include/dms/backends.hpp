#pragma once

#include "dms/image.hpp"
#include "dms/modality.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace dms {

inline constexpr int kGazeRegions = 9;
inline constexpr double kDefaultDetectorConfidence = 0.97;
inline constexpr double kDefaultOcclusionThreshold = 0.5;

/// Region names in label order; region r is gaze_region_names()[r - 1].
const std::array<const char*, kGazeRegions>& gaze_region_names();

struct FaceDetection {
    BoundingBox box;
    double confidence = 0.0;
    bool operator==(const FaceDetection&) const = default;
};

struct GazePrediction {
    int region = 1; // 1..9
    std::array<double, kGazeRegions> scores{};
    bool operator==(const GazePrediction&) const = default;
};

/// Builds a prediction from raw scores: region is the argmax, earliest
/// region on ties. Throws BackendError if the scores are not a distribution.
GazePrediction gaze_from_scores(const std::array<double, kGazeRegions>& scores);

struct OcclusionPrediction {
    bool occluded = false;
    double score = 0.0; // probability of occlusion
    bool operator==(const OcclusionPrediction&) const = default;
};

OcclusionPrediction occlusion_from_score(double score, double threshold = kDefaultOcclusionThreshold);

struct Embedding {
    std::vector<double> values;
    Modality modality = Modality::rgb;

    std::size_t dim() const noexcept { return values.size(); }
    bool operator==(const Embedding&) const = default;
};

/// Throws InvalidArgument for empty, non-finite or zero-norm vectors.
void validate_embedding(const Embedding& e);

/// What a backend call refers to. Model backends ignore it; the scripted
/// backend uses it to look up its per-frame outputs.
struct InferenceContext {
    std::int64_t frame_index = 0;
    Modality modality = Modality::rgb;
};

// Model interfaces. Implementations must be safe to call concurrently and
// report failures by throwing; "nothing found" is an empty or negative result.

class FaceDetector {
public:
    virtual ~FaceDetector() = default;
    virtual std::vector<FaceDetection> detect(const Image& img, const InferenceContext& ctx) const = 0;
};

class GazeClassifier {
public:
    virtual ~GazeClassifier() = default;
    virtual GazePrediction classify(const Image& face_crop, const InferenceContext& ctx) const = 0;
};

class OcclusionClassifier {
public:
    virtual ~OcclusionClassifier() = default;
    /// Probability in [0,1] that the face is occluded.
    virtual double occlusion_score(const Image& img, const InferenceContext& ctx) const = 0;
};

class EmbeddingExtractor {
public:
    virtual ~EmbeddingExtractor() = default;
    virtual std::vector<double> embed(const Image& face_crop, const InferenceContext& ctx) const = 0;
};

struct Backends {
    const FaceDetector& detector;
    const GazeClassifier& gaze;
    const OcclusionClassifier& occlusion;
    const EmbeddingExtractor& embedder;
};

// Boundary calls. Each validates the backend's output and converts stray
// exceptions into BackendError so callers see one failure type.

std::vector<FaceDetection> detect_faces(const FaceDetector& detector, const Image& img,
                                        const InferenceContext& ctx);

/// Rejects predictions whose region is not the argmax of their scores.
GazePrediction classify_gaze(const GazeClassifier& classifier, const Image& face_crop,
                             const InferenceContext& ctx);

OcclusionPrediction classify_occlusion(const OcclusionClassifier& classifier, const Image& img,
                                       const InferenceContext& ctx,
                                       double threshold = kDefaultOcclusionThreshold);

Embedding extract_embedding(const EmbeddingExtractor& extractor, const Image& face_crop,
                            const InferenceContext& ctx);

} // namespace dms
