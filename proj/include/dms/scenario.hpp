#pragma once

#include "dms/backends.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dms {

/// Deterministic stand-in for a face-embedding network: each identity seed
/// owns a fixed random unit direction, and every capture adds a random
/// perturbation of exactly `noise` L2 length before renormalising.
class MockEmbeddingGenerator {
public:
    MockEmbeddingGenerator(int dim, double noise);

    int dim() const noexcept { return dim_; }
    double noise() const noexcept { return noise_; }

    /// Unit vector owned by `identity_seed`.
    std::vector<double> base(std::uint64_t identity_seed) const;

    /// One noisy capture of `identity_seed`; `nonce` picks the perturbation.
    std::vector<double> sample(std::uint64_t identity_seed, std::uint64_t nonce) const;

private:
    int dim_;
    double noise_;
};

/// Scripted outputs for one frame. Detections are listed per modality;
/// an empty list means the detector finds nothing.
struct ScriptedFrame {
    std::int64_t frame_index = 0;
    std::vector<FaceDetection> rgb_detections;
    std::vector<FaceDetection> ir_detections;
    int gaze_region = 1;
    bool occluded_rgb = false;
    bool occluded_ir = false;
    std::uint64_t identity_seed = 0;

    bool operator==(const ScriptedFrame&) const = default;
};

/// Line-oriented scenario file.
///
///   dms-scenario v1 dim=<D> noise=<n> [width=<W> height=<H>]
///   <frame> <rgb> <ir> <gaze 1..9> <occluded_rgb 0|1> <occluded_ir 0|1> <identity_seed>
///
/// <rgb>/<ir> are "-" or one or more "x,y,w,h,conf" joined by ';'.
/// Blank lines and lines starting with '#' are ignored. Frame indices
/// must be strictly increasing. width/height size the synthetic frames
/// used in mock mode (default 64x48).
struct ScenarioScript {
    int dim = 128;
    double noise = 0.05;
    int width = 64;
    int height = 48;
    std::vector<ScriptedFrame> frames;

    /// Throws ParseError describing the first violated rule.
    void validate() const;

    const ScriptedFrame* find(std::int64_t frame_index) const;

    std::string serialize() const;
    static ScenarioScript parse(std::string_view text);
    static ScenarioScript load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    bool operator==(const ScenarioScript&) const = default;
};

/// Every model answered from a script. Gaze scores put 0.92 on the scripted
/// region and 0.01 elsewhere; occlusion scores are 0.95 / 0.05.
class ScriptedBackend final : public FaceDetector,
                              public GazeClassifier,
                              public OcclusionClassifier,
                              public EmbeddingExtractor {
public:
    explicit ScriptedBackend(ScenarioScript script);

    const ScenarioScript& script() const noexcept { return script_; }
    Backends backends() const { return {*this, *this, *this, *this}; }

    std::vector<FaceDetection> detect(const Image& img, const InferenceContext& ctx) const override;
    GazePrediction classify(const Image& face_crop, const InferenceContext& ctx) const override;
    double occlusion_score(const Image& img, const InferenceContext& ctx) const override;
    std::vector<double> embed(const Image& face_crop, const InferenceContext& ctx) const override;

    /// Nonce used for the embedding perturbation of a frame/modality.
    static std::uint64_t capture_nonce(std::int64_t frame_index, Modality modality);

private:
    const ScriptedFrame& frame(const InferenceContext& ctx) const;

    ScenarioScript script_;
    MockEmbeddingGenerator generator_;
};

} // namespace dms
