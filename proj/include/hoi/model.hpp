#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hoi/data.hpp"
#include "hoi/features.hpp"
#include "hoi/layers.hpp"

namespace hoi {

enum class GazeMode { kNone, kConcat, kCross };
enum class PeMode { kSine, kLearned };
enum class WindowMode { kPairwise, kFramewise };
enum class HeadActivation { kSigmoid, kSoftmax };

std::string to_string(GazeMode mode);
std::string to_string(PeMode mode);
std::string to_string(WindowMode mode);
GazeMode gaze_mode_from_string(const std::string& s);
PeMode pe_mode_from_string(const std::string& s);
WindowMode window_mode_from_string(const std::string& s);

struct PredictionHeadSpec {
    std::string name;
    int classes = 0;
    HeadActivation activation = HeadActivation::kSigmoid;
};

struct ModelConfig {
    int visual_dim = 2048;
    int semantic_dim = 200;
    int d_human = 512;
    int d_object = 512;
    int d_rel = 256;
    int d_mask = 256;
    int d_gaze = 512;
    int conv_c1 = 32;
    int conv_c2 = 64;
    int d_ffn = 2048;
    int heads = 8;
    int n_sp = 1;
    int n_tmp = 3;
    int window_length = 6;
    double dropout = 0.1;
    GazeMode gaze_mode = GazeMode::kCross;
    PeMode pe_mode = PeMode::kSine;
    WindowMode window_mode = WindowMode::kPairwise;
    bool global_token = true;
    // Human-human pairs: whether the target person's visual feature goes
    // through the object projection (default) or the subject projection.
    bool human_pair_object_projection = true;
    std::vector<PredictionHeadSpec> heads_spec = {{"spatial", 8, HeadActivation::kSigmoid},
                                                  {"action", 42, HeadActivation::kSigmoid}};

    // Concatenated pair representation before any gaze concatenation.
    int d_pair() const { return d_human + d_object + d_rel + d_mask + semantic_dim; }
    // Width the encoders operate on.
    int d_model() const { return gaze_mode == GazeMode::kConcat ? d_pair() + d_gaze : d_pair(); }
    // Context projection input: [c_t | g'] under cross, c_t alone otherwise.
    int d_context_in() const {
        return gaze_mode == GazeMode::kCross ? d_pair() + d_gaze : d_pair();
    }
    int num_outputs() const {
        int n = 0;
        for (const auto& h : heads_spec) n += h.classes;
        return n;
    }
    void validate() const;
};

class HoiModel {
public:
    HoiModel(ModelConfig config, uint64_t init_seed);

    struct EmbeddedPair {
        Var x;           // 1 x d_model pair representation
        Var gaze_embed;  // 1 x d_gaze projected gaze feature g'
    };
    EmbeddedPair embed_inputs(const FeatureBundle& bundle) const;

    // Spatial encoder over one frame's pair representations. Returns the
    // refined representations (input order) and the frame's global feature.
    struct SpatialOut {
        std::vector<Var> refined;
        Var global;
    };
    SpatialOut spatial_encode(const std::vector<Var>& pair_reps, const Dropout& dropout) const;

    // Per-frame context vector [c_t | g'] (or c_t alone) projected to d_model.
    Var build_context_vector(const Var& global_feature, const Var& gaze_embed) const;
    // Full context window, positional encoding not yet applied.
    Var build_context(const std::vector<Var>& global_sequence,
                      const std::vector<Var>& gaze_sequence) const;

    // Temporal encoder over one pair window; returns the final position's
    // fused vector (1 x d_model). context_window may be empty in concat mode.
    Var temporal_encode(const Var& pair_window, const Var& context_window,
                        const Dropout& dropout) const;

    struct HeadOutput {
        std::string name;
        Var probs;
        Var logits;
    };
    std::vector<HeadOutput> predict(const Var& fused) const;
    // Concatenation of all head probabilities / logits, 1 x num_outputs.
    Var predict_probs(const Var& fused) const;
    Var predict_logits(const Var& fused) const;

    struct ForwardResult {
        std::vector<Var> probs;   // per window, 1 x num_outputs
        std::vector<Var> logits;  // per window, 1 x num_outputs
    };
    // Batched forward with shared per-frame encodings. `dropout_rng` must be
    // non-null when training.
    ForwardResult forward(const Dataset& dataset, const FeatureProvider& provider,
                          const std::vector<WindowSample>& batch, bool training,
                          Rng* dropout_rng) const;

    // Structural summary of the temporal encoder, e.g. {"cross", "self", "self"}.
    std::vector<std::string> temporal_layer_kinds() const;

    const std::vector<std::pair<std::string, Var>>& parameters() const {
        return params_.entries();
    }
    const ModelConfig& config() const { return config_; }

    // Positional encoding row for a window slot (1 x d_model).
    Var positional_row(int slot) const;

private:
    Var add_positional(const Var& window) const;
    EmbeddedPair embed_pair_with_gaze(const FeatureBundle& bundle, const Var& gaze_embed) const;

    ModelConfig config_;
    ParamRegistry params_;

    Linear proj_subject_, proj_object_, proj_relation_;
    ConvStack mask_net_, gaze_net_;
    Var global_token_;
    std::vector<EncoderLayer> spatial_layers_;
    Linear context_proj_;
    std::unique_ptr<CrossEncoderLayer> cross_layer_;
    std::vector<EncoderLayer> temporal_layers_;
    std::vector<Linear> heads_;
    Tensor sine_pe_;
    Var learned_pe_;
};

}  // namespace hoi
