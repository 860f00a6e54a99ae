#include "hoi/model.hpp"

#include <algorithm>
#include <tuple>

namespace hoi {

std::string to_string(GazeMode mode) {
    switch (mode) {
        case GazeMode::kNone: return "none";
        case GazeMode::kConcat: return "concat";
        case GazeMode::kCross: return "cross";
    }
    return "?";
}

std::string to_string(PeMode mode) { return mode == PeMode::kSine ? "sine" : "learned"; }

std::string to_string(WindowMode mode) {
    return mode == WindowMode::kPairwise ? "pairwise" : "framewise";
}

GazeMode gaze_mode_from_string(const std::string& s) {
    if (s == "none") return GazeMode::kNone;
    if (s == "concat") return GazeMode::kConcat;
    if (s == "cross") return GazeMode::kCross;
    throw SchemaError("unknown gaze mode '" + s + "'");
}

PeMode pe_mode_from_string(const std::string& s) {
    if (s == "sine") return PeMode::kSine;
    if (s == "learned") return PeMode::kLearned;
    throw SchemaError("unknown positional encoding mode '" + s + "'");
}

WindowMode window_mode_from_string(const std::string& s) {
    if (s == "pairwise") return WindowMode::kPairwise;
    if (s == "framewise") return WindowMode::kFramewise;
    throw SchemaError("unknown window mode '" + s + "'");
}

void ModelConfig::validate() const {
    auto positive = [](int v, const char* what) {
        if (v < 1) throw SchemaError(std::string(what) + " must be positive");
    };
    positive(visual_dim, "visual_dim");
    positive(semantic_dim, "semantic_dim");
    positive(d_human, "d_human");
    positive(d_object, "d_object");
    positive(d_rel, "d_rel");
    positive(d_mask, "d_mask");
    positive(d_gaze, "d_gaze");
    positive(conv_c1, "conv_c1");
    positive(conv_c2, "conv_c2");
    positive(d_ffn, "d_ffn");
    positive(heads, "heads");
    positive(n_sp, "n_sp");
    positive(n_tmp, "n_tmp");
    positive(window_length, "window_length");
    if (dropout < 0.0 || dropout >= 1.0) throw SchemaError("dropout must be in [0,1)");
    if (heads_spec.empty()) throw SchemaError("at least one prediction head is required");
    for (const auto& h : heads_spec)
        if (h.classes < 1) throw SchemaError("prediction head '" + h.name + "' has no classes");
    if (window_mode == WindowMode::kFramewise && gaze_mode == GazeMode::kCross)
        throw SchemaError("framewise windows have no per-human context; use gaze none or concat");
    if (pe_mode == PeMode::kSine && d_model() % 2 != 0)
        throw SchemaError("sinusoidal positional encoding needs an even model width (got " +
                          std::to_string(d_model()) + ")");
}

namespace {

Tensor mask_to_tensor(const SpatialMask& mask) {
    Tensor t({2, kSpatialMaskGrid, kSpatialMaskGrid});
    for (int ch = 0; ch < 2; ++ch)
        for (int r = 0; r < kSpatialMaskGrid; ++r)
            for (int c = 0; c < kSpatialMaskGrid; ++c)
                t.at3(ch, r, c) = mask.cells[static_cast<size_t>(ch)][static_cast<size_t>(r)]
                                            [static_cast<size_t>(c)];
    return t;
}

Tensor gaze_to_tensor(const std::vector<double>& gaze) {
    if (static_cast<int>(gaze.size()) != kGazeGrid * kGazeGrid)
        throw ShapeError("gaze grid must be " + std::to_string(kGazeGrid * kGazeGrid) + " cells");
    Tensor t({1, kGazeGrid, kGazeGrid});
    for (int i = 0; i < t.size(); ++i) t.flat(i) = gaze[static_cast<size_t>(i)];
    return t;
}

Var row_constant(const std::vector<double>& values) { return constant(Tensor::row_vector(values)); }

}  // namespace

HoiModel::HoiModel(ModelConfig config, uint64_t init_seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(hash_key(init_seed, 0x4d4f44454cULL));  // "MODEL"
    const int d = config_.d_model();

    proj_subject_ = Linear(params_, "embed.subject", config_.visual_dim, config_.d_human, rng);
    proj_object_ = Linear(params_, "embed.object", config_.visual_dim, config_.d_object, rng);
    proj_relation_ = Linear(params_, "embed.relation", config_.visual_dim, config_.d_rel, rng);
    mask_net_ = ConvStack(params_, "embed.mask", 2, config_.conv_c1, config_.conv_c2,
                          config_.d_mask, rng);
    gaze_net_ = ConvStack(params_, "embed.gaze", 1, config_.conv_c1, config_.conv_c2,
                          config_.d_gaze, rng);

    if (config_.global_token) {
        Tensor token({1, d});
        for (int i = 0; i < token.size(); ++i) token.flat(i) = 0.02 * rng.normal();
        global_token_ = params_.add("spatial.global_token", std::move(token));
    }
    for (int i = 0; i < config_.n_sp; ++i)
        spatial_layers_.emplace_back(params_, "spatial.layer" + std::to_string(i), d,
                                     config_.d_ffn, config_.heads, rng);

    const bool has_context =
        config_.window_mode == WindowMode::kPairwise && config_.gaze_mode != GazeMode::kConcat;
    if (has_context) {
        context_proj_ = Linear(params_, "temporal.context_proj", config_.d_context_in(), d, rng);
        cross_layer_ = std::make_unique<CrossEncoderLayer>(params_, "temporal.layer0", d,
                                                           config_.d_ffn, config_.heads, rng);
        for (int i = 1; i < config_.n_tmp; ++i)
            temporal_layers_.emplace_back(params_, "temporal.layer" + std::to_string(i), d,
                                          config_.d_ffn, config_.heads, rng);
    } else {
        for (int i = 0; i < config_.n_tmp; ++i)
            temporal_layers_.emplace_back(params_, "temporal.layer" + std::to_string(i), d,
                                          config_.d_ffn, config_.heads, rng);
    }

    for (const auto& spec : config_.heads_spec)
        heads_.emplace_back(params_, "head." + spec.name, d, spec.classes, rng);

    if (config_.pe_mode == PeMode::kSine) {
        sine_pe_ = sinusoidal_pe(config_.window_length, d);
    } else {
        Tensor pe({config_.window_length, d});
        for (int i = 0; i < pe.size(); ++i) pe.flat(i) = 0.02 * rng.normal();
        learned_pe_ = params_.add("temporal.learned_pe", std::move(pe));
    }
}

HoiModel::EmbeddedPair HoiModel::embed_inputs(const FeatureBundle& bundle) const {
    const Var gaze_embed = l2_normalize_row(gaze_net_.apply(constant(gaze_to_tensor(bundle.gaze))));
    return embed_pair_with_gaze(bundle, gaze_embed);
}

HoiModel::EmbeddedPair HoiModel::embed_pair_with_gaze(const FeatureBundle& bundle,
                                                      const Var& gaze_embed) const {
    auto check_dim = [](const std::vector<double>& v, int expected, const char* what) {
        if (static_cast<int>(v.size()) != expected)
            throw ShapeError(std::string(what) + " has length " + std::to_string(v.size()) +
                             ", expected " + std::to_string(expected));
    };
    check_dim(bundle.v_subject, config_.visual_dim, "subject visual feature");
    check_dim(bundle.v_object, config_.visual_dim, "object visual feature");
    check_dim(bundle.v_relation, config_.visual_dim, "relation visual feature");
    check_dim(bundle.semantic, config_.semantic_dim, "semantic feature");

    const bool target_is_human = bundle.target_class == kHumanClassId;
    const Linear& object_proj =
        (target_is_human && !config_.human_pair_object_projection) ? proj_subject_ : proj_object_;
    // The subject and object projections can have different widths; a
    // subject-projected target must still fill the object slot's width.
    if (&object_proj == &proj_subject_ && config_.d_human != config_.d_object)
        throw ShapeError("subject projection for human targets requires d_human == d_object");

    std::vector<Var> parts;
    parts.push_back(l2_normalize_row(proj_subject_.apply(row_constant(bundle.v_subject))));
    parts.push_back(l2_normalize_row(object_proj.apply(row_constant(bundle.v_object))));
    parts.push_back(l2_normalize_row(proj_relation_.apply(row_constant(bundle.v_relation))));
    parts.push_back(l2_normalize_row(mask_net_.apply(constant(mask_to_tensor(bundle.mask)))));
    parts.push_back(l2_normalize_row(row_constant(bundle.semantic)));
    if (config_.gaze_mode == GazeMode::kConcat) parts.push_back(gaze_embed);
    return {concat_cols(parts), gaze_embed};
}

HoiModel::SpatialOut HoiModel::spatial_encode(const std::vector<Var>& pair_reps,
                                              const Dropout& dropout) const {
    if (pair_reps.empty()) throw ShapeError("spatial encoder needs at least one pair");
    for (const auto& rep : pair_reps)
        if (rep->value.rows() != 1 || rep->value.cols() != config_.d_model())
            throw ShapeError("pair representation must be 1x" + std::to_string(config_.d_model()));

    std::vector<Var> rows;
    if (config_.global_token) rows.push_back(global_token_);
    rows.insert(rows.end(), pair_reps.begin(), pair_reps.end());
    Var encoded = stack_rows(rows);
    for (const auto& layer : spatial_layers_) encoded = layer.apply(encoded, dropout);

    SpatialOut out;
    const int offset = config_.global_token ? 1 : 0;
    for (size_t i = 0; i < pair_reps.size(); ++i)
        out.refined.push_back(row_at(encoded, static_cast<int>(i) + offset));
    if (config_.global_token) {
        out.global = row_at(encoded, 0);
    } else {
        const int n = static_cast<int>(pair_reps.size());
        out.global = matmul(constant(Tensor({1, n}, 1.0 / n)), encoded);
    }
    return out;
}

Var HoiModel::build_context_vector(const Var& global_feature, const Var& gaze_embed) const {
    if (config_.window_mode != WindowMode::kPairwise || config_.gaze_mode == GazeMode::kConcat)
        throw ShapeError("context vectors only exist for pairwise windows without gaze concat");
    if (config_.gaze_mode == GazeMode::kCross)
        return context_proj_.apply(concat_cols({global_feature, gaze_embed}));
    return context_proj_.apply(global_feature);
}

Var HoiModel::build_context(const std::vector<Var>& global_sequence,
                            const std::vector<Var>& gaze_sequence) const {
    if (global_sequence.size() != gaze_sequence.size() && config_.gaze_mode == GazeMode::kCross)
        throw ShapeError("context sequences must have equal length");
    std::vector<Var> rows;
    rows.reserve(global_sequence.size());
    for (size_t i = 0; i < global_sequence.size(); ++i)
        rows.push_back(build_context_vector(
            global_sequence[i],
            config_.gaze_mode == GazeMode::kCross ? gaze_sequence[i] : Var()));
    return stack_rows(rows);
}

Var HoiModel::positional_row(int slot) const {
    if (slot < 0 || slot >= config_.window_length) throw ShapeError("positional slot out of range");
    if (config_.pe_mode == PeMode::kSine) {
        Tensor row({1, config_.d_model()});
        for (int c = 0; c < config_.d_model(); ++c) row.at(0, c) = sine_pe_.at(slot, c);
        return constant(std::move(row));
    }
    return row_at(learned_pe_, slot);
}

Var HoiModel::add_positional(const Var& window) const {
    if (window->value.rows() != config_.window_length)
        throw ShapeError("window must have L rows to receive positional encoding");
    if (config_.pe_mode == PeMode::kSine) return add(window, constant(sine_pe_));
    return add(window, learned_pe_);
}

Var HoiModel::temporal_encode(const Var& pair_window, const Var& context_window,
                              const Dropout& dropout) const {
    if (pair_window->value.rows() != config_.window_length ||
        pair_window->value.cols() != config_.d_model())
        throw ShapeError("pair window must be Lxd_model");

    Var fused = add_positional(pair_window);
    if (cross_layer_) {
        if (!context_window || context_window->value.rows() != config_.window_length)
            throw ShapeError("context window must be Lxd_model");
        const Var ctx = add_positional(context_window);
        fused = cross_layer_->apply(fused, ctx, dropout);
    }
    for (const auto& layer : temporal_layers_) fused = layer.apply(fused, dropout);
    // Causality: only the final window position feeds the prediction heads.
    return row_at(fused, config_.window_length - 1);
}

std::vector<HoiModel::HeadOutput> HoiModel::predict(const Var& fused) const {
    std::vector<HeadOutput> out;
    for (size_t i = 0; i < heads_.size(); ++i) {
        HeadOutput h;
        h.name = config_.heads_spec[i].name;
        h.logits = heads_[i].apply(fused);
        h.probs = config_.heads_spec[i].activation == HeadActivation::kSoftmax
                      ? softmax_rows(h.logits)
                      : sigmoid(h.logits);
        out.push_back(std::move(h));
    }
    return out;
}

Var HoiModel::predict_probs(const Var& fused) const {
    std::vector<Var> parts;
    for (auto& h : predict(fused)) parts.push_back(h.probs);
    return concat_cols(parts);
}

Var HoiModel::predict_logits(const Var& fused) const {
    std::vector<Var> parts;
    for (auto& h : predict(fused)) parts.push_back(h.logits);
    return concat_cols(parts);
}

std::vector<std::string> HoiModel::temporal_layer_kinds() const {
    std::vector<std::string> kinds;
    if (cross_layer_) kinds.push_back("cross");
    for (size_t i = 0; i < temporal_layers_.size(); ++i) kinds.push_back("self");
    return kinds;
}

HoiModel::ForwardResult HoiModel::forward(const Dataset& dataset, const FeatureProvider& provider,
                                          const std::vector<WindowSample>& batch, bool training,
                                          Rng* dropout_rng) const {
    if (training && dropout_rng == nullptr)
        throw ShapeError("training forward requires a dropout RNG");
    Dropout dropout{config_.dropout, training && config_.dropout > 0.0, dropout_rng};

    // Per-frame encodings shared across windows of the batch.
    struct FrameEntry {
        std::map<PairKey, Var> refined;
        Var global;
        std::map<int, Var> gaze_embed;  // human track -> g'
        std::map<int, Var> context;     // human track -> projected context vector
    };
    using FrameKey = std::tuple<int, int, bool>;  // video, frame, flipped
    std::map<FrameKey, FrameEntry> cache;
    for (const auto& sample : batch)
        for (int t : sample.slot_frames)
            cache.emplace(FrameKey{sample.video_index, t, sample.flipped}, FrameEntry{});

    const bool has_context = cross_layer_ != nullptr;
    for (auto& [key, entry] : cache) {
        const auto& [video_index, t, flipped] = key;
        const VideoAnnotation& video = dataset.videos.at(static_cast<size_t>(video_index));
        const auto pairs = video.candidate_pairs(t);
        if (pairs.empty()) throw IntegrityError("no candidate pairs at a referenced frame");

        WindowSample probe;
        probe.video_index = video_index;
        probe.flipped = flipped;

        // One gaze embedding per human per frame.
        for (const auto& pair : pairs) {
            if (entry.gaze_embed.count(pair.human_track)) continue;
            std::vector<double> gaze = provider.gaze(video, static_cast<uint32_t>(video_index), t,
                                                     pair.human_track);
            if (flipped) gaze = flip_gaze_horizontal(gaze);
            entry.gaze_embed[pair.human_track] =
                l2_normalize_row(gaze_net_.apply(constant(gaze_to_tensor(gaze))));
        }

        std::vector<Var> reps;
        reps.reserve(pairs.size());
        for (const auto& pair : pairs) {
            probe.pair = pair;
            FeatureBundle bundle = gather_bundle(dataset, provider, probe, t);
            EmbeddedPair embedded = embed_pair_with_gaze(bundle, entry.gaze_embed[pair.human_track]);
            reps.push_back(embedded.x);
        }
        SpatialOut spatial = spatial_encode(reps, dropout);
        for (size_t i = 0; i < pairs.size(); ++i) entry.refined[pairs[i]] = spatial.refined[i];
        entry.global = spatial.global;

        if (has_context)
            for (const auto& [human, gaze_embed] : entry.gaze_embed)
                entry.context[human] = build_context_vector(entry.global, gaze_embed);
    }

    ForwardResult result;
    for (const auto& sample : batch) {
        Var fused;
        if (config_.window_mode == WindowMode::kPairwise) {
            std::vector<Var> pair_rows, context_rows;
            for (int t : sample.slot_frames) {
                FrameEntry& entry = cache.at(FrameKey{sample.video_index, t, sample.flipped});
                pair_rows.push_back(entry.refined.at(sample.pair));
                if (has_context) context_rows.push_back(entry.context.at(sample.pair.human_track));
            }
            const Var pair_window = stack_rows(pair_rows);
            const Var context_window = has_context ? stack_rows(context_rows) : Var();
            fused = temporal_encode(pair_window, context_window, dropout);
        } else {
            // Framewise: all pairs of every slot frame in one sequence, each
            // element carrying its slot's positional encoding.
            const VideoAnnotation& video = dataset.videos.at(static_cast<size_t>(sample.video_index));
            std::vector<Var> rows;
            int target_index = -1;
            for (size_t k = 0; k < sample.slot_frames.size(); ++k) {
                const int t = sample.slot_frames[k];
                FrameEntry& entry = cache.at(FrameKey{sample.video_index, t, sample.flipped});
                const Var pe = positional_row(static_cast<int>(k));
                for (const auto& pair : video.candidate_pairs(t)) {
                    if (k + 1 == sample.slot_frames.size() && pair == sample.pair)
                        target_index = static_cast<int>(rows.size());
                    rows.push_back(add(entry.refined.at(pair), pe));
                }
            }
            if (target_index < 0) throw IntegrityError("window pair missing from its anchor frame");
            Var seq = stack_rows(rows);
            for (const auto& layer : temporal_layers_) seq = layer.apply(seq, dropout);
            fused = row_at(seq, target_index);
        }
        Var probs = predict_probs(fused);
        if (!probs->value.all_finite()) throw NonFiniteError("model output contains NaN/Inf");
        result.probs.push_back(std::move(probs));
        result.logits.push_back(predict_logits(fused));
    }
    return result;
}

}  // namespace hoi
