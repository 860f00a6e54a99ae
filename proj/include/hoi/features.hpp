#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hoi/data.hpp"
#include "hoi/geometry.hpp"

namespace hoi {

inline constexpr int kGazeGrid = 64;

// The per-pair inputs consumed by the model: three visual vectors, the
// two-channel spatial mask, the semantic vector, and the subject's gaze map.
struct FeatureBundle {
    std::vector<double> v_subject;   // human visual
    std::vector<double> v_object;    // object visual
    std::vector<double> v_relation;  // union-region visual
    SpatialMask mask;
    std::vector<double> semantic;
    std::vector<double> gaze;  // kGazeGrid * kGazeGrid, row-major, non-negative
    int target_class = -1;     // class id of the pair's target entity
};

struct FeatureConfig {
    int visual_dim = 2048;
    int semantic_dim = 200;
    double perturbation = 0.1;  // track/time jitter scale on synthetic visuals
    double gaze_sigma = 3.0;    // in gaze grid cells
    double gaze_peak = 1.0;
};

// Deterministic synthetic visual feature: class-conditioned base vector plus
// a small track- and time-dependent perturbation.
std::vector<double> synth_visual(int track_id, int class_id, int t, uint64_t seed,
                                 const FeatureConfig& config);

// Fixed per-class embedding table with seeded rows; rows can instead be
// loaded verbatim from a JSON file {"rows": [[...], ...]}.
class SemanticTable {
public:
    SemanticTable(int num_classes, int dim, uint64_t seed);
    static SemanticTable from_file(const std::string& path);

    const std::vector<double>& embedding(int class_id) const;
    int num_classes() const { return static_cast<int>(rows_.size()); }
    int dim() const { return dim_; }

private:
    SemanticTable() = default;
    int dim_ = 0;
    std::vector<std::vector<double>> rows_;
};

// Isotropic Gaussian bump at the target point mapped into the gaze grid;
// absent targets yield a uniform low-energy map.
std::vector<double> synth_gaze(const BoundingBox& human_box, const std::optional<GazeTarget>& target,
                               double frame_width, double frame_height, const FeatureConfig& config);

std::vector<double> flip_gaze_horizontal(const std::vector<double>& gaze);

// ---------------------------------------------------------------------------
// Binary feature store ("HOIF1"). Records are keyed by
// (video id, frame, kind, id_a, id_b) and hold float32 payloads. Spatial
// masks are never stored; they are always recomputed from geometry.

enum class FeatureKind : uint8_t {
    kSubjectVisual = 0,
    kObjectVisual = 1,
    kRelationVisual = 2,
    kSemantic = 3,
    kGaze = 4,
};

struct FeatureKey {
    uint32_t video = 0;
    uint32_t t = 0;
    FeatureKind kind = FeatureKind::kSubjectVisual;
    uint32_t id_a = 0;
    uint32_t id_b = 0;
    auto operator<=>(const FeatureKey&) const = default;
};

class FeatureStore {
public:
    FeatureStore(int visual_dim, int semantic_dim);

    void put(const FeatureKey& key, const std::vector<double>& values);
    bool contains(const FeatureKey& key) const { return index_.count(key) > 0; }
    std::vector<double> get(const FeatureKey& key) const;

    int visual_dim() const { return visual_dim_; }
    int semantic_dim() const { return semantic_dim_; }
    size_t record_count() const { return index_.size(); }

    int expected_dim(FeatureKind kind) const;

    void write_file(const std::string& path) const;
    static FeatureStore load_feature_file(const std::string& path);

private:
    int visual_dim_ = 0;
    int semantic_dim_ = 0;
    std::map<FeatureKey, std::vector<float>> index_;
};

// ---------------------------------------------------------------------------
// Provider abstraction over synthetic generation vs. a loaded feature store.
// Masks come from geometry in both cases.

class FeatureProvider {
public:
    virtual ~FeatureProvider() = default;
    virtual std::vector<double> subject_visual(const VideoAnnotation& video, uint32_t video_key,
                                               int t, int track_id) const = 0;
    virtual std::vector<double> object_visual(const VideoAnnotation& video, uint32_t video_key,
                                              int t, int track_id) const = 0;
    virtual std::vector<double> relation_visual(const VideoAnnotation& video, uint32_t video_key,
                                                int t, const PairKey& pair) const = 0;
    virtual std::vector<double> semantic(int class_id) const = 0;
    virtual std::vector<double> gaze(const VideoAnnotation& video, uint32_t video_key, int t,
                                     int human_track) const = 0;
    virtual int visual_dim() const = 0;
    virtual int semantic_dim() const = 0;
};

class SyntheticFeatureProvider final : public FeatureProvider {
public:
    SyntheticFeatureProvider(FeatureConfig config, uint64_t seed, int num_classes);

    std::vector<double> subject_visual(const VideoAnnotation&, uint32_t video_key, int t,
                                       int track_id) const override;
    std::vector<double> object_visual(const VideoAnnotation&, uint32_t video_key, int t,
                                      int track_id) const override;
    std::vector<double> relation_visual(const VideoAnnotation&, uint32_t video_key, int t,
                                        const PairKey& pair) const override;
    std::vector<double> semantic(int class_id) const override;
    std::vector<double> gaze(const VideoAnnotation& video, uint32_t video_key, int t,
                             int human_track) const override;
    int visual_dim() const override { return config_.visual_dim; }
    int semantic_dim() const override { return config_.semantic_dim; }

    const FeatureConfig& config() const { return config_; }
    uint64_t seed() const { return seed_; }

private:
    // Visual for an entity of `class_id`; relation features reuse this with a
    // synthetic pair pseudo-class.
    std::vector<double> entity_visual(const VideoAnnotation&, int t, int track_id, int class_id) const;

    FeatureConfig config_;
    uint64_t seed_;
    SemanticTable semantic_table_;
};

class StoreFeatureProvider final : public FeatureProvider {
public:
    explicit StoreFeatureProvider(FeatureStore store) : store_(std::move(store)) {}

    std::vector<double> subject_visual(const VideoAnnotation&, uint32_t video_key, int t,
                                       int track_id) const override;
    std::vector<double> object_visual(const VideoAnnotation&, uint32_t video_key, int t,
                                      int track_id) const override;
    std::vector<double> relation_visual(const VideoAnnotation&, uint32_t video_key, int t,
                                        const PairKey& pair) const override;
    std::vector<double> semantic(int class_id) const override;
    std::vector<double> gaze(const VideoAnnotation& video, uint32_t video_key, int t,
                             int human_track) const override;
    int visual_dim() const override { return store_.visual_dim(); }
    int semantic_dim() const override { return store_.semantic_dim(); }

private:
    FeatureStore store_;
};

// Assembles the full bundle for one pair at one frame, honoring flips.
FeatureBundle gather_bundle(const Dataset& dataset, const FeatureProvider& provider,
                            const WindowSample& sample, int t);

// Reads only the record directory of a store file: each record's key and the
// byte offset of its payload. Throws DimensionError on truncation.
std::vector<std::pair<FeatureKey, uint64_t>> scan_feature_offsets(const std::string& path);

}  // namespace hoi
