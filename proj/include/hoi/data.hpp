#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hoi/geometry.hpp"

namespace hoi {

// Predicate and object vocabularies. Predicate ids are global: spatial
// relations first, then actions.
struct Vocabulary {
    std::vector<std::string> objects;            // index = class id, 0 is the human class
    std::vector<std::string> spatial_predicates;  // 8 entries
    std::vector<std::string> action_predicates;   // 42 entries

    int num_predicates() const {
        return static_cast<int>(spatial_predicates.size() + action_predicates.size());
    }
    int num_spatial() const { return static_cast<int>(spatial_predicates.size()); }
    int num_objects() const { return static_cast<int>(objects.size()); }
};

inline constexpr int kHumanClassId = 0;

struct EntityTrack {
    int track_id = -1;
    int class_id = -1;
    std::map<int, BoundingBox> boxes;  // keyframe index -> box; gaps allowed

    std::optional<BoundingBox> box_at(int t) const {
        auto it = boxes.find(t);
        if (it == boxes.end()) return std::nullopt;
        return it->second;
    }
    bool is_human() const { return class_id == kHumanClassId; }
};

struct HoiLabel {
    int human_track = -1;
    int object_track = -1;
    std::vector<int> predicates;  // global predicate ids
};

struct GazeTarget {
    int human_track = -1;
    double x = 0.0, y = 0.0;
};

struct FrameAnnotation {
    int t = 0;
    std::vector<HoiLabel> hois;
    std::vector<GazeTarget> gaze;  // optional per-human look-at points

    std::optional<GazeTarget> gaze_for(int human_track) const {
        for (const auto& g : gaze)
            if (g.human_track == human_track) return g;
        return std::nullopt;
    }
};

struct PairKey {
    int human_track = -1;
    int target_track = -1;
    auto operator<=>(const PairKey&) const = default;
};

struct VideoAnnotation {
    std::string id;
    double width = 0.0, height = 0.0;
    int fps_keyframe = 1;
    std::vector<EntityTrack> tracks;       // sorted by track_id
    std::vector<FrameAnnotation> frames;   // sorted by t

    const EntityTrack* track(int track_id) const;
    const FrameAnnotation* frame(int t) const;
    bool present(int track_id, int t) const;
    // Ordered (human, target) pairs co-present at t; human-human included,
    // self-pairs excluded. Sorted by (human_track, target_track).
    std::vector<PairKey> candidate_pairs(int t) const;
    std::vector<int> keyframes() const;
};

struct Dataset {
    std::vector<VideoAnnotation> videos;
    Vocabulary vocab;
};

// Loads and validates the annotation file (see README for the schema) plus
// its vocabulary sidecar. Throws SchemaError on malformed input and
// IntegrityError on referential violations (dangling track ids, duplicate
// tracks, non-human subjects, predicate ids out of range).
Dataset load_annotations(const std::string& annotations_path, const std::string& vocab_path);

Vocabulary load_vocabulary(const std::string& path);

// One training/evaluation unit: a pair-wise sliding window.
struct WindowSample {
    int video_index = -1;
    PairKey pair;
    int anchor_frame = 0;
    int label_frame = 0;                 // anchor + tau_a
    std::vector<int> slot_frames;        // L source keyframes, padding repeats observations
    std::vector<uint8_t> target;         // multi-hot over all predicates
    bool flipped = false;
};

struct WindowConfig {
    int window_length = 6;   // L
    int tau_a = 0;           // 0 = detection task
    bool full_history_only = false;
};

std::vector<WindowSample> build_windows(const Dataset& dataset, int video_index,
                                        const WindowConfig& config);

// Mirrors the sample along the vertical axis: boxes and gaze flip, spatial
// masks are recomputed downstream from the flipped boxes, labels unchanged.
// Involutive.
WindowSample horizontal_flip(const WindowSample& sample, double frame_width);

// Box lookup that honors the sample's flip state.
BoundingBox sample_box(const Dataset& dataset, const WindowSample& sample, int track_id, int t);

// Epoch batches: videos are shuffled by seed and grouped so each batch holds
// the windows of `batch_size` distinct videos; every video appears in exactly
// one batch.
struct EpochBatch {
    std::vector<WindowSample> windows;
};

std::vector<EpochBatch> sample_epoch(const Dataset& dataset,
                                     const std::vector<std::vector<WindowSample>>& per_video_windows,
                                     int batch_size, uint64_t seed);

struct ClassStatistics {
    std::vector<int64_t> predicate_counts;                  // index = predicate id
    std::map<std::pair<int, int>, int64_t> triplet_counts;  // (object class, predicate) -> count
};

ClassStatistics class_statistics(const Dataset& dataset);

// Triplet categories with fewer than `threshold` instances are rare.
struct CategorySplit {
    std::vector<std::pair<int, int>> rare;
    std::vector<std::pair<int, int>> nonrare;
};

CategorySplit split_categories(const ClassStatistics& stats, int64_t threshold = 25);

}  // namespace hoi
