#include "hoi/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "hoi/rng.hpp"
#include "json.hpp"

namespace hoi {

namespace {
constexpr uint64_t kClassStream = 0x434c4153ULL;    // "CLAS"
constexpr uint64_t kPerturbStream = 0x50455254ULL;  // "PERT"
constexpr uint64_t kRelationStream = 0x52454c41ULL; // "RELA"
constexpr uint64_t kSemanticStream = 0x53454d41ULL; // "SEMA"
}  // namespace

std::vector<double> synth_visual(int track_id, int class_id, int t, uint64_t seed,
                                 const FeatureConfig& config) {
    std::vector<double> out(static_cast<size_t>(config.visual_dim));
    Rng base(hash_key(seed, kClassStream, static_cast<uint64_t>(class_id)));
    for (double& v : out) v = base.normal();
    if (config.perturbation != 0.0) {
        Rng jitter(hash_key(seed, kPerturbStream, static_cast<uint64_t>(track_id),
                            static_cast<uint64_t>(t)));
        for (double& v : out) v += config.perturbation * jitter.normal();
    }
    return out;
}

SemanticTable::SemanticTable(int num_classes, int dim, uint64_t seed) : dim_(dim) {
    rows_.resize(static_cast<size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        auto& row = rows_[static_cast<size_t>(c)];
        row.resize(static_cast<size_t>(dim));
        Rng rng(hash_key(seed, kSemanticStream, static_cast<uint64_t>(c)));
        double norm_sq = 0.0;
        for (double& v : row) {
            v = rng.normal();
            norm_sq += v * v;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm > 0.0)
            for (double& v : row) v /= norm;
    }
}

SemanticTable SemanticTable::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open semantic table " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    if (!j.contains("rows") || !j.at("rows").is_array() || j.at("rows").empty())
        throw SchemaError("semantic table must contain a non-empty 'rows' array");
    SemanticTable table;
    for (const auto& row : j.at("rows")) {
        auto values = row.get<std::vector<double>>();
        if (table.rows_.empty())
            table.dim_ = static_cast<int>(values.size());
        else if (static_cast<int>(values.size()) != table.dim_)
            throw DimensionError("semantic table rows have inconsistent lengths");
        table.rows_.push_back(std::move(values));
    }
    return table;
}

const std::vector<double>& SemanticTable::embedding(int class_id) const {
    if (class_id < 0 || class_id >= num_classes())
        throw UnknownClass("class id " + std::to_string(class_id) + " outside table of " +
                           std::to_string(num_classes()));
    return rows_[static_cast<size_t>(class_id)];
}

std::vector<double> synth_gaze(const BoundingBox& human_box, const std::optional<GazeTarget>& target,
                               double frame_width, double frame_height, const FeatureConfig& config) {
    (void)human_box;  // the heatmap spans the whole frame
    std::vector<double> grid(static_cast<size_t>(kGazeGrid) * kGazeGrid);
    if (!target) {
        std::fill(grid.begin(), grid.end(), 1.0 / (kGazeGrid * kGazeGrid));
        return grid;
    }
    // Cell-center coordinates of the target inside the grid.
    const double gx = target->x / frame_width * kGazeGrid - 0.5;
    const double gy = target->y / frame_height * kGazeGrid - 0.5;
    const double inv_two_sigma_sq = 1.0 / (2.0 * config.gaze_sigma * config.gaze_sigma);
    for (int r = 0; r < kGazeGrid; ++r)
        for (int c = 0; c < kGazeGrid; ++c) {
            const double dy = r - gy;
            const double dx = c - gx;
            grid[static_cast<size_t>(r) * kGazeGrid + c] =
                config.gaze_peak * std::exp(-(dx * dx + dy * dy) * inv_two_sigma_sq);
        }
    return grid;
}

std::vector<double> flip_gaze_horizontal(const std::vector<double>& gaze) {
    std::vector<double> out(gaze.size());
    for (int r = 0; r < kGazeGrid; ++r)
        for (int c = 0; c < kGazeGrid; ++c)
            out[static_cast<size_t>(r) * kGazeGrid + c] =
                gaze[static_cast<size_t>(r) * kGazeGrid + (kGazeGrid - 1 - c)];
    return out;
}

// ---------------------------------------------------------------------------
// Feature store

FeatureStore::FeatureStore(int visual_dim, int semantic_dim)
    : visual_dim_(visual_dim), semantic_dim_(semantic_dim) {
    if (visual_dim <= 0 || semantic_dim <= 0) throw DimensionError("store dims must be positive");
}

int FeatureStore::expected_dim(FeatureKind kind) const {
    switch (kind) {
        case FeatureKind::kSubjectVisual:
        case FeatureKind::kObjectVisual:
        case FeatureKind::kRelationVisual:
            return visual_dim_;
        case FeatureKind::kSemantic:
            return semantic_dim_;
        case FeatureKind::kGaze:
            return kGazeGrid * kGazeGrid;
    }
    throw SchemaError("unknown feature kind");
}

void FeatureStore::put(const FeatureKey& key, const std::vector<double>& values) {
    if (static_cast<int>(values.size()) != expected_dim(key.kind))
        throw DimensionError("record length " + std::to_string(values.size()) +
                             " does not match declared dim " + std::to_string(expected_dim(key.kind)));
    std::vector<float> payload(values.size());
    for (size_t i = 0; i < values.size(); ++i) payload[i] = static_cast<float>(values[i]);
    index_[key] = std::move(payload);
}

std::vector<double> FeatureStore::get(const FeatureKey& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw IntegrityError("feature record not found");
    std::vector<double> out(it->second.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(it->second[i]);
    return out;
}

namespace {

constexpr char kMagic[5] = {'H', 'O', 'I', 'F', '1'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DimensionError(std::string("truncated record: ") + what);
    return v;
}

}  // namespace

void FeatureStore::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SchemaError("cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    write_pod<uint64_t>(out, index_.size());
    write_pod<uint32_t>(out, static_cast<uint32_t>(visual_dim_));
    write_pod<uint32_t>(out, static_cast<uint32_t>(semantic_dim_));
    write_pod<uint32_t>(out, static_cast<uint32_t>(kGazeGrid * kGazeGrid));
    for (const auto& [key, payload] : index_) {
        write_pod<uint32_t>(out, key.video);
        write_pod<uint32_t>(out, key.t);
        write_pod<uint8_t>(out, static_cast<uint8_t>(key.kind));
        write_pod<uint32_t>(out, key.id_a);
        write_pod<uint32_t>(out, key.id_b);
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size() * sizeof(float)));
    }
    if (!out) throw SchemaError("short write to " + path);
}

FeatureStore FeatureStore::load_feature_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open " + path);
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw SchemaError(path + ": bad magic");
    const auto count = read_pod<uint64_t>(in, "record count");
    const auto visual_dim = read_pod<uint32_t>(in, "visual dim");
    const auto semantic_dim = read_pod<uint32_t>(in, "semantic dim");
    const auto gaze_dim = read_pod<uint32_t>(in, "gaze dim");
    if (gaze_dim != static_cast<uint32_t>(kGazeGrid * kGazeGrid))
        throw DimensionError("gaze dim " + std::to_string(gaze_dim) + " unsupported");
    FeatureStore store(static_cast<int>(visual_dim), static_cast<int>(semantic_dim));
    for (uint64_t i = 0; i < count; ++i) {
        FeatureKey key;
        key.video = read_pod<uint32_t>(in, "key.video");
        key.t = read_pod<uint32_t>(in, "key.t");
        const auto kind = read_pod<uint8_t>(in, "key.kind");
        if (kind > static_cast<uint8_t>(FeatureKind::kGaze))
            throw SchemaError("unknown feature kind " + std::to_string(kind));
        key.kind = static_cast<FeatureKind>(kind);
        key.id_a = read_pod<uint32_t>(in, "key.id_a");
        key.id_b = read_pod<uint32_t>(in, "key.id_b");
        const int dim = store.expected_dim(key.kind);
        std::vector<float> payload(static_cast<size_t>(dim));
        in.read(reinterpret_cast<char*>(payload.data()),
                static_cast<std::streamsize>(payload.size() * sizeof(float)));
        if (!in) throw DimensionError("truncated payload for record " + std::to_string(i));
        store.index_[key] = std::move(payload);
    }
    return store;
}

std::vector<std::pair<FeatureKey, uint64_t>> scan_feature_offsets(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open " + path);
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw SchemaError("bad magic");
    const auto count = read_pod<uint64_t>(in, "record count");
    const auto visual_dim = read_pod<uint32_t>(in, "visual dim");
    const auto semantic_dim = read_pod<uint32_t>(in, "semantic dim");
    read_pod<uint32_t>(in, "gaze dim");
    FeatureStore probe(static_cast<int>(visual_dim), static_cast<int>(semantic_dim));
    std::vector<std::pair<FeatureKey, uint64_t>> offsets;
    for (uint64_t i = 0; i < count; ++i) {
        FeatureKey key;
        key.video = read_pod<uint32_t>(in, "key.video");
        key.t = read_pod<uint32_t>(in, "key.t");
        const auto kind = read_pod<uint8_t>(in, "key.kind");
        if (kind > static_cast<uint8_t>(FeatureKind::kGaze))
            throw SchemaError("unknown feature kind " + std::to_string(kind));
        key.kind = static_cast<FeatureKind>(kind);
        key.id_a = read_pod<uint32_t>(in, "key.id_a");
        key.id_b = read_pod<uint32_t>(in, "key.id_b");
        offsets.emplace_back(key, static_cast<uint64_t>(in.tellg()));
        in.seekg(static_cast<std::streamoff>(probe.expected_dim(key.kind)) *
                     static_cast<std::streamoff>(sizeof(float)),
                 std::ios::cur);
        if (!in) throw DimensionError("truncated payload for record " + std::to_string(i));
    }
    // Seeking past EOF does not fail; a one-byte probe after the last payload
    // seek catches files truncated inside the final record.
    if (!offsets.empty()) {
        in.seekg(-1, std::ios::cur);
        char probe_byte;
        in.read(&probe_byte, 1);
        if (in.gcount() != 1) throw DimensionError("truncated payload for final record");
    }
    return offsets;
}

// ---------------------------------------------------------------------------
// Providers

SyntheticFeatureProvider::SyntheticFeatureProvider(FeatureConfig config, uint64_t seed,
                                                   int num_classes)
    : config_(config), seed_(seed), semantic_table_(num_classes, config.semantic_dim, seed) {}

std::vector<double> SyntheticFeatureProvider::entity_visual(const VideoAnnotation&, int t,
                                                            int track_id, int class_id) const {
    return synth_visual(track_id, class_id, t, seed_, config_);
}

std::vector<double> SyntheticFeatureProvider::subject_visual(const VideoAnnotation& video,
                                                             uint32_t, int t, int track_id) const {
    const EntityTrack* track = video.track(track_id);
    if (track == nullptr) throw IntegrityError("unknown subject track");
    return entity_visual(video, t, track_id, track->class_id);
}

std::vector<double> SyntheticFeatureProvider::object_visual(const VideoAnnotation& video, uint32_t,
                                                            int t, int track_id) const {
    const EntityTrack* track = video.track(track_id);
    if (track == nullptr) throw IntegrityError("unknown object track");
    return entity_visual(video, t, track_id, track->class_id);
}

std::vector<double> SyntheticFeatureProvider::relation_visual(const VideoAnnotation&,
                                                              uint32_t video_key, int t,
                                                              const PairKey& pair) const {
    // Keyed by the unordered pair so both orientations share the union-region
    // stand-in.
    const uint64_t lo = static_cast<uint64_t>(std::min(pair.human_track, pair.target_track));
    const uint64_t hi = static_cast<uint64_t>(std::max(pair.human_track, pair.target_track));
    std::vector<double> out(static_cast<size_t>(config_.visual_dim));
    Rng base(hash_key(seed_, kRelationStream, static_cast<uint64_t>(video_key), lo, hi));
    for (double& v : out) v = base.normal();
    if (config_.perturbation != 0.0) {
        Rng jitter(hash_key(seed_, kRelationStream ^ kPerturbStream,
                            static_cast<uint64_t>(video_key), lo, hi, static_cast<uint64_t>(t)));
        for (double& v : out) v += config_.perturbation * jitter.normal();
    }
    return out;
}

std::vector<double> SyntheticFeatureProvider::semantic(int class_id) const {
    return semantic_table_.embedding(class_id);
}

std::vector<double> SyntheticFeatureProvider::gaze(const VideoAnnotation& video, uint32_t, int t,
                                                   int human_track) const {
    const EntityTrack* track = video.track(human_track);
    if (track == nullptr) throw IntegrityError("unknown human track");
    const auto box = track->box_at(t);
    const FrameAnnotation* frame = video.frame(t);
    std::optional<GazeTarget> target;
    if (frame != nullptr) target = frame->gaze_for(human_track);
    // Humans can be absent at padded frames; fall back to a frame-sized box.
    const BoundingBox human_box = box ? *box : BoundingBox(0, 0, video.width, video.height);
    return synth_gaze(human_box, target, video.width, video.height, config_);
}

std::vector<double> StoreFeatureProvider::subject_visual(const VideoAnnotation&, uint32_t video_key,
                                                         int t, int track_id) const {
    return store_.get({video_key, static_cast<uint32_t>(t), FeatureKind::kSubjectVisual,
                       static_cast<uint32_t>(track_id), 0});
}

std::vector<double> StoreFeatureProvider::object_visual(const VideoAnnotation&, uint32_t video_key,
                                                        int t, int track_id) const {
    return store_.get({video_key, static_cast<uint32_t>(t), FeatureKind::kObjectVisual,
                       static_cast<uint32_t>(track_id), 0});
}

std::vector<double> StoreFeatureProvider::relation_visual(const VideoAnnotation&, uint32_t video_key,
                                                          int t, const PairKey& pair) const {
    return store_.get({video_key, static_cast<uint32_t>(t), FeatureKind::kRelationVisual,
                       static_cast<uint32_t>(pair.human_track),
                       static_cast<uint32_t>(pair.target_track)});
}

std::vector<double> StoreFeatureProvider::semantic(int class_id) const {
    return store_.get({0, 0, FeatureKind::kSemantic, static_cast<uint32_t>(class_id), 0});
}

std::vector<double> StoreFeatureProvider::gaze(const VideoAnnotation&, uint32_t video_key, int t,
                                               int human_track) const {
    return store_.get({video_key, static_cast<uint32_t>(t), FeatureKind::kGaze,
                       static_cast<uint32_t>(human_track), 0});
}

FeatureBundle gather_bundle(const Dataset& dataset, const FeatureProvider& provider,
                            const WindowSample& sample, int t) {
    const VideoAnnotation& video = dataset.videos.at(static_cast<size_t>(sample.video_index));
    const uint32_t video_key = static_cast<uint32_t>(sample.video_index);
    const EntityTrack* target = video.track(sample.pair.target_track);
    if (target == nullptr) throw IntegrityError("unknown target track");

    FeatureBundle bundle;
    bundle.target_class = target->class_id;
    bundle.v_subject = provider.subject_visual(video, video_key, t, sample.pair.human_track);
    bundle.v_object = provider.object_visual(video, video_key, t, sample.pair.target_track);
    bundle.v_relation = provider.relation_visual(video, video_key, t, sample.pair);
    bundle.semantic = provider.semantic(target->class_id);
    bundle.mask = spatial_mask(sample_box(dataset, sample, sample.pair.human_track, t),
                               sample_box(dataset, sample, sample.pair.target_track, t));
    bundle.gaze = provider.gaze(video, video_key, t, sample.pair.human_track);
    if (sample.flipped) bundle.gaze = flip_gaze_horizontal(bundle.gaze);
    return bundle;
}

}  // namespace hoi
