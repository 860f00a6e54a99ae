#include "hoi/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "hoi/rng.hpp"
#include "json.hpp"

namespace hoi {

using nlohmann::json;

const EntityTrack* VideoAnnotation::track(int track_id) const {
    auto it = std::lower_bound(tracks.begin(), tracks.end(), track_id,
                               [](const EntityTrack& t, int id) { return t.track_id < id; });
    if (it == tracks.end() || it->track_id != track_id) return nullptr;
    return &*it;
}

const FrameAnnotation* VideoAnnotation::frame(int t) const {
    auto it = std::lower_bound(frames.begin(), frames.end(), t,
                               [](const FrameAnnotation& f, int tt) { return f.t < tt; });
    if (it == frames.end() || it->t != t) return nullptr;
    return &*it;
}

bool VideoAnnotation::present(int track_id, int t) const {
    const EntityTrack* tr = track(track_id);
    return tr != nullptr && tr->boxes.count(t) > 0;
}

std::vector<PairKey> VideoAnnotation::candidate_pairs(int t) const {
    std::vector<PairKey> pairs;
    for (const auto& h : tracks) {
        if (!h.is_human() || !h.boxes.count(t)) continue;
        for (const auto& o : tracks) {
            if (o.track_id == h.track_id || !o.boxes.count(t)) continue;
            pairs.push_back({h.track_id, o.track_id});
        }
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

std::vector<int> VideoAnnotation::keyframes() const {
    std::vector<int> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(f.t);
    return out;
}

namespace {

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return j;
}

template <typename T>
T field(const json& j, const char* name) {
    if (!j.contains(name)) throw SchemaError(std::string("missing field '") + name + "'");
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw SchemaError(std::string("field '") + name + "' has the wrong type");
    }
}

}  // namespace

Vocabulary load_vocabulary(const std::string& path) {
    const json j = parse_file(path);
    Vocabulary vocab;
    vocab.objects = field<std::vector<std::string>>(j, "objects");
    if (!j.contains("predicates")) throw SchemaError("missing field 'predicates'");
    vocab.spatial_predicates = field<std::vector<std::string>>(j.at("predicates"), "spatial");
    vocab.action_predicates = field<std::vector<std::string>>(j.at("predicates"), "action");
    if (vocab.objects.empty()) throw SchemaError("object vocabulary is empty");
    if (vocab.spatial_predicates.empty() || vocab.action_predicates.empty())
        throw SchemaError("predicate vocabulary is empty");
    return vocab;
}

Dataset load_annotations(const std::string& annotations_path, const std::string& vocab_path) {
    Dataset dataset;
    dataset.vocab = load_vocabulary(vocab_path);
    const json root = parse_file(annotations_path);
    const auto videos = field<json>(root, "videos");
    if (!videos.is_array()) throw SchemaError("'videos' must be an array");

    for (const auto& jv : videos) {
        VideoAnnotation video;
        video.id = field<std::string>(jv, "id");
        video.width = field<double>(jv, "width");
        video.height = field<double>(jv, "height");
        video.fps_keyframe = field<int>(jv, "fps_keyframe");
        if (video.width <= 0 || video.height <= 0)
            throw SchemaError("video " + video.id + ": non-positive frame size");

        std::set<int> track_ids;
        for (const auto& jt : field<json>(jv, "tracks")) {
            EntityTrack track;
            track.track_id = field<int>(jt, "track_id");
            track.class_id = field<int>(jt, "class_id");
            if (track.class_id < 0 || track.class_id >= dataset.vocab.num_objects())
                throw IntegrityError("video " + video.id + ": class id " +
                                     std::to_string(track.class_id) + " outside vocabulary");
            if (!track_ids.insert(track.track_id).second)
                throw IntegrityError("video " + video.id + ": duplicate track " +
                                     std::to_string(track.track_id));
            const auto boxes = field<json>(jt, "boxes");
            if (!boxes.is_object()) throw SchemaError("'boxes' must map frame index to [x1,y1,x2,y2]");
            for (const auto& [key, val] : boxes.items()) {
                int t = 0;
                try {
                    t = std::stoi(key);
                } catch (...) {
                    throw SchemaError("video " + video.id + ": non-integer frame key '" + key + "'");
                }
                const auto coords = val.get<std::vector<double>>();
                if (coords.size() != 4) throw SchemaError("box must have 4 coordinates");
                try {
                    track.boxes.emplace(t, BoundingBox(coords[0], coords[1], coords[2], coords[3]));
                } catch (const ShapeError&) {
                    throw SchemaError("video " + video.id + ": degenerate box at t=" + key);
                }
            }
            video.tracks.push_back(std::move(track));
        }
        std::sort(video.tracks.begin(), video.tracks.end(),
                  [](const EntityTrack& a, const EntityTrack& b) { return a.track_id < b.track_id; });

        for (const auto& jf : field<json>(jv, "frames")) {
            FrameAnnotation frame;
            frame.t = field<int>(jf, "t");
            for (const auto& jh : field<json>(jf, "hois")) {
                HoiLabel hoi;
                hoi.human_track = field<int>(jh, "h");
                hoi.object_track = field<int>(jh, "o");
                hoi.predicates = field<std::vector<int>>(jh, "predicates");
                const EntityTrack* h = video.track(hoi.human_track);
                const EntityTrack* o = video.track(hoi.object_track);
                if (h == nullptr || o == nullptr)
                    throw IntegrityError("video " + video.id + " t=" + std::to_string(frame.t) +
                                         ": hoi references absent track");
                if (!h->is_human())
                    throw IntegrityError("video " + video.id + ": hoi subject " +
                                         std::to_string(hoi.human_track) + " is not a human track");
                if (!h->boxes.count(frame.t) || !o->boxes.count(frame.t))
                    throw IntegrityError("video " + video.id + " t=" + std::to_string(frame.t) +
                                         ": hoi pair not present in frame");
                for (int p : hoi.predicates)
                    if (p < 0 || p >= dataset.vocab.num_predicates())
                        throw IntegrityError("video " + video.id + ": predicate id " +
                                             std::to_string(p) + " out of range");
                frame.hois.push_back(std::move(hoi));
            }
            if (jf.contains("gaze")) {
                for (const auto& jg : jf.at("gaze")) {
                    GazeTarget g;
                    g.human_track = field<int>(jg, "h");
                    const auto pt = field<std::vector<double>>(jg, "point");
                    if (pt.size() != 2) throw SchemaError("gaze point must have 2 coordinates");
                    g.x = pt[0];
                    g.y = pt[1];
                    const EntityTrack* h = video.track(g.human_track);
                    if (h == nullptr || !h->is_human())
                        throw IntegrityError("video " + video.id + ": gaze references non-human track");
                    frame.gaze.push_back(g);
                }
            }
            video.frames.push_back(std::move(frame));
        }
        std::sort(video.frames.begin(), video.frames.end(),
                  [](const FrameAnnotation& a, const FrameAnnotation& b) { return a.t < b.t; });
        for (size_t i = 1; i < video.frames.size(); ++i)
            if (video.frames[i].t == video.frames[i - 1].t)
                throw IntegrityError("video " + video.id + ": duplicate frame t=" +
                                     std::to_string(video.frames[i].t));
        dataset.videos.push_back(std::move(video));
    }
    return dataset;
}

std::vector<WindowSample> build_windows(const Dataset& dataset, int video_index,
                                        const WindowConfig& config) {
    if (config.window_length < 1) throw ShapeError("window length must be >= 1");
    const VideoAnnotation& video = dataset.videos.at(static_cast<size_t>(video_index));
    const int num_predicates = dataset.vocab.num_predicates();
    std::vector<WindowSample> windows;

    const std::vector<int> keys = video.keyframes();
    for (size_t anchor_idx = 0; anchor_idx < keys.size(); ++anchor_idx) {
        const int anchor = keys[anchor_idx];
        const int label_frame = anchor + config.tau_a;
        const FrameAnnotation* label_ann = video.frame(label_frame);
        if (label_ann == nullptr) continue;  // label frame outside the video

        for (const PairKey& pair : video.candidate_pairs(anchor)) {
            // Source frame per slot: the pair's own observation when present,
            // otherwise the nearest earlier one, otherwise the earliest later
            // one (front-padding by repetition).
            std::vector<int> observed;
            for (int t : keys)
                if (t <= anchor && video.present(pair.human_track, t) &&
                    video.present(pair.target_track, t))
                    observed.push_back(t);
            // The pair is co-present at the anchor, so `observed` is never empty.
            std::vector<int> slots(static_cast<size_t>(config.window_length));
            bool full_history = true;
            for (int k = 0; k < config.window_length; ++k) {
                const int nominal = anchor - (config.window_length - 1 - k);
                auto it = std::upper_bound(observed.begin(), observed.end(), nominal);
                if (it == observed.begin()) {
                    slots[static_cast<size_t>(k)] = observed.front();
                    full_history = false;
                } else {
                    slots[static_cast<size_t>(k)] = *(it - 1);
                    if (*(it - 1) != nominal) full_history = false;
                }
            }
            if (config.full_history_only && !full_history) continue;

            WindowSample sample;
            sample.video_index = video_index;
            sample.pair = pair;
            sample.anchor_frame = anchor;
            sample.label_frame = label_frame;
            sample.slot_frames = std::move(slots);
            sample.target.assign(static_cast<size_t>(num_predicates), 0);
            for (const auto& hoi : label_ann->hois)
                if (hoi.human_track == pair.human_track && hoi.object_track == pair.target_track)
                    for (int p : hoi.predicates) sample.target[static_cast<size_t>(p)] = 1;
            windows.push_back(std::move(sample));
        }
    }
    return windows;
}

WindowSample horizontal_flip(const WindowSample& sample, double frame_width) {
    (void)frame_width;  // geometry is resolved lazily via sample_box
    WindowSample flipped = sample;
    flipped.flipped = !sample.flipped;
    return flipped;
}

BoundingBox sample_box(const Dataset& dataset, const WindowSample& sample, int track_id, int t) {
    const VideoAnnotation& video = dataset.videos.at(static_cast<size_t>(sample.video_index));
    const EntityTrack* track = video.track(track_id);
    if (track == nullptr) throw IntegrityError("unknown track in sample");
    const auto box = track->box_at(t);
    if (!box) throw IntegrityError("track not present at requested frame");
    return sample.flipped ? box->flipped(video.width) : *box;
}

std::vector<EpochBatch> sample_epoch(const Dataset& dataset,
                                     const std::vector<std::vector<WindowSample>>& per_video_windows,
                                     int batch_size, uint64_t seed) {
    if (batch_size < 1) throw ShapeError("batch size must be >= 1");
    if (per_video_windows.size() != dataset.videos.size())
        throw ShapeError("per-video window list does not match dataset");

    std::vector<int> order;
    for (size_t v = 0; v < dataset.videos.size(); ++v)
        if (!per_video_windows[v].empty()) order.push_back(static_cast<int>(v));

    // Fisher-Yates with the deterministic stream.
    Rng rng(hash_key(seed, 0x45504f43ULL));  // "EPOC"
    for (size_t i = order.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.below(i));
        std::swap(order[i - 1], order[j]);
    }

    std::vector<EpochBatch> batches;
    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(batch_size)) {
        EpochBatch batch;
        const size_t end = std::min(order.size(), begin + static_cast<size_t>(batch_size));
        for (size_t i = begin; i < end; ++i) {
            const auto& windows = per_video_windows[static_cast<size_t>(order[i])];
            batch.windows.insert(batch.windows.end(), windows.begin(), windows.end());
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

ClassStatistics class_statistics(const Dataset& dataset) {
    ClassStatistics stats;
    stats.predicate_counts.assign(static_cast<size_t>(dataset.vocab.num_predicates()), 0);
    for (const auto& video : dataset.videos) {
        for (const auto& frame : video.frames) {
            for (const auto& hoi : frame.hois) {
                const EntityTrack* obj = video.track(hoi.object_track);
                for (int p : hoi.predicates) {
                    stats.predicate_counts[static_cast<size_t>(p)]++;
                    stats.triplet_counts[{obj->class_id, p}]++;
                }
            }
        }
    }
    return stats;
}

CategorySplit split_categories(const ClassStatistics& stats, int64_t threshold) {
    CategorySplit split;
    for (const auto& [category, count] : stats.triplet_counts) {
        if (count < threshold)
            split.rare.push_back(category);
        else
            split.nonrare.push_back(category);
    }
    return split;
}

}  // namespace hoi
