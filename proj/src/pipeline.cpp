#include "hoi/pipeline.hpp"

#include <algorithm>

namespace hoi {

std::vector<GroundTruthInstance> build_ground_truth(const Dataset& dataset, int tau_a) {
    std::vector<GroundTruthInstance> gt;
    for (size_t v = 0; v < dataset.videos.size(); ++v) {
        const VideoAnnotation& video = dataset.videos[v];
        for (const auto& frame : video.frames) {
            const int anchor = frame.t;
            const FrameAnnotation* label = video.frame(anchor + tau_a);
            if (label == nullptr) continue;
            for (const auto& hoi : label->hois) {
                const EntityTrack* human = video.track(hoi.human_track);
                const EntityTrack* object = video.track(hoi.object_track);
                const auto human_box =
                    human->box_at(anchor) ? human->box_at(anchor) : human->box_at(label->t);
                const auto object_box =
                    object->box_at(anchor) ? object->box_at(anchor) : object->box_at(label->t);
                for (int predicate : hoi.predicates) {
                    GroundTruthInstance inst;
                    inst.video_index = static_cast<int>(v);
                    inst.frame = anchor;
                    inst.human_box = *human_box;
                    inst.object_box = *object_box;
                    inst.object_class = object->class_id;
                    inst.predicate = predicate;
                    inst.human_track = hoi.human_track;
                    inst.object_track = hoi.object_track;
                    gt.push_back(inst);
                }
            }
        }
    }
    return gt;
}

FramePresence frame_presence(const VideoAnnotation& video, int t) {
    FramePresence presence;
    for (const auto& track : video.tracks)
        if (track.is_human() && track.boxes.count(t)) presence.humans.insert(track.track_id);
    for (const auto& pair : video.candidate_pairs(t))
        presence.pairs.insert({pair.human_track, pair.target_track});
    return presence;
}

std::vector<PredictedTriplet> predict_dataset(const HoiModel& model, const Dataset& dataset,
                                              const FeatureProvider& provider,
                                              const WindowConfig& window_config) {
    std::vector<PredictedTriplet> predictions;
    for (size_t v = 0; v < dataset.videos.size(); ++v) {
        const auto windows = build_windows(dataset, static_cast<int>(v), window_config);
        if (windows.empty()) continue;
        const auto result = model.forward(dataset, provider, windows, /*training=*/false, nullptr);
        for (size_t w = 0; w < windows.size(); ++w) {
            const WindowSample& sample = windows[w];
            const VideoAnnotation& video = dataset.videos[v];
            const EntityTrack* target = video.track(sample.pair.target_track);
            const BoundingBox human_box =
                sample_box(dataset, sample, sample.pair.human_track, sample.anchor_frame);
            const BoundingBox object_box =
                sample_box(dataset, sample, sample.pair.target_track, sample.anchor_frame);
            const Tensor& z = result.probs[w]->value;
            for (int p = 0; p < z.cols(); ++p) {
                PredictedTriplet pred;
                pred.video_index = static_cast<int>(v);
                pred.frame = sample.anchor_frame;
                pred.human_box = human_box;
                pred.object_box = object_box;
                pred.object_class = target->class_id;
                pred.predicate = p;
                pred.confidence = z.at(0, p);
                pred.human_track_hint = sample.pair.human_track;
                pred.object_track_hint = sample.pair.target_track;
                predictions.push_back(std::move(pred));
            }
        }
    }
    return predictions;
}

std::vector<PredictedTriplet> apply_anticipation_filter(
    const Dataset& dataset, const std::vector<PredictedTriplet>& predictions, int tau_a) {
    if (tau_a == 0) return predictions;
    // Group per (video, anchor) and filter against the future presence table.
    std::map<std::pair<int, int>, std::vector<PredictedTriplet>> by_frame;
    for (const auto& p : predictions) by_frame[{p.video_index, p.frame}].push_back(p);
    std::vector<PredictedTriplet> kept;
    for (const auto& [key, preds] : by_frame) {
        const VideoAnnotation& video = dataset.videos.at(static_cast<size_t>(key.first));
        const auto filtered = anticipation_filter(preds, frame_presence(video, key.second),
                                                  frame_presence(video, key.second + tau_a));
        kept.insert(kept.end(), filtered.predictions.begin(), filtered.predictions.end());
    }
    return kept;
}

std::vector<PersonSample> build_person_samples(const Dataset& dataset,
                                               const std::vector<PredictedTriplet>& predictions,
                                               int tau_a) {
    // Assign predictions to ground-truth pairs frame by frame. The assignment
    // targets are all co-present candidate pairs, so confident predictions on
    // unlabeled pairs still count against their human's precision.
    std::map<std::pair<int, int>, std::vector<PredictedTriplet>> preds_by_frame;
    for (const auto& p : predictions) preds_by_frame[{p.video_index, p.frame}].push_back(p);

    std::vector<PersonSample> samples;
    for (size_t v = 0; v < dataset.videos.size(); ++v) {
        const VideoAnnotation& video = dataset.videos[v];
        for (const auto& frame : video.frames) {
            const int anchor = frame.t;
            const FrameAnnotation* label = video.frame(anchor + tau_a);
            if (label == nullptr) continue;

            const FramePresence now = frame_presence(video, anchor);
            std::set<int> excluded;
            if (tau_a > 0) {
                const FramePresence future = frame_presence(video, anchor + tau_a);
                for (int h : now.humans)
                    if (!future.humans.count(h)) excluded.insert(h);
            }

            std::vector<GtPairBox> gt_pairs;
            for (const auto& pair : video.candidate_pairs(anchor))
                gt_pairs.push_back({static_cast<int>(v), anchor, pair.human_track,
                                    pair.target_track,
                                    *video.track(pair.human_track)->box_at(anchor),
                                    *video.track(pair.target_track)->box_at(anchor)});

            const auto it = preds_by_frame.find({static_cast<int>(v), anchor});
            const std::vector<PredictedTriplet> empty;
            const std::vector<PredictedTriplet>& frame_preds = it == preds_by_frame.end() ? empty : it->second;
            const auto assigned = assign_pairs_to_gt(frame_preds, gt_pairs);

            std::map<int, PersonSample> per_human;
            for (int h : now.humans) {
                if (excluded.count(h)) continue;
                PersonSample sample;
                sample.video_index = static_cast<int>(v);
                sample.frame = anchor;
                sample.human_track = h;
                per_human[h] = std::move(sample);
            }
            for (const auto& hoi : label->hois) {
                auto hit = per_human.find(hoi.human_track);
                if (hit == per_human.end()) continue;  // human absent at anchor or excluded
                for (int p : hoi.predicates) hit->second.gt_triplets.insert({hoi.object_track, p});
            }
            for (size_t i = 0; i < frame_preds.size(); ++i) {
                if (!assigned[i]) continue;
                auto hit = per_human.find(assigned[i]->first);
                if (hit == per_human.end()) continue;
                hit->second.predictions.emplace_back(
                    frame_preds[i].confidence,
                    std::make_pair(assigned[i]->second, frame_preds[i].predicate));
            }
            for (auto& [h, sample] : per_human) samples.push_back(std::move(sample));
        }
    }
    return samples;
}

MetricsReport evaluate_predictions(const Dataset& dataset,
                                   const std::vector<PredictedTriplet>& predictions,
                                   const EvalOptions& options) {
    if (options.mode != "oracle" && options.mode != "detection")
        throw SchemaError("mode must be oracle|detection");
    const auto gt = build_ground_truth(dataset, options.tau_a);
    const auto filtered = apply_anticipation_filter(dataset, predictions, options.tau_a);

    MetricsReport report;
    report.mode = options.mode;
    report.tau_a = options.tau_a;
    report.k = options.k;
    report.threshold = options.threshold;

    const MapResult map = mean_ap(filtered, gt, options.rare_threshold);
    report.map_full = map.full;
    report.map_nonrare = map.nonrare;
    report.map_rare = map.rare;
    report.categories_full = map.categories_full;
    report.categories_nonrare = map.categories_nonrare;
    report.categories_rare = map.categories_rare;

    const auto samples = build_person_samples(dataset, filtered, options.tau_a);
    report.personwise = aggregate_personwise(samples, options.k, options.threshold);

    std::set<std::pair<int, int>> frames;
    for (size_t v = 0; v < dataset.videos.size(); ++v)
        for (const auto& frame : dataset.videos[v].frames)
            if (dataset.videos[v].frame(frame.t + options.tau_a) != nullptr)
                frames.insert({static_cast<int>(v), frame.t});
    report.evaluated_frames = static_cast<int>(frames.size());
    report.accounting = detection_mode_accounting(gt, filtered);
    return report;
}

}  // namespace hoi
