#include "hoi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace hoi {

using nlohmann::json;

bool match_triplet(const PredictedTriplet& pred, const GroundTruthInstance& gt) {
    if (pred.video_index != gt.video_index || pred.frame != gt.frame) return false;
    if (pred.object_class != gt.object_class || pred.predicate != gt.predicate) return false;
    return iou(pred.human_box, gt.human_box) > 0.5 && iou(pred.object_box, gt.object_box) > 0.5;
}

namespace {

std::array<double, 8> box_key(const BoundingBox& a, const BoundingBox& b) {
    return {a.x1, a.y1, a.x2, a.y2, b.x1, b.y1, b.x2, b.y2};
}

void rank_predictions(std::vector<PredictedTriplet>& predictions) {
    std::sort(predictions.begin(), predictions.end(),
              [](const PredictedTriplet& a, const PredictedTriplet& b) {
                  if (a.confidence != b.confidence) return a.confidence > b.confidence;
                  if (a.video_index != b.video_index) return a.video_index < b.video_index;
                  if (a.frame != b.frame) return a.frame < b.frame;
                  return box_key(a.human_box, a.object_box) < box_key(b.human_box, b.object_box);
              });
}

std::vector<char> greedy_match_flags(const std::vector<PredictedTriplet>& ranked,
                                     const std::vector<GroundTruthInstance>& gt) {
    std::vector<char> tp(ranked.size(), 0);
    std::vector<char> consumed(gt.size(), 0);
    for (size_t i = 0; i < ranked.size(); ++i) {
        int best = -1;
        double best_quality = -1.0;
        for (size_t g = 0; g < gt.size(); ++g) {
            if (consumed[g] || !match_triplet(ranked[i], gt[g])) continue;
            const double quality = std::min(iou(ranked[i].human_box, gt[g].human_box),
                                            iou(ranked[i].object_box, gt[g].object_box));
            if (quality > best_quality) {
                best_quality = quality;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0) {
            consumed[static_cast<size_t>(best)] = 1;
            tp[i] = 1;
        }
    }
    return tp;
}

}  // namespace

double average_precision(std::vector<PredictedTriplet> predictions,
                         const std::vector<GroundTruthInstance>& gt) {
    if (gt.empty()) return 0.0;
    if (predictions.empty()) return 0.0;
    rank_predictions(predictions);
    const std::vector<char> tp = greedy_match_flags(predictions, gt);

    const double n_gt = static_cast<double>(gt.size());
    std::vector<double> precision(predictions.size()), recall(predictions.size());
    int cum_tp = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        cum_tp += tp[i];
        precision[i] = static_cast<double>(cum_tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(cum_tp) / n_gt;
    }
    // All-point interpolation: precision at each recall level is the max
    // precision at any recall >= that level.
    for (size_t i = precision.size(); i-- > 1;)
        precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (recall[i] > prev_recall) {
            ap += (recall[i] - prev_recall) * precision[i];
            prev_recall = recall[i];
        }
    }
    return ap;
}

MapResult mean_ap(const std::vector<PredictedTriplet>& predictions,
                  const std::vector<GroundTruthInstance>& gt, int64_t rare_threshold) {
    std::map<std::pair<int, int>, std::vector<GroundTruthInstance>> gt_by_category;
    for (const auto& g : gt) gt_by_category[{g.object_class, g.predicate}].push_back(g);
    std::map<std::pair<int, int>, std::vector<PredictedTriplet>> preds_by_category;
    for (const auto& p : predictions) {
        const std::pair<int, int> category{p.object_class, p.predicate};
        if (gt_by_category.count(category)) preds_by_category[category].push_back(p);
    }

    MapResult result;
    double sum_full = 0.0, sum_rare = 0.0, sum_nonrare = 0.0;
    for (const auto& [category, instances] : gt_by_category) {
        const auto preds_it = preds_by_category.find(category);
        const double ap = preds_it == preds_by_category.end()
                              ? 0.0
                              : average_precision(preds_it->second, instances);
        sum_full += ap;
        ++result.categories_full;
        if (static_cast<int64_t>(instances.size()) < rare_threshold) {
            sum_rare += ap;
            ++result.categories_rare;
        } else {
            sum_nonrare += ap;
            ++result.categories_nonrare;
        }
    }
    result.full = result.categories_full ? sum_full / result.categories_full : 0.0;
    result.rare = result.categories_rare ? sum_rare / result.categories_rare : 0.0;
    result.nonrare = result.categories_nonrare ? sum_nonrare / result.categories_nonrare : 0.0;
    return result;
}

PersonMetrics personwise_topk(const PersonSample& sample, int k, double threshold) {
    if (k < 1) throw SchemaError("k must be >= 1");
    // Top-k by confidence among predictions above the threshold.
    auto candidates = sample.predictions;
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::set<std::pair<int, int>> z;
    for (const auto& [conf, triplet] : candidates) {
        if (conf <= threshold) continue;
        if (static_cast<int>(z.size()) >= k) break;
        z.insert(triplet);
    }
    const auto& y = sample.gt_triplets;

    int hits = 0;
    for (const auto& t : z)
        if (y.count(t)) ++hits;
    const int union_size = static_cast<int>(y.size() + z.size()) - hits;

    PersonMetrics m;
    m.recall = y.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(y.size());
    m.precision = z.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(z.size());
    m.accuracy = union_size == 0 ? 0.0 : static_cast<double>(hits) / union_size;
    const size_t denom = y.size() + z.size();
    m.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(hits) / static_cast<double>(denom);
    return m;
}

PersonwiseAggregate aggregate_personwise(const std::vector<PersonSample>& samples, int k,
                                         double threshold) {
    PersonwiseAggregate agg;
    for (const auto& sample : samples) {
        // Humans with neither ground truth nor (thresholded) predictions have
        // undefined ratios and are excluded.
        const PersonMetrics m = personwise_topk(sample, k, threshold);
        bool has_z = false;
        for (const auto& [conf, _] : sample.predictions)
            if (conf > threshold) has_z = true;
        if (sample.gt_triplets.empty() && !has_z) continue;
        agg.mean.recall += m.recall;
        agg.mean.precision += m.precision;
        agg.mean.accuracy += m.accuracy;
        agg.mean.f1 += m.f1;
        ++agg.evaluated_humans;
    }
    if (agg.evaluated_humans > 0) {
        agg.mean.recall /= agg.evaluated_humans;
        agg.mean.precision /= agg.evaluated_humans;
        agg.mean.accuracy /= agg.evaluated_humans;
        agg.mean.f1 /= agg.evaluated_humans;
    }
    return agg;
}

std::vector<GtPairBox> gt_pairs_from_instances(const std::vector<GroundTruthInstance>& gt) {
    std::set<std::tuple<int, int, int, int>> seen;
    std::vector<GtPairBox> pairs;
    for (const auto& g : gt)
        if (seen.insert({g.video_index, g.frame, g.human_track, g.object_track}).second)
            pairs.push_back({g.video_index, g.frame, g.human_track, g.object_track, g.human_box,
                             g.object_box});
    return pairs;
}

std::vector<std::optional<std::pair<int, int>>> assign_pairs_to_gt(
    const std::vector<PredictedTriplet>& predictions, const std::vector<GtPairBox>& gt_pairs) {
    std::vector<std::optional<std::pair<int, int>>> out(predictions.size());
    std::vector<char> consumed_gt(gt_pairs.size(), 0);

    // Distinct predicted pairs, deterministic order.
    std::map<std::tuple<int, int, std::array<double, 8>>, std::vector<size_t>> pred_pairs;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const auto& p = predictions[i];
        pred_pairs[{p.video_index, p.frame, box_key(p.human_box, p.object_box)}].push_back(i);
    }

    // Track-hinted predictions take their hinted pair directly when it exists
    // in the ground truth.
    std::vector<std::pair<double, std::pair<size_t, size_t>>> candidates;  // (-quality, (pp, gp))
    std::vector<const std::vector<size_t>*> pred_groups;
    std::vector<char> group_done;
    for (const auto& [key, indices] : pred_pairs) {
        const PredictedTriplet& p = predictions[indices.front()];
        bool hinted = false;
        if (p.human_track_hint && p.object_track_hint) {
            for (size_t g = 0; g < gt_pairs.size(); ++g) {
                if (gt_pairs[g].video_index == p.video_index && gt_pairs[g].frame == p.frame &&
                    gt_pairs[g].human_track == *p.human_track_hint &&
                    gt_pairs[g].object_track == *p.object_track_hint) {
                    for (size_t i : indices)
                        out[i] = std::make_pair(gt_pairs[g].human_track, gt_pairs[g].object_track);
                    consumed_gt[g] = 1;
                    hinted = true;
                    break;
                }
            }
        }
        if (hinted) continue;
        pred_groups.push_back(&indices);
        group_done.push_back(0);
        const size_t pp = pred_groups.size() - 1;
        for (size_t g = 0; g < gt_pairs.size(); ++g) {
            if (consumed_gt[g] || gt_pairs[g].video_index != p.video_index ||
                gt_pairs[g].frame != p.frame)
                continue;
            const double quality =
                iou(p.human_box, gt_pairs[g].human_box) * iou(p.object_box, gt_pairs[g].object_box);
            if (quality > 0.0) candidates.emplace_back(-quality, std::make_pair(pp, g));
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [neg_quality, pair] : candidates) {
        const auto [pp, g] = pair;
        if (group_done[pp] || consumed_gt[g]) continue;
        group_done[pp] = 1;
        consumed_gt[g] = 1;
        for (size_t i : *pred_groups[pp])
            out[i] = std::make_pair(gt_pairs[g].human_track, gt_pairs[g].object_track);
    }
    return out;
}

AnticipationFiltered anticipation_filter(const std::vector<PredictedTriplet>& predictions,
                                         const FramePresence& at_anchor,
                                         const FramePresence& at_label) {
    AnticipationFiltered result;
    for (int human : at_anchor.humans)
        if (!at_label.humans.count(human)) result.excluded_humans.insert(human);
    for (const auto& p : predictions) {
        if (p.human_track_hint && p.object_track_hint) {
            const std::pair<int, int> pair{*p.human_track_hint, *p.object_track_hint};
            if (at_anchor.pairs.count(pair) && !at_label.pairs.count(pair)) {
                ++result.dropped_predictions;
                continue;
            }
        }
        result.predictions.push_back(p);
    }
    return result;
}

DetectionAccounting detection_mode_accounting(const std::vector<GroundTruthInstance>& gt,
                                              const std::vector<PredictedTriplet>& predictions) {
    std::set<std::pair<int, int>> frames_with_predictions;
    for (const auto& p : predictions) frames_with_predictions.insert({p.video_index, p.frame});

    DetectionAccounting acc;
    std::set<std::pair<int, int>> empty_frames;
    std::set<std::tuple<int, int, int>> zero_pred_humans;
    for (const auto& g : gt) {
        if (frames_with_predictions.count({g.video_index, g.frame})) continue;
        empty_frames.insert({g.video_index, g.frame});
        acc.false_negatives_added[{g.object_class, g.predicate}]++;
        zero_pred_humans.insert({g.video_index, g.frame, g.human_track});
    }
    acc.empty_frames = static_cast<int>(empty_frames.size());
    acc.zero_prediction_humans = static_cast<int>(zero_pred_humans.size());
    return acc;
}

std::vector<SweepRow> threshold_sweep(const std::vector<PersonSample>& samples, int k,
                                      const std::vector<double>& thresholds) {
    std::vector<SweepRow> rows;
    for (double t : thresholds) {
        if (t <= 0.0 || t >= 1.0) throw SchemaError("sweep thresholds must be in (0,1)");
        rows.push_back({t, aggregate_personwise(samples, k, t)});
    }
    return rows;
}

// ---------------------------------------------------------------------------

namespace {

json box_to_json(const BoundingBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

BoundingBox box_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 4) throw SchemaError("box must have 4 coordinates");
    return {v[0], v[1], v[2], v[3]};
}

}  // namespace

void write_predictions_jsonl(const std::string& path,
                             const std::vector<PredictedTriplet>& predictions) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw SchemaError("cannot open " + path + " for writing");
    for (const auto& p : predictions) {
        json j{{"video", p.video_index},
               {"frame", p.frame},
               {"human_box", box_to_json(p.human_box)},
               {"object_box", box_to_json(p.object_box)},
               {"object_class", p.object_class},
               {"predicate", p.predicate},
               {"confidence", p.confidence}};
        if (p.human_track_hint) j["human_hint"] = *p.human_track_hint;
        if (p.object_track_hint) j["object_hint"] = *p.object_track_hint;
        out << j.dump() << "\n";
    }
}

std::vector<PredictedTriplet> read_predictions_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path);
    std::vector<PredictedTriplet> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        PredictedTriplet p;
        p.video_index = j.at("video").get<int>();
        p.frame = j.at("frame").get<int>();
        p.human_box = box_from_json(j.at("human_box"));
        p.object_box = box_from_json(j.at("object_box"));
        p.object_class = j.at("object_class").get<int>();
        p.predicate = j.at("predicate").get<int>();
        p.confidence = j.at("confidence").get<double>();
        if (j.contains("human_hint")) p.human_track_hint = j.at("human_hint").get<int>();
        if (j.contains("object_hint")) p.object_track_hint = j.at("object_hint").get<int>();
        out.push_back(p);
    }
    return out;
}

std::string report_to_json(const MetricsReport& report) {
    json j{{"mode", report.mode},
           {"tau_a", report.tau_a},
           {"k", report.k},
           {"threshold", report.threshold},
           {"map", {{"full", report.map_full}, {"nonrare", report.map_nonrare}, {"rare", report.map_rare}}},
           {"personwise",
            {{"recall", report.personwise.mean.recall},
             {"precision", report.personwise.mean.precision},
             {"accuracy", report.personwise.mean.accuracy},
             {"f1", report.personwise.mean.f1}}},
           {"counts",
            {{"humans", report.personwise.evaluated_humans},
             {"frames", report.evaluated_frames},
             {"categories_full", report.categories_full},
             {"categories_nonrare", report.categories_nonrare},
             {"categories_rare", report.categories_rare},
             {"empty_frames", report.accounting.empty_frames},
             {"zero_prediction_humans", report.accounting.zero_prediction_humans}}}};
    return j.dump(2);
}

void validate_report_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("report is not valid JSON: ") + e.what());
    }
    auto require = [&](const json& node, const char* name, bool numeric) {
        if (!node.contains(name)) throw SchemaError(std::string("report missing field '") + name + "'");
        if (numeric && !node.at(name).is_number())
            throw SchemaError(std::string("report field '") + name + "' must be numeric");
    };
    require(j, "mode", false);
    if (!j.at("mode").is_string()) throw SchemaError("mode must be a string");
    const std::string mode = j.at("mode").get<std::string>();
    if (mode != "oracle" && mode != "detection") throw SchemaError("mode must be oracle|detection");
    require(j, "tau_a", true);
    require(j, "k", true);
    require(j, "threshold", true);
    require(j, "map", false);
    require(j.at("map"), "full", true);
    require(j.at("map"), "nonrare", true);
    require(j.at("map"), "rare", true);
    require(j, "personwise", false);
    for (const char* f : {"recall", "precision", "accuracy", "f1"}) {
        require(j.at("personwise"), f, true);
        const double v = j.at("personwise").at(f).get<double>();
        if (v < 0.0 || v > 1.0) throw SchemaError(std::string("personwise ") + f + " out of [0,1]");
    }
    for (const char* f : {"full", "nonrare", "rare"}) {
        const double v = j.at("map").at(f).get<double>();
        if (v < 0.0 || v > 1.0) throw SchemaError(std::string("map ") + f + " out of [0,1]");
    }
    require(j, "counts", false);
    require(j.at("counts"), "humans", true);
    require(j.at("counts"), "frames", true);
}

}  // namespace hoi
