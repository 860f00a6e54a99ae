#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hoi/data.hpp"

namespace hoi {

struct PredictedTriplet {
    int video_index = 0;
    int frame = 0;  // anchor keyframe the prediction was made at
    BoundingBox human_box{0, 0, 1, 1};
    BoundingBox object_box{0, 0, 1, 1};
    int object_class = -1;
    int predicate = -1;
    double confidence = 0.0;
    std::optional<int> human_track_hint;
    std::optional<int> object_track_hint;
};

struct GroundTruthInstance {
    int video_index = 0;
    int frame = 0;  // anchor keyframe (anticipation GT is indexed by its anchor)
    BoundingBox human_box{0, 0, 1, 1};
    BoundingBox object_box{0, 0, 1, 1};
    int object_class = -1;
    int predicate = -1;
    int human_track = -1;
    int object_track = -1;
};

// True iff both boxes overlap their ground-truth counterparts with IoU
// strictly above 0.5 and the object class and predicate agree.
bool match_triplet(const PredictedTriplet& pred, const GroundTruthInstance& gt);

// AP for one triplet category. Predictions are ranked by confidence with a
// deterministic (video, frame, human box, object box) tie-break; ground truth
// is matched greedily (each instance at most once, best IoU first) and the
// area under the precision-recall curve uses all-point interpolation.
double average_precision(std::vector<PredictedTriplet> predictions,
                         const std::vector<GroundTruthInstance>& gt);

struct MapResult {
    double full = 0.0;
    double nonrare = 0.0;
    double rare = 0.0;
    int categories_full = 0;
    int categories_nonrare = 0;
    int categories_rare = 0;
};

// Mean AP over the categories observed in `gt`; categories with fewer than
// `rare_threshold` ground-truth instances form the rare split. Categories
// without ground truth are excluded, never scored zero.
MapResult mean_ap(const std::vector<PredictedTriplet>& predictions,
                  const std::vector<GroundTruthInstance>& gt, int64_t rare_threshold = 25);

// ---------------------------------------------------------------------------
// Person-wise multi-label top-k metrics.

struct PersonMetrics {
    double recall = 0.0;
    double precision = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
};

// One evaluated human at one frame: the ground-truth triplet identity set and
// the human's candidate predictions (already assigned to this human).
struct PersonSample {
    int video_index = 0;
    int frame = 0;
    int human_track = -1;
    std::set<std::pair<int, int>> gt_triplets;  // (object track, predicate)
    // (confidence, (object track, predicate)) candidates
    std::vector<std::pair<double, std::pair<int, int>>> predictions;
};

// Top-k thresholded set metrics for one human. Conventions: empty prediction
// set with non-empty ground truth scores zero; the caller excludes humans
// where both sets are empty.
PersonMetrics personwise_topk(const PersonSample& sample, int k, double threshold);

struct PersonwiseAggregate {
    PersonMetrics mean;      // unweighted over all evaluated humans
    int evaluated_humans = 0;
};

PersonwiseAggregate aggregate_personwise(const std::vector<PersonSample>& samples, int k,
                                         double threshold);

// A ground-truth pair available for assignment at one frame.
struct GtPairBox {
    int video_index = 0;
    int frame = 0;
    int human_track = -1;
    int object_track = -1;
    BoundingBox human_box{0, 0, 1, 1};
    BoundingBox object_box{0, 0, 1, 1};
};

// Greedy assignment of predicted pairs to ground-truth pairs within a frame,
// by descending product of human and object IoU; each ground-truth pair is
// consumed once. Returns, per prediction index, the matched
// (human track, object track) or nullopt. Predictions carrying track hints
// that correspond to a ground-truth pair are honored directly.
std::vector<std::optional<std::pair<int, int>>> assign_pairs_to_gt(
    const std::vector<PredictedTriplet>& predictions, const std::vector<GtPairBox>& gt_pairs);

// Convenience: distinct pairs of a ground-truth instance list.
std::vector<GtPairBox> gt_pairs_from_instances(const std::vector<GroundTruthInstance>& gt);

// ---------------------------------------------------------------------------
// Anticipation exclusions (tau_a > 0).

struct FramePresence {
    std::set<int> humans;
    std::set<std::pair<int, int>> pairs;  // co-present candidate pairs
};

struct AnticipationFiltered {
    std::vector<PredictedTriplet> predictions;  // matched to pairs alive in the future
    std::set<int> excluded_humans;              // absent at the label frame
    int dropped_predictions = 0;
};

// Drops predictions whose anchor pair no longer exists at the label frame and
// reports humans that left the frame (excluded from person-wise metrics).
AnticipationFiltered anticipation_filter(const std::vector<PredictedTriplet>& predictions,
                                         const FramePresence& at_anchor,
                                         const FramePresence& at_label);

// ---------------------------------------------------------------------------
// Detection-mode bookkeeping: frames with ground truth but no predictions
// keep their ground truth as false negatives and contribute zero-prediction
// humans to the person-wise pool.

struct DetectionAccounting {
    int empty_frames = 0;
    std::map<std::pair<int, int>, int64_t> false_negatives_added;  // category -> count
    int zero_prediction_humans = 0;
};

DetectionAccounting detection_mode_accounting(const std::vector<GroundTruthInstance>& gt,
                                              const std::vector<PredictedTriplet>& predictions);

// ---------------------------------------------------------------------------

struct SweepRow {
    double threshold = 0.0;
    PersonwiseAggregate metrics;
};

std::vector<SweepRow> threshold_sweep(const std::vector<PersonSample>& samples, int k,
                                      const std::vector<double>& thresholds);

struct MetricsReport {
    std::string mode = "oracle";
    int tau_a = 0;
    int k = 5;
    double threshold = 0.3;
    double map_full = 0.0;
    double map_nonrare = 0.0;
    double map_rare = 0.0;
    PersonwiseAggregate personwise;
    int evaluated_frames = 0;
    int categories_full = 0;
    int categories_nonrare = 0;
    int categories_rare = 0;
    DetectionAccounting accounting;
};

// Prediction files are JSON-lines, one PredictedTriplet per line.
void write_predictions_jsonl(const std::string& path,
                             const std::vector<PredictedTriplet>& predictions);
std::vector<PredictedTriplet> read_predictions_jsonl(const std::string& path);

std::string report_to_json(const MetricsReport& report);
// Structural validation of a serialized report; throws SchemaError.
void validate_report_json(const std::string& json_text);

}  // namespace hoi
