#pragma once

#include "hoi/eval.hpp"
#include "hoi/model.hpp"

namespace hoi {

// Ground-truth instances for the detection (tau_a = 0) or anticipation task:
// one instance per (anchor frame, labeled pair, predicate) whose label frame
// t + tau_a is annotated. Boxes are taken at the anchor frame when the track
// is present there, otherwise at the label frame (tracks that only appear in
// the future can never match a prediction and count as false negatives).
std::vector<GroundTruthInstance> build_ground_truth(const Dataset& dataset, int tau_a);

// Humans and co-present candidate pairs at one keyframe.
FramePresence frame_presence(const VideoAnnotation& video, int t);

// Runs the model over every window of the dataset in eval mode and expands
// each output into one PredictedTriplet per predicate, boxed at the anchor
// frame with track hints attached.
std::vector<PredictedTriplet> predict_dataset(const HoiModel& model, const Dataset& dataset,
                                              const FeatureProvider& provider,
                                              const WindowConfig& window_config);

struct EvalOptions {
    std::string mode = "oracle";  // oracle | detection
    int tau_a = 0;
    int k = 5;
    double threshold = 0.3;
    int64_t rare_threshold = 25;
};

// Person-wise samples for the task: one per (anchor frame, ground-truth
// human), with anticipation exclusions applied and predictions assigned to
// humans (track hints first, IoU-greedy pair matching otherwise).
std::vector<PersonSample> build_person_samples(const Dataset& dataset,
                                               const std::vector<PredictedTriplet>& predictions,
                                               int tau_a);

// Full evaluation protocol over a prediction set.
MetricsReport evaluate_predictions(const Dataset& dataset,
                                   const std::vector<PredictedTriplet>& predictions,
                                   const EvalOptions& options);

// Anticipation-filtered copy of a prediction set (identity for tau_a = 0).
std::vector<PredictedTriplet> apply_anticipation_filter(
    const Dataset& dataset, const std::vector<PredictedTriplet>& predictions, int tau_a);

}  // namespace hoi
