#pragma once

#include "rlld/common.hpp"
#include "rlld/data.hpp"

#include <map>
#include <string>
#include <vector>

namespace rlld {

enum class Track { audio, visual, audiovisual };

std::string_view to_string(Track track);

struct EventSpan {
    int class_id = 0;
    int start = 0;  // inclusive segment index
    int end = 0;    // inclusive segment index
    Track track = Track::audio;

    int length() const { return end - start + 1; }
    bool operator==(const EventSpan&) const = default;
};

/// True-positive / false-positive / false-negative counts.
struct F1Counts {
    long tp = 0;
    long fp = 0;
    long fn = 0;

    /// 2TP / (2TP + FP + FN); 1 when all counts are zero (both sides empty).
    double f1() const;
    F1Counts& operator+=(const F1Counts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
};

inline F1Counts operator+(F1Counts a, const F1Counts& b) { return a += b; }

/// Per-segment decisions for one video.
struct TemporalLabels {
    BinaryMatrix audio;        // T x C
    BinaryMatrix visual;       // T x C
    BinaryMatrix audiovisual;  // T x C
};

/// Ground truth of a validation/test sample; audiovisual = audio AND visual.
TemporalLabels truth_of(const VideoSample& sample);

F1Counts segment_counts(const BinaryMatrix& pred, const BinaryMatrix& truth);
std::vector<F1Counts> segment_counts_per_class(const BinaryMatrix& pred, const BinaryMatrix& truth);
double segment_f1(const BinaryMatrix& pred, const BinaryMatrix& truth);

/// Maximal runs of ones per class, ordered by class then start.
std::vector<EventSpan> extract_events(const BinaryMatrix& segments, Track track = Track::audio);
BinaryMatrix rasterize_events(const std::vector<EventSpan>& events, Eigen::Index segments, Eigen::Index classes);

/// Segment-set IoU of two spans (0 when the classes differ).
double span_iou(const EventSpan& a, const EventSpan& b);

inline constexpr double kDefaultMiouThreshold = 0.5;

struct EventMatch {
    std::size_t pred;
    std::size_t truth;
    double iou;
};

/// Greedy one-to-one matching of same-class spans with IoU >= threshold, in
/// descending IoU order; ties broken by earlier truth start, then lower class id.
std::vector<EventMatch> match_events(const std::vector<EventSpan>& pred, const std::vector<EventSpan>& truth,
                                     double miou_threshold = kDefaultMiouThreshold);

F1Counts event_counts(const std::vector<EventSpan>& pred, const std::vector<EventSpan>& truth,
                      double miou_threshold = kDefaultMiouThreshold);
double event_f1(const std::vector<EventSpan>& pred, const std::vector<EventSpan>& truth,
                double miou_threshold = kDefaultMiouThreshold);

struct LevelScores {
    double audio = 0.0;
    double visual = 0.0;
    double audiovisual = 0.0;
    double type = 0.0;   // mean of audio, visual, audiovisual
    double event = 0.0;  // F over pooled audio and visual instances
};

struct ClassScores {
    LevelScores segment;  // type/event left at 0 per class
    LevelScores event;
};

struct EvaluationReport {
    LevelScores segment;
    LevelScores event;
    std::vector<ClassScores> per_class;
    std::size_t videos = 0;
};

enum class Aggregation { micro, macro };

using PredictionMap = std::map<std::string, TemporalLabels>;

/// Every sample of the split must carry clean segments and have a prediction.
EvaluationReport evaluate(const PredictionMap& predictions, const std::vector<VideoSample>& split,
                          Aggregation aggregation = Aggregation::micro,
                          double miou_threshold = kDefaultMiouThreshold);

std::string report_to_json(const EvaluationReport& report);
/// Throws Error(missing_field) when a level or metric is absent.
EvaluationReport report_from_json(const std::string& text);

/// Two-level table with columns A, V, AV, Type, Event (percentages).
std::string format_report_table(const EvaluationReport& report);

}  // namespace rlld
