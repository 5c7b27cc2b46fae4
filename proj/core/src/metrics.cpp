#include "rlld/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace rlld {

using nlohmann::json;

std::string_view to_string(Track track) {
    switch (track) {
        case Track::audio: return "audio";
        case Track::visual: return "visual";
        case Track::audiovisual: return "audiovisual";
    }
    return "audio";
}

double F1Counts::f1() const {
    const long denom = 2 * tp + fp + fn;
    if (denom == 0) return 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

TemporalLabels truth_of(const VideoSample& sample) {
    if (!sample.has_segments()) {
        throw Error(Error::Kind::missing_field, "sample '" + sample.id + "' has no clean segment annotations");
    }
    return {*sample.clean_audio_segments, *sample.clean_visual_segments,
            segment_and(*sample.clean_audio_segments, *sample.clean_visual_segments)};
}

namespace {

void require_same_shape(const BinaryMatrix& a, const BinaryMatrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(Error::Kind::shape_mismatch, std::string(what) + ": prediction and truth shapes differ");
    }
}

}  // namespace

std::vector<F1Counts> segment_counts_per_class(const BinaryMatrix& pred, const BinaryMatrix& truth) {
    require_same_shape(pred, truth, "segment_f1");
    std::vector<F1Counts> out(static_cast<std::size_t>(pred.cols()));
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
        auto& k = out[static_cast<std::size_t>(c)];
        for (Eigen::Index t = 0; t < pred.rows(); ++t) {
            const bool p = pred(t, c) != 0;
            const bool y = truth(t, c) != 0;
            k.tp += p && y;
            k.fp += p && !y;
            k.fn += !p && y;
        }
    }
    return out;
}

F1Counts segment_counts(const BinaryMatrix& pred, const BinaryMatrix& truth) {
    F1Counts total;
    for (const auto& k : segment_counts_per_class(pred, truth)) total += k;
    return total;
}

double segment_f1(const BinaryMatrix& pred, const BinaryMatrix& truth) {
    return segment_counts(pred, truth).f1();
}

std::vector<EventSpan> extract_events(const BinaryMatrix& segments, Track track) {
    std::vector<EventSpan> events;
    for (Eigen::Index c = 0; c < segments.cols(); ++c) {
        Eigen::Index t = 0;
        while (t < segments.rows()) {
            if (!segments(t, c)) {
                ++t;
                continue;
            }
            const Eigen::Index start = t;
            while (t < segments.rows() && segments(t, c)) ++t;
            events.push_back({static_cast<int>(c), static_cast<int>(start), static_cast<int>(t - 1), track});
        }
    }
    return events;
}

BinaryMatrix rasterize_events(const std::vector<EventSpan>& events, Eigen::Index segments, Eigen::Index classes) {
    BinaryMatrix m = BinaryMatrix::Zero(segments, classes);
    for (const auto& e : events) {
        if (e.class_id < 0 || e.class_id >= classes || e.start < 0 || e.end < e.start || e.end >= segments) {
            throw Error(Error::Kind::shape_mismatch, "rasterize_events: span out of range");
        }
        m.block(e.start, e.class_id, e.length(), 1).setOnes();
    }
    return m;
}

double span_iou(const EventSpan& a, const EventSpan& b) {
    if (a.class_id != b.class_id) return 0.0;
    const int inter = std::min(a.end, b.end) - std::max(a.start, b.start) + 1;
    if (inter <= 0) return 0.0;
    const int uni = a.length() + b.length() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<EventMatch> match_events(const std::vector<EventSpan>& pred, const std::vector<EventSpan>& truth,
                                     double miou_threshold) {
    std::vector<EventMatch> candidates;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (std::size_t j = 0; j < truth.size(); ++j) {
            const double iou = span_iou(pred[i], truth[j]);
            if (iou > 0.0 && iou >= miou_threshold) candidates.push_back({i, j, iou});
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](const EventMatch& a, const EventMatch& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (truth[a.truth].start != truth[b.truth].start) return truth[a.truth].start < truth[b.truth].start;
        return truth[a.truth].class_id < truth[b.truth].class_id;
    });
    std::vector<char> pred_used(pred.size(), 0);
    std::vector<char> truth_used(truth.size(), 0);
    std::vector<EventMatch> matches;
    for (const auto& m : candidates) {
        if (pred_used[m.pred] || truth_used[m.truth]) continue;
        pred_used[m.pred] = 1;
        truth_used[m.truth] = 1;
        matches.push_back(m);
    }
    return matches;
}

F1Counts event_counts(const std::vector<EventSpan>& pred, const std::vector<EventSpan>& truth, double miou_threshold) {
    const long matched = static_cast<long>(match_events(pred, truth, miou_threshold).size());
    return {matched, static_cast<long>(pred.size()) - matched, static_cast<long>(truth.size()) - matched};
}

double event_f1(const std::vector<EventSpan>& pred, const std::vector<EventSpan>& truth, double miou_threshold) {
    return event_counts(pred, truth, miou_threshold).f1();
}

namespace {

struct TrackCounts {
    F1Counts segment;
    F1Counts event;
    std::vector<F1Counts> segment_per_class;
    std::vector<F1Counts> event_per_class;
};

TrackCounts count_track(const BinaryMatrix& pred, const BinaryMatrix& truth, Track track, double thr) {
    TrackCounts k;
    k.segment_per_class = segment_counts_per_class(pred, truth);
    for (const auto& c : k.segment_per_class) k.segment += c;
    const auto pe = extract_events(pred, track);
    const auto te = extract_events(truth, track);
    k.event_per_class.assign(static_cast<std::size_t>(pred.cols()), F1Counts{});
    for (const auto& e : pe) ++k.event_per_class[static_cast<std::size_t>(e.class_id)].fp;
    for (const auto& e : te) ++k.event_per_class[static_cast<std::size_t>(e.class_id)].fn;
    for (const auto& m : match_events(pe, te, thr)) {
        auto& c = k.event_per_class[static_cast<std::size_t>(pe[m.pred].class_id)];
        ++c.tp;
        --c.fp;
        --c.fn;
    }
    for (const auto& c : k.event_per_class) k.event += c;
    return k;
}

LevelScores finish(double a, double v, double av, double ev) {
    return {a, v, av, (a + v + av) / 3.0, ev};
}

}  // namespace

EvaluationReport evaluate(const PredictionMap& predictions, const std::vector<VideoSample>& split,
                          Aggregation aggregation, double miou_threshold) {
    EvaluationReport report;
    report.videos = split.size();
    if (split.empty()) {
        report.segment = finish(1.0, 1.0, 1.0, 1.0);
        report.event = report.segment;
        return report;
    }
    const auto num_classes = static_cast<std::size_t>(split.front().num_classes());

    // Micro accumulators: [track][class]
    std::array<std::vector<F1Counts>, 3> seg_pc;
    std::array<std::vector<F1Counts>, 3> evt_pc;
    for (auto* v : {&seg_pc, &evt_pc}) {
        for (auto& per : *v) per.assign(num_classes, F1Counts{});
    }
    // Macro accumulators: sum of per-video F for A, V, AV, Event@AV.
    std::array<double, 4> seg_macro{};
    std::array<double, 4> evt_macro{};

    for (const auto& sample : split) {
        auto it = predictions.find(sample.id);
        if (it == predictions.end()) {
            throw Error(Error::Kind::missing_field, "evaluate: missing prediction for video '" + sample.id + "'");
        }
        const TemporalLabels truth = truth_of(sample);
        const TemporalLabels& pred = it->second;
        const std::array<const BinaryMatrix*, 3> p{&pred.audio, &pred.visual, &pred.audiovisual};
        const std::array<const BinaryMatrix*, 3> y{&truth.audio, &truth.visual, &truth.audiovisual};
        const std::array<Track, 3> tracks{Track::audio, Track::visual, Track::audiovisual};
        std::array<TrackCounts, 3> k;
        for (std::size_t m = 0; m < 3; ++m) {
            k[m] = count_track(*p[m], *y[m], tracks[m], miou_threshold);
            for (std::size_t c = 0; c < num_classes; ++c) {
                seg_pc[m][c] += k[m].segment_per_class[c];
                evt_pc[m][c] += k[m].event_per_class[c];
            }
        }
        if (aggregation == Aggregation::macro) {
            for (std::size_t m = 0; m < 3; ++m) {
                seg_macro[m] += k[m].segment.f1();
                evt_macro[m] += k[m].event.f1();
            }
            seg_macro[3] += (k[0].segment + k[1].segment).f1();
            evt_macro[3] += (k[0].event + k[1].event).f1();
        }
    }

    std::array<F1Counts, 3> seg_total;
    std::array<F1Counts, 3> evt_total;
    for (std::size_t m = 0; m < 3; ++m) {
        for (std::size_t c = 0; c < num_classes; ++c) {
            seg_total[m] += seg_pc[m][c];
            evt_total[m] += evt_pc[m][c];
        }
    }

    if (aggregation == Aggregation::micro) {
        report.segment = finish(seg_total[0].f1(), seg_total[1].f1(), seg_total[2].f1(),
                                (seg_total[0] + seg_total[1]).f1());
        report.event = finish(evt_total[0].f1(), evt_total[1].f1(), evt_total[2].f1(),
                              (evt_total[0] + evt_total[1]).f1());
    } else {
        const double n = static_cast<double>(split.size());
        report.segment = finish(seg_macro[0] / n, seg_macro[1] / n, seg_macro[2] / n, seg_macro[3] / n);
        report.event = finish(evt_macro[0] / n, evt_macro[1] / n, evt_macro[2] / n, evt_macro[3] / n);
    }

    report.per_class.resize(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& pc = report.per_class[c];
        pc.segment.audio = seg_pc[0][c].f1();
        pc.segment.visual = seg_pc[1][c].f1();
        pc.segment.audiovisual = seg_pc[2][c].f1();
        pc.event.audio = evt_pc[0][c].f1();
        pc.event.visual = evt_pc[1][c].f1();
        pc.event.audiovisual = evt_pc[2][c].f1();
    }
    return report;
}

namespace {

json level_to_json(const LevelScores& s) {
    return {{"A", s.audio}, {"V", s.visual}, {"AV", s.audiovisual}, {"Type", s.type}, {"Event", s.event}};
}

LevelScores level_from_json(const json& j, const std::string& level) {
    if (!j.contains(level)) throw Error(Error::Kind::missing_field, "report: missing level '" + level + "'");
    const json& l = j.at(level);
    auto get = [&](const char* key) {
        if (!l.contains(key)) {
            throw Error(Error::Kind::missing_field, "report: missing field '" + level + "." + key + "'");
        }
        return l.at(key).get<double>();
    };
    return {get("A"), get("V"), get("AV"), get("Type"), get("Event")};
}

}  // namespace

std::string report_to_json(const EvaluationReport& report) {
    json j;
    j["videos"] = report.videos;
    j["segment"] = level_to_json(report.segment);
    j["event"] = level_to_json(report.event);
    json per = json::array();
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& pc = report.per_class[c];
        per.push_back({{"class", c},
                       {"segment", {{"A", pc.segment.audio}, {"V", pc.segment.visual}, {"AV", pc.segment.audiovisual}}},
                       {"event", {{"A", pc.event.audio}, {"V", pc.event.visual}, {"AV", pc.event.audiovisual}}}});
    }
    j["per_class"] = per;
    return j.dump(2);
}

EvaluationReport report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Error::Kind::parse, std::string("report: ") + e.what());
    }
    EvaluationReport r;
    r.segment = level_from_json(j, "segment");
    r.event = level_from_json(j, "event");
    r.videos = j.value("videos", std::size_t{0});
    if (j.contains("per_class")) {
        for (const auto& pc : j.at("per_class")) {
            ClassScores s;
            s.segment.audio = pc.at("segment").at("A").get<double>();
            s.segment.visual = pc.at("segment").at("V").get<double>();
            s.segment.audiovisual = pc.at("segment").at("AV").get<double>();
            s.event.audio = pc.at("event").at("A").get<double>();
            s.event.visual = pc.at("event").at("V").get<double>();
            s.event.audiovisual = pc.at("event").at("AV").get<double>();
            r.per_class.push_back(s);
        }
    }
    return r;
}

std::string format_report_table(const EvaluationReport& r) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "%-14s|%7s%7s%7s%7s%7s |%7s%7s%7s%7s%7s\n", "", "A", "V", "AV", "Type",
                  "Event", "A", "V", "AV", "Type", "Event");
    os << "              |          Segment-level             |            Event-level\n" << line;
    std::snprintf(line, sizeof(line), "%-14s|%7.1f%7.1f%7.1f%7.1f%7.1f |%7.1f%7.1f%7.1f%7.1f%7.1f\n", "F-score (%)",
                  100 * r.segment.audio, 100 * r.segment.visual, 100 * r.segment.audiovisual, 100 * r.segment.type,
                  100 * r.segment.event, 100 * r.event.audio, 100 * r.event.visual, 100 * r.event.audiovisual,
                  100 * r.event.type, 100 * r.event.event);
    os << line;
    return os.str();
}

}  // namespace rlld
