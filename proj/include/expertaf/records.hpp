#pragma once

#include <map>
#include <string>
#include <vector>

#include "expertaf/commentary.hpp"
#include "expertaf/io.hpp"
#include "expertaf/pairing.hpp"
#include "expertaf/retrieval_eval.hpp"

// JSON shapes of every line-delimited record the pipeline reads or writes.
// Field names here are the file format; see docs/formats.md.

namespace expertaf::records {

using io::Json;

inline CommentaryRecord commentary_from_json(const Json& j) {
    CommentaryRecord r;
    r.text = j.at("text").get<std::string>();
    r.timestamp_s = j.at("timestamp_s").get<double>();
    r.video_id = j.at("video_id").get<std::string>();
    r.expert_id = j.value("expert_id", std::string());
    r.scenario = j.at("scenario").get<std::string>();
    return r;
}

inline Json commentary_to_json(const CommentaryRecord& r) {
    Json j;
    j["video_id"] = r.video_id;
    j["expert_id"] = r.expert_id;
    j["timestamp_s"] = r.timestamp_s;
    j["scenario"] = r.scenario;
    j["text"] = r.text;
    return j;
}

inline Json labels_to_json(const CommentaryLabel& label) {
    Json j = Json::object();
    for (BodyRegion r : kAllBodyRegions) j[std::string(to_string(r))] = std::string(to_string(label[r]));
    return j;
}

inline CommentaryLabel label_from_json(const Json& j) {
    CommentaryLabel label;
    label.summary = j.at("summary").get<std::string>();
    const auto& labels = j.at("labels");
    for (BodyRegion r : kAllBodyRegions) label[r] = parse_region_label(labels.at(std::string(to_string(r))).get<std::string>());
    return label;
}

/// One line of the labels file: the input record plus its outcome.
inline Json label_record(const CommentaryRecord& r, const ParseOutcome& outcome) {
    Json j = commentary_to_json(r);
    if (outcome.label) {
        j["status"] = "labeled";
        j["summary"] = outcome.label->summary;
        j["labels"] = labels_to_json(*outcome.label);
    } else {
        j["status"] = "discarded";
        j["reason"] = outcome.discard_kind;
        j["detail"] = outcome.discard_reason;
    }
    if (!outcome.warnings.empty()) j["warnings"] = outcome.warnings;
    return j;
}

inline Json window_to_json(const Window& w) {
    Json j;
    j["start"] = w.start_frame;
    j["length"] = w.length_frames;
    return j;
}

inline Window window_from_json(const Json& j) {
    return Window{j.at("start").get<std::size_t>(), j.at("length").get<std::size_t>()};
}

inline Json collection_to_json(std::span<const Demonstration> demos, const CollectionEntry& e) {
    Json j;
    j["learner_id"] = demos[e.learner].demo_id;
    j["learner_commentary"] = e.learner_commentary;
    j["expert_id"] = demos[e.expert].demo_id;
    j["expert_commentary"] = e.expert_commentary;
    j["region"] = std::string(to_string(e.region));
    return j;
}

inline CollectionEntry collection_from_json(const Json& j, const std::map<std::string, std::size_t>& demo_index,
                                            std::span<const Demonstration> demos) {
    auto lookup = [&](const std::string& id) {
        auto it = demo_index.find(id);
        if (it == demo_index.end()) throw InvalidRecord("unknown demonstration '" + id + "'");
        return it->second;
    };
    CollectionEntry e;
    e.learner = lookup(j.at("learner_id").get<std::string>());
    e.learner_commentary = j.at("learner_commentary").get<std::size_t>();
    e.expert = lookup(j.at("expert_id").get<std::string>());
    e.expert_commentary = j.at("expert_commentary").get<std::size_t>();
    const auto region = parse_body_region(j.at("region").get<std::string>());
    if (!region) throw InvalidRecord("unknown body region in collection record");
    e.region = *region;
    if (e.learner_commentary >= demos[e.learner].commentaries.size() ||
        e.expert_commentary >= demos[e.expert].commentaries.size())
        throw InvalidRecord("collection record refers to a commentary that does not exist");
    return e;
}

struct TupleProvenance {
    std::string config_hash;
    AlignMode mode = AlignMode::PerFrame;
    std::size_t stride = 1;
};

inline Json tuple_to_json(const CoachingTuple& t, const TupleProvenance& p) {
    Json j;
    j["key"] = tuple_key(t);
    j["split"] = std::string(to_string(t.split));
    j["learner_id"] = t.learner_id;
    j["learner_commentary"] = t.learner_commentary;
    j["learner_window"] = window_to_json(t.learner_window);
    j["summary"] = t.summary;
    j["expert_id"] = t.expert_id;
    j["expert_commentary"] = t.expert_commentary;
    j["expert_window"] = window_to_json(t.expert_window);
    j["region"] = std::string(to_string(t.matched_region));
    j["score_mm"] = t.alignment_score_mm;
    j["mode"] = std::string(to_string(p.mode));
    j["stride"] = p.stride;
    j["config_hash"] = p.config_hash;
    return j;
}

inline CoachingTuple tuple_from_json(const Json& j) {
    CoachingTuple t;
    t.learner_id = j.at("learner_id").get<std::string>();
    t.learner_commentary = j.at("learner_commentary").get<std::size_t>();
    t.learner_window = window_from_json(j.at("learner_window"));
    t.summary = j.at("summary").get<std::string>();
    t.expert_id = j.at("expert_id").get<std::string>();
    t.expert_commentary = j.at("expert_commentary").get<std::size_t>();
    t.expert_window = window_from_json(j.at("expert_window"));
    const auto region = parse_body_region(j.at("region").get<std::string>());
    if (!region) throw InvalidRecord("unknown body region in tuple record");
    t.matched_region = *region;
    t.alignment_score_mm = j.at("score_mm").get<double>();
    t.split = parse_split(j.at("split").get<std::string>());
    return t;
}

inline Json skip_to_json(const SkipRecord& s) {
    Json j;
    j["stage"] = s.stage;
    j["item"] = s.item;
    j["reason"] = s.reason;
    j["detail"] = s.detail;
    return j;
}

inline Json ranked_to_json(const RankedResult& r, ScorerKind scorer) {
    Json j;
    j["query_id"] = r.query_id;
    j["ground_truth"] = r.ground_truth;
    j["rank"] = r.rank ? Json(*r.rank) : Json(nullptr);
    j["scorer"] = std::string(to_string(scorer));
    Json ranking = Json::array();
    for (const auto& c : r.ranking) {
        Json cj;
        cj["id"] = c.id;
        cj["score"] = c.score;
        ranking.push_back(std::move(cj));
    }
    j["ranking"] = std::move(ranking);
    return j;
}

inline RankedResult ranked_from_json(const Json& j) {
    RankedResult r;
    r.query_id = j.at("query_id").get<std::string>();
    r.ground_truth = j.value("ground_truth", std::string());
    if (j.contains("rank") && !j.at("rank").is_null()) r.rank = j.at("rank").get<std::size_t>();
    if (j.contains("ranking"))
        for (const auto& c : j.at("ranking")) r.ranking.push_back({c.at("id").get<std::string>(), c.at("score").get<double>()});
    return r;
}

} // namespace expertaf::records
