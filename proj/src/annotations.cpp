#include "bc/annotations.hpp"

#include "bc/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace bc {

std::string to_string(Label l) {
    switch (l) {
        case Label::speech: return "speech";
        case Label::vocal_bc: return "vocal_bc";
        case Label::nod: return "nod";
    }
    throw ValidationError("unknown label");
}

Label label_from_string(const std::string& s) {
    if (s == "speech") return Label::speech;
    if (s == "vocal_bc") return Label::vocal_bc;
    if (s == "nod") return Label::nod;
    throw ParseError("unknown annotation label: " + s);
}

namespace {

void validate_track(const AnnotationTrack& track) {
    for (Label l : {Label::speech, Label::vocal_bc, Label::nod}) {
        double prev_end = -1.0;
        for (const auto& iv : track.intervals) {
            if (iv.label != l) continue;
            if (iv.start_s < prev_end)
                throw ValidationError("overlapping " + to_string(l) + " intervals for " +
                                      track.participant_id);
            prev_end = iv.end_s;
        }
    }
}

} // namespace

std::vector<AnnotationTrack> parse_annotations(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty annotation input");
    // tolerate the header being absent
    std::size_t line_no = 1;
    std::map<std::string, AnnotationTrack> tracks;
    auto consume = [&](const std::string& row, std::size_t no) {
        if (row.empty()) return;
        std::stringstream ss(row);
        std::string participant, label, start, end;
        if (!std::getline(ss, participant, ',') || !std::getline(ss, label, ',') ||
            !std::getline(ss, start, ',') || !std::getline(ss, end))
            throw ParseError("line " + std::to_string(no) + ": expected 4 columns");
        LabeledInterval iv;
        iv.label = label_from_string(label);
        try {
            std::size_t used = 0;
            iv.start_s = std::stod(start, &used);
            if (used != start.size()) throw std::invalid_argument(start);
            iv.end_s = std::stod(end, &used);
            if (used != end.size()) throw std::invalid_argument(end);
        } catch (const std::exception&) {
            throw ParseError("line " + std::to_string(no) + ": bad time value");
        }
        if (iv.start_s < 0.0)
            throw ValidationError("line " + std::to_string(no) + ": negative time");
        if (iv.end_s <= iv.start_s)
            throw ValidationError("line " + std::to_string(no) + ": end_s must exceed start_s");
        auto& track = tracks[participant];
        track.participant_id = participant;
        track.intervals.push_back(iv);
    };
    if (line != "participant,label,start_s,end_s") consume(line, line_no);
    while (std::getline(in, line)) consume(line, ++line_no);

    std::vector<AnnotationTrack> out;
    out.reserve(tracks.size());
    for (auto& [id, track] : tracks) {
        std::stable_sort(track.intervals.begin(), track.intervals.end(),
                         [](const LabeledInterval& a, const LabeledInterval& b) {
                             return a.start_s < b.start_s;
                         });
        validate_track(track);
        out.push_back(std::move(track));
    }
    return out;
}

std::vector<AnnotationTrack> load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_annotations(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

std::string serialize_annotations(const std::vector<AnnotationTrack>& tracks) {
    std::ostringstream out;
    out << "participant,label,start_s,end_s\n";
    char buf[32];
    for (const auto& track : tracks)
        for (const auto& iv : track.intervals) {
            out << track.participant_id << "," << to_string(iv.label) << ",";
            std::snprintf(buf, sizeof(buf), "%.3f", iv.start_s);
            out << buf << ",";
            std::snprintf(buf, sizeof(buf), "%.3f", iv.end_s);
            out << buf << "\n";
        }
    return out.str();
}

void save_annotations(const std::string& path, const std::vector<AnnotationTrack>& tracks) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << serialize_annotations(tracks);
    if (!out) throw IoError("write failed: " + path);
}

} // namespace bc
