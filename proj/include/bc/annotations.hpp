#pragma once

#include <string>
#include <vector>

namespace bc {

enum class Label { speech, vocal_bc, nod };

std::string to_string(Label l);
Label label_from_string(const std::string& s);

struct LabeledInterval {
    Label label = Label::speech;
    double start_s = 0.0;
    double end_s = 0.0;
};

struct AnnotationTrack {
    std::string participant_id;
    std::vector<LabeledInterval> intervals; // sorted by start_s
};

// CSV format: header "participant,label,start_s,end_s". One track per
// participant, intervals sorted. Malformed rows raise ParseError with the
// line number; end <= start raises ValidationError.
std::vector<AnnotationTrack> parse_annotations(const std::string& text);

std::vector<AnnotationTrack> load_annotations(const std::string& path);

// Inverse of parse_annotations up to row order; times printed at ms precision.
std::string serialize_annotations(const std::vector<AnnotationTrack>& tracks);

void save_annotations(const std::string& path, const std::vector<AnnotationTrack>& tracks);

} // namespace bc
