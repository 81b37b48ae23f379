#pragma once

#include "bc/annotations.hpp"
#include "bc/dsp.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace bc {

// A stretch of conversation where exactly one participant holds the floor.
struct ListenerSegment {
    std::string listener_id;
    std::string speaker_id;
    double start_s = 0.0;
    double end_s = 0.0;
};

enum class BcClass { vocal = 0, nonvocal = 1, both = 2 };

std::string to_string(BcClass c);

// Speaker feature steps paired with listener backchannel labels, 2 Hz.
// type_labels[i] is -1 wherever timing_labels[i] == 0.
struct LabeledSequence {
    ListenerSegment segment;
    std::vector<StateVector> states;
    std::vector<int> timing_labels;
    std::vector<int> type_labels;
};

struct FoldAssignment {
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
};

struct FoldSplit {
    int k = 0;
    std::vector<FoldAssignment> assignments;
};

// Non-overlapping, time-ordered segments where exactly one participant holds
// sustained speech (>= min_turn_s); instants where both do are dropped.
std::vector<ListenerSegment> segment_roles(const AnnotationTrack& a, const AnnotationTrack& b,
                                           double min_turn_s = 1.0);

// features maps participant_id -> full-conversation StateVector stream on the
// absolute 0.5 s grid (row k covers [0.5k, 0.5k+0.5)).
std::vector<LabeledSequence> build_dataset(
    const std::map<std::string, std::vector<StateVector>>& features,
    const std::vector<AnnotationTrack>& tracks, const std::vector<ListenerSegment>& segments);

FoldSplit kfold_split(std::vector<std::string> participant_ids, int k, std::uint64_t seed);

struct ConversationEntry {
    std::string audio_a;
    std::string audio_b;
    std::string annotations;
    // Optional explicit mapping of audio_a/audio_b to participant ids; when
    // empty, the two ids found in the annotation file are used in sorted order.
    std::string participant_a;
    std::string participant_b;
};

struct Manifest {
    std::vector<ConversationEntry> conversations;
};

// Relative paths inside the manifest are resolved against its directory.
Manifest load_manifest(const std::string& path);

std::pair<std::string, std::string> resolve_participants(const ConversationEntry& entry,
                                                         const std::vector<AnnotationTrack>& tracks);

} // namespace bc
