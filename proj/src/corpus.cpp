#include "bc/corpus.hpp"

#include "bc/errors.hpp"
#include "bc/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bc {

std::string to_string(BcClass c) {
    switch (c) {
        case BcClass::vocal: return "vocal";
        case BcClass::nonvocal: return "nonvocal";
        case BcClass::both: return "both";
    }
    throw ValidationError("unknown bc class");
}

namespace {

std::vector<Interval> sustained_speech(const AnnotationTrack& track, double min_turn_s) {
    std::vector<Interval> out;
    for (const auto& iv : track.intervals)
        if (iv.label == Label::speech && iv.end_s - iv.start_s >= min_turn_s)
            out.push_back({iv.start_s, iv.end_s});
    std::sort(out.begin(), out.end(),
              [](const Interval& x, const Interval& y) { return x.start_s < y.start_s; });
    return out;
}

bool covers(const std::vector<Interval>& ivs, double t) {
    for (const auto& iv : ivs)
        if (iv.start_s <= t && t < iv.end_s) return true;
    return false;
}

} // namespace

std::vector<ListenerSegment> segment_roles(const AnnotationTrack& a, const AnnotationTrack& b,
                                           double min_turn_s) {
    auto turns_a = sustained_speech(a, min_turn_s);
    auto turns_b = sustained_speech(b, min_turn_s);

    std::vector<double> pts;
    for (const auto& iv : turns_a) {
        pts.push_back(iv.start_s);
        pts.push_back(iv.end_s);
    }
    for (const auto& iv : turns_b) {
        pts.push_back(iv.start_s);
        pts.push_back(iv.end_s);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    std::vector<ListenerSegment> out;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        double lo = pts[i], hi = pts[i + 1];
        double mid = 0.5 * (lo + hi);
        bool a_speaks = covers(turns_a, mid);
        bool b_speaks = covers(turns_b, mid);
        if (a_speaks == b_speaks) continue; // silence or overlap: no listener role
        const std::string& speaker = a_speaks ? a.participant_id : b.participant_id;
        const std::string& listener = a_speaks ? b.participant_id : a.participant_id;
        if (!out.empty() && out.back().speaker_id == speaker && out.back().end_s == lo) {
            out.back().end_s = hi;
        } else {
            out.push_back({listener, speaker, lo, hi});
        }
    }
    return out;
}

std::vector<LabeledSequence> build_dataset(
    const std::map<std::string, std::vector<StateVector>>& features,
    const std::vector<AnnotationTrack>& tracks, const std::vector<ListenerSegment>& segments) {
    std::map<std::string, const AnnotationTrack*> by_id;
    for (const auto& t : tracks) by_id[t.participant_id] = &t;

    const double step = 0.5;
    std::vector<LabeledSequence> out;
    for (const auto& seg : segments) {
        std::ostringstream seg_name;
        seg_name << "segment [" << seg.start_s << ", " << seg.end_s << ") speaker "
                 << seg.speaker_id << " listener " << seg.listener_id;

        // cells [0.5j, 0.5j+0.5) lying fully inside the segment
        long j0 = static_cast<long>(std::ceil(seg.start_s / step - 1e-9));
        long j_end = static_cast<long>(std::floor(seg.end_s / step + 1e-9));
        if (j_end <= j0) continue;

        auto fit = features.find(seg.speaker_id);
        if (fit == features.end())
            throw DataError("no feature stream for speaker of " + seg_name.str());
        const auto& stream = fit->second;
        if (static_cast<long>(stream.size()) < j_end)
            throw DataError("feature stream for " + seg.speaker_id + " ends at " +
                            std::to_string(stream.size() * step) + " s, short of " + seg_name.str());
        if (std::abs(stream[static_cast<std::size_t>(j0)].t - step * (j0 + 1)) > 1e-6)
            throw DataError("feature stream for " + seg.speaker_id +
                            " is not on the absolute 0.5 s grid");

        LabeledSequence seq;
        seq.segment = seg;
        std::size_t n = static_cast<std::size_t>(j_end - j0);
        seq.states.assign(stream.begin() + j0, stream.begin() + j_end);
        seq.timing_labels.assign(n, 0);
        seq.type_labels.assign(n, -1);

        auto lit = by_id.find(seg.listener_id);
        if (lit != by_id.end()) {
            std::vector<char> vocal_on(n, 0), nod_on(n, 0);
            for (const auto& iv : lit->second->intervals) {
                bool is_vocal = iv.label == Label::vocal_bc;
                bool is_nod = iv.label == Label::nod;
                if (!is_vocal && !is_nod) continue;
                long j = static_cast<long>(std::floor(iv.start_s / step + 1e-9));
                if (j < j0 || j >= j_end) continue;
                auto idx = static_cast<std::size_t>(j - j0);
                if (is_vocal) vocal_on[idx] = 1;
                if (is_nod) nod_on[idx] = 1;
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (!vocal_on[i] && !nod_on[i]) continue;
                seq.timing_labels[i] = 1;
                BcClass c = vocal_on[i] && nod_on[i] ? BcClass::both
                            : vocal_on[i]            ? BcClass::vocal
                                                     : BcClass::nonvocal;
                seq.type_labels[i] = static_cast<int>(c);
            }
        }
        out.push_back(std::move(seq));
    }
    return out;
}

FoldSplit kfold_split(std::vector<std::string> participant_ids, int k, std::uint64_t seed) {
    if (k < 3) throw ConfigError("kfold_split: k must be at least 3");
    if (static_cast<int>(participant_ids.size()) < k)
        throw ConfigError("kfold_split: k=" + std::to_string(k) + " exceeds participant count " +
                          std::to_string(participant_ids.size()));
    {
        auto sorted = participant_ids;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ConfigError("kfold_split: duplicate participant id");
    }

    Rng rng(seed);
    rng.shuffle(participant_ids);

    std::size_t n = participant_ids.size();
    auto chunk_begin = [&](int i) { return static_cast<std::size_t>(i) * n / static_cast<std::size_t>(k); };

    FoldSplit split;
    split.k = k;
    for (int f = 0; f < k; ++f) {
        int vf = (f + 1) % k;
        FoldAssignment fa;
        for (int c = 0; c < k; ++c) {
            auto lo = chunk_begin(c), hi = chunk_begin(c + 1);
            auto& dst = c == f ? fa.test_ids : c == vf ? fa.val_ids : fa.train_ids;
            dst.insert(dst.end(), participant_ids.begin() + static_cast<long>(lo),
                       participant_ids.begin() + static_cast<long>(hi));
        }
        std::sort(fa.train_ids.begin(), fa.train_ids.end());
        std::sort(fa.val_ids.begin(), fa.val_ids.end());
        std::sort(fa.test_ids.begin(), fa.test_ids.end());
        split.assignments.push_back(std::move(fa));
    }
    return split;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read manifest " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("manifest " + path + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("conversations") || !doc["conversations"].is_array())
        throw ParseError("manifest " + path + ": expected object with a \"conversations\" array");

    auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    Manifest m;
    for (const auto& c : doc["conversations"]) {
        for (const char* key : {"audio_a", "audio_b", "annotations"})
            if (!c.contains(key) || !c[key].is_string())
                throw ParseError("manifest " + path + ": conversation entry missing \"" +
                                 std::string(key) + "\"");
        ConversationEntry e;
        e.audio_a = resolve(c["audio_a"].get<std::string>());
        e.audio_b = resolve(c["audio_b"].get<std::string>());
        e.annotations = resolve(c["annotations"].get<std::string>());
        if (c.contains("participant_a")) e.participant_a = c["participant_a"].get<std::string>();
        if (c.contains("participant_b")) e.participant_b = c["participant_b"].get<std::string>();
        m.conversations.push_back(std::move(e));
    }
    return m;
}

std::pair<std::string, std::string> resolve_participants(const ConversationEntry& entry,
                                                         const std::vector<AnnotationTrack>& tracks) {
    if (!entry.participant_a.empty() && !entry.participant_b.empty())
        return {entry.participant_a, entry.participant_b};
    std::vector<std::string> ids;
    for (const auto& t : tracks) ids.push_back(t.participant_id);
    std::sort(ids.begin(), ids.end());
    if (ids.size() != 2)
        throw DataError("annotation file " + entry.annotations + " has " +
                        std::to_string(ids.size()) +
                        " participants; expected 2 or an explicit participant_a/participant_b");
    return {ids[0], ids[1]};
}

} // namespace bc
