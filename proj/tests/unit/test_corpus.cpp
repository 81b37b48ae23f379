#include "bc/corpus.hpp"
#include "bc/errors.hpp"

#include "synth.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <tuple>
#include <vector>

using bc::AnnotationTrack;
using bc::BcClass;
using bc::Label;
using bc::ListenerSegment;
using bc::StateVector;

namespace {

AnnotationTrack track(const std::string& id,
                      std::vector<std::tuple<Label, double, double>> intervals) {
    AnnotationTrack t;
    t.participant_id = id;
    for (const auto& [l, s, e] : intervals) t.intervals.push_back({l, s, e});
    return t;
}

std::vector<StateVector> grid_stream(int n, double step = 0.5) {
    std::vector<StateVector> out;
    for (int k = 0; k < n; ++k) {
        StateVector s;
        s.t = step * (k + 1);
        s.values[0] = k; // make rows distinguishable
        out.push_back(s);
    }
    return out;
}

} // namespace

TEST_CASE("one sustained speaker makes the other the listener") {
    auto a = track("pa", {{Label::speech, 0.0, 10.0}});
    auto b = track("pb", {{Label::vocal_bc, 3.0, 3.3}});
    auto segs = bc::segment_roles(a, b);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].speaker_id == "pa");
    CHECK(segs[0].listener_id == "pb");
    CHECK(segs[0].start_s == doctest::Approx(0.0));
    CHECK(segs[0].end_s == doctest::Approx(10.0));
}

TEST_CASE("adjacent same-speaker spans merge") {
    auto a = track("pa", {{Label::speech, 0.0, 5.0}, {Label::speech, 5.0, 10.0}});
    auto b = track("pb", {});
    auto segs = bc::segment_roles(a, b);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].end_s == doctest::Approx(10.0));
}

TEST_CASE("overlapping sustained speech has no listener") {
    auto a = track("pa", {{Label::speech, 0.0, 10.0}});
    auto b = track("pb", {{Label::speech, 4.0, 6.0}});
    auto segs = bc::segment_roles(a, b);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].start_s == doctest::Approx(0.0));
    CHECK(segs[0].end_s == doctest::Approx(4.0));
    CHECK(segs[1].start_s == doctest::Approx(6.0));
    CHECK(segs[1].end_s == doctest::Approx(10.0));
    CHECK(segs[0].speaker_id == "pa");
    CHECK(segs[1].speaker_id == "pa");
}

TEST_CASE("speech shorter than the turn threshold is not a turn") {
    auto a = track("pa", {{Label::speech, 0.0, 10.0}});
    auto b = track("pb", {{Label::speech, 4.0, 4.8}});
    CHECK(bc::segment_roles(a, b, 1.0).size() == 1); // 0.8 s ignored
    CHECK(bc::segment_roles(a, b, 0.5).size() == 2); // now it breaks pa's turn
}

TEST_CASE("silent gaps separate segments") {
    auto a = track("pa", {{Label::speech, 0.0, 3.0}, {Label::speech, 5.0, 8.0}});
    auto b = track("pb", {});
    auto segs = bc::segment_roles(a, b);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].end_s == doctest::Approx(3.0));
    CHECK(segs[1].start_s == doctest::Approx(5.0));
}

TEST_CASE("dataset cells cover whole steps inside the segment") {
    std::map<std::string, std::vector<StateVector>> features;
    features["s"] = grid_stream(6);
    auto listener = track("l", {{Label::vocal_bc, 1.6, 1.8}});
    std::vector<ListenerSegment> segs = {{"l", "s", 0.3, 2.0}};
    auto data = bc::build_dataset(features, {listener}, segs);
    REQUIRE(data.size() == 1);
    const auto& seq = data[0];
    REQUIRE(seq.states.size() == 3); // cells [0.5,1), [1,1.5), [1.5,2)
    CHECK(seq.states[0].t == doctest::Approx(1.0));
    CHECK(seq.states[2].t == doctest::Approx(2.0));
    CHECK(seq.timing_labels == std::vector<int>{0, 0, 1}); // onset 1.6 in the last cell
    CHECK(seq.type_labels == std::vector<int>{-1, -1, static_cast<int>(BcClass::vocal)});
}

TEST_CASE("vocal and nod onsets in one cell label it as both") {
    std::map<std::string, std::vector<StateVector>> features;
    features["s"] = grid_stream(6);
    auto listener = track("l", {{Label::vocal_bc, 1.6, 1.8}, {Label::nod, 1.55, 1.7}});
    std::vector<ListenerSegment> segs = {{"l", "s", 0.0, 3.0}};
    auto data = bc::build_dataset(features, {listener}, segs);
    REQUIRE(data.size() == 1);
    CHECK(data[0].type_labels[3] == static_cast<int>(BcClass::both));
    CHECK(data[0].timing_labels[3] == 1);

    auto nod_only = track("l", {{Label::nod, 1.6, 1.8}});
    auto d2 = bc::build_dataset(features, {nod_only}, segs);
    CHECK(d2[0].type_labels[3] == static_cast<int>(BcClass::nonvocal));
}

TEST_CASE("onsets outside the segment are ignored") {
    std::map<std::string, std::vector<StateVector>> features;
    features["s"] = grid_stream(6);
    auto listener = track("l", {{Label::vocal_bc, 0.4, 0.6}, {Label::vocal_bc, 2.6, 2.8}});
    std::vector<ListenerSegment> segs = {{"l", "s", 0.3, 2.0}};
    auto data = bc::build_dataset(features, {listener}, segs);
    REQUIRE(data.size() == 1);
    CHECK(data[0].timing_labels == std::vector<int>{0, 0, 0});
}

TEST_CASE("a listener with no annotation track gets all-negative labels") {
    std::map<std::string, std::vector<StateVector>> features;
    features["s"] = grid_stream(6);
    std::vector<ListenerSegment> segs = {{"ghost", "s", 0.0, 2.0}};
    auto data = bc::build_dataset(features, {}, segs);
    REQUIRE(data.size() == 1);
    CHECK(data[0].timing_labels == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("segments too narrow for a whole cell vanish") {
    std::map<std::string, std::vector<StateVector>> features;
    features["s"] = grid_stream(6);
    std::vector<ListenerSegment> segs = {{"l", "s", 0.3, 0.4}};
    CHECK(bc::build_dataset(features, {}, segs).empty());
}

TEST_CASE("dataset construction validates its feature streams") {
    std::map<std::string, std::vector<StateVector>> features;
    features["s"] = grid_stream(6);
    std::vector<ListenerSegment> wrong_speaker = {{"l", "nobody", 0.0, 2.0}};
    CHECK_THROWS_AS(bc::build_dataset(features, {}, wrong_speaker), bc::DataError);

    std::vector<ListenerSegment> too_long = {{"l", "s", 0.3, 4.0}};
    CHECK_THROWS_AS(bc::build_dataset(features, {}, too_long), bc::DataError);

    std::map<std::string, std::vector<StateVector>> off_grid;
    off_grid["s"] = grid_stream(6, 0.6);
    std::vector<ListenerSegment> segs = {{"l", "s", 0.3, 2.0}};
    CHECK_THROWS_AS(bc::build_dataset(off_grid, {}, segs), bc::DataError);
}

TEST_CASE("kfold rotates the validation chunk behind the test chunk") {
    std::vector<std::string> ids = {"p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8"};
    auto split = bc::kfold_split(ids, 4, 99);
    REQUIRE(split.assignments.size() == 4);
    std::set<std::string> all(ids.begin(), ids.end());
    for (const auto& fa : split.assignments) {
        CHECK(fa.test_ids.size() == 2);
        CHECK(fa.val_ids.size() == 2);
        CHECK(fa.train_ids.size() == 4);
        std::set<std::string> seen;
        for (const auto* group : {&fa.train_ids, &fa.val_ids, &fa.test_ids}) {
            CHECK(std::is_sorted(group->begin(), group->end()));
            seen.insert(group->begin(), group->end());
        }
        CHECK(seen == all); // disjoint cover: 8 distinct ids across 8 slots
    }
    // the validation chunk of fold f is the test chunk of fold f+1
    for (int f = 0; f < 4; ++f)
        CHECK(split.assignments[static_cast<std::size_t>(f)].val_ids ==
              split.assignments[static_cast<std::size_t>((f + 1) % 4)].test_ids);

    auto again = bc::kfold_split(ids, 4, 99);
    for (int f = 0; f < 4; ++f)
        CHECK(split.assignments[static_cast<std::size_t>(f)].test_ids ==
              again.assignments[static_cast<std::size_t>(f)].test_ids);
}

TEST_CASE("kfold rejects bad arguments") {
    std::vector<std::string> ids = {"p1", "p2", "p3", "p4"};
    CHECK_THROWS_AS(bc::kfold_split(ids, 2, 1), bc::ConfigError);
    CHECK_THROWS_AS(bc::kfold_split(ids, 5, 1), bc::ConfigError);
    CHECK_THROWS_AS(bc::kfold_split({"p1", "p2", "p1", "p3"}, 3, 1), bc::ConfigError);
    CHECK_NOTHROW(bc::kfold_split(ids, 4, 1));
}

TEST_CASE("manifests resolve relative paths against their directory") {
    auto dir = testsupport::make_temp_dir("bc_manifest");
    std::string path = dir + "/m.json";
    {
        std::ofstream out(path);
        out << "{\"conversations\": [{\"audio_a\": \"a.wav\", \"audio_b\": \"/abs/b.wav\","
               " \"annotations\": \"ann/c.csv\", \"participant_a\": \"px\","
               " \"participant_b\": \"py\"}]}\n";
    }
    auto m = bc::load_manifest(path);
    REQUIRE(m.conversations.size() == 1);
    CHECK(m.conversations[0].audio_a == dir + "/a.wav");
    CHECK(m.conversations[0].audio_b == "/abs/b.wav");
    CHECK(m.conversations[0].annotations == dir + "/ann/c.csv");
    CHECK(m.conversations[0].participant_a == "px");
    CHECK(m.conversations[0].participant_b == "py");
    std::filesystem::remove_all(dir);
}

TEST_CASE("manifest errors") {
    auto dir = testsupport::make_temp_dir("bc_manifest");
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream out(dir + "/" + name);
        out << body;
        return dir + "/" + name;
    };
    CHECK_THROWS_AS(bc::load_manifest(dir + "/missing.json"), bc::IoError);
    CHECK_THROWS_AS(bc::load_manifest(write("bad.json", "{nope")), bc::ParseError);
    CHECK_THROWS_AS(bc::load_manifest(write("notarray.json", "{\"conversations\": 3}")),
                    bc::ParseError);
    CHECK_THROWS_AS(
        bc::load_manifest(write(
            "incomplete.json",
            "{\"conversations\": [{\"audio_a\": \"a.wav\", \"audio_b\": \"b.wav\"}]}")),
        bc::ParseError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("participants come from the manifest or, sorted, from the annotations") {
    bc::ConversationEntry e;
    e.annotations = "x.csv";
    e.participant_a = "pa";
    e.participant_b = "pb";
    auto explicit_ids = bc::resolve_participants(e, {});
    CHECK(explicit_ids.first == "pa");
    CHECK(explicit_ids.second == "pb");

    bc::ConversationEntry bare;
    bare.annotations = "x.csv";
    std::vector<AnnotationTrack> tracks = {track("zeta", {}), track("alpha", {})};
    auto inferred = bc::resolve_participants(bare, tracks);
    CHECK(inferred.first == "alpha");
    CHECK(inferred.second == "zeta");

    CHECK_THROWS_AS(bc::resolve_participants(bare, {track("only", {})}), bc::DataError);
    CHECK_THROWS_AS(
        bc::resolve_participants(bare, {track("a", {}), track("b", {}), track("c", {})}),
        bc::DataError);
}

TEST_CASE("bc class names") {
    CHECK(bc::to_string(BcClass::vocal) == "vocal");
    CHECK(bc::to_string(BcClass::nonvocal) == "nonvocal");
    CHECK(bc::to_string(BcClass::both) == "both");
}
