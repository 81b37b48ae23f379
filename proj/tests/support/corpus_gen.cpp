#include "corpus_gen.hpp"

#include "synth.hpp"

#include "bc/annotations.hpp"
#include "bc/audio.hpp"
#include "bc/errors.hpp"
#include "bc/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

namespace testsupport {

namespace {

// Onset cells inside one turn, locally indexed; far enough from the turn
// start for a full 10-step lookback window and spaced so no preamble touches
// another onset cell.
std::vector<int> pick_cells(int cells_per_turn, int want, bc::Rng& rng) {
    std::vector<int> out;
    int c = 10 + static_cast<int>(rng.uniform_int(3));
    while (c <= cells_per_turn - 2 && static_cast<int>(out.size()) < want) {
        out.push_back(c);
        c += 6 + static_cast<int>(rng.uniform_int(3));
    }
    return out;
}

} // namespace

GeneratedCorpus generate_corpus(const CorpusSpec& spec) {
    namespace fs = std::filesystem;
    fs::create_directories(spec.dir);
    bc::Rng rng(spec.seed);
    bc::Rng decoy_rng(spec.seed ^ 0x5eedf00dull);

    GeneratedCorpus out;
    nlohmann::json manifest;
    manifest["conversations"] = nlohmann::json::array();

    const int cells_per_turn = static_cast<int>(spec.turn_s / 0.5);
    const std::vector<double> carrier_amps = {0.10, 0.06, 0.05, 0.035, 0.03, 0.02};

    for (int ci = 0; ci < spec.conversations; ++ci) {
        std::string id_a = "p" + std::to_string(2 * ci + 1);
        std::string id_b = "p" + std::to_string(2 * ci + 2);
        out.participant_ids.push_back(id_a);
        out.participant_ids.push_back(id_b);

        double duration = spec.turns_per_conv * spec.turn_s;
        bc::AudioClip audio_a = silence(duration);
        bc::AudioClip audio_b = silence(duration);

        bc::AnnotationTrack track_a{id_a, {}};
        bc::AnnotationTrack track_b{id_b, {}};

        for (int turn = 0; turn < spec.turns_per_conv; ++turn) {
            bool a_speaks = turn % 2 == 0;
            bc::AudioClip& speaker_audio = a_speaks ? audio_a : audio_b;
            bc::AnnotationTrack& speaker_track = a_speaks ? track_a : track_b;
            bc::AnnotationTrack& listener_track = a_speaks ? track_b : track_a;
            const std::string& listener_id = a_speaks ? id_b : id_a;

            double lo = turn * spec.turn_s;
            double hi = lo + spec.turn_s;
            speaker_track.intervals.push_back({bc::Label::speech, lo, hi});

            double phase = rng.uniform(0.0, 2.0 * M_PI);
            double wobble = rng.uniform(0.04, 0.09);
            add_tone(speaker_audio, lo, hi,
                     [=](double t) { return 140.0 + 25.0 * std::sin(2.0 * M_PI * wobble * t); },
                     carrier_amps, phase);

            auto cells = pick_cells(cells_per_turn, spec.bcs_per_turn, rng);
            std::vector<int> classes;
            for (std::size_t k = 0; k < cells.size(); ++k)
                classes.push_back(static_cast<int>((k + rng.uniform_int(3)) % 3));

            // Audio: always planted at the true cells.
            for (std::size_t k = 0; k < cells.size(); ++k) {
                double cell_t = lo + 0.5 * cells[k];
                add_band(speaker_audio, cell_t - 2.0, cell_t, 1300.0, 1700.0, 5, 0.05);
                switch (classes[k]) {
                case 0: add_band(speaker_audio, cell_t, cell_t + 0.5, 2000.0, 2500.0, 6, 0.06); break;
                case 1: add_band(speaker_audio, cell_t, cell_t + 0.5, 2800.0, 3400.0, 6, 0.06); break;
                default: add_band(speaker_audio, cell_t, cell_t + 0.5, 3700.0, 4400.0, 6, 0.06); break;
                }
            }

            // Annotations: true cells, or decoys when the control corpus is
            // requested.
            std::vector<int> label_cells = cells;
            if (spec.shuffled_labels) {
                std::set<int> taken(cells.begin(), cells.end());
                label_cells.clear();
                while (label_cells.size() < cells.size()) {
                    int c = 10 + static_cast<int>(decoy_rng.uniform_int(
                                     static_cast<std::uint64_t>(cells_per_turn - 12)));
                    if (taken.count(c)) continue;
                    taken.insert(c);
                    label_cells.push_back(c);
                }
                std::sort(label_cells.begin(), label_cells.end());
            }

            for (std::size_t k = 0; k < label_cells.size(); ++k) {
                double onset = lo + 0.5 * label_cells[k] + 0.25;
                double end = onset + 0.2;
                if (classes[k] == 0 || classes[k] == 2)
                    listener_track.intervals.push_back({bc::Label::vocal_bc, onset, end});
                if (classes[k] == 1 || classes[k] == 2)
                    listener_track.intervals.push_back({bc::Label::nod, onset, end});
                out.onsets[listener_id].push_back(onset);
                ++out.total_bcs;
            }
        }

        std::string wav_a = "conv" + std::to_string(ci) + "_a.wav";
        std::string wav_b = "conv" + std::to_string(ci) + "_b.wav";
        std::string ann = "conv" + std::to_string(ci) + ".csv";
        bc::save_wav((fs::path(spec.dir) / wav_a).string(), audio_a);
        bc::save_wav((fs::path(spec.dir) / wav_b).string(), audio_b);

        auto sort_track = [](bc::AnnotationTrack& t) {
            std::stable_sort(t.intervals.begin(), t.intervals.end(),
                             [](const bc::LabeledInterval& x, const bc::LabeledInterval& y) {
                                 return x.start_s < y.start_s;
                             });
        };
        sort_track(track_a);
        sort_track(track_b);
        bc::save_annotations((fs::path(spec.dir) / ann).string(), {track_a, track_b});

        nlohmann::json entry;
        entry["audio_a"] = wav_a;
        entry["audio_b"] = wav_b;
        entry["annotations"] = ann;
        manifest["conversations"].push_back(entry);
    }

    for (auto& [id, times] : out.onsets) std::sort(times.begin(), times.end());

    out.manifest_path = (fs::path(spec.dir) / "manifest.json").string();
    std::ofstream mf(out.manifest_path);
    if (!mf) throw bc::IoError("cannot write " + out.manifest_path);
    mf << manifest.dump(2) << "\n";
    return out;
}

} // namespace testsupport
