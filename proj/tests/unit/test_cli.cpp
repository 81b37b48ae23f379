#include "bc/audio.hpp"

#include "cli.hpp"
#include "corpus_gen.hpp"
#include "synth.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

using testsupport::run_cli;
using testsupport::slurp;

namespace {

// Ten seconds of rising speech-like tone, a second of plateau, a short
// low-pitch tail, then silence: enough to drive every audio-facing command.
std::string write_fixture_wav(const std::string& dir) {
    auto clip = testsupport::silence(13.0);
    testsupport::add_tone(clip, 0.0, 10.0, [](double t) { return 100.0 + 10.0 * t; },
                          {0.4, 0.2, 0.1});
    testsupport::add_tone(clip, 10.0, 11.0, [](double) { return 150.0; }, {0.4, 0.2, 0.1});
    testsupport::add_tone(clip, 11.0, 11.2, [](double) { return 110.0; }, {0.4, 0.2, 0.1});
    std::string path = dir + "/fixture.wav";
    bc::save_wav(path, clip);
    return path;
}

} // namespace

TEST_CASE("cli pipeline: extract, predict, stream, metrics") {
    auto dir = testsupport::make_temp_dir("bc_cli");
    auto wav = write_fixture_wav(dir);

    auto ex = run_cli({"extract", "--audio", wav, "-o", dir + "/f.csv"});
    CHECK(ex.exit_code == 0);
    CHECK(std::filesystem::exists(dir + "/f.csv"));
    CHECK(std::filesystem::exists(dir + "/f.prosody.csv"));

    // a second extraction is byte-identical
    auto ex2 = run_cli({"extract", "--audio", wav, "-o", dir + "/f2.csv"});
    CHECK(ex2.exit_code == 0);
    CHECK(slurp(dir + "/f.csv") == slurp(dir + "/f2.csv"));

    auto pr = run_cli({"predict", "--features", dir + "/f.csv", "--policy", "naive", "--seed",
                       "42", "-o", dir + "/events.jsonl"});
    CHECK(pr.exit_code == 0);
    std::string events = slurp(dir + "/events.jsonl");
    CHECK(events.find("\"kind\":\"bc\"") != std::string::npos);

    auto pr2 = run_cli({"predict", "--features", dir + "/f.csv", "--policy", "naive", "--seed",
                        "42", "-o", dir + "/events2.jsonl"});
    CHECK(pr2.exit_code == 0);
    CHECK(slurp(dir + "/events2.jsonl") == events);

    // a different seed can differ (cue draws), same seed plus gaze adds records
    auto gz = run_cli({"predict", "--features", dir + "/f.csv", "--policy", "random", "--seed",
                       "7", "--gaze", "-o", dir + "/gaze.jsonl"});
    CHECK(gz.exit_code == 0);
    CHECK(slurp(dir + "/gaze.jsonl").find("\"kind\":\"gaze\"") != std::string::npos);

    // stream at full speed writes the same log predict computes
    auto sm = run_cli({"stream", "--audio", wav, "--policy", "naive", "--seed", "42",
                       "--realtime-factor", "0", "-o", dir + "/stream.jsonl"});
    CHECK(sm.exit_code == 0);
    CHECK(slurp(dir + "/stream.jsonl") == events);
    CHECK(sm.output.find("\"kind\":\"bc\"") != std::string::npos); // also printed live

    auto mt = run_cli({"metrics", "--events", dir + "/events.jsonl", "--audio", wav, "-o",
                       dir + "/analytics.json"});
    CHECK(mt.exit_code == 0);
    std::string analytics = slurp(dir + "/analytics.json");
    CHECK(analytics.find("\"bc_per_minute\"") != std::string::npos);
    CHECK(analytics.find("\"engagement\"") != std::string::npos);
    CHECK(std::filesystem::exists(dir + "/events.jsonl.rate.csv"));

    std::filesystem::remove_all(dir);
}

TEST_CASE("cli rejects bad invocations with exit code 2") {
    auto dir = testsupport::make_temp_dir("bc_cli");
    auto check2 = [](const testsupport::CliResult& r) { CHECK(r.exit_code == 2); };

    check2(run_cli({"predict", "--features", dir + "/absent.csv", "--policy", "naive", "--seed",
                    "1", "-o", dir + "/x.jsonl"}));
    check2(run_cli({"predict", "--features", dir + "/absent.csv", "--policy", "sideways",
                    "--seed", "1", "-o", dir + "/x.jsonl"}));
    check2(run_cli({"extract", "--audio", dir + "/absent.wav", "-o", dir + "/x.csv"}));
    check2(run_cli({"nonsense"}));
    check2(run_cli({"extract"})); // missing required options

    auto wav = write_fixture_wav(dir);
    run_cli({"extract", "--audio", wav, "-o", dir + "/f.csv"});
    // learned policy without model files
    check2(run_cli({"predict", "--features", dir + "/f.csv", "--policy", "learned", "--seed",
                    "1", "-o", dir + "/x.jsonl"}));
    // missing seed
    auto ns = run_cli({"predict", "--features", dir + "/f.csv", "--policy", "naive", "-o",
                       dir + "/x.jsonl"});
    CHECK(ns.exit_code == 2);
    CHECK(ns.output.find("--seed") != std::string::npos);
    // malformed --set override
    check2(run_cli({"predict", "--features", dir + "/f.csv", "--policy", "naive", "--seed", "1",
                    "--set", "justakey", "-o", dir + "/x.jsonl"}));

    std::filesystem::remove_all(dir);
}

TEST_CASE("cli reports filesystem failures with exit code 1") {
    auto dir = testsupport::make_temp_dir("bc_cli");
    auto wav = write_fixture_wav(dir);
    run_cli({"extract", "--audio", wav, "-o", dir + "/f.csv"});
    auto r = run_cli({"predict", "--features", dir + "/f.csv", "--policy", "naive", "--seed",
                      "1", "-o", dir + "/no/such/dir/x.jsonl"});
    CHECK(r.exit_code == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("config files and overrides change behavior, overrides winning") {
    auto dir = testsupport::make_temp_dir("bc_cli");
    auto wav = write_fixture_wav(dir);

    run_cli({"extract", "--audio", wav, "-o", dir + "/half.csv"});
    auto count_rows = [&](const std::string& path) {
        std::string text = slurp(path);
        return std::count(text.begin(), text.end(), '\n');
    };
    auto base_rows = count_rows(dir + "/half.csv"); // 13 s at 0.5 s -> 26 + header

    std::string cfg_path = dir + "/cfg.ini";
    {
        std::ofstream out(cfg_path);
        out << "[dsp]\nagg_window_s = 1.0\n";
    }
    run_cli({"extract", "--config", cfg_path, "--audio", wav, "-o", dir + "/one.csv"});
    CHECK(count_rows(dir + "/one.csv") == (base_rows - 1) / 2 + 1);

    // --set beats the config file
    run_cli({"extract", "--config", cfg_path, "--set", "dsp.agg_window_s=0.5", "--audio", wav,
             "-o", dir + "/back.csv"});
    CHECK(slurp(dir + "/back.csv") == slurp(dir + "/half.csv"));

    std::filesystem::remove_all(dir);
}

TEST_CASE("cli compare runs policies over a small corpus deterministically") {
    auto dir = testsupport::make_temp_dir("bc_cli_cmp");
    testsupport::CorpusSpec spec;
    spec.dir = dir + "/corpus";
    spec.conversations = 1;
    spec.turns_per_conv = 2;
    spec.turn_s = 15.0;
    spec.bcs_per_turn = 3;
    auto corpus = testsupport::generate_corpus(spec);

    auto run_compare = [&](const std::string& out) {
        return run_cli({"compare", "--manifest", corpus.manifest_path, "--policies",
                        "naive,random", "--seed", "11", "--cache-dir", dir + "/cache", "-o",
                        dir + "/" + out});
    };
    auto c1 = run_compare("out1");
    CHECK(c1.exit_code == 0);
    CHECK(std::filesystem::exists(dir + "/out1/compare.json"));
    CHECK(std::filesystem::exists(dir + "/out1/metrics_naive.json"));
    CHECK(std::filesystem::exists(dir + "/out1/metrics_random.json"));
    std::string summary = slurp(dir + "/out1/compare.json");
    CHECK(summary.find("\"naive\"") != std::string::npos);
    CHECK(summary.find("\"random\"") != std::string::npos);
    CHECK(summary.find("\"bc_prediction_deviation\"") != std::string::npos);

    auto c2 = run_compare("out2");
    CHECK(c2.exit_code == 0);
    CHECK(slurp(dir + "/out2/compare.json") == summary);
    CHECK(slurp(dir + "/out2/metrics_random.json") == slurp(dir + "/out1/metrics_random.json"));

    auto mh = run_cli({"--help"});
    CHECK(mh.exit_code == 0);
    CHECK(mh.output.find("extract") != std::string::npos);

    std::filesystem::remove_all(dir);
}
