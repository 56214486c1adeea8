#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "camox/ingest.hpp"
#include "camox/io_util.hpp"
#include "camox/manifest.hpp"
#include "camox/metrics.hpp"
#include "camox/synth.hpp"

using namespace camox;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "camox_cli_log.txt";
    const std::string cmd = std::string(CAMOX_CLI_PATH) + " " + args + " > " + log.string() +
                            " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    r.output.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return r;
}

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("camox_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_small_spec(const fs::path& dir, double floor = 70.0, double start = 98.0) {
    const json spec{{"n_subjects", 3},
                    {"protocol",
                     {{"duration_sec", 160.0},
                      {"start_spo2", start},
                      {"floor_spo2", floor},
                      {"n_plateaus", 8},
                      {"plateau_jitter", 0.3},
                      {"heart_rate_bpm", 75.0}}}};
    const fs::path path = dir / "spec.json";
    write_text_file(path, spec.dump(2));
    return path;
}

}  // namespace

TEST_CASE("synth: small spec generates a loadable dataset and a manifest") {
    const fs::path dir = temp_dir("synth");
    const fs::path spec = write_small_spec(dir);
    const RunResult r = run_cli("--seed 5 synth --spec " + spec.string() + " " +
                                (dir / "data").string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("label histogram") != std::string::npos);

    const ingest::Dataset ds = ingest::load_dataset(dir / "data");
    CHECK(ds.recordings.size() == 6);  // 3 subjects, both hands
    CHECK(fs::exists(dir / "data" / "manifest.json"));
    fs::remove_all(dir);
}

TEST_CASE("synth: default spec gives the six-subject study") {
    const fs::path dir = temp_dir("synth_default");
    const RunResult r = run_cli("--seed 3 synth " + (dir / "data").string());
    CHECK(r.exit_code == 0);
    const ingest::Dataset ds = ingest::load_dataset(dir / "data");
    CHECK(ds.subject_ids() == std::set<int>{1, 2, 3, 4, 5, 6});
    CHECK(ds.recordings.size() == 12);
    fs::remove_all(dir);
}

TEST_CASE("synth: floor above start fails validation with exit 2") {
    const fs::path dir = temp_dir("synth_bad");
    const fs::path spec = write_small_spec(dir, 99.0, 98.0);
    const RunResult r = run_cli("synth --spec " + spec.string() + " " + (dir / "data").string());
    CHECK(r.exit_code == 2);
    fs::remove_all(dir);
}

TEST_CASE("synth: identical spec and seed reproduce the dataset hash") {
    const fs::path dir = temp_dir("synth_repro");
    const fs::path spec = write_small_spec(dir);
    REQUIRE(run_cli("--seed 7 synth --spec " + spec.string() + " " + (dir / "a").string())
                .exit_code == 0);
    REQUIRE(run_cli("--seed 7 synth --spec " + spec.string() + " " + (dir / "b").string())
                .exit_code == 0);
    const json ma = json::parse(read_text_file(dir / "a" / "manifest.json"));
    const json mb = json::parse(read_text_file(dir / "b" / "manifest.json"));
    CHECK(ma.at("dataset_hash") == mb.at("dataset_hash"));
    fs::remove_all(dir);
}

TEST_CASE("extract: one csv row per frame, truncation reported with byte counts") {
    const fs::path dir = temp_dir("extract");

    PpgRecording rec;
    rec.fps = 30.0;
    for (int c = 0; c < 3; ++c) {
        for (int j = 0; j < 90; ++j) {
            rec.channel_means[std::size_t(c)].push_back(double((j * 3 + c * 40) % 256));
        }
    }
    const synth::CameraModel cam;
    const FrameSequence frames = synth::render_frames(rec, cam, 16, 12);
    const fs::path raw = dir / "clip.camox";
    ingest::write_frames(raw, frames);

    const fs::path csv = dir / "out.csv";
    const RunResult ok = run_cli("extract " + raw.string() + " " + csv.string());
    CHECK(ok.exit_code == 0);
    const PpgRecording back = ingest::load_ppg_csv(csv);
    REQUIRE(back.length() == 90);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t j = 0; j < 90; ++j) {
            CHECK(std::abs(back.channel_means[std::size_t(c)][j] -
                           rec.channel_means[std::size_t(c)][j]) <= 0.5);
        }
    }

    // truncated payload -> exit 2, message names expected vs actual bytes
    std::string bytes = read_text_file(raw);
    const fs::path cut = dir / "cut.camox";
    write_text_file(cut, bytes.substr(0, bytes.size() / 2));
    const RunResult bad = run_cli("extract " + cut.string() + " " + (dir / "x.csv").string());
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("expected") != std::string::npos);

    const fs::path junk = dir / "junk.camox";
    write_text_file(junk, "garbage header");
    CHECK(run_cli("extract " + junk.string() + " " + (dir / "y.csv").string()).exit_code == 2);
    fs::remove_all(dir);
}

TEST_CASE("train, ablate and report drive the full pipeline") {
    const fs::path dir = temp_dir("train");
    const fs::path spec = write_small_spec(dir);
    REQUIRE(run_cli("--seed 11 synth --spec " + spec.string() + " " + (dir / "data").string())
                .exit_code == 0);

    const std::string train_args = " --epochs 2 --lr 0.001 --l2 0.000001 --batch-size 64 ";

    // plain training run
    const RunResult tr = run_cli("--seed 21 train " + (dir / "data").string() + " --out " +
                                 (dir / "run").string() + train_args);
    CHECK(tr.exit_code == 0);
    CHECK(fs::exists(dir / "run" / "predictions.csv"));
    CHECK(fs::exists(dir / "run" / "manifest.json"));
    const metrics::PredictionSet preds =
        metrics::load_predictions_csv(dir / "run" / "predictions.csv");
    std::set<int> subjects;
    for (const auto& r : preds.rows) subjects.insert(r.subject_id);
    CHECK(subjects == std::set<int>{1, 2, 3});
    int checkpoints = 0;
    for (const auto& e : fs::directory_iterator(dir / "run")) {
        if (e.path().extension() == ".ckpt") ++checkpoints;
    }
    CHECK(checkpoints == 3);

    // epochs=0 signals no training
    CHECK(run_cli("train " + (dir / "data").string() + " --out " + (dir / "zero").string() +
                  " --epochs 0")
              .exit_code == 2);

    // exclusion is below the 3-subject minimum here
    CHECK(run_cli("train " + (dir / "data").string() + " --out " + (dir / "excl").string() +
                  train_args + " --exclude-subject 2")
              .exit_code == 2);

    // ablation emits one row per floor
    const RunResult ab = run_cli("--seed 21 ablate " + (dir / "data").string() + " --out " +
                                 (dir / "abl").string() + train_args + " --floors 70,75");
    CHECK(ab.exit_code == 0);
    const std::string ablation_csv = read_text_file(dir / "abl" / "ablation.csv");
    CHECK(ablation_csv.find("floor,mae") == 0);
    CHECK(std::count(ablation_csv.begin(), ablation_csv.end(), '\n') == 3);  // header + 2 rows

    // manifest artifact hashes reproduce from the files on disk
    {
        const json m = json::parse(read_text_file(dir / "run" / "manifest.json"));
        CHECK(!m.at("artifacts").empty());
        for (const auto& a : m.at("artifacts")) {
            const fs::path file = dir / "run" / a.at("path").get<std::string>();
            CHECK(manifest::hash_file(file) == a.at("hash").get<std::string>());
        }
        CHECK(m.at("dataset_hash") == manifest::hash_tree(dir / "data"));
    }

    // report on the predictions; rerunning reproduces the same bytes
    const RunResult rep = run_cli("report " + (dir / "run" / "predictions.csv").string() +
                                  " --out " + (dir / "rep1").string());
    CHECK(rep.exit_code == 0);
    CHECK(rep.output.find("MAE") != std::string::npos);
    REQUIRE(run_cli("report " + (dir / "run" / "predictions.csv").string() + " --out " +
                    (dir / "rep2").string())
                .exit_code == 0);
    CHECK(read_text_file(dir / "rep1" / "report.json") ==
          read_text_file(dir / "rep2" / "report.json"));

    // dataset directory that does not exist is a data error
    CHECK(run_cli("train " + (dir / "missing").string() + " --out " + (dir / "no").string() +
                  train_args)
              .exit_code == 3);
    fs::remove_all(dir);
}

TEST_CASE("report: a perfect predictions file gives zero error and unit auc") {
    const fs::path dir = temp_dir("report_perfect");
    metrics::PredictionSet ps;
    for (int i = 0; i < 200; ++i) {
        metrics::PredictionRow r;
        r.split_id = 0;
        r.subject_id = 1 + i % 3;
        r.hand = i % 2 == 0 ? Hand::left : Hand::right;
        r.t_sec = double(i);
        r.ground_truth = 72.0 + double(i % 26);
        r.prediction = r.ground_truth;
        ps.rows.push_back(r);
    }
    const fs::path csv = dir / "perfect.csv";
    metrics::save_predictions_csv(csv, ps);

    const RunResult r = run_cli("report " + csv.string() + " --out " + (dir / "rep").string());
    CHECK(r.exit_code == 0);
    const json rep = json::parse(read_text_file(dir / "rep" / "report.json"));
    CHECK(rep["aggregate"]["mae_pooled"].get<double>() == 0.0);
    for (const auto& entry : rep["thresholds"]) {
        if (!entry["roc"].is_null()) {
            CHECK(entry["roc"]["auc"].get<double>() == 1.0);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli("no-such-command").exit_code == 2);
    CHECK(run_cli("synth").exit_code == 2);  // missing out_dir
}
