#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "camox/ingest.hpp"
#include "camox/rng.hpp"

using namespace camox;
namespace fs = std::filesystem;

namespace {

FrameSequence constant_frames(std::size_t n, std::uint8_t r, std::uint8_t g, std::uint8_t b,
                              std::uint32_t w = 8, std::uint32_t h = 6) {
    FrameSequence fsq;
    fsq.width = w;
    fsq.height = h;
    fsq.fps = 30;
    fsq.frames.assign(n, {});
    for (auto& f : fsq.frames) {
        f.resize(std::size_t(w) * h * 3);
        for (std::size_t p = 0; p < std::size_t(w) * h; ++p) {
            f[3 * p] = r;
            f[3 * p + 1] = g;
            f[3 * p + 2] = b;
        }
    }
    return fsq;
}

PpgRecording ramp_recording(std::size_t n, double fps = 30.0) {
    PpgRecording rec;
    rec.fps = fps;
    for (int c = 0; c < 3; ++c) {
        rec.channel_means[c].resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            rec.channel_means[c][j] = double((j + std::size_t(c) * 17) % 250);
        }
    }
    return rec;
}

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("camox_ingest_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("extract_ppg: constant frame maps to its pixel value") {
    const FrameSequence fsq = constant_frames(4, 10, 20, 30);
    const PpgRecording rec = ingest::extract_ppg(fsq, {});
    REQUIRE(rec.length() == 4);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(rec.channel_means[0][j] == 10.0);
        CHECK(rec.channel_means[1][j] == 20.0);
        CHECK(rec.channel_means[2][j] == 30.0);
    }
}

TEST_CASE("extract_ppg: n frames give a 3 x n matrix") {
    const FrameSequence fsq = constant_frames(97, 1, 2, 3);
    const PpgRecording rec = ingest::extract_ppg(fsq, {});
    CHECK(rec.length() == 97);
    for (int c = 0; c < 3; ++c) CHECK(rec.channel_means[c].size() == 97);
}

TEST_CASE("extract_ppg: half 0 / half 255 red channel averages to 127.5") {
    FrameSequence fsq = constant_frames(1, 0, 9, 9, 10, 10);
    auto& frame = fsq.frames[0];
    for (std::size_t p = 0; p < 50; ++p) frame[3 * p] = 255;  // half of 100 pixels

    // direct summation oracle over the raw pixel buffer
    double oracle = 0.0;
    for (std::size_t p = 0; p < 100; ++p) oracle += frame[3 * p];
    oracle /= 100.0;
    REQUIRE(oracle == 127.5);

    const PpgRecording rec = ingest::extract_ppg(fsq, {});
    CHECK(rec.channel_means[0][0] == oracle);
}

TEST_CASE("extract_ppg is invariant to pixel order within a frame") {
    Rng rng(11);
    FrameSequence fsq = constant_frames(1, 0, 0, 0, 16, 4);
    std::vector<std::uint8_t>& frame = fsq.frames[0];
    for (auto& b : frame) b = std::uint8_t(rng.below(256));
    const PpgRecording before = ingest::extract_ppg(fsq, {});

    // permute whole pixels
    std::vector<std::array<std::uint8_t, 3>> pixels(64);
    for (std::size_t p = 0; p < 64; ++p) {
        pixels[p] = {frame[3 * p], frame[3 * p + 1], frame[3 * p + 2]};
    }
    rng.shuffle(pixels);
    for (std::size_t p = 0; p < 64; ++p) {
        frame[3 * p] = pixels[p][0];
        frame[3 * p + 1] = pixels[p][1];
        frame[3 * p + 2] = pixels[p][2];
    }
    const PpgRecording after = ingest::extract_ppg(fsq, {});
    for (int c = 0; c < 3; ++c) CHECK(before.channel_means[c][0] == after.channel_means[c][0]);
}

TEST_CASE("extract_ppg rejects empty and inconsistent input") {
    FrameSequence empty;
    empty.width = 4;
    empty.height = 4;
    CHECK_THROWS_AS(ingest::extract_ppg(empty, {}), DataError);

    FrameSequence bad = constant_frames(2, 1, 1, 1);
    bad.frames[1].pop_back();
    CHECK_THROWS_AS(ingest::extract_ppg(bad, {}), DataError);
}

TEST_CASE("window_samples agrees with a margin-enumeration oracle") {
    // 300 frames at 30 fps, readings every second
    const PpgRecording rec = ramp_recording(300);
    GroundTruthSeries gt;
    for (int t = 0; t <= 9; ++t) {
        gt.t_sec.push_back(double(t));
        gt.spo2.push_back(90.0);
    }

    // oracle: a reading survives iff its snapped center keeps 45 columns of
    // margin on each side
    std::vector<double> expected_times;
    for (int t = 0; t <= 9; ++t) {
        const long center = std::lround(double(t) * 30.0);
        if (center >= 45 && center + 45 <= 300) expected_times.push_back(double(t));
    }

    const auto samples = ingest::window_samples(rec, gt);
    REQUIRE(samples.size() == expected_times.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(samples[i].center_time == expected_times[i]);
        CHECK(samples[i].window.size() == 3 * 90);
        // window content: columns centered on the snapped frame
        const long center = std::lround(expected_times[i] * 30.0);
        for (int c = 0; c < 3; ++c) {
            CHECK(samples[i].channel(c)[0] == rec.channel_means[c][std::size_t(center - 45)]);
            CHECK(samples[i].channel(c)[89] == rec.channel_means[c][std::size_t(center + 44)]);
        }
    }
}

TEST_CASE("window_samples drops labels below the floor") {
    const PpgRecording rec = ramp_recording(300);
    GroundTruthSeries gt;
    gt.t_sec = {3.0, 4.0, 5.0};
    gt.spo2 = {69.5, 70.0, 90.0};
    const auto samples = ingest::window_samples(rec, gt);
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].label == 70.0);
    CHECK(samples[1].label == 90.0);
}

TEST_CASE("window_samples: 90-frame recording fits exactly one centered reading") {
    const PpgRecording rec = ramp_recording(90);
    GroundTruthSeries gt;
    gt.t_sec = {1.5};
    gt.spo2 = {95.0};
    const auto samples = ingest::window_samples(rec, gt);
    REQUIRE(samples.size() == 1);
    for (int c = 0; c < 3; ++c) {
        for (int j = 0; j < 90; ++j) {
            CHECK(samples[0].channel(c)[j] == rec.channel_means[c][std::size_t(j)]);
        }
    }
}

TEST_CASE("window_samples rejects recordings shorter than one window") {
    const PpgRecording rec = ramp_recording(89);
    GroundTruthSeries gt;
    gt.t_sec = {1.0};
    gt.spo2 = {90.0};
    CHECK_THROWS_AS(ingest::window_samples(rec, gt), DataError);
}

TEST_CASE("equidistant reading snaps to the earlier frame") {
    const PpgRecording rec = ramp_recording(200, 10.0);  // frame every 0.1 s
    GroundTruthSeries gt;
    gt.t_sec = {10.05};  // exactly between frames 100 and 101
    gt.spo2 = {90.0};
    const auto samples = ingest::window_samples(rec, gt);
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].channel(0)[45] == rec.channel_means[0][100]);
}

TEST_CASE("channel stats: constant channel hits the std floor") {
    PpgRecording rec;
    rec.fps = 30;
    for (int c = 0; c < 3; ++c) rec.channel_means[c].assign(100, 42.0);
    const ChannelStats stats = ingest::compute_channel_stats(std::vector<const PpgRecording*>{&rec});
    for (int c = 0; c < 3; ++c) {
        CHECK(stats.mean[c] == 42.0);
        CHECK(stats.std_dev[c] == kStdFloor);
    }
}

TEST_CASE("channel stats: equal-length recordings average symmetrically") {
    PpgRecording a, b;
    for (int c = 0; c < 3; ++c) {
        a.channel_means[c].assign(50, 10.0);
        b.channel_means[c].assign(50, 30.0);
    }
    const ChannelStats stats = ingest::compute_channel_stats(std::vector<const PpgRecording*>{&a, &b});
    for (int c = 0; c < 3; ++c) CHECK(stats.mean[c] == doctest::Approx(20.0));
}

TEST_CASE("channel stats match a concatenate-and-average oracle") {
    Rng rng(5);
    PpgRecording a, b;
    for (int c = 0; c < 3; ++c) {
        a.channel_means[c].resize(100);
        b.channel_means[c].resize(300);
        for (auto& v : a.channel_means[c]) v = rng.uniform(0.0, 255.0);
        for (auto& v : b.channel_means[c]) v = rng.uniform(0.0, 255.0);
    }
    // force the red means from the worked example: 10 and 50 -> combined 40
    std::fill(a.channel_means[0].begin(), a.channel_means[0].end(), 10.0);
    std::fill(b.channel_means[0].begin(), b.channel_means[0].end(), 50.0);

    const ChannelStats stats = ingest::compute_channel_stats(std::vector<const PpgRecording*>{&a, &b});
    CHECK(stats.mean[0] == doctest::Approx(40.0).epsilon(1e-12));

    for (int c = 0; c < 3; ++c) {
        std::vector<double> all;
        all.insert(all.end(), a.channel_means[c].begin(), a.channel_means[c].end());
        all.insert(all.end(), b.channel_means[c].begin(), b.channel_means[c].end());
        double mean = 0.0;
        for (double v : all) mean += v;
        mean /= double(all.size());
        double var = 0.0;
        for (double v : all) var += (v - mean) * (v - mean);
        var /= double(all.size());  // population convention
        CHECK(stats.mean[c] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(stats.std_dev[c] == doctest::Approx(std::sqrt(var)).epsilon(1e-9));
    }
}

TEST_CASE("standardize: mean window becomes zero, identity stats change nothing") {
    ChannelStats stats;
    stats.mean = {5.0, 6.0, 7.0};
    stats.std_dev = {2.0, 3.0, 4.0};

    Sample s;
    s.window.resize(270);
    for (int c = 0; c < 3; ++c) {
        std::fill_n(s.channel(c), kWindowFrames, stats.mean[std::size_t(c)]);
    }
    std::vector<Sample> samples{s};
    ingest::standardize(samples, stats);
    for (double v : samples[0].window) CHECK(v == 0.0);

    ChannelStats identity;  // mean 0, std 1
    identity.mean = {0.0, 0.0, 0.0};
    identity.std_dev = {1.0, 1.0, 1.0};
    Sample t;
    t.window.assign(270, 3.25);
    std::vector<Sample> same{t};
    ingest::standardize(same, identity);
    for (double v : same[0].window) CHECK(v == 3.25);
}

TEST_CASE("standardizing a training set with its own stats centers it exactly") {
    Rng rng(17);
    std::vector<Sample> samples(40);
    for (auto& s : samples) {
        s.window.resize(270);
        for (auto& v : s.window) v = rng.uniform(20.0, 230.0);
    }
    const ChannelStats stats = ingest::compute_channel_stats_windows(samples);
    ingest::standardize(samples, stats);

    // recompute moments after the transform
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (const Sample& s : samples) {
            for (int j = 0; j < kWindowFrames; ++j) mean += s.channel(c)[j];
        }
        mean /= double(samples.size() * kWindowFrames);
        CHECK(std::fabs(mean) < 1e-9);
    }
}

TEST_CASE("standardize then the affine inverse recovers the original window") {
    Rng rng(23);
    ChannelStats stats;
    stats.mean = {120.0, 80.0, 40.0};
    stats.std_dev = {7.0, 3.0, 1.5};
    Sample s;
    s.window.resize(270);
    for (auto& v : s.window) v = rng.uniform(0.0, 255.0);
    const Sample original = s;

    std::vector<Sample> samples{s};
    ingest::standardize(samples, stats);
    for (int c = 0; c < 3; ++c) {
        for (int j = 0; j < kWindowFrames; ++j) {
            const double back =
                samples[0].channel(c)[j] * stats.std_dev[std::size_t(c)] + stats.mean[std::size_t(c)];
            CHECK(back == doctest::Approx(original.channel(c)[j]).epsilon(1e-9));
        }
    }
}

TEST_CASE("split plan: six subjects rotate validation and keep four in training") {
    const SplitPlan plan = ingest::make_split_plan({1, 2, 3, 4, 5, 6});
    REQUIRE(plan.splits.size() == 6);
    CHECK(plan.splits[0].test_subject == 1);
    CHECK(plan.splits[0].val_subject == 2);
    CHECK(plan.splits[0].train_subjects == std::vector<int>{3, 4, 5, 6});
    for (const Split& s : plan.splits) {
        CHECK(s.train_subjects.size() == 4);
        std::set<int> seen(s.train_subjects.begin(), s.train_subjects.end());
        seen.insert(s.val_subject);
        seen.insert(s.test_subject);
        CHECK(seen.size() == 6);  // pairwise disjoint and covering
    }
}

TEST_CASE("split plan: three subjects leave one-subject training sets") {
    const SplitPlan plan = ingest::make_split_plan({1, 2, 3});
    REQUIRE(plan.splits.size() == 3);
    for (const Split& s : plan.splits) CHECK(s.train_subjects.size() == 1);
}

TEST_CASE("split plan: exclusions remove a subject everywhere") {
    const SplitPlan plan = ingest::make_split_plan({1, 2, 3, 4, 5, 6}, {5});
    REQUIRE(plan.splits.size() == 5);
    for (const Split& s : plan.splits) {
        CHECK(s.test_subject != 5);
        CHECK(s.val_subject != 5);
        CHECK(std::find(s.train_subjects.begin(), s.train_subjects.end(), 5) ==
              s.train_subjects.end());
    }
}

TEST_CASE("split plan needs at least three subjects") {
    CHECK_THROWS_AS(ingest::make_split_plan({1, 2}), ValidationError);
    CHECK_THROWS_AS(ingest::make_split_plan({1, 2, 3, 4}, {1, 4}), ValidationError);
}

TEST_CASE("raw frame file round trip and error reporting") {
    const fs::path dir = temp_dir("frames");
    FrameSequence fsq = constant_frames(5, 9, 8, 7, 12, 4);
    Rng rng(3);
    for (auto& f : fsq.frames) {
        for (auto& b : f) b = std::uint8_t(rng.below(256));
    }
    const fs::path path = dir / "clip.camox";
    ingest::write_frames(path, fsq);
    const FrameSequence back = ingest::read_frames(path);
    CHECK(back.width == fsq.width);
    CHECK(back.height == fsq.height);
    CHECK(back.fps == fsq.fps);
    REQUIRE(back.frames.size() == fsq.frames.size());
    for (std::size_t j = 0; j < fsq.frames.size(); ++j) CHECK(back.frames[j] == fsq.frames[j]);

    // truncated payload names expected vs actual byte counts
    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    const fs::path cut = dir / "cut.camox";
    std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() - 10);
    try {
        ingest::read_frames(cut);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("expected") != std::string::npos);
        CHECK(msg.find(std::to_string(bytes.size())) != std::string::npos);
        CHECK(msg.find(std::to_string(bytes.size() - 10)) != std::string::npos);
    }

    const fs::path junk = dir / "junk.camox";
    std::ofstream(junk, std::ios::binary) << "NOTAMAGIC.....";
    CHECK_THROWS_AS(ingest::read_frames(junk), DataError);
    fs::remove_all(dir);
}

TEST_CASE("dataset directory round trip") {
    const fs::path dir = temp_dir("dataset");
    HandRecording rec;
    rec.ppg = ramp_recording(120);
    rec.ppg.subject_id = 3;
    rec.ppg.hand = Hand::right;
    for (int t = 0; t < 4; ++t) {
        rec.ground_truth.t_sec.push_back(double(t));
        rec.ground_truth.spo2.push_back(95.0 - t);
    }
    ingest::CaptureMeta meta;
    meta.subject_id = 3;
    meta.hand = Hand::right;
    meta.tissue_flags = {"callus"};
    meta.skin_tone = "light";
    meta.gender = "F";
    ingest::save_hand_recording(dir, rec, meta, 99);

    const ingest::Dataset ds = ingest::load_dataset(dir);
    REQUIRE(ds.recordings.size() == 1);
    const HandRecording& got = ds.recordings[0];
    CHECK(got.ppg.subject_id == 3);
    CHECK(got.ppg.hand == Hand::right);
    CHECK(got.ppg.tissue_flags == std::vector<std::string>{"callus"});
    CHECK(got.ppg.length() == 120);
    for (int c = 0; c < 3; ++c) {
        CHECK(got.ppg.channel_means[c] == rec.ppg.channel_means[c]);
    }
    CHECK(got.ground_truth.t_sec == rec.ground_truth.t_sec);
    CHECK(got.ground_truth.spo2 == rec.ground_truth.spo2);
    CHECK(ds.subject_ids() == std::set<int>{3});
    fs::remove_all(dir);
}
