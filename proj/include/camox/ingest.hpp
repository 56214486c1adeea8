#pragma once
// Reading recordings (raw frame files or CSV datasets), PPG extraction,
// windowing against ground truth, channel statistics, standardization,
// and leave-one-subject-out split planning.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "camox/core.hpp"

namespace camox::ingest {

struct CaptureMeta {
    double fps = 30.0;
    std::array<double, 3> gains{1.0, 3.0, 18.0};
    Hand hand = Hand::left;
    int subject_id = 0;
    std::vector<std::string> tissue_flags;
    std::string skin_tone;
    std::string gender;
    std::string notes;
};

// Mean pixel value per color channel for every frame -> 3 x n matrix.
PpgRecording extract_ppg(const FrameSequence& frames, const CaptureMeta& meta);

// One candidate window per ground-truth reading, centered on the nearest
// frame (ties toward the earlier frame), 45 columns of margin either side.
// Readings whose window would cross a recording edge and labels below
// floor_spo2 are dropped.
std::vector<Sample> window_samples(const PpgRecording& rec, const GroundTruthSeries& gt,
                                   double floor_spo2 = 70.0);

// Channel moments over the concatenation of all recordings' columns
// (equivalently length-weighted per-recording moments). Population std,
// floored at kStdFloor.
ChannelStats compute_channel_stats(const std::vector<const PpgRecording*>& recordings);
ChannelStats compute_channel_stats(const std::vector<PpgRecording>& recordings);
// Same pooling over sample windows (each window is a 3 x 90 matrix).
ChannelStats compute_channel_stats_windows(const std::vector<Sample>& samples);

// x -> (x - mean_c) / std_c per channel; labels untouched.
void standardize(std::vector<Sample>& samples, const ChannelStats& stats);
void standardize_window(const double* in, const ChannelStats& stats, double* out);

// One split per non-excluded subject as test; validation subject is the next
// subject in sorted cyclic order. Requires >= 3 subjects after exclusions.
SplitPlan make_split_plan(const std::set<int>& subject_ids,
                          const std::set<int>& exclusions = {});

// ---- raw frame files ("CAMOX1") -------------------------------------------

FrameSequence read_frames(const std::filesystem::path& path);
void write_frames(const std::filesystem::path& path, const FrameSequence& frames);

// ---- CSV / dataset directory ----------------------------------------------

struct Dataset {
    std::vector<HandRecording> recordings;

    std::set<int> subject_ids() const;
};

PpgRecording load_ppg_csv(const std::filesystem::path& path);
void save_ppg_csv(const std::filesystem::path& path, const PpgRecording& rec);
GroundTruthSeries load_spo2_csv(const std::filesystem::path& path);
void save_spo2_csv(const std::filesystem::path& path, const GroundTruthSeries& gt);

// Layout: root/subject_<id>/<left|right>/{ppg.csv,spo2.csv,meta.json}
Dataset load_dataset(const std::filesystem::path& root);
void save_hand_recording(const std::filesystem::path& root, const HandRecording& rec,
                         const CaptureMeta& meta, std::uint64_t stream_seed);

}  // namespace camox::ingest
