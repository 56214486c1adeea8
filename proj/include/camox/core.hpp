#pragma once
// Domain types shared across the toolkit, plus the error taxonomy the CLI
// maps to exit codes (validation -> 2, data -> 3, internal -> 4).

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace camox {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InternalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Hand { left, right };

const char* to_string(Hand h);
Hand hand_from_string(const std::string& s);

// Raw RGB24 video: frames are width*height*3 bytes, row-major, RGB interleaved.
struct FrameSequence {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t fps = 30;
    std::vector<std::vector<std::uint8_t>> frames;

    std::size_t pixel_count() const { return std::size_t(width) * height; }
    void validate() const;  // throws DataError on inconsistent dimensions
};

// Per-channel mean intensity over time: rows R,G,B; one column per frame.
struct PpgRecording {
    std::array<std::vector<double>, 3> channel_means;
    double fps = 30.0;
    std::array<double, 3> gains{1.0, 3.0, 18.0};
    Hand hand = Hand::left;
    int subject_id = 0;
    std::vector<std::string> tissue_flags;

    std::size_t length() const { return channel_means[0].size(); }
    void validate() const;  // rows equal length, entries in [0, 255]
};

struct GroundTruthSeries {
    std::vector<double> t_sec;
    std::vector<double> spo2;

    std::size_t size() const { return t_sec.size(); }
    void validate() const;  // t strictly increasing, spo2 in [0, 100]
};

// One labeled window: 3 channels x 90 frames, row-major [channel][frame].
inline constexpr int kWindowFrames = 90;

struct Sample {
    std::vector<double> window;  // 3 * kWindowFrames
    double label = 0.0;          // SpO2 percent
    int subject_id = 0;
    Hand hand = Hand::left;
    double center_time = 0.0;

    double* channel(int c) { return window.data() + std::size_t(c) * kWindowFrames; }
    const double* channel(int c) const { return window.data() + std::size_t(c) * kWindowFrames; }
};

struct ChannelStats {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    std::array<double, 3> std_dev{1.0, 1.0, 1.0};
};

// Degenerate (constant) channels get this floor instead of a zero std.
inline constexpr double kStdFloor = 1e-6;

struct Split {
    std::vector<int> train_subjects;
    int val_subject = 0;
    int test_subject = 0;
};

struct SplitPlan {
    std::vector<Split> splits;
};

// One hand-recording with its reference series; the unit the dataset loader
// returns and the windowing stage consumes.
struct HandRecording {
    PpgRecording ppg;
    GroundTruthSeries ground_truth;
};

}  // namespace camox
