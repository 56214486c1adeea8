#pragma once
// Synthetic varied-FiO2 study generator: stair-stepped desaturation
// trajectories rendered through a camera model (per-channel gains, 8-bit
// clipping, noise and baseline drift) into the dataset layout the loader
// consumes. The pulsatile red/blue amplitude ratio follows the classical
// ratio-of-ratios calibration R(s) = (110 - s) / 25, so generated data has
// an analytic inverse for verification.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "camox/core.hpp"

namespace camox::synth {

struct ProtocolSpec {
    double duration_sec = 960.0;
    double start_spo2 = 98.0;
    double floor_spo2 = 70.0;
    int n_plateaus = 8;
    double plateau_jitter = 0.3;  // sigma of per-reading jitter, percentage points
    double heart_rate_bpm = 75.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct CameraModel {
    std::array<double, 3> gains{1.0, 3.0, 18.0};
    int bit_depth = 8;
    double noise_sigma = 0.5;                       // output intensity units
    std::array<double, 3> base_intensity{180.0, 40.0, 7.0};  // pre-gain DC level
    double drift_amplitude = 2.0;  // slow baseline wander, output units
    double drift_period_sec = 60.0;

    double max_value() const { return double((1u << bit_depth) - 1); }
};

struct TissueProfile {
    double ac_damping = 1.0;  // multiplies the pulsatile component, in (0, 1]
    double dc_shift = 0.0;    // pre-gain baseline shift (e.g. callused skin)
};

// Fractional pulsatile modulation (AC/DC) of the blue and green channels;
// red is kBlueModulation * R(s) so that R is recoverable.
inline constexpr double kBlueModulation = 0.05;
inline constexpr double kGreenModulation = 0.03;

double ratio_of_ratios(double spo2);      // (110 - s) / 25
double spo2_from_ratio(double r);         // 110 - 25 R

// Asymmetric two-harmonic pulse waveform, zero mean, unit-order amplitude.
double pulse_waveform(double phase_rad);

// Piecewise-constant plateaus descending from start to floor with smoothed
// transitions and bounded jitter, sampled at 1 Hz.
GroundTruthSeries trajectory(const ProtocolSpec& spec);

struct RenderInfo {
    std::array<double, 3> clip_fraction{0.0, 0.0, 0.0};
};

// Camera-model PPG for a ground-truth series. Throws ValidationError when a
// channel ends up fully clipped (>= 99.9% of frames); partial clipping is
// reported through `info`.
PpgRecording render_ppg(const GroundTruthSeries& gt, const CameraModel& camera,
                        const TissueProfile& tissue, double fps, double heart_rate_bpm,
                        std::uint64_t seed, RenderInfo* info = nullptr);

// Constant-valued frames whose channel means reproduce the recording columns
// after rounding to the 8-bit pixel grid.
FrameSequence render_frames(const PpgRecording& rec, const CameraModel& camera,
                            std::uint32_t width = 176, std::uint32_t height = 144);

struct StudySpec {
    int n_subjects = 6;
    double fps = 30.0;
    ProtocolSpec protocol;
    CameraModel camera;
    std::map<int, TissueProfile> tissue_profiles;  // keyed by subject id (1-based)

    void validate() const;
};

// 6 subjects; subject 5 carries a callus-like profile (damped AC, raised DC).
StudySpec default_study_spec();

StudySpec study_spec_from_json(const nlohmann::json& j);
nlohmann::json study_spec_to_json(const StudySpec& spec);

// Writes subject_<id>/<left|right>/{ppg.csv,spo2.csv,meta.json} under out_dir.
// Both hands share a subject's trajectory and tissue profile but use
// independent noise streams. Deterministic in (spec, seed).
void generate_study(const std::filesystem::path& out_dir, const StudySpec& spec,
                    std::uint64_t seed);

}  // namespace camox::synth
