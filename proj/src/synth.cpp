#include "camox/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "camox/ingest.hpp"
#include "camox/rng.hpp"

namespace camox::synth {

using nlohmann::json;

double ratio_of_ratios(double spo2) { return (110.0 - spo2) / 25.0; }
double spo2_from_ratio(double r) { return 110.0 - 25.0 * r; }

double pulse_waveform(double phase_rad) {
    // steeper upstroke than decay, like a systolic peak with a late bump
    return 0.8 * std::sin(phase_rad) + 0.4 * std::sin(2.0 * phase_rad + 0.9);
}

void ProtocolSpec::validate() const {
    if (!(floor_spo2 < start_spo2 && start_spo2 <= 100.0)) {
        throw ValidationError("protocol needs floor_spo2 < start_spo2 <= 100");
    }
    if (floor_spo2 < 0.0) throw ValidationError("floor_spo2 must be non-negative");
    if (duration_sec < 3.0) throw ValidationError("study duration must cover one window (3 s)");
    if (n_plateaus < 1) throw ValidationError("n_plateaus must be at least 1");
    if (duration_sec / double(n_plateaus) < 20.0) {
        throw ValidationError("infeasible plateau count: segments under 20 s");
    }
    if (plateau_jitter < 0.0) throw ValidationError("plateau_jitter must be non-negative");
    if (heart_rate_bpm < 30.0 || heart_rate_bpm > 220.0) {
        throw ValidationError("heart rate out of range");
    }
}

GroundTruthSeries trajectory(const ProtocolSpec& spec) {
    spec.validate();
    const int n_readings = int(spec.duration_sec);  // 1 Hz
    const int n = spec.n_plateaus;

    std::vector<double> levels(n);
    for (int i = 0; i < n; ++i) {
        levels[i] = n == 1 ? spec.start_spo2
                           : spec.start_spo2 -
                                 (spec.start_spo2 - spec.floor_spo2) * double(i) / double(n - 1);
    }
    const double seg = spec.duration_sec / double(n);
    const double ramp = std::min(15.0, seg / 3.0);

    Rng rng(derive_seed(spec.seed, "trajectory"));
    GroundTruthSeries gt;
    gt.t_sec.reserve(n_readings);
    gt.spo2.reserve(n_readings);
    for (int t = 0; t < n_readings; ++t) {
        const int k = std::min(int(double(t) / seg), n - 1);
        double value = levels[k];
        const double into = double(t) - double(k) * seg;
        if (k > 0 && into < ramp) {
            const double u = into / ramp;
            value = levels[k - 1] + (levels[k] - levels[k - 1]) * (1.0 - std::cos(std::numbers::pi * u)) / 2.0;
        }
        if (spec.plateau_jitter > 0.0) value += rng.normal(0.0, spec.plateau_jitter);
        value = std::clamp(value, spec.floor_spo2 - 2.0, 100.0);
        gt.t_sec.push_back(double(t));
        gt.spo2.push_back(value);
    }
    return gt;
}

namespace {

double interp_spo2(const GroundTruthSeries& gt, double t) {
    if (t <= gt.t_sec.front()) return gt.spo2.front();
    if (t >= gt.t_sec.back()) return gt.spo2.back();
    const auto it = std::upper_bound(gt.t_sec.begin(), gt.t_sec.end(), t);
    const std::size_t hi = std::size_t(it - gt.t_sec.begin());
    const std::size_t lo = hi - 1;
    const double u = (t - gt.t_sec[lo]) / (gt.t_sec[hi] - gt.t_sec[lo]);
    return gt.spo2[lo] + u * (gt.spo2[hi] - gt.spo2[lo]);
}

}  // namespace

PpgRecording render_ppg(const GroundTruthSeries& gt, const CameraModel& camera,
                        const TissueProfile& tissue, double fps, double heart_rate_bpm,
                        std::uint64_t seed, RenderInfo* info) {
    if (gt.size() == 0) throw ValidationError("render_ppg needs a non-empty ground truth");
    if (tissue.ac_damping <= 0.0 || tissue.ac_damping > 1.5) {
        throw ValidationError("tissue ac_damping out of range");
    }
    const std::size_t n_frames = std::size_t(std::llround((gt.t_sec.back() + 1.0) * fps));
    const double max_val = camera.max_value();
    const double beat_omega = 2.0 * std::numbers::pi * heart_rate_bpm / 60.0;
    const double drift_omega =
        camera.drift_period_sec > 0.0 ? 2.0 * std::numbers::pi / camera.drift_period_sec : 0.0;

    Rng rng(derive_seed(seed, "render"));
    PpgRecording rec;
    for (auto& row : rec.channel_means) row.resize(n_frames);
    rec.fps = fps;
    rec.gains = camera.gains;

    std::array<std::size_t, 3> clipped{0, 0, 0};
    for (std::size_t j = 0; j < n_frames; ++j) {
        const double t = double(j) / fps;
        const double s = interp_spo2(gt, t);
        const double pulse = pulse_waveform(beat_omega * t);
        const std::array<double, 3> modulation{
            kBlueModulation * ratio_of_ratios(s),
            kGreenModulation,
            kBlueModulation,
        };
        for (int c = 0; c < 3; ++c) {
            const double dc = camera.base_intensity[c] + tissue.dc_shift;
            const double ac = camera.base_intensity[c] * modulation[c] * tissue.ac_damping;
            double value = camera.gains[c] * (dc + ac * pulse);
            if (camera.drift_amplitude != 0.0) {
                value += camera.drift_amplitude * std::sin(drift_omega * t + 2.1 * c);
            }
            if (camera.noise_sigma > 0.0) value += rng.normal(0.0, camera.noise_sigma);
            if (value <= 0.0 || value >= max_val) ++clipped[c];
            value = std::clamp(value, 0.0, max_val);
            rec.channel_means[c][j] = std::round(value);
        }
    }

    RenderInfo local;
    for (int c = 0; c < 3; ++c) local.clip_fraction[c] = double(clipped[c]) / double(n_frames);
    if (info != nullptr) *info = local;
    for (int c = 0; c < 3; ++c) {
        if (local.clip_fraction[c] >= 0.999) {
            throw ValidationError("channel " + std::to_string(c) + " is fully clipped (" +
                                  std::to_string(local.clip_fraction[c] * 100.0) +
                                  "% of frames); adjust gains or base intensity");
        }
    }
    return rec;
}

FrameSequence render_frames(const PpgRecording& rec, const CameraModel& camera,
                            std::uint32_t width, std::uint32_t height) {
    rec.validate();
    FrameSequence fs;
    fs.width = width;
    fs.height = height;
    fs.fps = std::uint32_t(std::lround(rec.fps));
    const std::size_t n = rec.length();
    const double max_val = camera.max_value();
    fs.frames.assign(n, {});
    for (std::size_t j = 0; j < n; ++j) {
        std::array<std::uint8_t, 3> px{};
        for (int c = 0; c < 3; ++c) {
            const double v = std::clamp(std::round(rec.channel_means[c][j]), 0.0, max_val);
            px[c] = std::uint8_t(v);
        }
        auto& frame = fs.frames[j];
        frame.resize(fs.pixel_count() * 3);
        for (std::size_t p = 0; p < fs.pixel_count(); ++p) {
            frame[3 * p + 0] = px[0];
            frame[3 * p + 1] = px[1];
            frame[3 * p + 2] = px[2];
        }
    }
    return fs;
}

void StudySpec::validate() const {
    if (n_subjects < 3) throw ValidationError("study needs at least 3 subjects");
    if (fps <= 0.0) throw ValidationError("fps must be positive");
    protocol.validate();
    for (const auto& [id, tp] : tissue_profiles) {
        if (id < 1 || id > n_subjects) {
            throw ValidationError("tissue profile for unknown subject " + std::to_string(id));
        }
        if (tp.ac_damping <= 0.0 || tp.ac_damping > 1.0) {
            throw ValidationError("tissue ac_damping must be in (0, 1]");
        }
    }
}

StudySpec default_study_spec() {
    StudySpec spec;
    spec.tissue_profiles[5] = TissueProfile{0.5, 0.6};
    return spec;
}

StudySpec study_spec_from_json(const json& j) {
    StudySpec spec = default_study_spec();
    spec.tissue_profiles.clear();
    if (j.contains("n_subjects")) spec.n_subjects = j.at("n_subjects").get<int>();
    if (j.contains("fps")) spec.fps = j.at("fps").get<double>();
    const json p = j.value("protocol", json::object());
    if (p.contains("duration_sec")) spec.protocol.duration_sec = p.at("duration_sec").get<double>();
    if (p.contains("start_spo2")) spec.protocol.start_spo2 = p.at("start_spo2").get<double>();
    if (p.contains("floor_spo2")) spec.protocol.floor_spo2 = p.at("floor_spo2").get<double>();
    if (p.contains("n_plateaus")) spec.protocol.n_plateaus = p.at("n_plateaus").get<int>();
    if (p.contains("plateau_jitter")) spec.protocol.plateau_jitter = p.at("plateau_jitter").get<double>();
    if (p.contains("heart_rate_bpm")) spec.protocol.heart_rate_bpm = p.at("heart_rate_bpm").get<double>();
    const json c = j.value("camera", json::object());
    if (c.contains("gains")) {
        const auto g = c.at("gains").get<std::vector<double>>();
        if (g.size() != 3) throw ValidationError("camera gains must have 3 entries");
        spec.camera.gains = {g[0], g[1], g[2]};
    }
    if (c.contains("noise_sigma")) spec.camera.noise_sigma = c.at("noise_sigma").get<double>();
    if (c.contains("base_intensity")) {
        const auto b = c.at("base_intensity").get<std::vector<double>>();
        if (b.size() != 3) throw ValidationError("camera base_intensity must have 3 entries");
        spec.camera.base_intensity = {b[0], b[1], b[2]};
    }
    if (c.contains("drift_amplitude")) spec.camera.drift_amplitude = c.at("drift_amplitude").get<double>();
    if (c.contains("drift_period_sec")) spec.camera.drift_period_sec = c.at("drift_period_sec").get<double>();
    const json tissue = j.value("tissue", json::object());
    for (const auto& [key, tp] : tissue.items()) {
        TissueProfile profile;
        profile.ac_damping = tp.value("ac_damping", 1.0);
        profile.dc_shift = tp.value("dc_shift", 0.0);
        spec.tissue_profiles[int(std::stol(key))] = profile;
    }
    if (!j.contains("tissue") && j.value("default_tissue", true)) {
        for (const auto& [id, tp] : default_study_spec().tissue_profiles) {
            if (id <= spec.n_subjects) spec.tissue_profiles[id] = tp;
        }
    }
    spec.validate();
    return spec;
}

json study_spec_to_json(const StudySpec& spec) {
    json tissue = json::object();
    for (const auto& [id, tp] : spec.tissue_profiles) {
        tissue[std::to_string(id)] = {{"ac_damping", tp.ac_damping}, {"dc_shift", tp.dc_shift}};
    }
    return json{
        {"n_subjects", spec.n_subjects},
        {"fps", spec.fps},
        {"protocol",
         {{"duration_sec", spec.protocol.duration_sec},
          {"start_spo2", spec.protocol.start_spo2},
          {"floor_spo2", spec.protocol.floor_spo2},
          {"n_plateaus", spec.protocol.n_plateaus},
          {"plateau_jitter", spec.protocol.plateau_jitter},
          {"heart_rate_bpm", spec.protocol.heart_rate_bpm}}},
        {"camera",
         {{"gains", spec.camera.gains},
          {"noise_sigma", spec.camera.noise_sigma},
          {"base_intensity", spec.camera.base_intensity},
          {"drift_amplitude", spec.camera.drift_amplitude},
          {"drift_period_sec", spec.camera.drift_period_sec}}},
        {"tissue", tissue},
    };
}

void generate_study(const std::filesystem::path& out_dir, const StudySpec& spec,
                    std::uint64_t seed) {
    spec.validate();
    std::filesystem::create_directories(out_dir);

    for (int id = 1; id <= spec.n_subjects; ++id) {
        const std::uint64_t subject_seed = derive_seed(seed, "subject", std::uint64_t(id));
        Rng subject_rng(derive_seed(subject_seed, "physiology"));

        ProtocolSpec protocol = spec.protocol;
        protocol.seed = derive_seed(subject_seed, "trajectory");
        const double heart_rate = spec.protocol.heart_rate_bpm + subject_rng.uniform(-10.0, 10.0);
        const double perfusion = subject_rng.uniform(0.95, 1.05);

        TissueProfile tissue;
        const auto it = spec.tissue_profiles.find(id);
        if (it != spec.tissue_profiles.end()) tissue = it->second;
        tissue.ac_damping *= perfusion;

        const GroundTruthSeries gt = trajectory(protocol);

        for (const Hand hand : {Hand::left, Hand::right}) {
            const std::uint64_t stream_seed = derive_seed(subject_seed, to_string(hand));
            HandRecording rec;
            rec.ppg = render_ppg(gt, spec.camera, tissue, spec.fps, heart_rate, stream_seed);
            rec.ppg.subject_id = id;
            rec.ppg.hand = hand;
            rec.ground_truth = gt;

            ingest::CaptureMeta meta;
            meta.fps = spec.fps;
            meta.gains = spec.camera.gains;
            meta.hand = hand;
            meta.subject_id = id;
            if (it != spec.tissue_profiles.end() && it->second.ac_damping < 1.0) {
                meta.tissue_flags.push_back("callus");
                rec.ppg.tissue_flags = meta.tissue_flags;
            }
            meta.skin_tone = id == 2 ? "dark" : "light";
            meta.gender = id % 2 == 1 ? "F" : "M";
            ingest::save_hand_recording(out_dir, rec, meta, stream_seed);
        }
    }
}

}  // namespace camox::synth
