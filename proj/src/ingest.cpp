#include "camox/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "camox/io_util.hpp"
#include "camox/kernels.hpp"

namespace camox::ingest {

using nlohmann::json;

PpgRecording extract_ppg(const FrameSequence& frames, const CaptureMeta& meta) {
    frames.validate();
    const std::size_t n = frames.frames.size();
    const double inv_pixels = 1.0 / double(frames.pixel_count());
    const auto& k = kern::active_backend();

    PpgRecording rec;
    for (auto& row : rec.channel_means) row.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::uint64_t sums[3];
        k.rgb_sums(frames.frames[j].data(), frames.pixel_count(), sums);
        for (int c = 0; c < 3; ++c) rec.channel_means[c][j] = double(sums[c]) * inv_pixels;
    }
    rec.fps = meta.fps > 0 ? meta.fps : double(frames.fps);
    rec.gains = meta.gains;
    rec.hand = meta.hand;
    rec.subject_id = meta.subject_id;
    rec.tissue_flags = meta.tissue_flags;
    return rec;
}

namespace {

// Nearest frame index to time t; equidistant cases take the earlier frame.
std::size_t nearest_frame(double t, double fps, std::size_t n) {
    const double pos = t * fps;
    double lo = std::floor(pos);
    if (lo < 0.0) lo = 0.0;
    double hi = lo + 1.0;
    std::size_t idx;
    if (pos - lo <= hi - pos) {
        idx = std::size_t(lo);
    } else {
        idx = std::size_t(hi);
    }
    return std::min(idx, n == 0 ? std::size_t(0) : n - 1);
}

}  // namespace

std::vector<Sample> window_samples(const PpgRecording& rec, const GroundTruthSeries& gt,
                                   double floor_spo2) {
    const std::size_t n = rec.length();
    if (n < std::size_t(kWindowFrames)) {
        throw DataError("recording has " + std::to_string(n) + " frames; need at least " +
                        std::to_string(kWindowFrames));
    }
    constexpr int half = kWindowFrames / 2;  // 45 columns of margin either side

    std::vector<Sample> out;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt.spo2[i] < floor_spo2) continue;
        const std::size_t c = nearest_frame(gt.t_sec[i], rec.fps, n);
        if (c < std::size_t(half) || c + half > n) continue;

        Sample s;
        s.window.resize(3 * kWindowFrames);
        const std::size_t begin = c - half;
        for (int ch = 0; ch < 3; ++ch) {
            std::copy_n(rec.channel_means[ch].data() + begin, kWindowFrames, s.channel(ch));
        }
        s.label = gt.spo2[i];
        s.subject_id = rec.subject_id;
        s.hand = rec.hand;
        s.center_time = gt.t_sec[i];
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

struct MomentAccum {
    std::array<double, 3> sum{0, 0, 0};
    std::array<double, 3> sumsq{0, 0, 0};
    std::size_t count = 0;

    void add(const double* row, std::size_t n, int c) {
        const auto& k = kern::active_backend();
        sum[c] += k.sum(row, n);
        sumsq[c] += k.sumsq(row, n);
    }

    ChannelStats finish() const {
        if (count == 0) throw ValidationError("channel stats need at least one recording");
        ChannelStats s;
        for (int c = 0; c < 3; ++c) {
            const double mean = sum[c] / double(count);
            const double var = std::max(0.0, sumsq[c] / double(count) - mean * mean);
            s.mean[c] = mean;
            s.std_dev[c] = std::max(std::sqrt(var), kStdFloor);
        }
        return s;
    }
};

}  // namespace

ChannelStats compute_channel_stats(const std::vector<const PpgRecording*>& recordings) {
    MomentAccum acc;
    for (const PpgRecording* rec : recordings) {
        for (int c = 0; c < 3; ++c) {
            acc.add(rec->channel_means[c].data(), rec->length(), c);
        }
        acc.count += rec->length();
    }
    return acc.finish();
}

ChannelStats compute_channel_stats(const std::vector<PpgRecording>& recordings) {
    std::vector<const PpgRecording*> ptrs;
    ptrs.reserve(recordings.size());
    for (const auto& r : recordings) ptrs.push_back(&r);
    return compute_channel_stats(ptrs);
}

ChannelStats compute_channel_stats_windows(const std::vector<Sample>& samples) {
    MomentAccum acc;
    for (const Sample& s : samples) {
        for (int c = 0; c < 3; ++c) acc.add(s.channel(c), kWindowFrames, c);
        acc.count += kWindowFrames;
    }
    return acc.finish();
}

void standardize_window(const double* in, const ChannelStats& stats, double* out) {
    const auto& k = kern::active_backend();
    for (int c = 0; c < 3; ++c) {
        k.affine(in + std::size_t(c) * kWindowFrames, stats.mean[c], 1.0 / stats.std_dev[c],
                 out + std::size_t(c) * kWindowFrames, kWindowFrames);
    }
}

void standardize(std::vector<Sample>& samples, const ChannelStats& stats) {
    for (Sample& s : samples) standardize_window(s.window.data(), stats, s.window.data());
}

SplitPlan make_split_plan(const std::set<int>& subject_ids, const std::set<int>& exclusions) {
    std::vector<int> ids;
    for (int id : subject_ids) {
        if (exclusions.count(id) == 0) ids.push_back(id);
    }
    if (ids.size() < 3) {
        throw ValidationError("split plan needs at least 3 subjects, have " +
                              std::to_string(ids.size()));
    }
    SplitPlan plan;
    const std::size_t m = ids.size();
    for (std::size_t i = 0; i < m; ++i) {
        Split s;
        s.test_subject = ids[i];
        s.val_subject = ids[(i + 1) % m];
        for (std::size_t j = 0; j < m; ++j) {
            if (j != i && j != (i + 1) % m) s.train_subjects.push_back(ids[j]);
        }
        plan.splits.push_back(std::move(s));
    }
    return plan;
}

// ---- raw frame files --------------------------------------------------------

namespace {
constexpr char kFrameMagic[6] = {'C', 'A', 'M', 'O', 'X', '1'};
constexpr std::size_t kFrameHeaderSize = 6 + 4 * 4;
}  // namespace

FrameSequence read_frames(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open frame file: " + path.string());

    unsigned char header[kFrameHeaderSize];
    in.read(reinterpret_cast<char*>(header), kFrameHeaderSize);
    if (in.gcount() != std::streamsize(kFrameHeaderSize) ||
        std::memcmp(header, kFrameMagic, sizeof(kFrameMagic)) != 0) {
        throw DataError("not a CAMOX1 frame file: " + path.string());
    }
    FrameSequence fs;
    fs.width = read_u32_le(header + 6);
    fs.height = read_u32_le(header + 10);
    fs.fps = read_u32_le(header + 14);
    const std::uint32_t frame_count = read_u32_le(header + 18);
    if (fs.width == 0 || fs.height == 0 || frame_count == 0) {
        throw DataError("frame file has zero dimension: " + path.string());
    }

    const std::size_t frame_bytes = fs.pixel_count() * 3;
    fs.frames.assign(frame_count, {});
    for (std::uint32_t j = 0; j < frame_count; ++j) {
        fs.frames[j].resize(frame_bytes);
        in.read(reinterpret_cast<char*>(fs.frames[j].data()), std::streamsize(frame_bytes));
        if (in.gcount() != std::streamsize(frame_bytes)) {
            const std::size_t expected = kFrameHeaderSize + std::size_t(frame_count) * frame_bytes;
            const std::size_t actual =
                kFrameHeaderSize + std::size_t(j) * frame_bytes + std::size_t(in.gcount());
            throw DataError("truncated frame file: expected " + std::to_string(expected) +
                            " bytes, got " + std::to_string(actual));
        }
    }
    return fs;
}

void write_frames(const std::filesystem::path& path, const FrameSequence& frames) {
    frames.validate();
    std::string header(kFrameMagic, sizeof(kFrameMagic));
    append_u32_le(header, frames.width);
    append_u32_le(header, frames.height);
    append_u32_le(header, frames.fps);
    append_u32_le(header, std::uint32_t(frames.frames.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write frame file: " + path.string());
    out.write(header.data(), std::streamsize(header.size()));
    for (const auto& f : frames.frames) {
        out.write(reinterpret_cast<const char*>(f.data()), std::streamsize(f.size()));
    }
    if (!out) throw DataError("short write: " + path.string());
}

// ---- CSV / dataset directory ------------------------------------------------

namespace {

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) out.push_back(line);
        start = nl + 1;
    }
    return out;
}

}  // namespace

PpgRecording load_ppg_csv(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    const auto lines = lines_of(text);
    if (lines.empty() || lines[0] != "frame_idx,t_sec,r_mean,g_mean,b_mean") {
        throw DataError("bad PPG CSV header in " + path.string());
    }
    PpgRecording rec;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cols = split_csv(lines[i]);
        if (cols.size() != 5) throw DataError("bad PPG CSV row in " + path.string());
        rec.channel_means[0].push_back(parse_double(cols[2]));
        rec.channel_means[1].push_back(parse_double(cols[3]));
        rec.channel_means[2].push_back(parse_double(cols[4]));
    }
    rec.validate();
    return rec;
}

void save_ppg_csv(const std::filesystem::path& path, const PpgRecording& rec) {
    std::string out = "frame_idx,t_sec,r_mean,g_mean,b_mean\n";
    const std::size_t n = rec.length();
    for (std::size_t j = 0; j < n; ++j) {
        out += std::to_string(j);
        out += ',';
        out += format_double(double(j) / rec.fps);
        for (int c = 0; c < 3; ++c) {
            out += ',';
            out += format_double(rec.channel_means[c][j]);
        }
        out += '\n';
    }
    write_text_file(path, out);
}

GroundTruthSeries load_spo2_csv(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    const auto lines = lines_of(text);
    if (lines.empty() || lines[0] != "t_sec,spo2") {
        throw DataError("bad SpO2 CSV header in " + path.string());
    }
    GroundTruthSeries gt;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cols = split_csv(lines[i]);
        if (cols.size() != 2) throw DataError("bad SpO2 CSV row in " + path.string());
        gt.t_sec.push_back(parse_double(cols[0]));
        gt.spo2.push_back(parse_double(cols[1]));
    }
    gt.validate();
    return gt;
}

void save_spo2_csv(const std::filesystem::path& path, const GroundTruthSeries& gt) {
    std::string out = "t_sec,spo2\n";
    for (std::size_t i = 0; i < gt.size(); ++i) {
        out += format_double(gt.t_sec[i]);
        out += ',';
        out += format_double(gt.spo2[i]);
        out += '\n';
    }
    write_text_file(path, out);
}

std::set<int> Dataset::subject_ids() const {
    std::set<int> ids;
    for (const auto& r : recordings) ids.insert(r.ppg.subject_id);
    return ids;
}

Dataset load_dataset(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());

    std::vector<fs::path> subject_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("subject_", 0) == 0) {
            subject_dirs.push_back(entry.path());
        }
    }
    std::sort(subject_dirs.begin(), subject_dirs.end());
    if (subject_dirs.empty()) throw DataError("no subject_<id> directories under " + root.string());

    Dataset ds;
    for (const auto& dir : subject_dirs) {
        const std::string id_str = dir.filename().string().substr(8);
        const int subject_id = int(parse_long(id_str));
        for (const char* hand_name : {"left", "right"}) {
            const fs::path hand_dir = dir / hand_name;
            if (!fs::is_directory(hand_dir)) continue;

            const json meta = json::parse(read_text_file(hand_dir / "meta.json"));
            HandRecording rec;
            rec.ppg = load_ppg_csv(hand_dir / "ppg.csv");
            rec.ppg.fps = meta.at("fps").get<double>();
            const auto gains = meta.at("gains").get<std::vector<double>>();
            if (gains.size() != 3) throw DataError("meta.json gains must have 3 entries");
            rec.ppg.gains = {gains[0], gains[1], gains[2]};
            rec.ppg.hand = hand_from_string(hand_name);
            rec.ppg.subject_id = subject_id;
            if (meta.contains("tissue_flags")) {
                rec.ppg.tissue_flags = meta.at("tissue_flags").get<std::vector<std::string>>();
            }
            rec.ground_truth = load_spo2_csv(hand_dir / "spo2.csv");
            ds.recordings.push_back(std::move(rec));
        }
    }
    if (ds.recordings.empty()) throw DataError("dataset has no hand recordings: " + root.string());
    return ds;
}

void save_hand_recording(const std::filesystem::path& root, const HandRecording& rec,
                         const CaptureMeta& meta, std::uint64_t stream_seed) {
    namespace fs = std::filesystem;
    const fs::path dir =
        root / ("subject_" + std::to_string(meta.subject_id)) / to_string(meta.hand);
    fs::create_directories(dir);
    save_ppg_csv(dir / "ppg.csv", rec.ppg);
    save_spo2_csv(dir / "spo2.csv", rec.ground_truth);

    json j;
    j["fps"] = meta.fps;
    j["gains"] = meta.gains;
    j["tissue_flags"] = meta.tissue_flags;
    j["skin_tone"] = meta.skin_tone;
    j["gender"] = meta.gender;
    j["notes"] = meta.notes;
    j["stream_seed"] = stream_seed;
    write_text_file(dir / "meta.json", j.dump(2) + "\n");
}

}  // namespace camox::ingest
