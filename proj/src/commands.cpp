#include "camox/commands.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>

#include <nlohmann/json.hpp>

#include "camox/io_util.hpp"
#include "camox/manifest.hpp"
#include "camox/metrics.hpp"
#include "camox/pipeline.hpp"
#include "camox/synth.hpp"

namespace camox::commands {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kExitInternal;
    }
}

manifest::Artifact artifact_of(const fs::path& out_dir, const fs::path& file) {
    return {fs::relative(file, out_dir).generic_string(), manifest::hash_file(file)};
}

}  // namespace

int cmd_synth(const SynthOptions& opts) {
    return guarded([&] {
        synth::StudySpec spec;
        if (opts.spec_path) {
            spec = synth::study_spec_from_json(json::parse(read_text_file(*opts.spec_path)));
        } else {
            spec = synth::default_study_spec();
        }
        synth::generate_study(opts.out_dir, spec, opts.seed);

        // label histogram over the generated ground truth
        const ingest::Dataset ds = ingest::load_dataset(opts.out_dir);
        std::size_t n_total = 0;
        std::size_t bin_65_80 = 0, bin_80_90 = 0, bin_90_100 = 0, bin_below = 0;
        for (const auto& rec : ds.recordings) {
            for (double s : rec.ground_truth.spo2) {
                ++n_total;
                if (s < 65.0) ++bin_below;
                else if (s < 80.0) ++bin_65_80;
                else if (s < 90.0) ++bin_80_90;
                else ++bin_90_100;
            }
        }
        std::printf("generated %d subjects (%zu hand recordings) under %s\n", spec.n_subjects,
                    ds.recordings.size(), opts.out_dir.string().c_str());
        std::printf("label histogram: <65: %zu  65-80: %zu  80-90: %zu  90-100: %zu  (total %zu)\n",
                    bin_below, bin_65_80, bin_80_90, bin_90_100, n_total);

        manifest::RunManifest m;
        m.command = "synth";
        m.config = synth::study_spec_to_json(spec);
        m.dataset_hash = manifest::hash_tree(opts.out_dir);
        m.seed = opts.seed;
        m.created_utc = utc_now();
        manifest::write(opts.out_dir / "manifest.json", m);
        return kExitOk;
    });
}

int cmd_extract(const ExtractOptions& opts) {
    return guarded([&] {
        FrameSequence frames;
        try {
            frames = ingest::read_frames(opts.frames_path);
        } catch (const DataError& e) {
            // malformed input violates the command precondition
            throw ValidationError(e.what());
        }
        ingest::CaptureMeta meta;
        meta.fps = double(frames.fps);
        const PpgRecording rec = ingest::extract_ppg(frames, meta);
        ingest::save_ppg_csv(opts.out_csv, rec);
        std::printf("extracted %zu frames -> %s\n", rec.length(), opts.out_csv.string().c_str());
        return kExitOk;
    });
}

namespace {

pipeline::TrainConfig resolve_train_config(const TrainOptions& opts) {
    pipeline::TrainConfig cfg;
    if (opts.config_path) {
        cfg = pipeline::TrainConfig::from_json(json::parse(read_text_file(*opts.config_path)));
    }
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.epochs) cfg.epochs = *opts.epochs;
    if (opts.batch_size) cfg.batch_size = *opts.batch_size;
    if (opts.jobs) cfg.jobs = *opts.jobs;
    if (opts.lr) cfg.lr = *opts.lr;
    if (opts.l2) cfg.l2 = *opts.l2;
    if (opts.clamp_predictions) cfg.clamp_predictions = *opts.clamp_predictions;
    for (int id : opts.exclude_subjects) cfg.exclude_subjects.insert(id);
    cfg.validate();
    return cfg;
}

fs::path resolve_dataset_dir(const TrainOptions& opts) {
    if (!opts.dataset_dir.empty()) return opts.dataset_dir;
    const char* env = std::getenv("CAMOX_DATA_DIR");
    if (env != nullptr && *env != '\0') return fs::path(env);
    throw ValidationError("no dataset directory given and CAMOX_DATA_DIR is not set");
}

}  // namespace

int cmd_train(const TrainOptions& opts) {
    return guarded([&] {
        const pipeline::TrainConfig cfg = resolve_train_config(opts);
        const fs::path dataset_dir = resolve_dataset_dir(opts);
        const ingest::Dataset ds = ingest::load_dataset(dataset_dir);
        fs::create_directories(opts.out_dir);

        manifest::RunManifest m;
        m.config = cfg.to_json();
        m.dataset_hash = manifest::hash_tree(dataset_dir);
        m.seed = cfg.seed;
        m.created_utc = utc_now();

        if (!opts.floors.empty()) {
            m.command = "ablate";
            const auto rows = pipeline::ablation_run(ds, cfg, opts.floors);
            std::string csv = "floor,mae\n";
            for (const auto& row : rows) {
                csv += format_double(row.floor) + ',' + format_double(row.mae_subject_mean) + '\n';
                std::printf("floor %5.1f  ->  subject-mean MAE %.4f\n", row.floor,
                            row.mae_subject_mean);
            }
            const fs::path csv_path = opts.out_dir / "ablation.csv";
            write_text_file(csv_path, csv);
            m.artifacts.push_back(artifact_of(opts.out_dir, csv_path));
            manifest::write(opts.out_dir / "manifest.json", m);
            return kExitOk;
        }

        if (cfg.epochs == 0) {
            std::fprintf(stderr, "epochs=0: nothing to train\n");
            return kExitUsage;
        }

        m.command = "train";
        const pipeline::LoocvResult res = pipeline::run_loocv(ds, cfg);

        const fs::path pred_path = opts.out_dir / "predictions.csv";
        metrics::save_predictions_csv(pred_path, res.predictions);
        m.artifacts.push_back(artifact_of(opts.out_dir, pred_path));

        for (std::size_t i = 0; i < res.splits.size(); ++i) {
            const auto& split = res.plan.splits[i];
            const fs::path ckpt = opts.out_dir / ("split_" + std::to_string(i) + "_test_" +
                                                  std::to_string(split.test_subject) + ".ckpt");
            nn::save_checkpoint(ckpt, res.splits[i].net, cfg.to_json());
            m.artifacts.push_back(artifact_of(opts.out_dir, ckpt));
            const std::size_t rows_for_split =
                std::size_t(std::count_if(res.predictions.rows.begin(), res.predictions.rows.end(),
                                          [&](const auto& r) { return r.split_id == int(i); }));
            std::printf("split %zu (test subject %d): best epoch %d, val MAE %.4f, %zu test rows\n",
                        i, split.test_subject, res.splits[i].best_epoch,
                        res.splits[i].best_val_mae, rows_for_split);
        }
        std::printf("pooled test MAE: %.4f over %zu rows -> %s\n", metrics::mae(res.predictions),
                    res.predictions.rows.size(), pred_path.string().c_str());

        manifest::write(opts.out_dir / "manifest.json", m);
        return kExitOk;
    });
}

int cmd_report(const ReportOptions& opts) {
    return guarded([&] {
        const metrics::PredictionSet ps = metrics::load_predictions_csv(opts.predictions_path);
        fs::create_directories(opts.out_dir);

        metrics::ReportOptions ro;
        ro.thresholds = opts.thresholds;
        // artifacts embed the input's name, not its absolute path, so byte
        // output stays location-independent; the manifest carries the hash
        ro.config_echo = {{"predictions", opts.predictions_path.filename().string()},
                          {"thresholds", opts.thresholds}};
        const json rep = metrics::report(ps, ro);

        const fs::path report_path = opts.out_dir / "report.json";
        write_text_file(report_path, rep.dump(2) + "\n");
        metrics::write_plot_csvs(opts.out_dir, ps, rep);

        std::printf("MAE: subject-mean %.4f, pooled %.4f\n",
                    rep["aggregate"]["mae_subject_mean"].get<double>(),
                    rep["aggregate"]["mae_pooled"].get<double>());
        std::printf("Bland-Altman: mean diff %.4f, LOA halfwidth %.4f\n",
                    rep["aggregate"]["bland_altman"]["mean_diff"].get<double>(),
                    rep["aggregate"]["bland_altman"]["loa_halfwidth"].get<double>());
        for (const auto& entry : rep["thresholds"]) {
            const double thr = entry["threshold"].get<double>();
            const auto& at_thr = entry["at_threshold_boundary"];
            const auto pct = [](const json& v) {
                return v.is_null() ? -1.0 : v.get<double>() * 100.0;
            };
            if (entry["roc"].is_null()) {
                std::printf("threshold %.0f: sens %.0f%% spec %.0f%% (boundary %.0f); %s\n", thr,
                            pct(at_thr["sensitivity"]), pct(at_thr["specificity"]), thr,
                            entry["roc_warning"].get<std::string>().c_str());
                continue;
            }
            const auto& best = entry["at_best_boundary"];
            std::printf(
                "threshold %.0f: sens %.0f%% spec %.0f%% at boundary %.0f; "
                "sens %.0f%% spec %.0f%% at best boundary %.1f; AUC %.3f\n",
                thr, pct(at_thr["sensitivity"]), pct(at_thr["specificity"]), thr,
                pct(best["sensitivity"]), pct(best["specificity"]),
                entry["roc"]["best_boundary"].get<double>(), entry["roc"]["auc"].get<double>());
        }

        manifest::RunManifest m;
        m.command = "report";
        m.config = ro.config_echo;
        m.dataset_hash = manifest::hash_file(opts.predictions_path);
        m.created_utc = utc_now();
        m.artifacts.push_back(artifact_of(opts.out_dir, report_path));
        for (const auto& entry : fs::directory_iterator(opts.out_dir)) {
            if (!entry.is_regular_file()) continue;
            const std::string name = entry.path().filename().string();
            if (name.ends_with(".csv")) m.artifacts.push_back(artifact_of(opts.out_dir, entry.path()));
        }
        std::sort(m.artifacts.begin(), m.artifacts.end(),
                  [](const auto& a, const auto& b) { return a.path < b.path; });
        manifest::write(opts.out_dir / "manifest.json", m);
        return kExitOk;
    });
}

}  // namespace camox::commands
