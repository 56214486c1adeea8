#pragma once
// Batch entry points behind the CLI subcommands. Kept out of main() so tests
// can drive them directly; each returns a process exit code.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace camox::commands {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;  // usage / validation / precondition
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 4;

struct SynthOptions {
    std::optional<std::filesystem::path> spec_path;
    std::filesystem::path out_dir;
    std::uint64_t seed = 42;
};

struct ExtractOptions {
    std::filesystem::path frames_path;
    std::filesystem::path out_csv;
};

struct TrainOptions {
    std::filesystem::path dataset_dir;  // empty -> $CAMOX_DATA_DIR
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> config_path;
    // flag overrides on top of the config file
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
    std::optional<int> batch_size;
    std::optional<int> jobs;
    std::optional<double> lr;
    std::optional<double> l2;
    std::optional<bool> clamp_predictions;
    std::vector<int> exclude_subjects;
    std::vector<double> floors;  // non-empty -> data-ablation sweep
};

struct ReportOptions {
    std::filesystem::path predictions_path;
    std::filesystem::path out_dir;
    std::vector<double> thresholds{95.0, 90.0, 85.0};
};

int cmd_synth(const SynthOptions& opts);
int cmd_extract(const ExtractOptions& opts);
int cmd_train(const TrainOptions& opts);
int cmd_report(const ReportOptions& opts);

}  // namespace camox::commands
