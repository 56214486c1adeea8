#pragma once
// LOOCV orchestration: per-split standardization from training subjects
// only, the training loop with validation-based model selection, and
// prediction collection for the metrics stage.

#include <cstdint>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "camox/ingest.hpp"
#include "camox/metrics.hpp"
#include "camox/nn.hpp"

namespace camox::pipeline {

struct TrainConfig {
    double lr = 1e-5;
    int decay_epoch = 80;
    double decay_factor = 0.1;
    double l2 = 0.1;
    int epochs = 120;
    int batch_size = 64;
    std::uint64_t seed = 1234;
    double floor_spo2 = 70.0;
    std::set<int> exclude_subjects;
    bool clamp_predictions = false;
    int jobs = 1;
    nn::Arch arch;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
    int epoch = 0;
    double train_mse = 0.0;
    double train_total = 0.0;
    double val_mae = 0.0;
};

struct TrainedSplit {
    nn::Network net;  // snapshot with the lowest validation MAE
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val_mae = 0.0;
};

// Windows all recordings once (floor filter applied) and groups by subject.
struct SampleBank {
    std::vector<Sample> samples;

    static SampleBank build(const ingest::Dataset& ds, double floor_spo2);
};

struct SplitData {
    std::vector<Sample> train, val, test;
    ChannelStats stats;  // from training subjects' recordings only
};

SplitData materialize_split(const ingest::Dataset& ds, const SampleBank& bank,
                            const Split& split);

TrainedSplit train_split(const ingest::Dataset& ds, const Split& split,
                         const TrainConfig& config);

struct LoocvResult {
    metrics::PredictionSet predictions;  // every subject predicted by a model that never saw it
    std::vector<TrainedSplit> splits;    // ordered like the split plan
    SplitPlan plan;
};

LoocvResult run_loocv(const ingest::Dataset& ds, const TrainConfig& config);

// Retrain/evaluate with samples below each floor removed from train, val
// and test; records the per-subject-mean MAE per floor.
std::vector<metrics::AblationRow> ablation_run(const ingest::Dataset& ds,
                                               const TrainConfig& config,
                                               const std::vector<double>& floors);

}  // namespace camox::pipeline
