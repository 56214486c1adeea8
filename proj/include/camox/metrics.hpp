#pragma once
// Evaluation statistics over prediction sets: MAE, Bland-Altman agreement,
// threshold classification, ROC sweeps, and report assembly.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "camox/core.hpp"

namespace camox::metrics {

struct PredictionRow {
    int split_id = 0;
    int subject_id = 0;
    Hand hand = Hand::left;
    double t_sec = 0.0;
    double ground_truth = 0.0;
    double prediction = 0.0;
};

struct PredictionSet {
    std::vector<PredictionRow> rows;
};

// CSV: split_id,subject_id,hand,t_sec,ground_truth,prediction
PredictionSet load_predictions_csv(const std::filesystem::path& path);
void save_predictions_csv(const std::filesystem::path& path, const PredictionSet& ps);

double mae(const PredictionSet& ps);

struct BlandAltman {
    double mean_diff = 0.0;      // mean(prediction - ground_truth)
    double loa_halfwidth = 0.0;  // 1.96 * population std of the differences
    std::vector<std::pair<double, double>> points;  // (pair mean, difference)
};

BlandAltman bland_altman(const PredictionSet& ps);

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double classification_threshold = 0.0;  // positive truth: ground_truth < threshold
    double decision_boundary = 0.0;         // positive call: prediction < boundary

    std::optional<double> sensitivity() const {
        return tp + fn == 0 ? std::nullopt : std::optional(double(tp) / double(tp + fn));
    }
    std::optional<double> specificity() const {
        return tn + fp == 0 ? std::nullopt : std::optional(double(tn) / double(tn + fp));
    }
};

ConfusionCounts classify(const PredictionSet& ps, double classification_threshold,
                         double decision_boundary);

struct RocPoint {
    double boundary = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // one per swept boundary, sorted by boundary
    double auc = 0.0;              // rank-based (exact trapezoid over the full step curve)
    double best_boundary = 0.0;    // swept point nearest (0, 1)
};

// Default sweep: boundaries 70..100 in 0.5 steps. Throws ValidationError
// when only one class is present at the classification threshold.
std::vector<double> default_boundaries();
RocCurve roc_sweep(const PredictionSet& ps, double classification_threshold,
                   const std::vector<double>& boundaries = default_boundaries());

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct AblationRow {
    double floor = 0.0;
    double mae_subject_mean = 0.0;
};

struct ReportOptions {
    std::vector<double> thresholds{95.0, 90.0, 85.0};
    std::vector<AblationRow> ablation;  // empty -> section omitted
    nlohmann::json config_echo;
};

// Versioned JSON document with per-subject and aggregate MAE / Bland-Altman,
// confusion tables per threshold, ROC data, and the ablation table.
nlohmann::json report(const PredictionSet& ps, const ReportOptions& opts);

// regression_<subject>.csv, bland_altman.csv, roc_<threshold>.csv, ablation.csv
void write_plot_csvs(const std::filesystem::path& dir, const PredictionSet& ps,
                     const nlohmann::json& rep);

}  // namespace camox::metrics
