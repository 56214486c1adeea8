// camox: camera-oximetry batch tool.
//   synth    generate a synthetic varied-FiO2 study dataset
//   extract  channel-mean PPG CSV from a raw CAMOX1 frame file
//   train    LOOCV training -> predictions CSV + per-split checkpoints
//   ablate   train alias sweeping ground-truth floor values
//   report   evaluation report (JSON + plot CSVs) from a predictions CSV

#include <CLI11.hpp>

#include "camox/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"smartphone camera oximetry pipeline"};
    app.require_subcommand(1);

    std::uint64_t seed = 42;
    int jobs = 1;
    std::string config_path;
    app.add_option("--seed", seed, "base random seed");
    app.add_option("--jobs", jobs, "parallel split workers");
    app.add_option("--config", config_path, "JSON config file (train/ablate)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic study dataset");
    std::string synth_spec, synth_out;
    synth->add_option("--spec", synth_spec, "study spec JSON (defaults to the 6-subject study)");
    synth->add_option("out_dir", synth_out, "output dataset directory")->required();

    // extract
    auto* extract = app.add_subcommand("extract", "PPG CSV from a CAMOX1 frame file");
    std::string frames_path, out_csv;
    extract->add_option("frames", frames_path, "CAMOX1 raw frame file")->required();
    extract->add_option("out_csv", out_csv, "output CSV path")->required();

    // train / ablate
    std::string dataset_dir, train_out;
    std::vector<int> exclude;
    std::vector<double> floors;
    int epochs = -1, batch_size = -1;
    double lr = -1.0, l2 = -1.0;
    bool clamp = false, seed_given = false, jobs_given = false;

    const auto add_train_options = [&](CLI::App* cmd, bool floors_required) {
        cmd->add_option("dataset", dataset_dir, "dataset root (or $CAMOX_DATA_DIR)");
        cmd->add_option("--out", train_out, "output directory")->required();
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--batch-size", batch_size, "minibatch size");
        cmd->add_option("--lr", lr, "learning rate");
        cmd->add_option("--l2", l2, "L2 penalty strength");
        cmd->add_flag("--clamp", clamp, "clamp predictions to [0, 100]");
        cmd->add_option("--exclude-subject", exclude, "subject ids to leave out entirely");
        auto* opt = cmd->add_option("--floors", floors, "ground-truth floors to sweep")
                        ->delimiter(',');
        if (floors_required) opt->required();
    };
    auto* train = app.add_subcommand("train", "LOOCV training and prediction dump");
    add_train_options(train, false);
    auto* ablate = app.add_subcommand("ablate", "retrain while sweeping label floors");
    add_train_options(ablate, true);

    // report
    auto* report = app.add_subcommand("report", "evaluation report from predictions CSV");
    std::string predictions_path, report_out;
    std::vector<double> thresholds{95.0, 90.0, 85.0};
    report->add_option("predictions", predictions_path, "predictions CSV")->required();
    report->add_option("--out", report_out, "output directory")->required();
    report->add_option("--thresholds", thresholds, "classification thresholds")->delimiter(',');

    try {
        app.parse(argc, argv);
        seed_given = app.count("--seed") > 0;
        jobs_given = app.count("--jobs") > 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return camox::commands::kExitUsage;
    }

    using namespace camox::commands;
    if (synth->parsed()) {
        SynthOptions o;
        if (!synth_spec.empty()) o.spec_path = synth_spec;
        o.out_dir = synth_out;
        o.seed = seed;
        return cmd_synth(o);
    }
    if (extract->parsed()) {
        return cmd_extract(ExtractOptions{frames_path, out_csv});
    }
    if (train->parsed() || ablate->parsed()) {
        CLI::App* cmd = train->parsed() ? train : ablate;
        TrainOptions o;
        o.dataset_dir = dataset_dir;
        o.out_dir = train_out;
        if (!config_path.empty()) o.config_path = config_path;
        if (seed_given) o.seed = seed;
        if (jobs_given) o.jobs = jobs;
        if (cmd->count("--epochs") > 0) o.epochs = epochs;
        if (cmd->count("--batch-size") > 0) o.batch_size = batch_size;
        if (cmd->count("--lr") > 0) o.lr = lr;
        if (cmd->count("--l2") > 0) o.l2 = l2;
        if (cmd->count("--clamp") > 0) o.clamp_predictions = clamp;
        o.exclude_subjects = exclude;
        o.floors = floors;
        return cmd_train(o);
    }
    if (report->parsed()) {
        ReportOptions o;
        o.predictions_path = predictions_path;
        o.out_dir = report_out;
        o.thresholds = thresholds;
        return cmd_report(o);
    }
    return kExitUsage;
}
