#include "camox/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "camox/io_util.hpp"

namespace camox::metrics {

using nlohmann::json;

PredictionSet load_predictions_csv(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    PredictionSet ps;
    std::size_t start = 0;
    bool first = true;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        std::string_view line(text.data() + start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        start = nl + 1;
        if (line.empty()) continue;
        if (first) {
            if (line != "split_id,subject_id,hand,t_sec,ground_truth,prediction") {
                throw DataError("bad predictions CSV header in " + path.string());
            }
            first = false;
            continue;
        }
        const auto cols = split_csv(line);
        if (cols.size() != 6) throw DataError("bad predictions CSV row in " + path.string());
        PredictionRow r;
        r.split_id = int(parse_long(cols[0]));
        r.subject_id = int(parse_long(cols[1]));
        r.hand = hand_from_string(std::string(cols[2]));
        r.t_sec = parse_double(cols[3]);
        r.ground_truth = parse_double(cols[4]);
        r.prediction = parse_double(cols[5]);
        ps.rows.push_back(r);
    }
    if (first) throw DataError("empty predictions CSV: " + path.string());
    return ps;
}

void save_predictions_csv(const std::filesystem::path& path, const PredictionSet& ps) {
    std::string out = "split_id,subject_id,hand,t_sec,ground_truth,prediction\n";
    for (const PredictionRow& r : ps.rows) {
        out += std::to_string(r.split_id);
        out += ',';
        out += std::to_string(r.subject_id);
        out += ',';
        out += to_string(r.hand);
        out += ',';
        out += format_double(r.t_sec);
        out += ',';
        out += format_double(r.ground_truth);
        out += ',';
        out += format_double(r.prediction);
        out += '\n';
    }
    write_text_file(path, out);
}

double mae(const PredictionSet& ps) {
    if (ps.rows.empty()) throw ValidationError("mae of an empty prediction set");
    double acc = 0.0;
    for (const PredictionRow& r : ps.rows) acc += std::fabs(r.prediction - r.ground_truth);
    return acc / double(ps.rows.size());
}

BlandAltman bland_altman(const PredictionSet& ps) {
    if (ps.rows.empty()) throw ValidationError("bland_altman of an empty prediction set");
    BlandAltman ba;
    ba.points.reserve(ps.rows.size());
    double sum = 0.0;
    for (const PredictionRow& r : ps.rows) {
        const double diff = r.prediction - r.ground_truth;
        ba.points.emplace_back((r.prediction + r.ground_truth) / 2.0, diff);
        sum += diff;
    }
    const double n = double(ps.rows.size());
    ba.mean_diff = sum / n;
    double sq = 0.0;
    for (const auto& [mean_pair, diff] : ba.points) {
        const double d = diff - ba.mean_diff;
        sq += d * d;
    }
    ba.loa_halfwidth = 1.96 * std::sqrt(sq / n);  // population convention
    return ba;
}

ConfusionCounts classify(const PredictionSet& ps, double classification_threshold,
                         double decision_boundary) {
    if (ps.rows.empty()) throw ValidationError("classify of an empty prediction set");
    ConfusionCounts c;
    c.classification_threshold = classification_threshold;
    c.decision_boundary = decision_boundary;
    for (const PredictionRow& r : ps.rows) {
        const bool truth_pos = r.ground_truth < classification_threshold;
        const bool call_pos = r.prediction < decision_boundary;
        if (truth_pos && call_pos) ++c.tp;
        else if (!truth_pos && call_pos) ++c.fp;
        else if (!truth_pos && !call_pos) ++c.tn;
        else ++c.fn;
    }
    return c;
}

std::vector<double> default_boundaries() {
    std::vector<double> b;
    for (int half = 140; half <= 200; ++half) b.push_back(double(half) / 2.0);
    return b;
}

namespace {

// Rank-based AUC (Mann-Whitney): probability that a positive case receives a
// lower predicted value than a negative case, ties counted half. Equals the
// trapezoid over the complete ROC step curve, so it is exact for perfect
// separators and invariant under strictly increasing transforms.
double rank_auc(const PredictionSet& ps, double classification_threshold) {
    std::vector<std::pair<double, bool>> scored;  // (prediction, truth_pos)
    scored.reserve(ps.rows.size());
    std::size_t pos = 0;
    for (const PredictionRow& r : ps.rows) {
        const bool p = r.ground_truth < classification_threshold;
        scored.emplace_back(r.prediction, p);
        pos += p ? 1 : 0;
    }
    const std::size_t neg = scored.size() - pos;
    if (pos == 0 || neg == 0) {
        throw ValidationError("roc: only one class present at threshold " +
                              format_double(classification_threshold));
    }
    // ascending prediction = descending "positive-ness"
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < scored.size()) {
        std::size_t j = i;
        while (j < scored.size() && scored[j].first == scored[i].first) ++j;
        const double avg_rank = (double(i + 1) + double(j)) / 2.0;  // 1-based
        for (std::size_t t = i; t < j; ++t) {
            if (scored[t].second) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    // low rank (low prediction) should score high for positives
    const double u = double(pos) * double(neg) + double(pos) * (double(pos) + 1.0) / 2.0 -
                     rank_sum_pos;
    return u / (double(pos) * double(neg));
}

}  // namespace

RocCurve roc_sweep(const PredictionSet& ps, double classification_threshold,
                   const std::vector<double>& boundaries) {
    if (ps.rows.empty()) throw ValidationError("roc_sweep of an empty prediction set");
    if (boundaries.empty()) throw ValidationError("roc_sweep needs at least one boundary");

    std::vector<double> pos_preds, neg_preds;
    for (const PredictionRow& r : ps.rows) {
        (r.ground_truth < classification_threshold ? pos_preds : neg_preds).push_back(r.prediction);
    }
    if (pos_preds.empty() || neg_preds.empty()) {
        throw ValidationError("roc: only one class present at threshold " +
                              format_double(classification_threshold));
    }
    std::sort(pos_preds.begin(), pos_preds.end());
    std::sort(neg_preds.begin(), neg_preds.end());

    std::vector<double> sorted_boundaries = boundaries;
    std::sort(sorted_boundaries.begin(), sorted_boundaries.end());

    RocCurve curve;
    for (double b : sorted_boundaries) {
        const auto below = [b](const std::vector<double>& v) {
            return double(std::lower_bound(v.begin(), v.end(), b) - v.begin());
        };
        RocPoint p;
        p.boundary = b;
        p.tpr = below(pos_preds) / double(pos_preds.size());
        p.fpr = below(neg_preds) / double(neg_preds.size());
        curve.points.push_back(p);
    }

    double best = std::numeric_limits<double>::infinity();
    for (const RocPoint& p : curve.points) {
        const double d2 = p.fpr * p.fpr + (1.0 - p.tpr) * (1.0 - p.tpr);
        if (d2 < best) {
            best = d2;
            curve.best_boundary = p.boundary;
        }
    }
    curve.auc = rank_auc(ps, classification_threshold);
    return curve;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ValidationError("spearman needs two equal series of length >= 2");
    }
    const auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        std::size_t i = 0;
        while (i < idx.size()) {
            std::size_t j = i;
            while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
            const double avg = (double(i + 1) + double(j)) / 2.0;
            for (std::size_t t = i; t < j; ++t) r[idx[t]] = avg;
            i = j;
        }
        return r;
    };
    const std::vector<double> rx = ranks(x), ry = ranks(y);
    const double n = double(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double cov = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if (vx == 0.0 || vy == 0.0) return 0.0;
    return cov / std::sqrt(vx * vy);
}

namespace {

PredictionSet subset(const PredictionSet& ps, int subject_id, std::optional<Hand> hand = {}) {
    PredictionSet out;
    for (const PredictionRow& r : ps.rows) {
        if (r.subject_id == subject_id && (!hand || r.hand == *hand)) out.rows.push_back(r);
    }
    return out;
}

json ba_json(const BlandAltman& ba) {
    return json{{"mean_diff", ba.mean_diff}, {"loa_halfwidth", ba.loa_halfwidth}};
}

json confusion_json(const ConfusionCounts& c) {
    json j{{"boundary", c.decision_boundary},
           {"tp", c.tp},
           {"fp", c.fp},
           {"tn", c.tn},
           {"fn", c.fn}};
    const auto sens = c.sensitivity();
    const auto spec = c.specificity();
    j["sensitivity"] = sens ? json(*sens) : json(nullptr);
    j["specificity"] = spec ? json(*spec) : json(nullptr);
    return j;
}

}  // namespace

json report(const PredictionSet& ps, const ReportOptions& opts) {
    if (ps.rows.empty()) throw ValidationError("report of an empty prediction set");

    std::vector<int> subjects;
    std::vector<std::pair<int, Hand>> hand_subjects;
    for (const PredictionRow& r : ps.rows) {
        if (std::find(subjects.begin(), subjects.end(), r.subject_id) == subjects.end()) {
            subjects.push_back(r.subject_id);
        }
        const auto hs = std::make_pair(r.subject_id, r.hand);
        if (std::find(hand_subjects.begin(), hand_subjects.end(), hs) == hand_subjects.end()) {
            hand_subjects.push_back(hs);
        }
    }
    std::sort(subjects.begin(), subjects.end());
    std::sort(hand_subjects.begin(), hand_subjects.end(),
              [](const auto& a, const auto& b) {
                  return a.first != b.first ? a.first < b.first : int(a.second) < int(b.second);
              });

    json rep;
    rep["schema_version"] = 1;
    rep["config"] = opts.config_echo.is_null() ? json::object() : opts.config_echo;
    rep["n_rows"] = ps.rows.size();

    // per person-subject and per hand-subject statistics
    double subject_mae_sum = 0.0;
    json per_subject = json::array();
    for (int id : subjects) {
        const PredictionSet sub = subset(ps, id);
        const double m = mae(sub);
        subject_mae_sum += m;
        per_subject.push_back({{"subject_id", id},
                               {"n", sub.rows.size()},
                               {"mae", m},
                               {"bland_altman", ba_json(bland_altman(sub))}});
    }
    rep["per_subject"] = per_subject;

    json per_hand = json::array();
    for (const auto& [id, hand] : hand_subjects) {
        const PredictionSet sub = subset(ps, id, hand);
        per_hand.push_back({{"subject_id", id},
                            {"hand", to_string(hand)},
                            {"n", sub.rows.size()},
                            {"mae", mae(sub)},
                            {"bland_altman", ba_json(bland_altman(sub))}});
    }
    rep["per_hand"] = per_hand;

    rep["aggregate"] = {{"mae_subject_mean", subject_mae_sum / double(subjects.size())},
                        {"mae_pooled", mae(ps)},
                        {"bland_altman", ba_json(bland_altman(ps))}};

    json thresholds = json::array();
    for (double thr : opts.thresholds) {
        json entry;
        entry["threshold"] = thr;
        entry["at_threshold_boundary"] = confusion_json(classify(ps, thr, thr));
        try {
            const RocCurve roc = roc_sweep(ps, thr);
            json points = json::array();
            for (const RocPoint& p : roc.points) {
                points.push_back({p.boundary, p.fpr, p.tpr});
            }
            entry["roc"] = {{"auc", roc.auc},
                            {"best_boundary", roc.best_boundary},
                            {"points", points}};
            entry["at_best_boundary"] = confusion_json(classify(ps, thr, roc.best_boundary));

            json per_subj = json::array();
            double sens_sum = 0.0, spec_sum = 0.0;
            std::size_t sens_n = 0, spec_n = 0;
            for (int id : subjects) {
                const ConfusionCounts c = classify(subset(ps, id), thr, roc.best_boundary);
                json sj = confusion_json(c);
                sj["subject_id"] = id;
                per_subj.push_back(sj);
                if (const auto s = c.sensitivity()) {
                    sens_sum += *s;
                    ++sens_n;
                }
                if (const auto s = c.specificity()) {
                    spec_sum += *s;
                    ++spec_n;
                }
            }
            entry["per_subject"] = per_subj;
            entry["macro"] = {
                {"sensitivity_mean", sens_n ? json(sens_sum / double(sens_n)) : json(nullptr)},
                {"specificity_mean", spec_n ? json(spec_sum / double(spec_n)) : json(nullptr)}};
        } catch (const ValidationError& e) {
            entry["roc"] = nullptr;
            entry["roc_warning"] = e.what();
        }
        thresholds.push_back(entry);
    }
    rep["thresholds"] = thresholds;

    json ablation = json::array();
    for (const AblationRow& row : opts.ablation) {
        ablation.push_back({{"floor", row.floor}, {"mae", row.mae_subject_mean}});
    }
    rep["ablation"] = ablation;
    return rep;
}

void write_plot_csvs(const std::filesystem::path& dir, const PredictionSet& ps,
                     const json& rep) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::map<std::pair<int, std::string>, std::string> regressions;
    std::string ba_csv = "subject_id,hand,pair_mean,diff\n";
    for (const PredictionRow& r : ps.rows) {
        auto key = std::make_pair(r.subject_id, std::string(to_string(r.hand)));
        auto& body = regressions[key];
        if (body.empty()) body = "t_sec,ground_truth,prediction\n";
        body += format_double(r.t_sec);
        body += ',';
        body += format_double(r.ground_truth);
        body += ',';
        body += format_double(r.prediction);
        body += '\n';

        ba_csv += std::to_string(r.subject_id);
        ba_csv += ',';
        ba_csv += to_string(r.hand);
        ba_csv += ',';
        ba_csv += format_double((r.prediction + r.ground_truth) / 2.0);
        ba_csv += ',';
        ba_csv += format_double(r.prediction - r.ground_truth);
        ba_csv += '\n';
    }
    for (const auto& [key, body] : regressions) {
        write_text_file(
            dir / ("regression_s" + std::to_string(key.first) + "_" + key.second + ".csv"), body);
    }
    write_text_file(dir / "bland_altman.csv", ba_csv);

    for (const auto& entry : rep.at("thresholds")) {
        if (entry.at("roc").is_null()) continue;
        const double thr = entry.at("threshold").get<double>();
        std::string csv = "scope,boundary,fpr,tpr\n";
        for (const auto& p : entry.at("roc").at("points")) {
            csv += "all," + format_double(p[0].get<double>()) + ',' +
                   format_double(p[1].get<double>()) + ',' + format_double(p[2].get<double>()) +
                   '\n';
        }
        // per-subject curves; subjects with a single class at this threshold are skipped
        for (const auto& subj : rep.at("per_subject")) {
            const int id = subj.at("subject_id").get<int>();
            PredictionSet sub;
            for (const PredictionRow& r : ps.rows) {
                if (r.subject_id == id) sub.rows.push_back(r);
            }
            try {
                const RocCurve rc = roc_sweep(sub, thr);
                for (const RocPoint& p : rc.points) {
                    csv += "s" + std::to_string(id) + ',' + format_double(p.boundary) + ',' +
                           format_double(p.fpr) + ',' + format_double(p.tpr) + '\n';
                }
            } catch (const ValidationError&) {
                continue;
            }
        }
        write_text_file(dir / ("roc_" + format_double(thr) + ".csv"), csv);
    }

    if (!rep.at("ablation").empty()) {
        std::string csv = "floor,mae\n";
        for (const auto& row : rep.at("ablation")) {
            csv += format_double(row.at("floor").get<double>()) + ',' +
                   format_double(row.at("mae").get<double>()) + '\n';
        }
        write_text_file(dir / "ablation.csv", csv);
    }
}

}  // namespace camox::metrics
