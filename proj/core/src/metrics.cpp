#include "clpscf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <json.hpp>

namespace clpscf {

namespace {

struct RocGroup {
    int64_t normals = 0;
    int64_t anomalies = 0;
};

// Records sorted by descending score, grouped by tied value. Walking
// the groups yields the ROC vertices in threshold order.
std::vector<RocGroup> roc_groups(std::span<const double> normal_scores,
                                 std::span<const double> anomalous_scores) {
    std::vector<std::pair<double, bool>> all;
    all.reserve(normal_scores.size() + anomalous_scores.size());
    for (double s : normal_scores) {
        if (!std::isfinite(s)) throw std::invalid_argument("metrics: non-finite score");
        all.emplace_back(s, false);
    }
    for (double s : anomalous_scores) {
        if (!std::isfinite(s)) throw std::invalid_argument("metrics: non-finite score");
        all.emplace_back(s, true);
    }
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    std::vector<RocGroup> groups;
    size_t i = 0;
    while (i < all.size()) {
        size_t j = i;
        RocGroup g;
        while (j < all.size() && all[j].first == all[i].first) {
            if (all[j].second) {
                ++g.anomalies;
            } else {
                ++g.normals;
            }
            ++j;
        }
        groups.push_back(g);
        i = j;
    }
    return groups;
}

void require_both_classes(size_t n_norm, size_t n_anom) {
    if (n_norm == 0 || n_anom == 0) {
        throw std::invalid_argument("AUC undefined: need at least one normal and one anomalous record");
    }
}

}  // namespace

double auc(std::span<const double> normal_scores, std::span<const double> anomalous_scores) {
    require_both_classes(normal_scores.size(), anomalous_scores.size());
    const auto groups = roc_groups(normal_scores, anomalous_scores);
    // Trapezoid area in integer units of 1 / (2 * n_anom * n_norm):
    // a tied group spanning (gn, ga) contributes gn * (2*cum_anom + ga).
    int64_t units = 0;
    int64_t cum_anom = 0;
    for (const auto& g : groups) {
        units += g.normals * (2 * cum_anom + g.anomalies);
        cum_anom += g.anomalies;
    }
    return static_cast<double>(units) /
           (2.0 * static_cast<double>(anomalous_scores.size()) *
            static_cast<double>(normal_scores.size()));
}

double pauc(std::span<const double> normal_scores, std::span<const double> anomalous_scores,
            double p) {
    if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("pauc: p must lie in (0, 1]");
    require_both_classes(normal_scores.size(), anomalous_scores.size());
    const auto groups = roc_groups(normal_scores, anomalous_scores);

    const double n_norm = static_cast<double>(normal_scores.size());
    const double n_anom = static_cast<double>(anomalous_scores.size());
    const double x_cut = p * n_norm;  // cut position in FPR units of 1/n_norm

    int64_t units = 0;  // exact area in units of 1 / (2 * n_anom * n_norm)
    double partial = 0.0;
    int64_t x = 0, y = 0;
    for (const auto& g : groups) {
        const int64_t x2 = x + g.normals;
        const int64_t y2 = y + g.anomalies;
        if (g.normals > 0) {
            if (static_cast<double>(x2) <= x_cut) {
                units += g.normals * (y + y2);
            } else if (static_cast<double>(x) < x_cut) {
                // Segment crossing the cut: interpolate the curve at x_cut.
                const double frac = (x_cut - static_cast<double>(x)) / static_cast<double>(g.normals);
                const double y_cut = static_cast<double>(y) + frac * static_cast<double>(g.anomalies);
                partial += (x_cut - static_cast<double>(x)) * (static_cast<double>(y) + y_cut) /
                           (2.0 * n_anom * n_norm);
            }
        }
        x = x2;
        y = y2;
    }
    const double area = static_cast<double>(units) / (2.0 * n_anom * n_norm) + partial;
    return area / p;
}

namespace {

std::pair<std::vector<double>, std::vector<double>> split_scores(
    const std::vector<AnomalyRecord>& records) {
    std::vector<double> normals, anoms;
    for (const auto& r : records) {
        (r.anomalous ? anoms : normals).push_back(r.score);
    }
    return {std::move(normals), std::move(anoms)};
}

}  // namespace

double auc(const std::vector<AnomalyRecord>& records) {
    auto [normals, anoms] = split_scores(records);
    return auc(normals, anoms);
}

double pauc(const std::vector<AnomalyRecord>& records, double p) {
    auto [normals, anoms] = split_scores(records);
    return pauc(normals, anoms, p);
}

EvalReport evaluate_records(const std::vector<AnomalyRecord>& records, double p) {
    if (records.empty()) throw std::invalid_argument("evaluate_records: no records");
    EvalReport report;
    report.p = p;

    std::map<std::pair<std::string, int>, std::vector<AnomalyRecord>> by_id;
    for (const auto& r : records) {
        by_id[{r.machine_type, r.machine_id}].push_back(r);
    }

    std::map<std::string, std::vector<std::pair<double, double>>> type_values;  // (auc, pauc)
    for (const auto& [key, recs] : by_id) {
        auto [normals, anoms] = split_scores(recs);
        if (normals.empty() || anoms.empty()) {
            report.warnings.push_back("machine " + key.first + ":" + std::to_string(key.second) +
                                      " has single-class truth; excluded from aggregation");
            continue;
        }
        const double id_auc = auc(normals, anoms);
        const double id_pauc = pauc(normals, anoms, p);
        report.per_id_auc[key] = id_auc;
        report.per_id_pauc[key] = id_pauc;
        type_values[key.first].emplace_back(id_auc, id_pauc);
    }
    if (type_values.empty()) {
        throw std::invalid_argument("evaluate_records: no machine ID with both classes present");
    }

    double sum_auc = 0.0, sum_pauc = 0.0, sum_mauc = 0.0;
    for (const auto& [type, vals] : type_values) {
        TypeMetrics tm;
        double mn = 1.0;
        for (const auto& [a, pa] : vals) {
            tm.auc += a;
            tm.pauc += pa;
            mn = std::min(mn, a);
        }
        tm.auc /= static_cast<double>(vals.size());
        tm.pauc /= static_cast<double>(vals.size());
        tm.mauc = mn;
        report.per_type[type] = tm;
        sum_auc += tm.auc;
        sum_pauc += tm.pauc;
        sum_mauc += tm.mauc;
    }
    const double nt = static_cast<double>(report.per_type.size());
    report.averages = {sum_auc / nt, sum_pauc / nt, sum_mauc / nt};
    return report;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json per_id = nlohmann::json::array();
    for (const auto& [key, v] : report.per_id_auc) {
        per_id.push_back({{"machine_type", key.first},
                          {"machine_id", key.second},
                          {"auc", v},
                          {"pauc", report.per_id_pauc.at(key)}});
    }
    nlohmann::json per_type = nlohmann::json::object();
    for (const auto& [type, tm] : report.per_type) {
        per_type[type] = {{"auc", tm.auc}, {"pauc", tm.pauc}, {"mauc", tm.mauc}};
    }
    nlohmann::json j{{"p", report.p},
                     {"per_id", per_id},
                     {"per_type", per_type},
                     {"averages",
                      {{"auc", report.averages.auc},
                       {"pauc", report.averages.pauc},
                       {"mauc", report.averages.mauc}}},
                     {"warnings", report.warnings}};
    return j.dump(2);
}

EvalReport report_from_json(const std::string& json_text) {
    const nlohmann::json j = nlohmann::json::parse(json_text);
    EvalReport report;
    report.p = j.at("p").get<double>();
    for (const auto& e : j.at("per_id")) {
        const std::pair<std::string, int> key{e.at("machine_type").get<std::string>(),
                                              e.at("machine_id").get<int>()};
        report.per_id_auc[key] = e.at("auc").get<double>();
        report.per_id_pauc[key] = e.at("pauc").get<double>();
    }
    for (const auto& [type, tm] : j.at("per_type").items()) {
        report.per_type[type] = {tm.at("auc").get<double>(), tm.at("pauc").get<double>(),
                                 tm.at("mauc").get<double>()};
    }
    report.averages = {j.at("averages").at("auc").get<double>(),
                       j.at("averages").at("pauc").get<double>(),
                       j.at("averages").at("mauc").get<double>()};
    if (j.contains("warnings")) {
        report.warnings = j.at("warnings").get<std::vector<std::string>>();
    }
    return report;
}

std::string report_to_text(const EvalReport& report) {
    char buf[256];
    std::string out;
    out += "Machine type         AUC      pAUC   (p = " + std::to_string(report.p) + ")\n";
    for (const auto& [type, tm] : report.per_type) {
        std::snprintf(buf, sizeof(buf), "%-16s %7.4f   %7.4f\n", type.c_str(), tm.auc, tm.pauc);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%-16s %7.4f   %7.4f\n", "Average", report.averages.auc,
                  report.averages.pauc);
    out += buf;

    out += "\nMachine type         mAUC\n";
    for (const auto& [type, tm] : report.per_type) {
        std::snprintf(buf, sizeof(buf), "%-16s %7.4f\n", type.c_str(), tm.mauc);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%-16s %7.4f\n", "Average", report.averages.mauc);
    out += buf;

    out += "\nPer machine ID       AUC      pAUC\n";
    for (const auto& [key, v] : report.per_id_auc) {
        std::snprintf(buf, sizeof(buf), "%-13s id %02d %7.4f   %7.4f\n", key.first.c_str(),
                      key.second, v, report.per_id_pauc.at(key));
        out += buf;
    }
    for (const auto& w : report.warnings) out += "warning: " + w + "\n";
    return out;
}

}  // namespace clpscf
