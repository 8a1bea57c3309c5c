#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace clpscf {

struct AnomalyRecord {
    std::string clip_ref;
    std::string machine_type;
    int machine_id = -1;
    double score = 0.0;  // higher = more anomalous
    bool anomalous = false;
};

// Mann-Whitney AUC: the fraction of (anomalous, normal) pairs with
// score_anom > score_norm, ties counting one half. Implemented as an
// exact integer sweep over the tied-group ROC, so the result equals
// pairwise counting bit-for-bit. Throws when either class is empty.
double auc(std::span<const double> normal_scores, std::span<const double> anomalous_scores);
double auc(const std::vector<AnomalyRecord>& records);

// Partial AUC over the false-positive range [0, p], normalized by p.
// The ROC is the tie-aware step curve (diagonal segments on tied score
// groups) with linear interpolation at FPR = p. pauc(..., 1) equals
// auc(...) exactly.
double pauc(std::span<const double> normal_scores, std::span<const double> anomalous_scores,
            double p);
double pauc(const std::vector<AnomalyRecord>& records, double p);

struct TypeMetrics {
    double auc = 0.0;
    double pauc = 0.0;
    double mauc = 0.0;  // minimum per-ID AUC within the type
};

struct EvalReport {
    std::map<std::pair<std::string, int>, double> per_id_auc;
    std::map<std::pair<std::string, int>, double> per_id_pauc;
    std::map<std::string, TypeMetrics> per_type;
    TypeMetrics averages;  // arithmetic means over machine types
    double p = 0.1;
    std::vector<std::string> warnings;  // e.g. IDs excluded for single-class truth
};

// Groups records by machine ID, computes per-ID AUC/pAUC, per-type
// means plus the per-type minimum AUC, and dataset averages over types.
// IDs whose records are single-class are excluded with a warning.
EvalReport evaluate_records(const std::vector<AnomalyRecord>& records, double p);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json_text);
std::string report_to_text(const EvalReport& report);

}  // namespace clpscf
