#include <doctest.h>

#include <cmath>
#include <vector>

#include "clpscf/metrics.hpp"
#include "clpscf/rng.hpp"
#include "oracles.hpp"

using namespace clpscf;

namespace {

std::vector<AnomalyRecord> make_records(const std::vector<double>& normals,
                                        const std::vector<double>& anoms,
                                        const std::string& type = "fan", int id = 0) {
    std::vector<AnomalyRecord> r;
    for (double s : normals) r.push_back({"n", type, id, s, false});
    for (double s : anoms) r.push_back({"a", type, id, s, true});
    return r;
}

}  // namespace

TEST_CASE("auc trivial cases") {
    CHECK(auc(make_records({0.1, 0.2}, {0.5, 0.6})) == 1.0);
    CHECK(auc(make_records({0.4, 0.4, 0.4}, {0.4, 0.4})) == 0.5);
    CHECK(auc(make_records({0.5, 0.6}, {0.1, 0.2})) == 0.0);
}

TEST_CASE("auc matches exhaustive pair enumeration on the worked example") {
    std::vector<double> normals{0.1, 0.2, 0.3};
    std::vector<double> anoms{0.25, 0.4};
    CHECK(auc(normals, anoms) == oracle::auc_pairwise(normals, anoms));
    CHECK(auc(normals, anoms) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("auc rejects single-class input") {
    CHECK_THROWS_WITH_AS(auc(make_records({0.1, 0.2}, {})), doctest::Contains("AUC undefined"),
                         std::invalid_argument);
    CHECK_THROWS_AS(auc(make_records({}, {0.5})), std::invalid_argument);
}

TEST_CASE("pauc trivial cases and the worked example") {
    CHECK(pauc(make_records({0.1, 0.2}, {0.5, 0.6}), 0.1) == 1.0);
    CHECK(pauc(make_records({0.1, 0.2}, {0.5, 0.6}), 1.0) == 1.0);

    std::vector<double> normals{0.1, 0.2, 0.3, 0.4};
    std::vector<double> anoms{0.35, 0.5};
    const double expected = oracle::pauc_threshold_enum(normals, anoms, 0.5);
    CHECK(expected == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(pauc(normals, anoms, 0.5) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("pauc validates p") {
    auto recs = make_records({0.1}, {0.5});
    CHECK_THROWS_AS(pauc(recs, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(pauc(recs, -0.5), std::invalid_argument);
    CHECK_THROWS_AS(pauc(recs, 1.5), std::invalid_argument);
}

TEST_CASE("auc and pauc oracle fuzz with ties") {
    Rng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const int nn = 1 + static_cast<int>(rng.uniform_int(0, 24));
        const int na = 1 + static_cast<int>(rng.uniform_int(0, 24));
        std::vector<double> normals(static_cast<size_t>(nn)), anoms(static_cast<size_t>(na));
        const bool discrete = rng.uniform() < 0.5;  // force ties half the time
        auto draw = [&]() {
            return discrete ? std::round(rng.uniform() * 8.0) / 8.0 : rng.uniform();
        };
        for (auto& s : normals) s = draw();
        for (auto& s : anoms) s = draw();

        CHECK(auc(normals, anoms) == oracle::auc_pairwise(normals, anoms));

        const double p = rng.uniform(0.05, 1.0);
        CHECK(std::abs(pauc(normals, anoms, p) -
                       oracle::pauc_threshold_enum(normals, anoms, p)) < 1e-12);
        CHECK(pauc(normals, anoms, 1.0) == auc(normals, anoms));
    }
}

TEST_CASE("auc/pauc invariant under strictly increasing transforms") {
    Rng rng(88);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> normals(8), anoms(6);
        for (auto& s : normals) s = rng.uniform(-2.0, 2.0);
        for (auto& s : anoms) s = rng.uniform(-2.0, 2.0);
        auto transform = [](double x) { return std::exp(0.7 * x) + 3.0; };
        std::vector<double> tn, ta;
        for (double s : normals) tn.push_back(transform(s));
        for (double s : anoms) ta.push_back(transform(s));
        CHECK(auc(normals, anoms) == doctest::Approx(auc(tn, ta)).epsilon(1e-12));
        CHECK(pauc(normals, anoms, 0.3) == doctest::Approx(pauc(tn, ta, 0.3)).epsilon(1e-9));
    }
}

TEST_CASE("evaluate_records aggregation arithmetic") {
    // Three IDs under one type with per-ID AUCs 0.9, 0.8, 0.95.
    // AUC 0.9: normals {0,0,...}, anoms shaped to give exactly the target.
    auto with_auc = [](int id, double target) {
        // 10 normals at distinct low values, 10 anomalies: k of them below
        // every normal gives AUC = 1 - k/10 ... simpler: place n anomalies
        // above and m below so AUC = n / (n + m) with distinct scores.
        std::vector<AnomalyRecord> recs;
        const int above = static_cast<int>(std::lround(target * 20.0));
        const int below = 20 - above;
        for (int i = 0; i < 5; ++i) {
            recs.push_back({"n", "fan", id, 0.4 + 0.001 * i, false});
        }
        for (int i = 0; i < above; ++i) recs.push_back({"a", "fan", id, 1.0 + 0.01 * i, true});
        for (int i = 0; i < below; ++i) recs.push_back({"a", "fan", id, 0.1 + 0.001 * i, true});
        return recs;
    };
    std::vector<AnomalyRecord> records;
    for (const auto& [id, target] : std::vector<std::pair<int, double>>{{0, 0.9}, {1, 0.8}, {2, 0.95}}) {
        auto recs = with_auc(id, target);
        records.insert(records.end(), recs.begin(), recs.end());
    }
    EvalReport report = evaluate_records(records, 0.1);
    CHECK(report.per_id_auc.at({"fan", 0}) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(report.per_id_auc.at({"fan", 1}) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(report.per_id_auc.at({"fan", 2}) == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(report.per_type.at("fan").auc == doctest::Approx(0.88333).epsilon(1e-4));
    CHECK(report.per_type.at("fan").mauc == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(report.averages.auc == doctest::Approx(report.per_type.at("fan").auc).epsilon(1e-12));
}

TEST_CASE("evaluate_records: perfect separation everywhere gives all ones") {
    std::vector<AnomalyRecord> records;
    for (const std::string& type : {"fan", "pump"}) {
        for (int id = 0; id < 2; ++id) {
            auto recs = make_records({0.1, 0.2, 0.3}, {0.7, 0.8}, type, id);
            records.insert(records.end(), recs.begin(), recs.end());
        }
    }
    EvalReport report = evaluate_records(records, 0.1);
    CHECK(report.averages.auc == 1.0);
    CHECK(report.averages.pauc == 1.0);
    CHECK(report.averages.mauc == 1.0);
    CHECK(report.per_type.size() == 2);
}

TEST_CASE("evaluate_records excludes single-class IDs with a warning") {
    auto records = make_records({0.1, 0.2}, {0.6}, "fan", 0);
    auto only_normal = make_records({0.3, 0.4}, {}, "fan", 2);
    records.insert(records.end(), only_normal.begin(), only_normal.end());
    EvalReport report = evaluate_records(records, 0.1);
    CHECK(report.per_id_auc.size() == 1);
    CHECK(report.per_id_auc.count({"fan", 2}) == 0);
    REQUIRE(report.warnings.size() == 1);
    CHECK(report.warnings[0].find("fan:2") != std::string::npos);
}

TEST_CASE("mAUC never exceeds the per-type AUC") {
    Rng rng(303);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<AnomalyRecord> records;
        for (int id = 0; id < 3; ++id) {
            for (int i = 0; i < 6; ++i) {
                records.push_back({"n", "valve", id, rng.uniform(), false});
            }
            for (int i = 0; i < 4; ++i) {
                records.push_back({"a", "valve", id, rng.uniform(), true});
            }
        }
        EvalReport report = evaluate_records(records, 0.1);
        CHECK(report.per_type.at("valve").mauc <= report.per_type.at("valve").auc + 1e-15);
    }
}

TEST_CASE("report JSON round trip preserves every value") {
    auto records = make_records({0.1, 0.2, 0.3}, {0.25, 0.4}, "slider", 2);
    auto more = make_records({0.2, 0.5}, {0.6, 0.9}, "fan", 4);
    records.insert(records.end(), more.begin(), more.end());
    EvalReport report = evaluate_records(records, 0.25);
    EvalReport back = report_from_json(report_to_json(report));
    CHECK(back.p == report.p);
    CHECK(back.per_id_auc == report.per_id_auc);
    CHECK(back.per_id_pauc == report.per_id_pauc);
    CHECK(back.averages.auc == report.averages.auc);
    CHECK(back.averages.pauc == report.averages.pauc);
    CHECK(back.averages.mauc == report.averages.mauc);
    CHECK(report_to_text(report).find("slider") != std::string::npos);
}
