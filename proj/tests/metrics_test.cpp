#include "prime/metrics.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "prime/errors.hpp"
#include "prime/rng.hpp"

using namespace prime;

namespace {

// The worked two-task example: diagonal (0.9, 0.85), final-row revisit 0.8,
// untrained row 0.5 everywhere, look-ahead probe 0.6.
AccuracyMatrix two_task_fixture() {
    AccuracyMatrix r(2);
    r.record(0, 1, 0.5);
    r.record(0, 2, 0.5);
    r.record(1, 1, 0.9);
    r.record(1, 2, 0.6);
    r.record(2, 1, 0.8);
    r.record(2, 2, 0.85);
    return r;
}

std::size_t present_cells(const AccuracyMatrix& r) {
    std::size_t n = 0;
    for (std::size_t i = 0; i <= r.tasks(); ++i)
        for (std::size_t j = 1; j <= r.tasks(); ++j)
            if (r.has(i, j)) ++n;
    return n;
}

}  // namespace

TEST_CASE("recording fills the untrained row and reads back") {
    AccuracyMatrix r(3);
    r.record(0, 1, 0.33);
    r.record(0, 2, 0.25);
    r.record(0, 3, 0.5);
    CHECK(r.tasks() == 3);
    CHECK(r.has(0, 2));
    CHECK_FALSE(r.has(1, 1));
    CHECK(r.at(0, 1) == 0.33);
    CHECK(r.at(0, 3) == 0.5);
}

TEST_CASE("cells are write-once") {
    AccuracyMatrix r(2);
    r.record(1, 1, 0.7);
    CHECK_THROWS_WITH_AS(r.record(1, 1, 0.7), doctest::Contains("already recorded"), Error);
}

TEST_CASE("record rejects bad indices and accuracies") {
    AccuracyMatrix r(3);
    CHECK_THROWS_AS(r.record(4, 1, 0.5), Error);   // stage past the stream
    CHECK_THROWS_AS(r.record(1, 0, 0.5), Error);   // tasks are 1-based
    CHECK_THROWS_AS(r.record(1, 4, 0.5), Error);   // task past the stream
    CHECK_THROWS_AS(r.record(1, 1, -0.01), Error);
    CHECK_THROWS_AS(r.record(1, 1, 1.01), Error);
    CHECK_THROWS_AS(r.record(1, 1, std::nan("")), Error);
    CHECK_THROWS_AS(r.at(0, 4), Error);
    CHECK_THROWS_AS(AccuracyMatrix(0), ConfigError);
}

TEST_CASE("a trained row sees its past plus one look-ahead probe") {
    AccuracyMatrix r(3);
    r.record(1, 1, 0.9);  // retrospective
    r.record(1, 2, 0.4);  // fresh-head probe of the next task
    CHECK_THROWS_WITH_AS(r.record(1, 3, 0.4), doctest::Contains("not measurable"), Error);
    r.record(2, 3, 0.45);
    CHECK(r.has(2, 3));
}

TEST_CASE("a full three-stage protocol fills the documented cell count") {
    AccuracyMatrix r(3);
    for (std::size_t j = 1; j <= 3; ++j) r.record(0, j, 0.3);
    for (std::size_t i = 1; i <= 3; ++i)
        for (std::size_t j = 1; j <= i; ++j) r.record(i, j, 0.8);
    // Untrained row plus the evaluated triangle: 3 + (1 + 2 + 3).
    CHECK(present_cells(r) == 9);

    // The two look-ahead probes complete the picture for transfer metrics.
    r.record(1, 2, 0.35);
    r.record(2, 3, 0.4);
    CHECK(present_cells(r) == 11);
    CHECK_NOTHROW(compute(r));
}

TEST_CASE("the worked two-task fixture reproduces all four summaries") {
    const AccuracyMatrix r = two_task_fixture();
    const Metrics m = compute(r);
    CHECK(m.aa == doctest::Approx(0.875).epsilon(1e-12));
    CHECK(m.bwt == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(m.fwt == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(m.fa == doctest::Approx(0.825).epsilon(1e-12));

    // compute is pure: asking twice gives bit-identical answers and leaves
    // the matrix readable.
    const Metrics again = compute(r);
    CHECK(again.aa == m.aa);
    CHECK(again.bwt == m.bwt);
    CHECK(again.fwt == m.fwt);
    CHECK(again.fa == m.fa);
    CHECK(r.at(1, 1) == 0.9);
}

TEST_CASE("a constant matrix collapses to its constant") {
    AccuracyMatrix r(3);
    const double c = 0.7;
    for (std::size_t j = 1; j <= 3; ++j) r.record(0, j, c);
    for (std::size_t i = 1; i <= 3; ++i)
        for (std::size_t j = 1; j <= std::min(i + 1, std::size_t{3}); ++j) r.record(i, j, c);
    const Metrics m = compute(r);
    CHECK(m.aa == doctest::Approx(c).epsilon(1e-12));
    CHECK(m.fa == doctest::Approx(c).epsilon(1e-12));
    CHECK(m.bwt == 0.0);  // every term is an exact zero
    CHECK(m.fwt == 0.0);
}

TEST_CASE("a single-task matrix refuses transfer metrics") {
    AccuracyMatrix r(1);
    r.record(0, 1, 0.5);
    r.record(1, 1, 0.9);
    CHECK_THROWS_WITH_AS(compute(r), doctest::Contains("T >= 2"), ConfigError);
}

TEST_CASE("missing cells are named") {
    AccuracyMatrix r(2);
    CHECK_THROWS_WITH_AS(compute(r), doctest::Contains("R[1][1]"), Error);

    AccuracyMatrix almost = two_task_fixture();
    AccuracyMatrix gap(2);
    for (std::size_t i = 0; i <= 2; ++i)
        for (std::size_t j = 1; j <= 2; ++j)
            if (almost.has(i, j) && !(i == 2 && j == 1)) gap.record(i, j, almost.at(i, j));
    CHECK_THROWS_WITH_AS(compute(gap), doctest::Contains("R[2][1]"), Error);
}

TEST_CASE("no forgetting means zero backward transfer") {
    Rng rng(77);
    AccuracyMatrix r(4);
    std::vector<double> diag(5, 0.0);
    for (std::size_t j = 1; j <= 4; ++j) r.record(0, j, rng.uniform(0.2, 0.3));
    for (std::size_t i = 1; i <= 4; ++i) diag[i] = rng.uniform(0.5, 1.0);
    for (std::size_t i = 1; i <= 4; ++i) {
        for (std::size_t j = 1; j < i; ++j)
            r.record(i, j, i == 4 ? diag[j] : rng.uniform(0.4, 0.9));
        r.record(i, i, diag[i]);
        if (i < 4) r.record(i, i + 1, rng.uniform(0.2, 0.5));
    }
    CHECK(compute(r).bwt == 0.0);
}

TEST_CASE("metrics do not depend on task order within each average") {
    // Each metric is a mean of per-task terms, so moving a task's terms to
    // another slot -- jointly across every row the metric touches -- cannot
    // change any of the four numbers.
    Rng rng(78);
    std::vector<double> row0(5), diag(5), last(5), probe(5);
    for (std::size_t i = 1; i <= 4; ++i) {
        row0[i] = rng.uniform(0.1, 0.3);
        diag[i] = rng.uniform(0.5, 1.0);
        last[i] = rng.uniform(0.4, 0.9);
        probe[i] = rng.uniform(0.2, 0.6);
    }
    last[4] = diag[4];  // the final diagonal cell is shared by both rows

    const auto build = [](const std::vector<double>& r0, const std::vector<double>& d,
                          const std::vector<double>& l, const std::vector<double>& p) {
        AccuracyMatrix r(4);
        for (std::size_t j = 1; j <= 4; ++j) r.record(0, j, r0[j]);
        for (std::size_t i = 1; i <= 4; ++i) {
            for (std::size_t j = 1; j < i; ++j) r.record(i, j, i == 4 ? l[j] : 0.5);
            r.record(i, i, d[i]);
            if (i < 4) r.record(i, i + 1, p[i + 1]);
        }
        return r;
    };

    const Metrics a = compute(build(row0, diag, last, probe));

    // Swap tasks 1 and 3 in the backward-transfer pairs, and tasks 2 and 4
    // in the forward-transfer pairs.
    std::swap(diag[1], diag[3]);
    std::swap(last[1], last[3]);
    std::swap(row0[2], row0[4]);
    std::swap(probe[2], probe[4]);
    const Metrics b = compute(build(row0, diag, last, probe));

    CHECK(a.aa == doctest::Approx(b.aa).epsilon(1e-12));
    CHECK(a.bwt == doctest::Approx(b.bwt).epsilon(1e-12));
    CHECK(a.fwt == doctest::Approx(b.fwt).epsilon(1e-12));
    CHECK(a.fa == doctest::Approx(b.fa).epsilon(1e-12));
}

TEST_CASE("aggregate reports mean and half-range per metric") {
    const Metrics one{0.8, -0.05, 0.1, 0.75};
    const MetricsSummary solo = aggregate({one});
    CHECK(solo.aa.mean == 0.8);
    CHECK(solo.aa.half_range == 0.0);
    CHECK(solo.bwt.mean == -0.05);
    CHECK(solo.fa.half_range == 0.0);

    const MetricsSummary pair = aggregate({Metrics{0.6, 0.6, 0.6, 0.6}, Metrics{0.8, 0.8, 0.8, 0.8}});
    CHECK(pair.aa.mean == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(pair.aa.half_range == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(pair.fwt.mean == doctest::Approx(0.7).epsilon(1e-12));

    CHECK_THROWS_AS(aggregate({}), ConfigError);
}

TEST_CASE("a ten-run aggregate matches an independent recomputation") {
    Rng rng(79);
    std::vector<Metrics> runs;
    for (int k = 0; k < 10; ++k)
        runs.push_back(Metrics{rng.uniform(0.5, 1.0), rng.uniform(-0.3, 0.0),
                               rng.uniform(-0.1, 0.3), rng.uniform(0.4, 0.9)});
    const MetricsSummary s = aggregate(runs);

    std::vector<double> aa, fa;
    for (const Metrics& m : runs) {
        aa.push_back(m.aa);
        fa.push_back(m.fa);
    }
    const double aa_mean = std::accumulate(aa.begin(), aa.end(), 0.0) / 10.0;
    const auto [aa_lo, aa_hi] = std::minmax_element(aa.begin(), aa.end());
    const double fa_mean = std::accumulate(fa.begin(), fa.end(), 0.0) / 10.0;
    const auto [fa_lo, fa_hi] = std::minmax_element(fa.begin(), fa.end());
    CHECK(s.aa.mean == doctest::Approx(aa_mean).epsilon(1e-12));
    CHECK(s.aa.half_range == doctest::Approx((*aa_hi - *aa_lo) / 2.0).epsilon(1e-12));
    CHECK(s.fa.mean == doctest::Approx(fa_mean).epsilon(1e-12));
    CHECK(s.fa.half_range == doctest::Approx((*fa_hi - *fa_lo) / 2.0).epsilon(1e-12));
}

TEST_CASE("csv export lays out stages by row with blank gaps") {
    CHECK(matrix_csv(two_task_fixture()) ==
          "stage,task1,task2\n"
          "0,0.5,0.5\n"
          "1,0.9,0.6\n"
          "2,0.8,0.85\n");

    AccuracyMatrix partial(2);
    partial.record(1, 1, 0.75);
    CHECK(matrix_csv(partial) ==
          "stage,task1,task2\n"
          "0,,\n"
          "1,0.75,\n"
          "2,,\n");
}

TEST_CASE("json export reproduces the matrix with nulls for gaps") {
    const auto doc = nlohmann::json::parse(matrix_json(two_task_fixture()));
    CHECK(doc["tasks"] == 2);
    CHECK(doc["r"].size() == 3);
    CHECK(doc["r"][0][0] == 0.5);
    CHECK(doc["r"][1][1] == 0.6);
    CHECK(doc["r"][2][0] == 0.8);

    AccuracyMatrix partial(2);
    partial.record(2, 2, 0.9);
    const auto sparse = nlohmann::json::parse(matrix_json(partial));
    CHECK(sparse["r"][0][0].is_null());
    CHECK(sparse["r"][2][1] == 0.9);
}

TEST_CASE("metric exports parse back with the same values") {
    const Metrics m = compute(two_task_fixture());
    const auto doc = nlohmann::json::parse(metrics_json(m));
    CHECK(doc["aa"].get<double>() == m.aa);
    CHECK(doc["bwt"].get<double>() == m.bwt);
    CHECK(doc["fwt"].get<double>() == m.fwt);
    CHECK(doc["fa"].get<double>() == m.fa);

    const MetricsSummary s = aggregate({m, m});
    const auto sum = nlohmann::json::parse(summary_json(s));
    CHECK(sum["aa"]["mean"].get<double>() == s.aa.mean);
    CHECK(sum["bwt"]["half_range"].get<double>() == 0.0);

    const std::string csv = summary_csv(s);
    CHECK(csv.substr(0, 23) == "metric,mean,half_range\n");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("\nbwt,") != std::string::npos);
}

TEST_CASE("polar export emits one ring per recorded stage") {
    const auto doc = nlohmann::json::parse(polar_json(two_task_fixture()));
    REQUIRE(doc["rings"].size() == 3);
    CHECK(doc["rings"][0]["stage"] == 0);
    CHECK(doc["rings"][1]["tasks"].size() == 2);
    CHECK(doc["rings"][1]["tasks"][1]["task"] == 2);
    CHECK(doc["rings"][1]["tasks"][1]["accuracy"] == 0.6);
    CHECK(doc["rings"][2]["tasks"][0]["accuracy"] == 0.8);

    // Rows with nothing recorded do not produce rings.
    AccuracyMatrix sparse(3);
    sparse.record(0, 1, 0.4);
    sparse.record(2, 1, 0.8);
    const auto thin = nlohmann::json::parse(polar_json(sparse));
    REQUIRE(thin["rings"].size() == 2);
    CHECK(thin["rings"][0]["stage"] == 0);
    CHECK(thin["rings"][1]["stage"] == 2);
    CHECK(thin["rings"][1]["tasks"][0]["task"] == 1);
}
