#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace prime {

// Accuracy bookkeeping for a T-task incremental run.  Rows are training
// stages: row 0 holds the untrained model's accuracies, row i the accuracies
// measured after training stage i.  Columns are tasks, 1-based so that task
// i is the one introduced at stage i.  A cell (i, j) may hold either a
// retrospective evaluation (j <= i), or the look-ahead probe of the next
// task with a freshly initialized head (j == i + 1), which forward transfer
// compares against the untrained row.
class AccuracyMatrix {
public:
    explicit AccuracyMatrix(std::size_t tasks);

    std::size_t tasks() const { return tasks_; }

    // Writes one cell.  Each cell can be written exactly once; accuracies
    // must lie in [0, 1]; `stage` ranges over [0, T] and `task` over [1, T].
    void record(std::size_t stage, std::size_t task, double accuracy);

    bool has(std::size_t stage, std::size_t task) const;
    double at(std::size_t stage, std::size_t task) const;

private:
    std::size_t index(std::size_t stage, std::size_t task) const;

    std::size_t tasks_;
    std::vector<double> cells_;  // (T+1) x T, row-major
    std::vector<bool> present_;
};

// The four standard continual-learning summaries.
struct Metrics {
    double aa = 0.0;   // average accuracy: mean of the diagonal
    double bwt = 0.0;  // backward transfer: mean of final-row minus diagonal
    double fwt = 0.0;  // forward transfer: look-ahead probe minus untrained row
    double fa = 0.0;   // final accuracy: mean of the last row
};

// Computes all four metrics from a recorded matrix.  Requires T >= 2 (the
// transfer metrics average over task pairs) and errors on any missing cell,
// naming it.  Pure: the matrix is not modified.
Metrics compute(const AccuracyMatrix& r);

struct MetricStat {
    double mean = 0.0;
    double half_range = 0.0;  // (max - min) / 2 across runs
};

struct MetricsSummary {
    MetricStat aa, bwt, fwt, fa;
};

// Mean and half-range per metric over repeated runs.  Requires >= 1 run.
MetricsSummary aggregate(const std::vector<Metrics>& runs);

// Plain-text exports.  Missing cells render as empty CSV fields / JSON
// nulls; numbers use shortest round-trip formatting.
std::string matrix_csv(const AccuracyMatrix& r);
std::string matrix_json(const AccuracyMatrix& r);
std::string metrics_json(const Metrics& m);
std::string summary_csv(const MetricsSummary& s);
std::string summary_json(const MetricsSummary& s);

// Per-stage accuracy rings (one ring per recorded row, one spoke per present
// cell) for polar plotting of how each task's accuracy evolves.
std::string polar_json(const AccuracyMatrix& r);

}  // namespace prime
