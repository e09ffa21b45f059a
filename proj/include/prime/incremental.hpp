#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prime/model.hpp"
#include "prime/optim.hpp"
#include "prime/plasticity.hpp"
#include "prime/synth.hpp"
#include "prime/tensor.hpp"

namespace prime {

// One stage's training material in tensor form: the head's class columns are
// task.class_ids in order, labels are local column indices.
struct TaskData {
    std::vector<int> class_ids;
    Tensor train_x;
    std::vector<int> train_y;
    Tensor val_x;
    std::vector<int> val_y;
};

// Converts a staged split into tensors, mapping global labels to head-local
// columns.  Samples carrying labels outside stage.class_ids are rejected.
TaskData make_task_data(const StageData& stage, std::size_t width);

// Stall detector over the per-epoch training cross-entropy of the new task.
// tau <= 0 means "resolve against the task": the training ops substitute
// 0.8 * ln(class count), the cross-entropy of a uniform predictor scaled
// down; detect_stall itself requires a resolved threshold.
struct StallConfig {
    double tau = 0.0;
    int patience = 5;
    double min_rel = 0.01;  // relative CE improvement that counts as progress
};

double resolved_tau(const StallConfig& cfg, std::size_t classes);

// True iff the last `patience` epochs all sit above tau and the best of them
// improves on the first of them by less than min_rel (relative).  Fewer than
// `patience` epochs can never stall.
bool detect_stall(const std::vector<double>& ce_per_epoch, const StallConfig& cfg);

struct LwfConfig {
    double lambda0 = 1.0;      // distillation weight
    double temperature = 2.0;  // softening exponent 1/T on both distributions
    double l2 = 1e-4;          // weight of the quadratic regularizer
    int epochs = 15;
    std::size_t batch_size = 128;
    double lr = 1e-3;
    PlateauConfig plateau{};
    StallConfig stall{};
    std::uint64_t seed = 0;  // head init, shuffling and dropout all derive from this
};

// Old-head logits captured on the incoming task's training inputs, dropout
// disabled, before any parameter moves.  Built once per stage; read-only
// afterwards.
class CalibrationSet {
  public:
    CalibrationSet() = default;
    static CalibrationSet record(const Model& m, const Tensor& inputs);

    std::size_t heads() const { return logits_.size(); }
    std::size_t rows() const { return rows_; }
    const Tensor& logits(std::size_t head) const;
    Tensor gather(std::size_t head, const std::vector<std::size_t>& rows) const;

  private:
    std::vector<Tensor> logits_;
    std::size_t rows_ = 0;
};

// Quantities logged at the end of each epoch, measured on the full training
// set with dropout disabled.  total = lambda0 * distill + ce + penalty + l2
// by construction, so any drift between the parts and the sum is a bug.
struct EpochRecord {
    int epoch = 0;        // 1-based
    double ce = 0.0;      // new-task cross-entropy
    double distill = 0.0; // sum of unweighted distillation terms over old heads
    double penalty = 0.0; // quadratic parameter-drift penalty (EWC only)
    double l2 = 0.0;
    double total = 0.0;
    double val_ce = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;  // rate in effect during this epoch's updates
};

struct TrainLog {
    std::size_t head = 0;  // index of the head attached for this task
    std::vector<EpochRecord> epochs;
    bool stalled = false;  // set only when a stall cut training short
};

// Called after each epoch's updates and log entry; lets callers audit frozen
// blocks mid-run without re-running training.
using EpochObserver = std::function<void(const Model&, const EpochRecord&)>;

// Step A: attach a head over the current feature width and train it jointly
// with the shared stack under the distillation-augmented loss.  Calibration
// is recorded before the head exists; backbone and old heads stay bitwise
// fixed.  Requires at least one existing head (base training is
// base_train_task's job).
TrainLog lwf_train_task(Model& m, const TaskData& task, const LwfConfig& cfg,
                        const EpochObserver& observer = {});

// Plain fine-tuning of the shared stack plus a fresh head; no distillation,
// no penalty.  train_encoder is only for the base stage, before the backbone
// freeze takes effect.  With lambda0 = 0 lwf_train_task reproduces this
// trajectory bit for bit.
TrainLog base_train_task(Model& m, const TaskData& task, const LwfConfig& cfg,
                         bool train_encoder = false, const EpochObserver& observer = {});

// Step C: grow every plan layer to factor * n columns by round-robin column
// duplication (copies perturbed by i.i.d. Gaussian eps0), and expand the
// next layer's rows so each duplication group splits its source row's weight
// 1/(group size); with eps0 = 0 the network computes exactly the same
// function.  Newborn entries are flagged in fresh_masks; a pending
// unabsorbed expansion is rejected.  Returns one record per widened layer
// (also appended to m.expansions).
std::vector<ExpansionRecord> widen(Model& m, const ExpansionPlan& plan, std::uint64_t seed);

// Step D: like lwf_train_task but on a freshly widened model — calibration
// comes from the post-expansion network, the new head spans the full widened
// feature width, and only mask-flagged entries plus the new head move.  On
// return the masks are cleared: the newborn parameters join the shared stack
// for later stages.
TrainLog lwf_train_expanded(Model& m, const TaskData& task, const LwfConfig& cfg,
                            const EpochObserver& observer = {});

struct EwcConfig {
    double lambda = 1.0;               // penalty weight; 0 recovers base_train_task
    std::size_t fisher_samples = 256;  // training rows used for the Fisher estimate
};

// Elastic-weight-consolidation baseline: a diagonal Fisher estimate over the
// shared stack (labels sampled from each old head's softmax on the incoming
// task's inputs, before any update) anchors theta_s with the penalty
// (lambda/2) * sum F * (theta - theta*)^2.  Trainable set matches Step A.
TrainLog ewc_train_task(Model& m, const TaskData& task, const LwfConfig& cfg,
                        const EwcConfig& ewc, const EpochObserver& observer = {});

struct PrimeConfig {
    LwfConfig lwf;
    PlasticityConfig plasticity{};
    ExpansionConfig expansion{};
};

// What one controller stage did, and why.
struct StageReport {
    std::string path;  // "short" or "full"
    bool stalled = false;
    int stall_epoch = 0;  // epoch whose log entry tripped the detector
    TrainLog step_a;
    TrainLog step_d;                            // empty on the short path
    std::vector<PlasticityReport> plasticity;   // one per evaluation performed
    std::optional<ExpansionPlan> plan;
    std::vector<ExpansionRecord> expansions;
};

// The full cycle for one stage: run Step A; if the new-task CE stalls,
// evaluate plasticity once.  A limited verdict rewinds the model to its
// stage-entry weights, widens per the plan, and trains the expansion
// (Step D); a healthy verdict lets Step A finish undisturbed.  Decisions are
// functions of seeds and configs alone.
StageReport prime_controller(Model& m, const TaskData& task, const PrimeConfig& cfg,
                             const EpochObserver& observer = {});

// Accuracy of one head on a labeled batch (labels local to that head).
double head_accuracy(const Model& m, std::size_t head, const Tensor& x,
                     const std::vector<int>& y);

}  // namespace prime
