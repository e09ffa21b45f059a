#include "prime/incremental.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "prime/dataset.hpp"
#include "prime/errors.hpp"
#include "prime/losses.hpp"
#include "prime/rng.hpp"

namespace prime {

namespace {

// Sub-stream tags under LwfConfig::seed.  Head init, shuffling and dropout
// are shared across every training op so that switching off the extra loss
// terms (lambda0 = 0, ewc lambda = 0) leaves the trajectory untouched.
constexpr std::uint64_t kHeadTag = 0;
constexpr std::uint64_t kShuffleTag = 1;
constexpr std::uint64_t kDropoutTag = 2;
constexpr std::uint64_t kFisherTag = 3;
constexpr std::uint64_t kStepDTag = 4;
constexpr std::uint64_t kWidenTag = 5;

// Row count that tolerates default-constructed (rank-0) tensors, which stand
// in for absent data such as a missing validation split.
std::size_t row_count(const Tensor& t) { return t.rank() == 2 ? t.rows() : 0; }

Tensor gather_rows(const Tensor& src, const std::vector<std::size_t>& rows) {
    Tensor out(rows.size(), src.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < src.cols(); ++j) out(i, j) = src(rows[i], j);
    return out;
}

void validate_lwf(const LwfConfig& cfg, std::vector<std::string>& problems) {
    if (!(cfg.temperature > 0.0)) problems.push_back("temperature must be positive");
    if (cfg.lambda0 < 0.0) problems.push_back("lambda0 must be non-negative");
    if (cfg.epochs < 0) problems.push_back("epochs must be non-negative");
    if (cfg.batch_size == 0) problems.push_back("batch size must be positive");
    if (!(cfg.lr > 0.0)) problems.push_back("learning rate must be positive");
    if (cfg.l2 < 0.0) problems.push_back("l2 coefficient must be non-negative");
    if (cfg.stall.patience < 1) problems.push_back("stall patience must be at least 1");
    if (cfg.stall.min_rel < 0.0) problems.push_back("stall min_rel must be non-negative");
}

void validate_task(const TaskData& task, std::vector<std::string>& problems) {
    if (task.class_ids.empty()) problems.push_back("task introduces no classes");
    if (row_count(task.train_x) == 0) problems.push_back("training set is empty");
    if (task.train_y.size() != row_count(task.train_x))
        problems.push_back("training labels do not match training rows");
    if (task.val_y.size() != row_count(task.val_x))
        problems.push_back("validation labels do not match validation rows");
    const int classes = static_cast<int>(task.class_ids.size());
    auto in_range = [classes](const std::vector<int>& ys) {
        return std::all_of(ys.begin(), ys.end(),
                           [classes](int y) { return y >= 0 && y < classes; });
    };
    if (!in_range(task.train_y) || !in_range(task.val_y))
        problems.push_back("labels must be local head columns in [0, class count)");
}

struct EwcPenalty {
    double lambda = 0.0;
    std::map<std::string, Tensor> fisher;  // per shared parameter
    std::map<std::string, Tensor> anchor;  // theta* snapshot

    double value(Model& m) const {
        double acc = 0.0;
        for (const ParamRef& ref : param_refs(m)) {
            auto f = fisher.find(ref.name);
            if (f == fisher.end()) continue;
            const Tensor& star = anchor.at(ref.name);
            for (std::size_t i = 0; i < ref.tensor->size(); ++i) {
                const double d = (*ref.tensor)[i] - star[i];
                acc += f->second[i] * d * d;
            }
        }
        return 0.5 * lambda * acc;
    }

    void add_grad(Model& m, Gradients& g) const {
        for (const ParamRef& ref : param_refs(m)) {
            auto f = fisher.find(ref.name);
            if (f == fisher.end()) continue;
            Tensor* grad = g.find(ref.name);
            if (!grad) continue;
            const Tensor& star = anchor.at(ref.name);
            for (std::size_t i = 0; i < grad->size(); ++i)
                (*grad)[i] += lambda * f->second[i] * ((*ref.tensor)[i] - star[i]);
        }
    }
};

struct EngineSetup {
    TrainPlan plan;
    std::size_t head = 0;
    const CalibrationSet* calib = nullptr;  // null: no distillation term
    double lambda0 = 0.0;
    double temperature = 2.0;
    const EwcPenalty* ewc = nullptr;
};

std::vector<int> gather_labels(const std::vector<int>& ys, const std::vector<std::size_t>& rows) {
    std::vector<int> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = ys[rows[i]];
    return out;
}

// Runs epochs (from, to] with 1-based numbering, appending to log.epochs.
// Every epoch ends with a full-training-set evaluation (dropout off) that
// feeds the log, the plateau scheduler and — when stall_checks is on — the
// stall detector, which stops the loop early and marks the log stalled.
void run_epochs(Model& m, const TaskData& task, const LwfConfig& cfg, const EngineSetup& s,
                AdamState& adam, TrainLog& log, int from, int to, bool stall_checks,
                const EpochObserver& observer) {
    const std::size_t n = task.train_x.rows();
    const bool distill = s.calib != nullptr && s.lambda0 > 0.0 && s.calib->heads() > 0;
    StallConfig stall = cfg.stall;
    stall.tau = resolved_tau(cfg.stall, task.class_ids.size());

    for (int epoch = from + 1; epoch <= to; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(cfg.seed, {kShuffleTag, static_cast<std::uint64_t>(epoch)}));
        shuffle_rng.shuffle(order);

        std::uint64_t batch_no = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_no) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const std::vector<std::size_t> rows(order.begin() + start, order.begin() + stop);
            const Tensor bx = gather_rows(task.train_x, rows);
            const std::vector<int> by = gather_labels(task.train_y, rows);

            const std::uint64_t drop_seed =
                derive_seed(cfg.seed, {kDropoutTag, static_cast<std::uint64_t>(epoch), batch_no});
            const ForwardTrace trace = forward(m, bx, true, drop_seed, s.plan.encoder);

            std::vector<Tensor> dlogits(m.heads.size());
            LossGrad ce = cross_entropy(trace.logits[s.head], by);
            dlogits[s.head] = std::move(ce.dlogits);
            if (distill) {
                for (std::size_t h = 0; h < s.calib->heads(); ++h) {
                    LossGrad d = distillation_loss(trace.logits[h], s.calib->gather(h, rows),
                                                   s.temperature);
                    for (std::size_t i = 0; i < d.dlogits.size(); ++i) d.dlogits[i] *= s.lambda0;
                    dlogits[h] = std::move(d.dlogits);
                }
            }

            Gradients g = backward(m, trace, dlogits, s.plan);
            if (s.ewc && s.ewc->lambda > 0.0) s.ewc->add_grad(m, g);
            adam_step(m, g, adam);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = adam.lr;
        const ForwardTrace tr = forward(m, task.train_x, false, 0);
        rec.ce = cross_entropy(tr.logits[s.head], task.train_y).loss;
        if (s.calib) {
            for (std::size_t h = 0; h < s.calib->heads(); ++h)
                rec.distill +=
                    distillation_loss(tr.logits[h], s.calib->logits(h), s.temperature).loss;
        }
        if (s.ewc) rec.penalty = s.ewc->value(m);
        rec.l2 = l2_penalty(m, s.plan);
        rec.total = s.lambda0 * rec.distill + rec.ce + rec.penalty + rec.l2;
        if (row_count(task.val_x) > 0) {
            const ForwardTrace tv = forward(m, task.val_x, false, 0);
            rec.val_ce = cross_entropy(tv.logits[s.head], task.val_y).loss;
            rec.val_accuracy = accuracy(tv.logits[s.head], task.val_y);
        } else {
            rec.val_ce = rec.ce;
            rec.val_accuracy = accuracy(tr.logits[s.head], task.train_y);
        }
        reduce_lr_on_plateau(adam, rec.val_ce);
        log.epochs.push_back(rec);
        if (observer) observer(m, rec);

        if (stall_checks && static_cast<int>(log.epochs.size()) >= stall.patience) {
            std::vector<double> ce_series;
            ce_series.reserve(log.epochs.size());
            for (const EpochRecord& r : log.epochs) ce_series.push_back(r.ce);
            if (detect_stall(ce_series, stall)) {
                log.stalled = true;
                return;
            }
        }
    }
}

std::size_t attach_head(Model& m, const TaskData& task, const LwfConfig& cfg) {
    return add_head(m, task.class_ids, derive_seed(cfg.seed, {kHeadTag}));
}

}  // namespace

TaskData make_task_data(const StageData& stage, std::size_t width) {
    std::vector<std::string> problems;
    if (stage.class_ids.empty()) problems.push_back("stage introduces no classes");
    std::unordered_map<int, int> local;
    for (std::size_t i = 0; i < stage.class_ids.size(); ++i)
        if (!local.emplace(stage.class_ids[i], static_cast<int>(i)).second)
            problems.push_back("stage repeats class " + std::to_string(stage.class_ids[i]));
    if (!problems.empty()) throw ConfigError(problems);

    auto convert = [&local, width](const std::vector<FeatureVector>& samples, Tensor& x,
                                   std::vector<int>& y) {
        Batch b = to_batch(samples, width);
        x = std::move(b.x);
        y.reserve(b.y.size());
        for (int label : b.y) {
            auto it = local.find(label);
            if (it == local.end())
                throw ConfigError(
                    {"sample labeled " + std::to_string(label) + " outside the stage's classes"});
            y.push_back(it->second);
        }
    };

    TaskData task;
    task.class_ids = stage.class_ids;
    convert(stage.train, task.train_x, task.train_y);
    convert(stage.val, task.val_x, task.val_y);
    return task;
}

double resolved_tau(const StallConfig& cfg, std::size_t classes) {
    if (cfg.tau > 0.0) return cfg.tau;
    return 0.8 * std::log(static_cast<double>(std::max<std::size_t>(classes, 1)));
}

bool detect_stall(const std::vector<double>& ce_per_epoch, const StallConfig& cfg) {
    std::vector<std::string> problems;
    if (!(cfg.tau > 0.0)) problems.push_back("stall threshold must be a resolved positive value");
    if (cfg.patience < 1) problems.push_back("stall patience must be at least 1");
    if (cfg.min_rel < 0.0) problems.push_back("stall min_rel must be non-negative");
    if (!problems.empty()) throw ConfigError(problems);

    const std::size_t window = static_cast<std::size_t>(cfg.patience);
    if (ce_per_epoch.size() < window) return false;
    const auto first = ce_per_epoch.end() - static_cast<std::ptrdiff_t>(window);
    double best = *first;
    for (auto it = first; it != ce_per_epoch.end(); ++it) {
        if (*it <= cfg.tau) return false;
        best = std::min(best, *it);
    }
    return (*first - best) / *first < cfg.min_rel;
}

CalibrationSet CalibrationSet::record(const Model& m, const Tensor& inputs) {
    if (row_count(inputs) == 0)
        throw ConfigError({"calibration requires a non-empty training set"});
    CalibrationSet cs;
    cs.rows_ = inputs.rows();
    ForwardTrace tr = forward(m, inputs, false, 0);
    cs.logits_ = std::move(tr.logits);
    return cs;
}

const Tensor& CalibrationSet::logits(std::size_t head) const {
    if (head >= logits_.size())
        throw Error("calibration set has no head " + std::to_string(head));
    return logits_[head];
}

Tensor CalibrationSet::gather(std::size_t head, const std::vector<std::size_t>& rows) const {
    const Tensor& all = logits(head);
    for (std::size_t r : rows)
        if (r >= rows_) throw Error("calibration row " + std::to_string(r) + " out of range");
    return gather_rows(all, rows);
}

TrainLog lwf_train_task(Model& m, const TaskData& task, const LwfConfig& cfg,
                        const EpochObserver& observer) {
    std::vector<std::string> problems;
    validate_lwf(cfg, problems);
    validate_task(task, problems);
    if (m.heads.empty())
        problems.push_back("model has no prior task heads; base training is a separate op");
    if (!problems.empty()) throw ConfigError(problems);

    const CalibrationSet calib = CalibrationSet::record(m, task.train_x);
    const std::size_t head = attach_head(m, task, cfg);

    EngineSetup s;
    s.plan = TrainPlan{false, true, false, {head}, cfg.l2};
    s.head = head;
    s.calib = &calib;
    s.lambda0 = cfg.lambda0;
    s.temperature = cfg.temperature;

    AdamState adam = make_adam(cfg.lr, cfg.plateau);
    TrainLog log;
    log.head = head;
    run_epochs(m, task, cfg, s, adam, log, 0, cfg.epochs, false, observer);
    return log;
}

TrainLog base_train_task(Model& m, const TaskData& task, const LwfConfig& cfg, bool train_encoder,
                         const EpochObserver& observer) {
    std::vector<std::string> problems;
    validate_lwf(cfg, problems);
    validate_task(task, problems);
    if (!problems.empty()) throw ConfigError(problems);

    const std::size_t head = attach_head(m, task, cfg);

    EngineSetup s;
    s.plan = TrainPlan{train_encoder, true, false, {head}, cfg.l2};
    s.head = head;

    AdamState adam = make_adam(cfg.lr, cfg.plateau);
    TrainLog log;
    log.head = head;
    run_epochs(m, task, cfg, s, adam, log, 0, cfg.epochs, false, observer);
    return log;
}

std::vector<ExpansionRecord> widen(Model& m, const ExpansionPlan& plan, std::uint64_t seed) {
    std::vector<std::string> problems;
    if (plan.layers.empty()) problems.push_back("expansion plan lists no layers");
    if (!(plan.factor > 1.0)) problems.push_back("expansion factor must exceed 1");
    if (plan.eps0 < 0.0) problems.push_back("eps0 must be non-negative");
    std::vector<std::size_t> layers = plan.layers;
    std::sort(layers.begin(), layers.end());
    if (std::adjacent_find(layers.begin(), layers.end()) != layers.end())
        problems.push_back("expansion plan repeats a layer");
    for (std::size_t l : layers)
        if (l >= m.hidden.size())
            problems.push_back("expansion plan targets missing hidden layer " + std::to_string(l));
    if (!m.fresh_masks.empty())
        problems.push_back("model still carries an unabsorbed expansion");
    if (!problems.empty()) throw ConfigError(problems);

    std::vector<std::size_t> old_in(m.hidden.size()), old_out(m.hidden.size());
    for (std::size_t i = 0; i < m.hidden.size(); ++i) {
        old_in[i] = m.hidden[i].in_dim();
        old_out[i] = m.hidden[i].out_dim();
    }

    std::vector<ExpansionRecord> records;
    for (std::size_t l : layers) {
        DenseLayer& layer = m.hidden[l];
        const std::size_t n_old = layer.out_dim();
        const std::size_t n_new =
            static_cast<std::size_t>(std::llround(plan.factor * static_cast<double>(n_old)));
        if (n_new <= n_old)
            throw ConfigError({"factor " + std::to_string(plan.factor) +
                               " does not widen layer " + std::to_string(l)});
        const std::size_t extra = n_new - n_old;

        // Duplicate columns round-robin; copies (weights and bias) get the
        // eps0-scaled perturbation, originals stay untouched.
        Rng col_rng(derive_seed(seed, {l, 0}));
        Tensor w2(layer.w.rows(), n_new);
        Tensor b2(std::vector<std::size_t>{n_new}, 0.0);
        for (std::size_t i = 0; i < layer.w.rows(); ++i)
            for (std::size_t j = 0; j < n_old; ++j) w2(i, j) = layer.w(i, j);
        for (std::size_t j = 0; j < n_old; ++j) b2[j] = layer.b[j];
        for (std::size_t j = 0; j < extra; ++j) {
            const std::size_t src = j % n_old;
            for (std::size_t i = 0; i < layer.w.rows(); ++i)
                w2(i, n_old + j) = layer.w(i, src) + plan.eps0 * col_rng.normal();
            b2[n_old + j] = layer.b[src] + plan.eps0 * col_rng.normal();
        }

        // Group sizes: unit u plus however many copies round-robin gave it.
        std::vector<double> group(n_old, 1.0);
        for (std::size_t j = 0; j < extra; ++j) ++group[j % n_old];

        layer.w = std::move(w2);
        layer.b = std::move(b2);

        // The next layer's rows absorb the duplication: every row of a group
        // carries the source row divided by the group size, so the group's
        // summed contribution reproduces the original unit exactly.  Noise
        // only on the added rows.
        if (l + 1 < m.hidden.size()) {
            DenseLayer& down = m.hidden[l + 1];
            Rng row_rng(derive_seed(seed, {l, 1}));
            Tensor d2(n_new, down.w.cols());
            for (std::size_t u = 0; u < n_old; ++u)
                for (std::size_t c = 0; c < down.w.cols(); ++c)
                    d2(u, c) = down.w(u, c) / group[u];
            for (std::size_t j = 0; j < extra; ++j) {
                const std::size_t src = j % n_old;
                for (std::size_t c = 0; c < down.w.cols(); ++c)
                    d2(n_old + j, c) =
                        down.w(src, c) / group[src] + plan.eps0 * row_rng.normal();
            }
            down.w = std::move(d2);
        }

        ExpansionRecord rec{l, n_old, n_new, plan.factor, plan.eps0};
        records.push_back(rec);
        m.expansions.push_back(rec);
    }

    // Newborn entries (added columns, and rows added downstream) become the
    // expanded block: flag them so the expansion-phase plan can find them.
    for (std::size_t i = 0; i < m.hidden.size(); ++i) {
        const std::size_t in_now = m.hidden[i].in_dim();
        const std::size_t out_now = m.hidden[i].out_dim();
        if (in_now == old_in[i] && out_now == old_out[i]) continue;
        Tensor wm(in_now, out_now, 0.0);
        for (std::size_t r = 0; r < in_now; ++r)
            for (std::size_t c = 0; c < out_now; ++c)
                if (r >= old_in[i] || c >= old_out[i]) wm(r, c) = 1.0;
        m.fresh_masks["hidden" + std::to_string(i) + ".w"] = std::move(wm);
        if (out_now > old_out[i]) {
            Tensor bm(std::vector<std::size_t>{out_now}, 0.0);
            for (std::size_t c = old_out[i]; c < out_now; ++c) bm[c] = 1.0;
            m.fresh_masks["hidden" + std::to_string(i) + ".b"] = std::move(bm);
        }
    }
    return records;
}

TrainLog lwf_train_expanded(Model& m, const TaskData& task, const LwfConfig& cfg,
                            const EpochObserver& observer) {
    std::vector<std::string> problems;
    validate_lwf(cfg, problems);
    validate_task(task, problems);
    if (m.fresh_masks.empty()) problems.push_back("model has no expanded parameters to train");
    if (m.heads.empty()) problems.push_back("expanded training requires prior task heads");
    if (!problems.empty()) throw ConfigError(problems);

    const CalibrationSet calib = CalibrationSet::record(m, task.train_x);
    const std::size_t head = attach_head(m, task, cfg);

    EngineSetup s;
    s.plan = TrainPlan{false, false, true, {head}, cfg.l2};
    s.head = head;
    s.calib = &calib;
    s.lambda0 = cfg.lambda0;
    s.temperature = cfg.temperature;

    AdamState adam = make_adam(cfg.lr, cfg.plateau);
    TrainLog log;
    log.head = head;
    run_epochs(m, task, cfg, s, adam, log, 0, cfg.epochs, false, observer);

    // The newborn block is trained: absorb it into the shared stack so later
    // stages treat it like any other theta_s parameter.
    m.fresh_masks.clear();
    return log;
}

TrainLog ewc_train_task(Model& m, const TaskData& task, const LwfConfig& cfg,
                        const EwcConfig& ewc, const EpochObserver& observer) {
    std::vector<std::string> problems;
    validate_lwf(cfg, problems);
    validate_task(task, problems);
    if (ewc.lambda < 0.0) problems.push_back("ewc lambda must be non-negative");
    if (ewc.fisher_samples == 0) problems.push_back("fisher sample count must be positive");
    if (m.heads.empty()) problems.push_back("ewc requires at least one existing head");
    if (!problems.empty()) throw ConfigError(problems);

    // Diagonal Fisher over theta_s, estimated before any parameter moves:
    // labels are drawn from each old head's softmax on the incoming task's
    // inputs (the old-task data proxy), one backward pass per draw.
    EwcPenalty penalty;
    penalty.lambda = ewc.lambda;
    if (ewc.lambda > 0.0) {
        for (const ParamRef& ref : param_refs(m)) {
            if (ref.part != Partition::shared) continue;
            penalty.anchor.emplace(ref.name, *ref.tensor);
            penalty.fisher.emplace(ref.name, Tensor(ref.tensor->shape(), 0.0));
        }
        const TrainPlan fisher_plan{false, true, false, {}, 0.0};
        const std::size_t rows = std::min<std::size_t>(ewc.fisher_samples, task.train_x.rows());
        Rng label_rng(derive_seed(cfg.seed, {kFisherTag}));
        std::size_t draws = 0;
        for (std::size_t i = 0; i < rows; ++i) {
            const Tensor row = gather_rows(task.train_x, {i});
            const ForwardTrace tr = forward(m, row, false, 0);
            for (std::size_t h = 0; h < m.heads.size(); ++h) {
                const Tensor p = softmax_rows(tr.logits[h]);
                const double u = label_rng.uniform();
                int y = static_cast<int>(p.cols()) - 1;
                double mass = 0.0;
                for (std::size_t c = 0; c < p.cols(); ++c) {
                    mass += p(0, c);
                    if (u < mass) {
                        y = static_cast<int>(c);
                        break;
                    }
                }
                std::vector<Tensor> dlogits(m.heads.size());
                dlogits[h] = cross_entropy(tr.logits[h], {y}).dlogits;
                const Gradients g = backward(m, tr, dlogits, fisher_plan);
                for (const auto& [name, grad] : g.by_name) {
                    auto f = penalty.fisher.find(name);
                    if (f == penalty.fisher.end()) continue;
                    for (std::size_t k = 0; k < grad.size(); ++k)
                        f->second[k] += grad[k] * grad[k];
                }
                ++draws;
            }
        }
        if (draws > 0)
            for (auto& [name, f] : penalty.fisher)
                for (std::size_t k = 0; k < f.size(); ++k) f[k] /= static_cast<double>(draws);
    }

    const std::size_t head = attach_head(m, task, cfg);

    EngineSetup s;
    s.plan = TrainPlan{false, true, false, {head}, cfg.l2};
    s.head = head;
    if (ewc.lambda > 0.0) s.ewc = &penalty;

    AdamState adam = make_adam(cfg.lr, cfg.plateau);
    TrainLog log;
    log.head = head;
    run_epochs(m, task, cfg, s, adam, log, 0, cfg.epochs, false, observer);
    return log;
}

StageReport prime_controller(Model& m, const TaskData& task, const PrimeConfig& cfg,
                             const EpochObserver& observer) {
    std::vector<std::string> problems;
    validate_lwf(cfg.lwf, problems);
    validate_task(task, problems);
    if (m.heads.empty())
        problems.push_back("controller requires a base-trained model with at least one head");
    if (!m.fresh_masks.empty())
        problems.push_back("model still carries an unabsorbed expansion");
    if (!problems.empty()) throw ConfigError(problems);

    StageReport report;
    report.path = "short";
    const Model entry = m;

    const CalibrationSet calib = CalibrationSet::record(m, task.train_x);
    const std::size_t head = attach_head(m, task, cfg.lwf);

    EngineSetup s;
    s.plan = TrainPlan{false, true, false, {head}, cfg.lwf.l2};
    s.head = head;
    s.calib = &calib;
    s.lambda0 = cfg.lwf.lambda0;
    s.temperature = cfg.lwf.temperature;

    AdamState adam = make_adam(cfg.lwf.lr, cfg.lwf.plateau);
    report.step_a.head = head;
    run_epochs(m, task, cfg.lwf, s, adam, report.step_a, 0, cfg.lwf.epochs, true, observer);

    if (report.step_a.stalled) {
        report.stalled = true;
        report.stall_epoch = report.step_a.epochs.back().epoch;
        const PlasticityReport verdict = evaluate_plasticity(m, task.train_x, cfg.plasticity);
        report.plasticity.push_back(verdict);
        if (verdict.limited) {
            report.path = "full";
            m = entry;
            const ExpansionPlan plan = plan_expansion(verdict, cfg.expansion, m.hidden.size());
            report.plan = plan;
            report.expansions = widen(m, plan, derive_seed(cfg.lwf.seed, {kWidenTag}));
            LwfConfig step_d = cfg.lwf;
            step_d.seed = derive_seed(cfg.lwf.seed, {kStepDTag});
            report.step_d = lwf_train_expanded(m, task, step_d, observer);
        } else {
            // Plasticity is sufficient: resume Step A where it paused and run
            // to the epoch budget without re-checking this stage.
            run_epochs(m, task, cfg.lwf, s, adam, report.step_a, report.stall_epoch,
                       cfg.lwf.epochs, false, observer);
            report.step_a.stalled = false;
        }
    }
    return report;
}

double head_accuracy(const Model& m, std::size_t head, const Tensor& x,
                     const std::vector<int>& y) {
    if (head >= m.heads.size())
        throw Error("model has no head " + std::to_string(head));
    if (y.size() != x.rows()) throw ShapeError("head_accuracy: labels do not match rows");
    const ForwardTrace tr = forward(m, x, false, 0);
    return accuracy(tr.logits[head], y);
}

}  // namespace prime
