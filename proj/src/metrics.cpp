#include "prime/metrics.hpp"

#include <charconv>
#include <system_error>

#include "json.hpp"
#include "prime/errors.hpp"

namespace prime {

namespace {

std::string cell_name(std::size_t stage, std::size_t task) {
    return "R[" + std::to_string(stage) + "][" + std::to_string(task) + "]";
}

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

AccuracyMatrix::AccuracyMatrix(std::size_t tasks) : tasks_(tasks) {
    if (tasks == 0) throw ConfigError({"accuracy matrix needs at least one task"});
    cells_.assign((tasks + 1) * tasks, 0.0);
    present_.assign(cells_.size(), false);
}

std::size_t AccuracyMatrix::index(std::size_t stage, std::size_t task) const {
    if (stage > tasks_ || task < 1 || task > tasks_)
        throw Error("cell " + cell_name(stage, task) + " is outside a " +
                    std::to_string(tasks_) + "-task matrix");
    return stage * tasks_ + (task - 1);
}

void AccuracyMatrix::record(std::size_t stage, std::size_t task, double accuracy) {
    const std::size_t at = index(stage, task);
    if (!(accuracy >= 0.0 && accuracy <= 1.0))
        throw Error("accuracy " + fmt(accuracy) + " for " + cell_name(stage, task) +
                    " is outside [0, 1]");
    // Row 0 is the untrained model, so every task is measurable there; a
    // trained row may look back at what it has seen plus one task ahead
    // (the fresh-head probe that forward transfer needs).
    if (stage != 0 && task > stage + 1)
        throw Error("cell " + cell_name(stage, task) + " is not measurable at stage " +
                    std::to_string(stage) + "; task " + std::to_string(task) +
                    " starts at stage " + std::to_string(task));
    if (present_[at]) throw Error("cell " + cell_name(stage, task) + " is already recorded");
    cells_[at] = accuracy;
    present_[at] = true;
}

bool AccuracyMatrix::has(std::size_t stage, std::size_t task) const {
    return present_[index(stage, task)];
}

double AccuracyMatrix::at(std::size_t stage, std::size_t task) const {
    const std::size_t at = index(stage, task);
    if (!present_[at]) throw Error("cell " + cell_name(stage, task) + " is empty");
    return cells_[at];
}

Metrics compute(const AccuracyMatrix& r) {
    const std::size_t t = r.tasks();
    if (t < 2)
        throw ConfigError(
            {"transfer metrics average over task pairs; record a stream with T >= 2 tasks"});

    const auto need = [&r](std::size_t stage, std::size_t task) {
        if (!r.has(stage, task))
            throw Error("cell " + cell_name(stage, task) + " is missing; record it before computing");
        return r.at(stage, task);
    };

    Metrics m;
    for (std::size_t i = 1; i <= t; ++i) m.aa += need(i, i);
    m.aa /= static_cast<double>(t);
    for (std::size_t i = 1; i < t; ++i) m.bwt += need(t, i) - need(i, i);
    m.bwt /= static_cast<double>(t - 1);
    for (std::size_t i = 2; i <= t; ++i) m.fwt += need(i - 1, i) - need(0, i);
    m.fwt /= static_cast<double>(t - 1);
    for (std::size_t i = 1; i <= t; ++i) m.fa += need(t, i);
    m.fa /= static_cast<double>(t);
    return m;
}

MetricsSummary aggregate(const std::vector<Metrics>& runs) {
    if (runs.empty()) throw ConfigError({"aggregate needs at least one run"});
    const auto stat = [&runs](double Metrics::* field) {
        MetricStat s;
        double lo = runs.front().*field, hi = lo;
        for (const Metrics& m : runs) {
            const double v = m.*field;
            s.mean += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        s.mean /= static_cast<double>(runs.size());
        s.half_range = (hi - lo) / 2.0;
        return s;
    };
    return MetricsSummary{stat(&Metrics::aa), stat(&Metrics::bwt), stat(&Metrics::fwt),
                          stat(&Metrics::fa)};
}

std::string matrix_csv(const AccuracyMatrix& r) {
    std::string out = "stage";
    for (std::size_t j = 1; j <= r.tasks(); ++j) out += ",task" + std::to_string(j);
    out += "\n";
    for (std::size_t i = 0; i <= r.tasks(); ++i) {
        out += std::to_string(i);
        for (std::size_t j = 1; j <= r.tasks(); ++j) {
            out += ",";
            if (r.has(i, j)) out += fmt(r.at(i, j));
        }
        out += "\n";
    }
    return out;
}

std::string matrix_json(const AccuracyMatrix& r) {
    nlohmann::ordered_json doc;
    doc["tasks"] = r.tasks();
    auto& rows = doc["r"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i <= r.tasks(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t j = 1; j <= r.tasks(); ++j) {
            if (r.has(i, j))
                row.push_back(r.at(i, j));
            else
                row.push_back(nullptr);
        }
        rows.push_back(std::move(row));
    }
    return doc.dump(2);
}

std::string metrics_json(const Metrics& m) {
    nlohmann::ordered_json doc;
    doc["aa"] = m.aa;
    doc["bwt"] = m.bwt;
    doc["fwt"] = m.fwt;
    doc["fa"] = m.fa;
    return doc.dump(2);
}

std::string summary_csv(const MetricsSummary& s) {
    std::string out = "metric,mean,half_range\n";
    const auto row = [&out](const char* name, const MetricStat& st) {
        out += std::string(name) + "," + fmt(st.mean) + "," + fmt(st.half_range) + "\n";
    };
    row("aa", s.aa);
    row("bwt", s.bwt);
    row("fwt", s.fwt);
    row("fa", s.fa);
    return out;
}

std::string summary_json(const MetricsSummary& s) {
    nlohmann::ordered_json doc;
    const auto obj = [](const MetricStat& st) {
        nlohmann::ordered_json o;
        o["mean"] = st.mean;
        o["half_range"] = st.half_range;
        return o;
    };
    doc["aa"] = obj(s.aa);
    doc["bwt"] = obj(s.bwt);
    doc["fwt"] = obj(s.fwt);
    doc["fa"] = obj(s.fa);
    return doc.dump(2);
}

std::string polar_json(const AccuracyMatrix& r) {
    nlohmann::ordered_json doc;
    auto& rings = doc["rings"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i <= r.tasks(); ++i) {
        nlohmann::ordered_json ring;
        ring["stage"] = i;
        auto& spokes = ring["tasks"] = nlohmann::ordered_json::array();
        for (std::size_t j = 1; j <= r.tasks(); ++j) {
            if (!r.has(i, j)) continue;
            nlohmann::ordered_json spoke;
            spoke["task"] = j;
            spoke["accuracy"] = r.at(i, j);
            spokes.push_back(std::move(spoke));
        }
        if (!spokes.empty()) rings.push_back(std::move(ring));
    }
    return doc.dump(2);
}

}  // namespace prime
