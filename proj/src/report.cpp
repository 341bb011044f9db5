#include "structreg/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace structreg {

using nlohmann::json;

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

Metrics pointwise_metrics(const std::vector<std::vector<double>>& predictions, const std::vector<double>& truth) {
    return pointwise_metrics(predictions, std::vector<std::vector<double>>(predictions.size(), truth));
}

Metrics pointwise_metrics(const std::vector<std::vector<double>>& predictions,
                          const std::vector<std::vector<double>>& truths) {
    if (predictions.empty()) throw std::invalid_argument("pointwise_metrics: no trials");
    if (truths.size() != predictions.size()) throw std::invalid_argument("pointwise_metrics: trial count mismatch");
    const std::size_t points = predictions.front().size();
    if (points == 0) throw std::invalid_argument("pointwise_metrics: no evaluation points");
    for (std::size_t r = 0; r < predictions.size(); ++r) {
        if (predictions[r].size() != points || truths[r].size() != points) {
            throw std::invalid_argument("pointwise_metrics: prediction length mismatch");
        }
    }
    const auto r = static_cast<double>(predictions.size());
    Metrics m;
    for (std::size_t i = 0; i < points; ++i) {
        // Errors are taken relative to the first trial's so identical errors give exactly zero variance.
        const double ref = predictions.front()[i] - truths.front()[i];
        double shift = 0.0;
        double abs_err = 0.0;
        double sq_err = 0.0;
        for (std::size_t k = 0; k < predictions.size(); ++k) {
            const double e = predictions[k][i] - truths[k][i];
            shift += e - ref;
            abs_err += std::abs(e);
            sq_err += e * e;
        }
        shift /= r;
        double var = 0.0;
        for (std::size_t k = 0; k < predictions.size(); ++k) {
            const double d = predictions[k][i] - truths[k][i] - ref - shift;
            var += d * d;
        }
        m.bias += abs_err / r;
        m.variance += var / r;
        m.mse += sq_err / r;
    }
    const auto p = static_cast<double>(points);
    m.bias /= p;
    m.variance /= p;
    m.mse /= p;
    return m;
}

std::vector<SummaryRow> summarize(const std::vector<CurveRecord>& curves) {
    struct Group {
        int first_trial = 0;
        std::vector<double> xs;
        std::map<int, std::map<double, std::pair<double, double>>> by_trial;  // trial -> x -> (prediction, truth)
    };
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, Group> groups;
    for (const auto& c : curves) {
        const auto key = std::make_pair(c.estimator, c.domain);
        auto it = groups.find(key);
        if (it == groups.end()) {
            order.push_back(key);
            it = groups.emplace(key, Group{}).first;
            it->second.first_trial = c.trial;
        }
        Group& g = it->second;
        if (!g.by_trial[c.trial].emplace(c.x, std::make_pair(c.prediction, c.truth)).second) {
            throw std::invalid_argument("summarize: duplicate curve record for " + c.estimator + "/" + c.domain);
        }
        if (c.trial == g.first_trial) g.xs.push_back(c.x);
    }
    std::vector<SummaryRow> rows;
    for (const auto& key : order) {
        const Group& g = groups.at(key);
        std::vector<std::vector<double>> preds;
        std::vector<std::vector<double>> truths;
        for (const auto& [trial, cell] : g.by_trial) {
            if (cell.size() != g.xs.size()) {
                throw std::invalid_argument("summarize: trial " + std::to_string(trial) + " of " + key.first + "/" +
                                            key.second + " has a different set of evaluation points");
            }
            std::vector<double> row;
            std::vector<double> truth;
            for (double x : g.xs) {
                const auto hit = cell.find(x);
                if (hit == cell.end()) throw std::invalid_argument("summarize: mismatched evaluation points");
                row.push_back(hit->second.first);
                truth.push_back(hit->second.second);
            }
            preds.push_back(std::move(row));
            truths.push_back(std::move(truth));
        }
        rows.push_back({key.first, key.second, pointwise_metrics(preds, truths)});
    }
    return rows;
}

const SummaryRow* MonteCarloReport::find(const std::string& estimator, const std::string& domain) const {
    for (const auto& r : summary) {
        if (r.estimator == estimator && r.domain == domain) return &r;
    }
    return nullptr;
}

std::string summary_csv(const MonteCarloReport& report) {
    std::string out = "experiment,scenario,estimator,domain,bias,variance,mse,trials,seed\n";
    for (const auto& r : report.summary) {
        out += report.experiment + "," + std::to_string(report.scenario) + "," + r.estimator + "," + r.domain + "," +
               format_number(r.metrics.bias) + "," + format_number(r.metrics.variance) + "," +
               format_number(r.metrics.mse) + "," + std::to_string(report.trials) + "," + std::to_string(report.seed) +
               "\n";
    }
    return out;
}

std::string curves_csv(const MonteCarloReport& report) {
    std::string out = "trial,estimator,domain,x,truth,prediction\n";
    for (const auto& c : report.curves) {
        out += std::to_string(c.trial) + "," + c.estimator + "," + c.domain + "," + format_number(c.x) + "," +
               format_number(c.truth) + "," + format_number(c.prediction) + "\n";
    }
    return out;
}

std::string report_json(const MonteCarloReport& report) {
    json j;
    j["experiment"] = report.experiment;
    j["scenario"] = report.scenario;
    j["trials"] = report.trials;
    j["seed"] = report.seed;
    j["metadata"] = {{"version", report.version}, {"wall_seconds", report.wall_seconds}};
    j["config"] = json::parse(report.config_snapshot.empty() ? "null" : report.config_snapshot);
    json summary = json::array();
    for (const auto& r : report.summary) {
        summary.push_back({{"estimator", r.estimator},
                           {"domain", r.domain},
                           {"bias", r.metrics.bias},
                           {"variance", r.metrics.variance},
                           {"mse", r.metrics.mse}});
    }
    j["summary"] = summary;
    json curves = json::array();
    for (const auto& c : report.curves) {
        curves.push_back({{"trial", c.trial},
                          {"estimator", c.estimator},
                          {"domain", c.domain},
                          {"x", c.x},
                          {"truth", c.truth},
                          {"prediction", c.prediction}});
    }
    j["curves"] = curves;
    j["diagnostics"] = report.diagnostics;
    j["notes"] = report.notes;
    return j.dump(2) + "\n";
}

MonteCarloReport parse_report_json(const std::string& text) {
    const json j = json::parse(text);
    MonteCarloReport r;
    r.experiment = j.at("experiment").get<std::string>();
    r.scenario = j.at("scenario").get<int>();
    r.trials = j.at("trials").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.version = j.at("metadata").at("version").get<std::string>();
    r.wall_seconds = j.at("metadata").at("wall_seconds").get<double>();
    r.config_snapshot = j.at("config").is_null() ? std::string() : j.at("config").dump();
    for (const auto& s : j.at("summary")) {
        r.summary.push_back({s.at("estimator").get<std::string>(),
                             s.at("domain").get<std::string>(),
                             {s.at("bias").get<double>(), s.at("variance").get<double>(), s.at("mse").get<double>()}});
    }
    for (const auto& c : j.at("curves")) {
        r.curves.push_back({c.at("trial").get<int>(), c.at("estimator").get<std::string>(),
                            c.at("domain").get<std::string>(), c.at("x").get<double>(), c.at("truth").get<double>(),
                            c.at("prediction").get<double>()});
    }
    r.diagnostics = j.at("diagnostics").get<std::map<std::string, std::vector<double>>>();
    r.notes = j.at("notes").get<std::vector<std::string>>();
    return r;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
    out.close();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void emit_outputs(const MonteCarloReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::vector<std::pair<std::string, std::string>> files = {
        {"summary.csv", summary_csv(report)},
        {"curves.csv", curves_csv(report)},
        {"config.snapshot", report.config_snapshot + "\n"},
        {"report.json", report_json(report)},
    };
    std::vector<std::filesystem::path> written;
    try {
        for (const auto& [name, content] : files) {
            const auto path = out_dir / name;
            written.push_back(path);
            write_file(path, content);
        }
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) std::filesystem::remove(p, ec);
        throw;
    }
}

}  // namespace structreg
