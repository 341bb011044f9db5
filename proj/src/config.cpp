#include "structreg/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <variant>

#include "json.hpp"

namespace structreg {

using nlohmann::json;

namespace {

template <class S>
struct Field {
    const char* key;
    std::variant<double S::*, int S::*, long S::*, bool S::*, std::size_t S::*> member;
};

const std::vector<Field<CvConfig>>& cv_fields() {
    static const std::vector<Field<CvConfig>> f = {
        {"folds", &CvConfig::folds},
        {"forward_fraction", &CvConfig::forward_fraction},
        {"window_length", &CvConfig::window_length},
        {"horizon", &CvConfig::horizon},
    };
    return f;
}

const std::vector<Field<AuctionConfig>>& auction_fields() {
    static const std::vector<Field<AuctionConfig>> f = {
        {"auctions", &AuctionConfig::auctions},
        {"overbid_sigma", &AuctionConfig::overbid_sigma},
        {"max_aic_degree", &AuctionConfig::max_aic_degree},
        {"sre_degree", &AuctionConfig::sre_degree},
        {"degree_weights", &AuctionConfig::degree_weights},
    };
    return f;
}

const std::vector<Field<DdcParams>>& ddc_fields() {
    static const std::vector<Field<DdcParams>> f = {
        {"mu", &DdcParams::mu},         {"alpha", &DdcParams::alpha},     {"entry_cost", &DdcParams::entry_cost},
        {"beta", &DdcParams::beta},     {"firms", &DdcParams::firms},     {"t_total", &DdcParams::t_total},
        {"t_train", &DdcParams::t_train},
    };
    return f;
}

const std::vector<Field<ProfitLaw>>& profit_fields() {
    static const std::vector<Field<ProfitLaw>> f = {
        {"r0", &ProfitLaw::r0}, {"slope", &ProfitLaw::slope}, {"ar", &ProfitLaw::ar}, {"sd", &ProfitLaw::sd}};
    return f;
}

const std::vector<Field<EntryExitSettings>>& ee_fields() {
    static const std::vector<Field<EntryExitSettings>> f = {
        {"max_p", &EntryExitSettings::max_p},
        {"max_q", &EntryExitSettings::max_q},
        {"sre_p", &EntryExitSettings::sre_p},
        {"sre_q", &EntryExitSettings::sre_q},
        {"first_period", &EntryExitSettings::first_period},
        {"eval_start", &EntryExitSettings::eval_start},
        {"synthetic_firms", &EntryExitSettings::synthetic_firms},
        {"cache_step", &EntryExitSettings::cache_step},
    };
    return f;
}

const std::vector<Field<DemandParams>>& demand_fields() {
    static const std::vector<Field<DemandParams>> f = {
        {"alpha", &DemandParams::alpha},     {"beta", &DemandParams::beta},
        {"a", &DemandParams::a},             {"b", &DemandParams::b},
        {"z_lower", &DemandParams::z_lower}, {"z_upper", &DemandParams::z_upper},
        {"epsilon_sd", &DemandParams::epsilon_sd}, {"markets", &DemandParams::markets},
    };
    return f;
}

const std::vector<Field<DemandSettings>>& demand_settings_fields() {
    static const std::vector<Field<DemandSettings>> f = {
        {"nonoptimal_markup", &DemandSettings::nonoptimal_markup},
        {"min_first_stage_f", &DemandSettings::min_first_stage_f},
        {"grid_points", &DemandSettings::grid_points},
        {"pilot_markets", &DemandSettings::pilot_markets},
    };
    return f;
}

const std::vector<Field<DemandSreOptions>>& demand_sre_fields() {
    static const std::vector<Field<DemandSreOptions>> f = {
        {"g_degree", &DemandSreOptions::g_degree},
        {"instrument_degree", &DemandSreOptions::instrument_degree},
    };
    return f;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config key '" + path + "': " + what);
}

template <class T>
T read_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return v.get<T>();
        if (v.get<long long>() < 0) fail(path, "expected a nonnegative integer");
    }
    return v.get<T>();
}

double read_double(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

template <class S>
void read_fields(const json& obj, const std::vector<Field<S>>& fields, S& target, const std::string& prefix) {
    for (const auto& f : fields) {
        const auto it = obj.find(f.key);
        if (it == obj.end()) continue;
        const std::string path = prefix + f.key;
        std::visit(
            [&](auto member) {
                using T = std::remove_reference_t<decltype(target.*member)>;
                if constexpr (std::is_same_v<T, bool>) {
                    if (!it->is_boolean()) fail(path, "expected true or false");
                    target.*member = it->template get<bool>();
                } else if constexpr (std::is_same_v<T, double>) {
                    target.*member = read_double(*it, path);
                } else {
                    target.*member = read_integer<T>(*it, path);
                }
            },
            f.member);
    }
}

template <class S>
void write_fields(json& obj, const std::vector<Field<S>>& fields, const S& source) {
    for (const auto& f : fields) {
        std::visit([&](auto member) { obj[f.key] = source.*member; }, f.member);
    }
}

void reject_unknown(const json& obj, const std::vector<std::string>& allowed, const std::string& prefix) {
    if (!obj.is_object()) fail(prefix.empty() ? "<root>" : prefix.substr(0, prefix.size() - 1), "expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError("unknown config key: " + prefix + key);
        }
    }
}

template <class S>
std::vector<std::string> keys_of(const std::vector<Field<S>>& fields) {
    std::vector<std::string> out;
    for (const auto& f : fields) out.emplace_back(f.key);
    return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"auction", "entry-exit", "demand"};
    return names;
}

const std::vector<std::string>& estimator_names(const std::string& experiment) {
    static const std::vector<std::string> stat = {"statistical", "structural", "sre"};
    static const std::vector<std::string> demand = {"reduced_form", "structural", "sre"};
    if (experiment == "auction" || experiment == "entry-exit") return stat;
    if (experiment == "demand") return demand;
    throw ConfigError("unknown experiment: " + experiment);
}

int scenario_count(const std::string& experiment) {
    if (experiment == "auction" || experiment == "entry-exit") return 3;
    if (experiment == "demand") return 4;
    throw ConfigError("unknown experiment: " + experiment);
}

std::string scenario_label(const std::string& experiment, int scenario) {
    if (scenario < 1 || scenario > scenario_count(experiment)) {
        throw ConfigError("scenario " + std::to_string(scenario) + " out of range for " + experiment);
    }
    if (experiment == "auction") {
        static const char* labels[] = {"uniform values", "Beta(2,5) values", "uniform values with overbidding"};
        return labels[scenario - 1];
    }
    if (experiment == "entry-exit") {
        static const char* labels[] = {"rational (perfect foresight)", "adaptive", "myopic"};
        return labels[scenario - 1];
    }
    static const char* labels[] = {"optimal pricing, linear reduced form", "non-optimal pricing, linear reduced form",
                                   "optimal pricing, log-log reduced form",
                                   "non-optimal pricing, log-log reduced form"};
    return labels[scenario - 1];
}

void RunConfig::validate() const {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), experiment) == names.end()) {
        throw ConfigError("config key 'experiment': unknown experiment '" + experiment + "'");
    }
    if (scenario < 1 || scenario > scenario_count(experiment)) {
        throw ConfigError("config key 'scenario': must be 1.." + std::to_string(scenario_count(experiment)) + " for " +
                          experiment);
    }
    if (trials < 1) throw ConfigError("config key 'trials': must be >= 1");
    const auto& known = estimator_names(experiment);
    for (const auto& e : estimators) {
        if (std::find(known.begin(), known.end(), e) == known.end()) {
            throw ConfigError("config key 'estimators': unknown estimator '" + e + "' for " + experiment);
        }
    }
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!std::isfinite(lambda_grid[i]) || lambda_grid[i] < 0.0 || (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1]))) {
            throw ConfigError("config key 'lambda_grid': must be nonnegative and strictly increasing");
        }
    }
    if (cv.folds < 2) throw ConfigError("config key 'cv.folds': must be >= 2");
    if (!(cv.forward_fraction >= 0.0 && cv.forward_fraction < 1.0)) {
        throw ConfigError("config key 'cv.forward_fraction': must lie in [0, 1)");
    }
    if (cv.horizon < 1) throw ConfigError("config key 'cv.horizon': must be >= 1");
    if (auction.auctions < 10) throw ConfigError("config key 'auction.auctions': must be >= 10");
    if (!(auction.overbid_sigma > 0.0)) throw ConfigError("config key 'auction.overbid_sigma': must be positive");
    if (auction.max_aic_degree < 1 || auction.sre_degree < 1) {
        throw ConfigError("config key 'auction': polynomial degrees must be >= 1");
    }
    try {
        ddc.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config block 'entry_exit': ") + e.what());
    }
    if (!(profit.sd >= 0.0)) throw ConfigError("config key 'entry_exit.sd': must be >= 0");
    if (entry_exit.max_p < 1 || entry_exit.max_q < 1 || entry_exit.sre_p < 1 || entry_exit.sre_q < 1) {
        throw ConfigError("config block 'entry_exit': ARX orders must be >= 1");
    }
    if (entry_exit.first_period <= std::max(entry_exit.max_q, entry_exit.sre_q)) {
        throw ConfigError("config key 'entry_exit.first_period': must exceed the largest lag order");
    }
    if (entry_exit.eval_start < entry_exit.first_period || entry_exit.eval_start > ddc.t_train) {
        throw ConfigError("config key 'entry_exit.eval_start': must lie in [first_period, t_train]");
    }
    if (entry_exit.synthetic_firms < 1) throw ConfigError("config key 'entry_exit.synthetic_firms': must be >= 1");
    if (!(entry_exit.cache_step >= 0.0)) throw ConfigError("config key 'entry_exit.cache_step': must be >= 0");
    try {
        DemandParams d = demand;
        d.validate();
        d.lambda_markup = demand_settings.nonoptimal_markup;
        d.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config block 'demand': ") + e.what());
    }
    if (demand_settings.sre.g_degree < 1 || demand_settings.sre.instrument_degree < demand_settings.sre.g_degree) {
        throw ConfigError("config block 'demand': need 1 <= g_degree <= instrument_degree");
    }
    if (demand_settings.grid_points < 2) throw ConfigError("config key 'demand.grid_points': must be >= 2");
    if (demand_settings.pilot_markets < 100) throw ConfigError("config key 'demand.pilot_markets': must be >= 100");
    if (output_dir.empty()) throw ConfigError("config key 'output_dir': must not be empty");
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j, {"experiment", "scenario", "trials", "base_seed", "estimators", "lambda_grid", "cv", "auction",
                       "entry_exit", "demand", "output_dir"},
                   "");
    RunConfig c;
    try {
        if (j.contains("experiment")) {
            if (!j["experiment"].is_string()) fail("experiment", "expected a string");
            c.experiment = j["experiment"].get<std::string>();
        }
        if (j.contains("scenario")) c.scenario = read_integer<int>(j["scenario"], "scenario");
        if (j.contains("trials")) c.trials = read_integer<int>(j["trials"], "trials");
        if (j.contains("base_seed")) c.base_seed = read_integer<std::uint64_t>(j["base_seed"], "base_seed");
        if (j.contains("estimators")) {
            if (!j["estimators"].is_array()) fail("estimators", "expected an array of strings");
            for (const auto& e : j["estimators"]) {
                if (!e.is_string()) fail("estimators", "expected an array of strings");
                c.estimators.push_back(e.get<std::string>());
            }
        }
        if (j.contains("lambda_grid")) {
            if (!j["lambda_grid"].is_array()) fail("lambda_grid", "expected an array of numbers");
            for (const auto& v : j["lambda_grid"]) c.lambda_grid.push_back(read_double(v, "lambda_grid"));
        }
        if (j.contains("output_dir")) {
            if (!j["output_dir"].is_string()) fail("output_dir", "expected a string");
            c.output_dir = j["output_dir"].get<std::string>();
        }
        if (j.contains("cv")) {
            reject_unknown(j["cv"], keys_of(cv_fields()), "cv.");
            read_fields(j["cv"], cv_fields(), c.cv, "cv.");
        }
        if (j.contains("auction")) {
            reject_unknown(j["auction"], keys_of(auction_fields()), "auction.");
            read_fields(j["auction"], auction_fields(), c.auction, "auction.");
        }
        if (j.contains("entry_exit")) {
            const json& e = j["entry_exit"];
            reject_unknown(e, concat(concat(keys_of(ddc_fields()), keys_of(profit_fields())), keys_of(ee_fields())),
                           "entry_exit.");
            read_fields(e, ddc_fields(), c.ddc, "entry_exit.");
            read_fields(e, profit_fields(), c.profit, "entry_exit.");
            read_fields(e, ee_fields(), c.entry_exit, "entry_exit.");
        }
        if (j.contains("demand")) {
            const json& d = j["demand"];
            reject_unknown(d,
                           concat(concat(keys_of(demand_fields()), keys_of(demand_settings_fields())),
                                  keys_of(demand_sre_fields())),
                           "demand.");
            read_fields(d, demand_fields(), c.demand, "demand.");
            read_fields(d, demand_settings_fields(), c.demand_settings, "demand.");
            read_fields(d, demand_sre_fields(), c.demand_settings.sre, "demand.");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string canonical_json(const RunConfig& c) {
    json j;
    j["experiment"] = c.experiment;
    j["scenario"] = c.scenario;
    j["trials"] = c.trials;
    j["base_seed"] = c.base_seed;
    j["estimators"] = c.estimators;
    j["lambda_grid"] = c.lambda_grid;
    j["output_dir"] = c.output_dir;
    json cv = json::object();
    write_fields(cv, cv_fields(), c.cv);
    j["cv"] = cv;
    json auction = json::object();
    write_fields(auction, auction_fields(), c.auction);
    j["auction"] = auction;
    json ee = json::object();
    write_fields(ee, ddc_fields(), c.ddc);
    write_fields(ee, profit_fields(), c.profit);
    write_fields(ee, ee_fields(), c.entry_exit);
    j["entry_exit"] = ee;
    json demand = json::object();
    write_fields(demand, demand_fields(), c.demand);
    write_fields(demand, demand_settings_fields(), c.demand_settings);
    write_fields(demand, demand_sre_fields(), c.demand_settings.sre);
    j["demand"] = demand;
    return j.dump();
}

}  // namespace structreg
