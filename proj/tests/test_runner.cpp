#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "structreg/runner.hpp"

using namespace structreg;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig small(const std::string& experiment, int scenario) {
    RunConfig c;
    c.experiment = experiment;
    c.scenario = scenario;
    c.trials = 3;
    c.base_seed = 99;
    c.ddc.firms = 300;
    c.ddc.t_total = 120;
    c.ddc.t_train = 60;
    c.entry_exit.synthetic_firms = 300;
    c.demand.markets = 400;
    c.demand_settings.pilot_markets = 5000;
    c.auction.auctions = 60;
    return c;
}

struct ThreadsGuard {
    explicit ThreadsGuard(const char* v) { setenv("SRE_THREADS", v, 1); }
    ~ThreadsGuard() { unsetenv("SRE_THREADS"); }
};

}  // namespace

TEST_CASE("worker count honours SRE_THREADS and the trial count") {
    {
        ThreadsGuard g("3");
        CHECK(worker_count(10) == 3);
        CHECK(worker_count(2) == 2);
    }
    {
        ThreadsGuard g("junk");
        CHECK(worker_count(1) == 1);
        CHECK(worker_count(1000) >= 1);
    }
}

TEST_CASE("reruns write identical CSVs for every experiment") {
    const auto root = std::filesystem::temp_directory_path() / "structreg_runner_det";
    std::filesystem::remove_all(root);
    for (const auto& [exp, scenario] : std::vector<std::pair<std::string, int>>{
             {"auction", 3}, {"entry-exit", 2}, {"demand", 4}}) {
        CAPTURE(exp);
        RunConfig c = small(exp, scenario);
        c.output_dir = (root / (exp + "_a")).string();
        const MonteCarloReport a = run_and_emit(c);
        MonteCarloReport b;
        {
            // a different worker count must not change anything
            ThreadsGuard g("2");
            c.output_dir = (root / (exp + "_b")).string();
            b = run_and_emit(c);
        }
        for (const char* f : {"summary.csv", "curves.csv"}) {
            CAPTURE(f);
            CHECK(slurp(root / (exp + "_a") / f) == slurp(root / (exp + "_b") / f));
        }
        CHECK(a.summary.size() == (exp == "demand" ? 3u : 6u));
        CHECK(a.summary == b.summary);
        CHECK(a.trials == 3);
        CHECK(summarize(a.curves) == a.summary);
        CHECK(canonical_json(parse_config(a.config_snapshot)) == a.config_snapshot);
        CHECK_FALSE(a.notes.empty());
    }
    std::filesystem::remove_all(root);
}

TEST_CASE("estimator filter keeps only the requested curves") {
    RunConfig c = small("demand", 1);
    c.trials = 1;
    c.estimators = {"sre"};
    const MonteCarloReport r = run_monte_carlo(c);
    REQUIRE(r.summary.size() == 1);
    CHECK(r.summary[0].estimator == "sre");
    CHECK(r.find("structural", "in") == nullptr);
}

TEST_CASE("a failing trial names itself and leaves no output") {
    const auto out = std::filesystem::temp_directory_path() / "structreg_runner_fail";
    std::filesystem::remove_all(out);
    RunConfig c = small("demand", 1);
    c.demand.b = 0.0;
    c.output_dir = out.string();
    CHECK_THROWS_WITH(run_and_emit(c), doctest::Contains("trial 1"));
    CHECK_FALSE(std::filesystem::exists(out));
}

TEST_CASE("invalid config is rejected before any work") {
    RunConfig c = small("auction", 1);
    c.trials = 0;
    CHECK_THROWS_AS(run_monte_carlo(c), ConfigError);
}
