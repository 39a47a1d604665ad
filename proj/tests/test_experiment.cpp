#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "risres/experiment.hpp"

using namespace risres;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("risres_test_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentSpec small_spec(const fs::path& out) {
    ExperimentSpec s;
    s.system.num_aps = 2;
    s.system.antennas_per_ap = 2;
    s.system.num_users = 4;
    s.system.num_ris_elements = 16;
    s.system.per_subproblem_time_s = 0.05;
    s.methods = {Method::Proposed, Method::Baseline};
    s.seeds = {1, 2};
    s.ris_sweep = {4, 9};
    s.output_dir = out;
    s.threads = 1;
    return s;
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    return lines;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RISRES_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Seeds, ParseLists) {
    EXPECT_EQ(parse_seed_list("1-3"), (std::vector<std::uint64_t>{1, 2, 3}));
    EXPECT_EQ(parse_seed_list("1,4,9"), (std::vector<std::uint64_t>{1, 4, 9}));
    EXPECT_EQ(parse_seed_list("1-2, 7"), (std::vector<std::uint64_t>{1, 2, 7}));
    EXPECT_EQ(parse_seed_list("5").size(), 1u);
    EXPECT_THROW(parse_seed_list(""), ConfigError);
    EXPECT_THROW(parse_seed_list("3-1"), ConfigError);
    EXPECT_THROW(parse_seed_list("a,b"), ConfigError);
    EXPECT_THROW(parse_seed_list("-2"), ConfigError);
}

TEST(Config, DefaultsAndRoundTrip) {
    const auto spec = spec_from_json(nlohmann::json::object());
    EXPECT_EQ(spec.seeds.size(), 20u);
    EXPECT_EQ(spec.system.num_ris_elements, 100);
    EXPECT_EQ(spec.methods.size(), 3u);
    const auto back = spec_from_json(spec_to_json(spec));
    EXPECT_EQ(spec_to_json(back), spec_to_json(spec));
    EXPECT_EQ(config_hash(back), config_hash(spec));
}

TEST(Config, DbmInputMatchesWatts) {
    nlohmann::json j = {{"system", {{"noise_power_dbm", -100.0}, {"max_tx_power_dbm", 30.0}}}};
    const auto spec = spec_from_json(j);
    EXPECT_NEAR(spec.system.noise_power_w, 1e-13, 1e-27);
    EXPECT_NEAR(spec.system.max_tx_power_w, 1.0, 1e-15);
    nlohmann::json both = {{"system", {{"noise_power_dbm", -100.0}, {"noise_power_w", 1e-13}}}};
    EXPECT_THROW(spec_from_json(both), ConfigError);
}

TEST(Config, HashIgnoresOutputAndThreads) {
    auto a = spec_from_json(nlohmann::json::object());
    auto b = a;
    b.output_dir = "elsewhere";
    b.threads = 7;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.seeds = {1, 2};
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 64u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(spec_from_json({{"sytem", nlohmann::json::object()}}), ConfigError);
    EXPECT_THROW(spec_from_json({{"system", {{"num_ap", 2}}}}), ConfigError);
    EXPECT_THROW(spec_from_json({{"experiment", {{"methods", {"greedy"}}}}}), ConfigError);
    EXPECT_THROW(spec_from_json({{"system", {{"num_aps", "two"}}}}), ConfigError);
    auto s = spec_from_json({{"system", {{"num_ris_elements", 50}}}});
    EXPECT_THROW(s.validate(), ConfigError);
    auto t = spec_from_json({{"metric", {{"lambda", {0.5, 0.5, 0.5}}}}});
    EXPECT_THROW(t.validate(), ConfigError);
    EXPECT_THROW(load_spec("/nonexistent/config.json"), ConfigError);
}

TEST(Config, EnvironmentOverrides) {
    auto spec = spec_from_json(nlohmann::json::object());
    ::setenv("RISRES_SEEDS", "3,5", 1);
    ::setenv("RISRES_OUT", "/tmp/risres_env_out", 1);
    apply_env_overrides(spec);
    ::unsetenv("RISRES_SEEDS");
    ::unsetenv("RISRES_OUT");
    EXPECT_EQ(spec.seeds, (std::vector<std::uint64_t>{3, 5}));
    EXPECT_EQ(spec.output_dir, fs::path("/tmp/risres_env_out"));
}

TEST(Hashing, KnownDigest) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

class AdaptationRun : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new fs::path(scratch("adapt"));
        result_ = new ExperimentResult(run_adaptation_experiment(small_spec(*dir_)));
    }
    static void TearDownTestSuite() {
        fs::remove_all(*dir_);
        delete result_;
        delete dir_;
    }
    static fs::path* dir_;
    static ExperimentResult* result_;
};
fs::path* AdaptationRun::dir_ = nullptr;
ExperimentResult* AdaptationRun::result_ = nullptr;

TEST_F(AdaptationRun, ThreeEventsPerRun) {
    ASSERT_EQ(result_->runs.size(), 4u);
    for (const auto& r : result_->runs) {
        EXPECT_EQ(r.reports.size(), 3u);
        EXPECT_EQ(r.blocked_users.size(), 3u);
        EXPECT_EQ(std::set<int>(r.blocked_users.begin(), r.blocked_users.end()).size(), 3u);
        EXPECT_EQ(r.steps, 4 * 4);
        for (const auto& rep : r.reports) {
            EXPECT_GE(rep.score, 0.0);
            EXPECT_LE(rep.score, 1.0 + 1e-9);
            EXPECT_GE(rep.tq, rep.t0);
        }
    }
    EXPECT_EQ(result_->exit_code(), 0);
}

TEST_F(AdaptationRun, BlockedUsersPairedAcrossMethods) {
    std::map<std::uint64_t, std::vector<int>> by_seed;
    for (const auto& r : result_->runs) {
        auto [it, fresh] = by_seed.emplace(r.seed, r.blocked_users);
        if (!fresh) EXPECT_EQ(it->second, r.blocked_users);
    }
}

TEST_F(AdaptationRun, TablesHaveSchemaAndColumns) {
    const auto table = read_lines(*dir_ / "adaptation.csv");
    ASSERT_GE(table.size(), 2u);
    EXPECT_EQ(table[0], "# schema risres-adaptation/1");
    EXPECT_EQ(table[1],
              "method,seed,num_ris_elements,blockage,blocked_user,t0_s,tq_s,recovered,r_abs_raw,r_ada_raw,r_abs,r_ada,"
              "r_rec,r,steps,solver_failures");
    EXPECT_EQ(table.size(), 2u + 4 * 3);
    for (std::size_t i = 2; i < table.size(); ++i) EXPECT_EQ(split(table[i]).size(), 16u);

    const auto tl = read_lines(*dir_ / "timelines" / "proposed_seed0001.csv");
    ASSERT_GE(tl.size(), 2u);
    EXPECT_EQ(tl[0], "# schema risres-timeline/1");
    EXPECT_EQ(tl[1],
              "iteration,time_s,stage,event,onset,blocked_user,gap,objective,status,step_fraction,alpha_v,"
              "rate_bps_1,rate_bps_2,rate_bps_3,rate_bps_4");
    EXPECT_EQ(tl.size(), 2u + 16);
    int onsets = 0;
    for (std::size_t i = 2; i < tl.size(); ++i) {
        const auto f = split(tl[i]);
        ASSERT_EQ(f.size(), 15u);
        onsets += std::stoi(f[4]);
    }
    EXPECT_EQ(onsets, 3);
}

TEST_F(AdaptationRun, ManifestListsEveryFile) {
    const auto m = read_json(*dir_ / "manifest.json");
    EXPECT_EQ(m["schema"], "risres-manifest/1");
    EXPECT_EQ(m["kind"], "adaptation");
    EXPECT_EQ(m["config_hash"], config_hash(small_spec(*dir_)));
    EXPECT_FALSE(m["config"]["experiment"].contains("output_dir"));
    std::set<std::string> listed;
    for (const auto& f : m["files"]) listed.insert(f["path"].get<std::string>());
    std::set<std::string> on_disk;
    for (const auto& e : fs::recursive_directory_iterator(*dir_))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            on_disk.insert(fs::relative(e.path(), *dir_).generic_string());
    EXPECT_EQ(listed, on_disk);
    EXPECT_TRUE(verify_manifest(*dir_ / "manifest.json").ok());
}

TEST_F(AdaptationRun, RerunReproducesAndTamperIsDetected) {
    const fs::path again = scratch("adapt_rerun");
    const auto rep = rerun_manifest(*dir_ / "manifest.json", again);
    EXPECT_TRUE(rep.ok());
    EXPECT_EQ(run_cli("verify " + (again / "manifest.json").string()), 0);

    {
        std::ofstream out(again / "adaptation.csv", std::ios::app);
        out << "x\n";
    }
    fs::remove(again / "timelines" / "baseline_seed0002.csv");
    const auto bad = verify_manifest(again / "manifest.json");
    EXPECT_EQ(bad.mismatched, std::vector<std::string>{"adaptation.csv"});
    EXPECT_EQ(bad.missing, std::vector<std::string>{"timelines/baseline_seed0002.csv"});
    EXPECT_EQ(run_cli("verify " + (again / "manifest.json").string()), 1);
    fs::remove_all(again);
}

TEST(ScalingRun, RowsAndRanges) {
    const fs::path dir = scratch("scale");
    auto spec = small_spec(dir);
    spec.seeds = {1};
    const auto res = run_scaling_experiment(spec);
    EXPECT_EQ(res.runs.size(), 4u);
    const auto lines = read_lines(dir / "scaling.csv");
    ASSERT_GE(lines.size(), 2u);
    EXPECT_EQ(lines[0], "# schema risres-scaling/1");
    EXPECT_EQ(lines[1], "kind,num_ris_elements,method,seed,count,blockage,r_abs_raw,r_ada_raw,r_abs,r_ada,r_rec,r,r_ci95,"
                        "solver_failures");
    int runs = 0, means = 0;
    for (std::size_t i = 2; i < lines.size(); ++i) {
        const auto f = split(lines[i]);
        ASSERT_EQ(f.size(), 14u);
        (f[0] == "run" ? runs : means)++;
        const double r = std::stod(f[11]);
        EXPECT_GE(r, 0.0);
        EXPECT_LE(r, 1.0 + 1e-9);
        EXPECT_EQ(f[5], "2");
    }
    EXPECT_EQ(runs, 4);
    EXPECT_EQ(means, 4);
    const auto m = read_json(dir / "manifest.json");
    EXPECT_EQ(m["kind"], "scaling");
    EXPECT_EQ(m["files"].size(), 1u);
    fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run_cli("config"), 0);
    EXPECT_EQ(run_cli(""), 2);
    EXPECT_EQ(run_cli("adapt --config /nonexistent.json"), 2);
    EXPECT_EQ(run_cli("adapt --method greedy --seeds 1 --out /tmp/risres_cli_x"), 2);
    EXPECT_EQ(run_cli("adapt --seeds 3-1 --out /tmp/risres_cli_x"), 2);
    const fs::path cfg = scratch("cli_cfg.json");
    {
        std::ofstream out(cfg);
        out << R"({"system": {"num_ap": 2}})";
    }
    EXPECT_EQ(run_cli("adapt --config " + cfg.string()), 2);
    fs::remove(cfg);
    fs::remove_all("/tmp/risres_cli_x");
}

TEST(Cli, RunsSmallConfig) {
    const fs::path dir = scratch("cli_run");
    const fs::path cfg = scratch("cli_small.json");
    auto spec = small_spec(dir);
    spec.seeds = {4};
    {
        std::ofstream out(cfg);
        out << spec_to_json(spec).dump();
    }
    EXPECT_EQ(run_cli("adapt -q --config " + cfg.string() + " --method proposed"), 0);
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    EXPECT_EQ(run_cli("verify " + (dir / "manifest.json").string()), 0);
    fs::remove(cfg);
    fs::remove_all(dir);
}
