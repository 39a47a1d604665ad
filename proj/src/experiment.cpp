#include "risres/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "risres/channel.hpp"
#include "risres/geometry.hpp"

#ifndef RISRES_VERSION
#define RISRES_VERSION "0.0.0"
#endif

namespace risres {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items())
        if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

void read_dbm(const json& j, const char* key, double& watts) {
    if (!j.contains(key)) return;
    double dbm = 0.0;
    read(j, key, dbm);
    watts = dbm_to_watt(dbm);
}

const char* ris_mode_name(RisChannelMode m) {
    return m == RisChannelMode::LineOfSight ? "los" : "correlated-rayleigh";
}

RisChannelMode parse_ris_mode(const std::string& s) {
    if (s == "los") return RisChannelMode::LineOfSight;
    if (s == "correlated-rayleigh") return RisChannelMode::CorrelatedRayleigh;
    throw ConfigError("unknown ris_channel_mode '" + s + "'");
}

SystemConfig system_from_json(const json& j) {
    check_keys(j, "system",
               {"num_aps", "antennas_per_ap", "num_users", "num_ris_elements", "bandwidth_hz",
                "noise_power_dbm", "max_tx_power_dbm", "noise_power_w", "max_tx_power_w", "wavelength_m", "coherence_time_s",
                "desired_recovery_time_s", "per_subproblem_time_s", "qos_rates_bps", "area_half_width_m",
                "user_circle_radius_m", "ap_height_m", "ris_height_m", "user_height_m", "shadowing_std_db",
                "pathloss_ref_db", "pathloss_exponent_direct", "pathloss_exponent_ris", "ris_channel_mode"});
    SystemConfig c;
    read(j, "num_aps", c.num_aps);
    read(j, "antennas_per_ap", c.antennas_per_ap);
    read(j, "num_users", c.num_users);
    read(j, "num_ris_elements", c.num_ris_elements);
    read(j, "bandwidth_hz", c.bandwidth_hz);
    if (j.contains("noise_power_dbm") && j.contains("noise_power_w"))
        throw ConfigError("give noise power in dBm or in W, not both");
    if (j.contains("max_tx_power_dbm") && j.contains("max_tx_power_w"))
        throw ConfigError("give transmit power in dBm or in W, not both");
    read_dbm(j, "noise_power_dbm", c.noise_power_w);
    read_dbm(j, "max_tx_power_dbm", c.max_tx_power_w);
    read(j, "noise_power_w", c.noise_power_w);
    read(j, "max_tx_power_w", c.max_tx_power_w);
    read(j, "wavelength_m", c.wavelength_m);
    read(j, "coherence_time_s", c.coherence_time_s);
    read(j, "desired_recovery_time_s", c.desired_recovery_time_s);
    read(j, "per_subproblem_time_s", c.per_subproblem_time_s);
    if (j.contains("qos_rates_bps")) {
        if (j["qos_rates_bps"].is_number())
            c.qos_rates_bps = {j["qos_rates_bps"].get<double>()};
        else
            read(j, "qos_rates_bps", c.qos_rates_bps);
    }
    read(j, "area_half_width_m", c.area_half_width_m);
    read(j, "user_circle_radius_m", c.user_circle_radius_m);
    read(j, "ap_height_m", c.ap_height_m);
    read(j, "ris_height_m", c.ris_height_m);
    read(j, "user_height_m", c.user_height_m);
    read(j, "shadowing_std_db", c.shadowing_std_db);
    read(j, "pathloss_ref_db", c.pathloss_ref_db);
    read(j, "pathloss_exponent_direct", c.pathloss_exponent_direct);
    read(j, "pathloss_exponent_ris", c.pathloss_exponent_ris);
    if (j.contains("ris_channel_mode")) {
        std::string mode;
        read(j, "ris_channel_mode", mode);
        c.ris_channel_mode = parse_ris_mode(mode);
    }
    return c;
}

json system_to_json(const SystemConfig& c) {
    return {{"num_aps", c.num_aps},
            {"antennas_per_ap", c.antennas_per_ap},
            {"num_users", c.num_users},
            {"num_ris_elements", c.num_ris_elements},
            {"bandwidth_hz", c.bandwidth_hz},
            {"noise_power_w", c.noise_power_w},
            {"max_tx_power_w", c.max_tx_power_w},
            {"wavelength_m", c.wavelength_m},
            {"coherence_time_s", c.coherence_time_s},
            {"desired_recovery_time_s", c.desired_recovery_time_s},
            {"per_subproblem_time_s", c.per_subproblem_time_s},
            {"qos_rates_bps", c.qos_rates_bps},
            {"area_half_width_m", c.area_half_width_m},
            {"user_circle_radius_m", c.user_circle_radius_m},
            {"ap_height_m", c.ap_height_m},
            {"ris_height_m", c.ris_height_m},
            {"user_height_m", c.user_height_m},
            {"shadowing_std_db", c.shadowing_std_db},
            {"pathloss_ref_db", c.pathloss_ref_db},
            {"pathloss_exponent_direct", c.pathloss_exponent_direct},
            {"pathloss_exponent_ris", c.pathloss_exponent_ris},
            {"ris_channel_mode", ris_mode_name(c.ris_channel_mode)}};
}

ScaSettings sca_from_json(const json& j) {
    check_keys(j, "sca", {"rate_unit_bps", "recovery_eps", "backtracking_steps", "penalty", "solver"});
    ScaSettings s;
    read(j, "rate_unit_bps", s.rate_unit_bps);
    read(j, "recovery_eps", s.recovery_eps);
    read(j, "backtracking_steps", s.backtracking_steps);
    if (j.contains("penalty")) {
        const auto& p = j["penalty"];
        check_keys(p, "sca.penalty", {"initial", "growth", "max"});
        read(p, "initial", s.penalty.initial);
        read(p, "growth", s.penalty.growth);
        read(p, "max", s.penalty.max);
    }
    if (j.contains("solver")) {
        const auto& p = j["solver"];
        check_keys(p, "sca.solver", {"abs_gap_tol", "rel_gap_tol", "feas_tol", "max_newton_steps", "barrier_growth"});
        read(p, "abs_gap_tol", s.solver.abs_gap_tol);
        read(p, "rel_gap_tol", s.solver.rel_gap_tol);
        read(p, "feas_tol", s.solver.feas_tol);
        read(p, "max_newton_steps", s.solver.max_newton_steps);
        read(p, "barrier_growth", s.solver.barrier_growth);
    }
    return s;
}

json sca_to_json(const ScaSettings& s) {
    return {{"rate_unit_bps", s.rate_unit_bps},
            {"recovery_eps", s.recovery_eps},
            {"backtracking_steps", s.backtracking_steps},
            {"penalty", {{"initial", s.penalty.initial}, {"growth", s.penalty.growth}, {"max", s.penalty.max}}},
            {"solver",
             {{"abs_gap_tol", s.solver.abs_gap_tol},
              {"rel_gap_tol", s.solver.rel_gap_tol},
              {"feas_tol", s.solver.feas_tol},
              {"max_newton_steps", s.solver.max_newton_steps},
              {"barrier_growth", s.solver.barrier_growth}}}};
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

std::string seed_tag(std::uint64_t seed) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "seed%04llu", static_cast<unsigned long long>(seed));
    return buf;
}

const char* stage_name(Stage s) { return s == Stage::Beamforming ? "beamforming" : "phase"; }

// Runs jobs [0, n) on a small pool; the first exception is rethrown after all workers stop.
void parallel_for(int n, int threads, const std::function<void(int)>& job) {
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, std::max(n, 1));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
}

void write_timeline(const fs::path& path, const AlternatingOptimizer& opt, int users) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# schema " << kTimelineSchema << "\n";
    out << "iteration,time_s,stage,event,onset,blocked_user,gap,objective,status,step_fraction,alpha_v";
    for (int k = 0; k < users; ++k) out << ",rate_bps_" << k + 1;
    out << "\n";
    const auto& tl = opt.timeline();
    int last_event = 0;
    for (const auto& r : tl.records) {
        const bool onset = r.event != last_event;
        last_event = r.event;
        const int blocked = r.event > 0 ? tl.events[static_cast<std::size_t>(r.event - 1)].user + 1 : 0;
        out << r.iteration << ',' << fmt(r.time_s) << ',' << stage_name(r.stage) << ',' << r.event << ','
            << (onset ? 1 : 0) << ',' << blocked << ',' << fmt(r.gap) << ',' << fmt(r.objective) << ','
            << conic::status_name(r.status) << ',' << fmt(r.step_fraction) << ',' << fmt(r.alpha_v);
        for (Eigen::Index k = 0; k < r.rates.size(); ++k) out << ',' << fmt(r.rates(k));
        out << "\n";
    }
}

// One (method, seed, M) trajectory through `blockages` events.
RunRecord simulate(const ExperimentSpec& spec, Method method, std::uint64_t seed, int ris_elements,
                   int blockages, const fs::path& timeline_file, const std::string& timeline_rel) {
    SystemConfig cfg = spec.system;
    cfg.num_ris_elements = ris_elements;
    cfg.rng_seed = seed;
    auto channels = build_channel_state(build_geometry(cfg), cfg);
    AlternatingOptimizer opt(std::move(channels), cfg, method, spec.sca);
    opt.run_coherence_interval();
    RunRecord run;
    run.method = method;
    run.seed = seed;
    run.ris_elements = ris_elements;
    for (int b = 1; b <= blockages; ++b) {
        run.blocked_users.push_back(opt.blockage().user);
        opt.run_coherence_interval();
        run.reports.push_back(opt.report(b, spec.lambda));
    }
    run.steps = opt.steps();
    run.solver_failures = opt.solver_failures();
    if (!timeline_file.empty()) {
        write_timeline(timeline_file, opt, cfg.num_users);
        run.timeline_path = timeline_rel;
    }
    return run;
}

struct Moments {
    double mean = 0.0;
    double ci95 = 0.0;
};

// Mean and normal-approximation 95% half-width.
Moments moments(const std::vector<double>& xs) {
    Moments m;
    if (xs.empty()) return m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
        m.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(xs.size()));
    }
    return m;
}

json file_entry(const fs::path& root, const std::string& rel) {
    const fs::path p = root / rel;
    return {{"path", rel}, {"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}};
}

void write_manifest(const ExperimentSpec& spec, ExperimentResult& result, const std::vector<std::string>& files,
                    json summary) {
    json runs = json::array();
    for (const auto& r : result.runs) {
        json j = {{"method", method_name(r.method)},
                  {"seed", r.seed},
                  {"num_ris_elements", r.ris_elements},
                  {"steps", r.steps},
                  {"solver_failures", r.solver_failures},
                  {"blocked_users", r.blocked_users}};
        if (!r.timeline_path.empty()) j["timeline"] = r.timeline_path;
        runs.push_back(std::move(j));
    }
    json listed = json::array();
    for (const auto& f : files) listed.push_back(file_entry(spec.output_dir, f));
    json m = {{"schema", kManifestSchema},
              {"kind", result.kind},
              {"code_version", RISRES_VERSION},
              {"config_hash", config_hash(spec)},
              {"config", spec_to_json(spec)},
              {"seeds", spec.seeds},
              {"runs", std::move(runs)},
              {"files", std::move(listed)},
              {"failed_runs", result.failed_runs()},
              {"summary", std::move(summary)}};
    m["config"]["experiment"].erase("output_dir");
    m["config"]["experiment"].erase("threads");
    result.manifest_path = spec.output_dir / "manifest.json";
    std::ofstream out(result.manifest_path, std::ios::binary);
    out << m.dump(2) << "\n";
}

void prepare(const ExperimentSpec& spec) {
    spec.validate();
    fs::create_directories(spec.output_dir);
}

}  // namespace

void ExperimentSpec::validate() const {
    system.validate();
    lambda.validate_simplex();
    if (methods.empty()) throw ConfigError("no methods selected");
    if (blockages < 1 || blockages > system.num_users)
        throw ConfigError("blockage count must be between 1 and the number of users");
    if (scaling_blockage < 1 || scaling_blockage > system.num_users)
        throw ConfigError("scaling_blockage must be between 1 and the number of users");
    if (seeds.empty()) throw ConfigError("no seeds");
    if (ris_sweep.empty()) throw ConfigError("empty M sweep");
    for (int m : ris_sweep)
        if (m < 1 || perfect_square_side(m) < 0)
            throw ConfigError("M sweep entry " + std::to_string(m) + " is not a perfect square");
    if (sca.backtracking_steps < 0 || sca.recovery_eps <= 0.0) throw ConfigError("bad SCA settings");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    const auto number = [&](const std::string& s) -> std::uint64_t {
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("bad seed list '" + text + "'");
        return std::stoull(s);
    };
    while (std::getline(ss, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
        const auto dash = item.find('-');
        if (dash == std::string::npos) {
            seeds.push_back(number(item));
            continue;
        }
        const auto a = number(item.substr(0, dash));
        const auto b = number(item.substr(dash + 1));
        if (b < a) throw ConfigError("bad seed range '" + item + "'");
        for (auto s = a; s <= b; ++s) seeds.push_back(s);
    }
    if (seeds.empty()) throw ConfigError("empty seed list");
    return seeds;
}

ExperimentSpec spec_from_json(const json& j) {
    check_keys(j, "config", {"system", "sca", "metric", "experiment"});
    ExperimentSpec spec;
    if (j.contains("system")) spec.system = system_from_json(j["system"]);
    if (j.contains("sca")) spec.sca = sca_from_json(j["sca"]);
    if (j.contains("metric")) {
        const auto& m = j["metric"];
        check_keys(m, "metric", {"lambda"});
        std::vector<double> lambda{spec.lambda.lambda_abs, spec.lambda.lambda_ada, spec.lambda.lambda_rec};
        read(m, "lambda", lambda);
        if (lambda.size() != 3) throw ConfigError("metric.lambda needs three entries");
        spec.lambda.lambda_abs = lambda[0];
        spec.lambda.lambda_ada = lambda[1];
        spec.lambda.lambda_rec = lambda[2];
    }
    if (j.contains("experiment")) {
        const auto& e = j["experiment"];
        check_keys(e, "experiment",
                   {"methods", "blockages", "ris_sweep", "scaling_blockage", "seeds", "output_dir", "threads"});
        if (e.contains("methods")) {
            std::vector<std::string> names;
            read(e, "methods", names);
            spec.methods.clear();
            for (const auto& n : names) {
                try {
                    spec.methods.push_back(parse_method(n));
                } catch (const std::exception& ex) {
                    throw ConfigError(ex.what());
                }
            }
        }
        read(e, "blockages", spec.blockages);
        read(e, "ris_sweep", spec.ris_sweep);
        read(e, "scaling_blockage", spec.scaling_blockage);
        if (e.contains("seeds")) {
            if (e["seeds"].is_string())
                spec.seeds = parse_seed_list(e["seeds"].get<std::string>());
            else
                read(e, "seeds", spec.seeds);
        }
        if (e.contains("output_dir")) {
            std::string dir;
            read(e, "output_dir", dir);
            spec.output_dir = dir;
        }
        read(e, "threads", spec.threads);
    }
    if (spec.seeds.empty()) spec.seeds = parse_seed_list("1-20");
    return spec;
}

json spec_to_json(const ExperimentSpec& spec) {
    std::vector<std::string> methods;
    for (auto m : spec.methods) methods.emplace_back(method_name(m));
    return {{"system", system_to_json(spec.system)},
            {"sca", sca_to_json(spec.sca)},
            {"metric", {{"lambda", {spec.lambda.lambda_abs, spec.lambda.lambda_ada, spec.lambda.lambda_rec}}}},
            {"experiment",
             {{"methods", methods},
              {"blockages", spec.blockages},
              {"ris_sweep", spec.ris_sweep},
              {"scaling_blockage", spec.scaling_blockage},
              {"seeds", spec.seeds},
              {"output_dir", spec.output_dir.string()},
              {"threads", spec.threads}}}};
}

ExperimentSpec load_spec(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return spec_from_json(j);
}

void apply_env_overrides(ExperimentSpec& spec) {
    if (const char* s = std::getenv("RISRES_SEEDS"); s != nullptr && *s != '\0') spec.seeds = parse_seed_list(s);
    if (const char* o = std::getenv("RISRES_OUT"); o != nullptr && *o != '\0') spec.output_dir = o;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

std::string config_hash(const ExperimentSpec& spec) {
    json j = spec_to_json(spec);
    j["experiment"].erase("output_dir");
    j["experiment"].erase("threads");
    return sha256_hex(j.dump());
}

int ExperimentResult::failed_runs() const {
    return static_cast<int>(std::count_if(runs.begin(), runs.end(), [](const RunRecord& r) { return r.numerical_failure(); }));
}

int ExperimentResult::exit_code() const { return failed_runs() * 2 > static_cast<int>(runs.size()) ? 3 : 0; }

ExperimentResult run_adaptation_experiment(const ExperimentSpec& spec, const ProgressFn& progress) {
    prepare(spec);
    fs::create_directories(spec.output_dir / "timelines");
    ExperimentResult result;
    result.kind = "adaptation";
    const int n_methods = static_cast<int>(spec.methods.size());
    const int n = n_methods * static_cast<int>(spec.seeds.size());
    result.runs.resize(static_cast<std::size_t>(n));
    std::mutex log_mutex;
    parallel_for(n, spec.threads, [&](int i) {
        const Method method = spec.methods[static_cast<std::size_t>(i % n_methods)];
        const auto seed = spec.seeds[static_cast<std::size_t>(i / n_methods)];
        const std::string rel = "timelines/" + std::string(method_name(method)) + "_" + seed_tag(seed) + ".csv";
        result.runs[static_cast<std::size_t>(i)] = simulate(spec, method, seed, spec.system.num_ris_elements,
                                                            spec.blockages, spec.output_dir / rel, rel);
        if (progress) {
            std::lock_guard lock(log_mutex);
            progress("adapt " + std::string(method_name(method)) + " " + seed_tag(seed) + " done");
        }
    });

    const std::string table = "adaptation.csv";
    {
        std::ofstream out(spec.output_dir / table, std::ios::binary);
        out << "# schema " << kAdaptationSchema << "\n";
        out << "method,seed,num_ris_elements,blockage,blocked_user,t0_s,tq_s,recovered,r_abs_raw,r_ada_raw,"
               "r_abs,r_ada,r_rec,r,steps,solver_failures\n";
        for (const auto& run : result.runs)
            for (std::size_t b = 0; b < run.reports.size(); ++b) {
                const auto& rep = run.reports[b];
                out << method_name(run.method) << ',' << run.seed << ',' << run.ris_elements << ',' << b + 1 << ','
                    << run.blocked_users[b] + 1 << ',' << fmt(rep.t0) << ',' << fmt(rep.tq) << ','
                    << (rep.recovered ? 1 : 0) << ',' << fmt(rep.raw.absorption) << ',' << fmt(rep.raw.adaptation)
                    << ',' << fmt(rep.capped.absorption) << ',' << fmt(rep.capped.adaptation) << ','
                    << fmt(rep.capped.recovery) << ',' << fmt(rep.score) << ',' << run.steps << ','
                    << run.solver_failures << "\n";
            }
    }

    json summary = json::object();
    for (auto method : spec.methods) {
        json per = json::array();
        for (int b = 0; b < spec.blockages; ++b) {
            std::vector<double> abs, ada, r;
            for (const auto& run : result.runs)
                if (run.method == method) {
                    abs.push_back(run.reports[static_cast<std::size_t>(b)].capped.absorption);
                    ada.push_back(run.reports[static_cast<std::size_t>(b)].capped.adaptation);
                    r.push_back(run.reports[static_cast<std::size_t>(b)].score);
                }
            per.push_back({{"blockage", b + 1},
                           {"mean_r_abs", moments(abs).mean},
                           {"mean_r_ada", moments(ada).mean},
                           {"mean_r", moments(r).mean}});
        }
        summary[method_name(method)] = std::move(per);
    }
    std::vector<std::string> files{table};
    for (const auto& run : result.runs) files.push_back(run.timeline_path);
    write_manifest(spec, result, files, std::move(summary));
    return result;
}

ExperimentResult run_scaling_experiment(const ExperimentSpec& spec, const ProgressFn& progress) {
    prepare(spec);
    ExperimentResult result;
    result.kind = "scaling";
    const int n_methods = static_cast<int>(spec.methods.size());
    const int n_seeds = static_cast<int>(spec.seeds.size());
    const int per_m = n_methods * n_seeds;
    const int n = per_m * static_cast<int>(spec.ris_sweep.size());
    result.runs.resize(static_cast<std::size_t>(n));
    std::mutex log_mutex;
    parallel_for(n, spec.threads, [&](int i) {
        const int m = spec.ris_sweep[static_cast<std::size_t>(i / per_m)];
        const Method method = spec.methods[static_cast<std::size_t>(i % n_methods)];
        const auto seed = spec.seeds[static_cast<std::size_t>((i % per_m) / n_methods)];
        result.runs[static_cast<std::size_t>(i)] = simulate(spec, method, seed, m, spec.scaling_blockage, {}, {});
        if (progress) {
            std::lock_guard lock(log_mutex);
            progress("scale M=" + std::to_string(m) + " " + method_name(method) + " " + seed_tag(seed) + " done");
        }
    });

    const std::string table = "scaling.csv";
    json summary = json::array();
    {
        std::ofstream out(spec.output_dir / table, std::ios::binary);
        out << "# schema " << kScalingSchema << "\n";
        out << "kind,num_ris_elements,method,seed,count,blockage,r_abs_raw,r_ada_raw,r_abs,r_ada,r_rec,r,r_ci95,"
               "solver_failures\n";
        const auto b = static_cast<std::size_t>(spec.scaling_blockage - 1);
        for (const auto& run : result.runs) {
            const auto& rep = run.reports[b];
            out << "run," << run.ris_elements << ',' << method_name(run.method) << ',' << run.seed << ",1,"
                << spec.scaling_blockage << ',' << fmt(rep.raw.absorption) << ',' << fmt(rep.raw.adaptation) << ','
                << fmt(rep.capped.absorption) << ',' << fmt(rep.capped.adaptation) << ','
                << fmt(rep.capped.recovery) << ',' << fmt(rep.score) << ",0," << run.solver_failures << "\n";
        }
        for (int m : spec.ris_sweep)
            for (auto method : spec.methods) {
                std::vector<double> raw_abs, raw_ada, abs, ada, rec, r;
                int failures = 0;
                for (const auto& run : result.runs) {
                    if (run.ris_elements != m || run.method != method) continue;
                    const auto& rep = run.reports[b];
                    raw_abs.push_back(rep.raw.absorption);
                    raw_ada.push_back(rep.raw.adaptation);
                    abs.push_back(rep.capped.absorption);
                    ada.push_back(rep.capped.adaptation);
                    rec.push_back(rep.capped.recovery);
                    r.push_back(rep.score);
                    failures += run.solver_failures;
                }
                const auto mr = moments(r);
                out << "mean," << m << ',' << method_name(method) << ",," << r.size() << ',' << spec.scaling_blockage
                    << ',' << fmt(moments(raw_abs).mean) << ',' << fmt(moments(raw_ada).mean) << ','
                    << fmt(moments(abs).mean) << ',' << fmt(moments(ada).mean) << ',' << fmt(moments(rec).mean)
                    << ',' << fmt(mr.mean) << ',' << fmt(mr.ci95) << ',' << failures << "\n";
                summary.push_back(
                    {{"num_ris_elements", m}, {"method", method_name(method)}, {"mean_r", mr.mean}, {"r_ci95", mr.ci95}});
            }
    }
    write_manifest(spec, result, {table}, std::move(summary));
    return result;
}

VerifyReport verify_manifest(const fs::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot open manifest " + manifest_path.string());
    const json m = json::parse(in);
    const fs::path root = manifest_path.parent_path();
    VerifyReport rep;
    for (const auto& f : m.at("files")) {
        const auto rel = f.at("path").get<std::string>();
        if (!fs::exists(root / rel)) {
            rep.missing.push_back(rel);
            continue;
        }
        if (sha256_file(root / rel) != f.at("sha256").get<std::string>()) rep.mismatched.push_back(rel);
    }
    return rep;
}

VerifyReport rerun_manifest(const fs::path& manifest_path, const fs::path& out_dir, const ProgressFn& progress) {
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot open manifest " + manifest_path.string());
    const json m = json::parse(in);
    if (m.value("schema", "") != kManifestSchema) throw ConfigError("unsupported manifest schema");
    ExperimentSpec spec = spec_from_json(m.at("config"));
    spec.output_dir = out_dir;
    if (config_hash(spec) != m.at("config_hash").get<std::string>())
        throw ConfigError("manifest config does not match its hash");
    const auto kind = m.at("kind").get<std::string>();
    if (kind == "adaptation")
        run_adaptation_experiment(spec, progress);
    else if (kind == "scaling")
        run_scaling_experiment(spec, progress);
    else
        throw ConfigError("unknown experiment kind '" + kind + "'");
    VerifyReport rep;
    for (const auto& f : m.at("files")) {
        const auto rel = f.at("path").get<std::string>();
        if (!fs::exists(out_dir / rel))
            rep.missing.push_back(rel);
        else if (sha256_file(out_dir / rel) != f.at("sha256").get<std::string>())
            rep.mismatched.push_back(rel);
    }
    return rep;
}

}  // namespace risres
