#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "primhand/cli.hpp"

using namespace primhand;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path root_dir() {
    fs::path dir = fs::temp_directory_path() / "primhand_test_cli";
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::vector<std::string>& args, std::string* err = nullptr) {
    std::vector<const char*> argv;
    argv.push_back("primhand");
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream captured;
    std::streambuf* old = std::cerr.rdbuf(captured.rdbuf());
    int rc = -1;
    try {
        rc = cli::run(static_cast<int>(argv.size()), argv.data());
    } catch (...) {
        std::cerr.rdbuf(old);
        throw;
    }
    std::cerr.rdbuf(old);
    if (err) *err = captured.str();
    return rc;
}

std::string write_config(const std::string& name, const json& cfg) {
    const fs::path p = root_dir() / name;
    std::ofstream out(p);
    out << cfg.dump(2) << "\n";
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p) {
    json j;
    std::ifstream in(p);
    REQUIRE(in.good());
    in >> j;
    return j;
}

json object_cfg() {
    return json{{"shape", "cube"}, {"edge", 0.05}, {"cloud_size", 6000}, {"seed", 3}};
}

json synth_cfg(const std::string& out_dir) {
    json cfg;
    cfg["seed"] = 42;
    cfg["out_dir"] = out_dir;
    cfg["object"] = object_cfg();
    cfg["duration_s"] = 6.0;
    cfg["train_recordings"] = 2;
    cfg["log_level"] = "error";
    return cfg;
}

}  // namespace

TEST_CASE("the five subcommands cooperate end to end") {
    const fs::path root = root_dir();
    const std::string dir_a = (root / "synth_a").string();
    const std::string dir_b = (root / "synth_b").string();

    // --- synth ---------------------------------------------------------
    std::string err;
    REQUIRE(run_cli({"synth", "--config", write_config("synth_a.json", synth_cfg(dir_a))}, &err) == 0);
    REQUIRE(fs::exists(fs::path(dir_a) / "train_1.csv"));
    REQUIRE(fs::exists(fs::path(dir_a) / "train_2.csv"));
    REQUIRE(fs::exists(fs::path(dir_a) / "test.csv"));
    const Recording rec = parse_recording((fs::path(dir_a) / "train_1.csv").string());
    REQUIRE(rec.rows.size() == 600);
    REQUIRE(rec.has_object());
    REQUIRE(rec.rate_hz == Catch::Approx(100.0));

    // same seed, different directory: byte-identical recordings
    REQUIRE(run_cli({"synth", "--config", write_config("synth_b.json", synth_cfg(dir_b))}, &err) == 0);
    REQUIRE(slurp(fs::path(dir_a) / "train_1.csv") == slurp(fs::path(dir_b) / "train_1.csv"));
    REQUIRE(slurp(fs::path(dir_a) / "test.csv") == slurp(fs::path(dir_b) / "test.csv"));

    // --- train ----------------------------------------------------------
    const std::string dict_path = (root / "dict.json").string();
    const std::string nmf_log = (root / "nmf_log.csv").string();
    json tc;
    tc["seed"] = 7;
    tc["train_csvs"] = {(fs::path(dir_a) / "train_1.csv").string(),
                        (fs::path(dir_a) / "train_2.csv").string()};
    tc["object_name"] = "cube_0.05";
    tc["out_dict"] = dict_path;
    tc["out_log"] = nmf_log;
    tc["nmf"] = {{"I", 4}, {"max_iters", 200}, {"rel_tol", 1e-10}};
    tc["log_level"] = "error";
    REQUIRE(run_cli({"train", "--config", write_config("train.json", tc)}, &err) == 0);

    const Dictionary dict = load_dictionary(dict_path);
    REQUIRE(dict.W.rows() == 1500);
    REQUIRE(dict.W.cols() == 4);
    REQUIRE(dict.N == 100);
    REQUIRE(dict.object == "cube_0.05");

    std::ifstream logf(nmf_log);
    std::string line;
    std::getline(logf, line);
    REQUIRE(line == "iter,objective");
    double prev = std::numeric_limits<double>::infinity();
    int log_rows = 0;
    while (std::getline(logf, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        REQUIRE(comma != std::string::npos);
        const double obj = std::stod(line.substr(comma + 1));
        REQUIRE(obj <= prev + 1e-12 * std::max(1.0, prev));
        prev = obj;
        ++log_rows;
    }
    REQUIRE(log_rows >= 2);

    // --- test-dict ------------------------------------------------------
    const std::string stats_path = (root / "stats.json").string();
    const std::string box_path = (root / "box.csv").string();
    json dc;
    dc["dict"] = dict_path;
    dc["test_csv"] = (fs::path(dir_a) / "test.csv").string();
    dc["out_stats"] = stats_path;
    dc["out_boxplot"] = box_path;
    dc["log_level"] = "error";
    REQUIRE(run_cli({"test-dict", "--config", write_config("test_dict.json", dc)}, &err) == 0);

    const json stats = read_json(stats_path);
    REQUIRE(stats.at("segments") == 6);
    REQUIRE(stats.at("instants_per_finger") == 600);
    for (const char* f : {"th", "if", "mf", "rf", "lf"}) {
        const auto& s = stats.at("fingers").at(f);
        REQUIRE(s.at("min").get<double>() >= 0.0);
        REQUIRE(s.at("median").get<double>() <= s.at("max").get<double>());
    }
    REQUIRE(stats.at("overall").at("max").get<double>() >= stats.at("overall").at("q3").get<double>());

    std::ifstream boxf(box_path);
    std::getline(boxf, line);
    REQUIRE(line == "finger,min,q1,median,q3,max,mean,std");
    std::vector<std::string> first_fields;
    while (std::getline(boxf, line))
        if (!line.empty()) first_fields.push_back(line.substr(0, line.find(',')));
    REQUIRE(first_fields == std::vector<std::string>{"th", "if", "mf", "rf", "lf", "all"});

    // max_segments caps the evaluation
    dc["max_segments"] = 3;
    dc["out_stats"] = (root / "stats3.json").string();
    dc.erase("out_boxplot");
    REQUIRE(run_cli({"test-dict", "--config", write_config("test_dict3.json", dc), "--jobs", "3"},
                    &err) == 0);
    REQUIRE(read_json(root / "stats3.json").at("segments") == 3);

    // --- plan -----------------------------------------------------------
    const std::string plans_dir = (root / "plans").string();
    json pc;
    pc["dict"] = dict_path;
    pc["out_dir"] = plans_dir;
    pc["test_csv"] = (fs::path(dir_a) / "test.csv").string();
    pc["max_segments"] = 2;
    pc["log_level"] = "error";
    REQUIRE(run_cli({"plan", "--config", write_config("plan.json", pc)}, &err) == 0);

    const json plan0 = read_json(fs::path(plans_dir) / "plan_000.json");
    REQUIRE(plan0.at("format") == "primplan/1");
    REQUIRE(plan0.at("status") == "optimal");
    REQUIRE(plan0.at("h").size() == 4);
    REQUIRE(plan0.at("residuals").at("stationarity").get<double>() >= 0.0);
    REQUIRE(plan0.at("residuals").at("primal").get<double>() <= 1e-6);
    REQUIRE(plan0.at("residuals").at("complementarity").get<double>() >= 0.0);
    const Recording planned = parse_recording((fs::path(plans_dir) / "plan_000.csv").string());
    REQUIRE(planned.rows.size() == 100);
    REQUIRE_FALSE(planned.has_object());
    const json summary = read_json(fs::path(plans_dir) / "summary.json");
    REQUIRE(summary.at("format") == "primplan-summary/1");
    REQUIRE(summary.at("plans").size() == 2);
    REQUIRE(summary.at("failures") == 0);

    // explicit five-point target instead of a test recording
    json pe;
    pe["dict"] = dict_path;
    pe["out_dir"] = (root / "plans_explicit").string();
    pe["request"]["target"] = {{0.0, -0.025, 0.1},
                               {-0.015, 0.025, 0.105},
                               {0.0, 0.025, 0.11},
                               {0.015, 0.025, 0.105},
                               {0.025, 0.0, 0.1}};
    pe["request"]["v_min"] = "-inf";
    pe["request"]["v_max"] = "inf";
    pe["log_level"] = "error";
    REQUIRE(run_cli({"plan", "--config", write_config("plan_explicit.json", pe)}, &err) == 0);
    REQUIRE(read_json(root / "plans_explicit" / "summary.json").at("plans").size() == 1);

    // object-pose cost wired through a contact template
    json pp;
    pp["dict"] = dict_path;
    pp["out_dir"] = (root / "plans_pose").string();
    pp["test_csv"] = (fs::path(dir_a) / "test.csv").string();
    pp["max_segments"] = 1;
    pp["request"]["alpha"] = 0.5;
    pp["request"]["object_target"] = "from_test";
    pp["request"]["template"]["fingers"] = {"th", "if", "mf", "rf"};
    pp["request"]["template"]["points"] = {{0.0, 0.0, 0.0},
                                           {0.02, 0.0, 0.0},
                                           {0.0, 0.02, 0.0},
                                           {0.0, 0.0, 0.02}};
    pp["log_level"] = "error";
    REQUIRE(run_cli({"plan", "--config", write_config("plan_pose.json", pp)}, &err) == 0);
    REQUIRE(read_json(root / "plans_pose" / "summary.json").at("failures") == 0);

    // --- verify ---------------------------------------------------------
    const std::string report_path = (root / "report.json").string();
    json vc;
    vc["train_csvs"] = tc["train_csvs"];
    vc["test_csv"] = (fs::path(dir_a) / "test.csv").string();
    vc["plans_dir"] = plans_dir;
    vc["out_report"] = report_path;
    vc["out_csv"] = (root / "report.csv").string();
    vc["object"] = object_cfg();
    vc["max_segments"] = 2;
    vc["log_level"] = "error";
    REQUIRE(run_cli({"verify", "--config", write_config("verify.json", vc)}, &err) == 0);

    const json rep = read_json(report_path);
    REQUIRE(rep.at("format") == "primreport/1");
    REQUIRE(rep.at("trajectories") == 2);
    REQUIRE(rep.at("instants") == 200);
    const double pct = rep.at("pct_instants_min_contacts").get<double>();
    REQUIRE(pct >= 0.0);
    REQUIRE(pct <= 100.0);
    REQUIRE(rep.at("reachability_violations").get<int>() >= 0);
    REQUIRE(rep.contains("distance_difference"));

    std::ifstream csvf(root / "report.csv");
    std::getline(csvf, line);
    REQUIRE(line.rfind("t,reach_th", 0) == 0);
    int csv_rows = 0;
    while (std::getline(csvf, line))
        if (!line.empty()) ++csv_rows;
    REQUIRE(csv_rows == 200);

    // --- failure modes that need the trained dictionary ------------------
    // alpha without a contact template
    json pa;
    pa["dict"] = dict_path;
    pa["out_dir"] = (root / "plans_alpha").string();
    pa["test_csv"] = (fs::path(dir_a) / "test.csv").string();
    pa["max_segments"] = 1;
    pa["request"]["alpha"] = 1.0;
    pa["request"]["object_target"] = "from_test";
    pa["log_level"] = "error";
    REQUIRE(run_cli({"plan", "--config", write_config("plan_alpha.json", pa)}, &err) == 1);
    REQUIRE(json::parse(err).at("error") == "config");

    // a crossed velocity box makes every plan infeasible; the run fails but
    // the summary and per-plan reports are still written
    const std::string inf_dir = (root / "plans_infeasible").string();
    json pi;
    pi["dict"] = dict_path;
    pi["out_dir"] = inf_dir;
    pi["test_csv"] = (fs::path(dir_a) / "test.csv").string();
    pi["max_segments"] = 1;
    pi["request"]["v_min"] = 0.5;
    pi["request"]["v_max"] = -0.5;
    pi["log_level"] = "error";
    REQUIRE(run_cli({"plan", "--config", write_config("plan_crossed.json", pi)}, &err) == 1);
    REQUIRE(json::parse(err).at("error") == "validation");
    REQUIRE(read_json(fs::path(inf_dir) / "plan_000.json").at("status") == "infeasible");
    REQUIRE_FALSE(fs::exists(fs::path(inf_dir) / "plan_000.csv"));
    REQUIRE(read_json(fs::path(inf_dir) / "summary.json").at("failures") == 1);
}

TEST_CASE("synth rejects a zero duration with a config error") {
    json cfg = synth_cfg((root_dir() / "synth_bad").string());
    cfg["duration_s"] = 0.0;
    std::string err;
    REQUIRE(run_cli({"synth", "--config", write_config("synth_zero.json", cfg)}, &err) == 1);
    const json e = json::parse(err);
    REQUIRE(e.at("error") == "config");
}

TEST_CASE("missing required keys are reported as config errors") {
    json cfg = synth_cfg((root_dir() / "synth_noseed").string());
    cfg.erase("seed");
    std::string err;
    REQUIRE(run_cli({"synth", "--config", write_config("synth_noseed.json", cfg)}, &err) == 1);
    json e = json::parse(err);
    REQUIRE(e.at("error") == "config");
    REQUIRE(e.at("message").get<std::string>().find("seed") != std::string::npos);

    json tc;
    tc["train_csvs"] = {"nowhere.csv"};
    tc["object_name"] = "x";
    tc["out_dict"] = (root_dir() / "nodict.json").string();
    REQUIRE(run_cli({"train", "--config", write_config("train_noseed.json", tc)}, &err) == 1);
    e = json::parse(err);
    REQUIRE(e.at("error") == "config");
}

TEST_CASE("config file problems map to io and parse errors") {
    std::string err;
    REQUIRE(run_cli({"synth", "--config", (root_dir() / "missing_config.json").string()}, &err) == 1);
    REQUIRE(json::parse(err).at("error") == "io");

    const fs::path bad = root_dir() / "broken.json";
    std::ofstream(bad) << "{ definitely not json";
    REQUIRE(run_cli({"synth", "--config", bad.string()}, &err) == 1);
    REQUIRE(json::parse(err).at("error") == "parse");
}

TEST_CASE("command-line misuse is rejected") {
    std::string err;
    REQUIRE(run_cli({}, &err) != 0);
    REQUIRE(run_cli({"juggle", "--config", "x.json"}, &err) != 0);
    REQUIRE(run_cli({"synth"}, &err) != 0);  // --config is required
}
