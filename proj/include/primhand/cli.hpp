#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "primhand/core.hpp"
#include "primhand/dictionary.hpp"
#include "primhand/errors.hpp"
#include "primhand/ingest.hpp"
#include "primhand/log.hpp"
#include "primhand/planner.hpp"
#include "primhand/pose.hpp"
#include "primhand/verify.hpp"

namespace primhand::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config plumbing.

inline json load_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config: " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

template <typename T>
T require(const json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("config is missing '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

inline Eigen::Vector3d vec3_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(what + " must be [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline int finger_from_name(const std::string& name) {
    for (int i = 0; i < kFingerCount; ++i)
        if (name == kFingerNames[static_cast<std::size_t>(i)]) return i;
    throw ConfigError("unknown finger name: " + name);
}

inline Pose pose_from_json(const json& j) {
    const Eigen::Vector3d pos = vec3_from_json(j.at("position"), "pose position");
    const auto q = j.at("quaternion");
    if (!q.is_array() || q.size() != 4) throw ConfigError("pose quaternion must be [w, x, y, z]");
    return Pose(pos, Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(),
                                        q[2].get<double>(), q[3].get<double>()));
}

inline json pose_to_json(const Pose& p) {
    json j;
    j["position"] = {p.position.x(), p.position.y(), p.position.z()};
    j["quaternion"] = {p.orientation.w(), p.orientation.x(), p.orientation.y(),
                       p.orientation.z()};
    const Eigen::Vector3d e = p.euler_zyx();
    j["euler_zyx"] = {e[0], e[1], e[2]};
    return j;
}

inline ContactTemplate template_from_json(const json& j) {
    ContactTemplate tpl;
    const auto fingers = j.at("fingers");
    const auto points = j.at("points");
    if (!fingers.is_array() || fingers.size() != 4 || !points.is_array() || points.size() != 4)
        throw ConfigError("template needs 4 fingers and 4 points");
    for (int i = 0; i < 4; ++i) {
        tpl.fingers[static_cast<std::size_t>(i)] = finger_from_name(fingers[static_cast<std::size_t>(i)].get<std::string>());
        tpl.points[static_cast<std::size_t>(i)] = vec3_from_json(points[static_cast<std::size_t>(i)], "template point");
    }
    tpl.validate();
    return tpl;
}

inline double bound_entry(const json& j, const std::string& what) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    throw ConfigError(what + " must be a number or \"inf\"/\"-inf\"");
}

// A bound is a scalar (all fingers, all axes), a [3] array (per axis), or a
// [5][3] array (per finger per axis).
inline void parse_bounds(const json& j, std::array<Eigen::Vector3d, kFingerCount>& out,
                         const std::string& what) {
    if (j.is_number() || j.is_string()) {
        const double v = bound_entry(j, what);
        for (auto& f : out) f.setConstant(v);
        return;
    }
    if (j.is_array() && j.size() == 3 && !j[0].is_array()) {
        Eigen::Vector3d v;
        for (int a = 0; a < 3; ++a) v[a] = bound_entry(j[static_cast<std::size_t>(a)], what);
        for (auto& f : out) f = v;
        return;
    }
    if (j.is_array() && j.size() == kFingerCount) {
        for (int f = 0; f < kFingerCount; ++f) {
            const auto& row = j[static_cast<std::size_t>(f)];
            if (!row.is_array() || row.size() != 3) throw ConfigError(what + " rows must be [x, y, z]");
            for (int a = 0; a < 3; ++a)
                out[static_cast<std::size_t>(f)][a] = bound_entry(row[static_cast<std::size_t>(a)], what);
        }
        return;
    }
    throw ConfigError(what + " must be a scalar, [3], or [5][3]");
}

inline PlanRequest plan_request_from_json(const json& j) {
    PlanRequest req;
    req.alpha = value_or(j, "alpha", 0.0);
    req.nonneg_weights = value_or(j, "nonneg_weights", false);
    if (j.contains("v_min")) parse_bounds(j.at("v_min"), req.v_min, "v_min");
    if (j.contains("v_max")) parse_bounds(j.at("v_max"), req.v_max, "v_max");
    if (j.contains("template")) req.contact_template = template_from_json(j.at("template"));
    if (j.contains("object_target") && j.at("object_target").is_object())
        req.object_target = pose_from_json(j.at("object_target"));
    return req;
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces.

inline std::array<Eigen::Vector3d, kFingerCount> default_contacts(const ObjectModel& m) {
    m.validate_dims();
    std::array<Eigen::Vector3d, kFingerCount> c;
    if (m.shape == ObjectModel::Shape::cube) {
        const double b = m.edge / 2.0;
        c[0] = {0.0, -b, -0.1 * b};          // thumb opposes the rest
        c[1] = {-0.72 * b, b, 0.32 * b};
        c[2] = {-0.24 * b, b, 0.40 * b};
        c[3] = {0.24 * b, b, 0.32 * b};
        c[4] = {0.72 * b, b, 0.08 * b};
    } else {
        const double r = m.diameter / 2.0;
        const double s = std::sqrt(0.5);
        c[0] = {0.0, -r, -0.16 * m.height};
        c[1] = {-r * s, r * s, 0.20 * m.height};
        c[2] = {0.0, r, 0.24 * m.height};
        c[3] = {r * s, r * s, 0.20 * m.height};
        c[4] = {r, 0.0, 0.04 * m.height};
    }
    return c;
}

inline std::array<Eigen::Vector3d, kFingerCount> contacts_from_json(const json& j) {
    if (!j.is_array() || j.size() != kFingerCount)
        throw ConfigError("contacts must be an array of 5 [x, y, z] points");
    std::array<Eigen::Vector3d, kFingerCount> c;
    for (int i = 0; i < kFingerCount; ++i)
        c[static_cast<std::size_t>(i)] = vec3_from_json(j[static_cast<std::size_t>(i)], "contact point");
    return c;
}

struct TestData {
    std::vector<Trajectory> segments;
    std::vector<std::vector<Pose>> tracks;  // aligned with segments; empty when no object
    double rate_hz = 0.0;
};

inline TestData load_test_segments(const std::string& path, int filter_window,
                                   double segment_seconds, int max_segments) {
    const Recording rec = parse_recording(path);
    const PreprocessResult pre = preprocess(rec, filter_window);
    TestData out;
    out.rate_hz = pre.trajectory.rate_hz;
    out.segments = segment(pre.trajectory, segment_seconds);
    if (max_segments > 0 && static_cast<int>(out.segments.size()) > max_segments)
        out.segments.resize(static_cast<std::size_t>(max_segments));
    if (pre.object_track) {
        const int n = out.segments.front().length();
        out.tracks.reserve(out.segments.size());
        for (std::size_t k = 0; k < out.segments.size(); ++k) {
            const auto begin = pre.object_track->begin() + static_cast<std::ptrdiff_t>(k) * n;
            out.tracks.emplace_back(begin, begin + n);
        }
    }
    return out;
}

inline std::vector<Trajectory> load_train_trajectories(const std::vector<std::string>& paths,
                                                       int filter_window) {
    if (paths.empty()) throw ConfigError("at least one training recording is required");
    std::vector<Trajectory> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(preprocess(parse_recording(p), filter_window).trajectory);
    return out;
}

// A planned trajectory goes to disk in the recording format with an identity
// hand pose, so the fingertip columns are already hand-frame coordinates.
inline Recording trajectory_to_recording(const Trajectory& traj) {
    traj.validate();
    Recording rec;
    rec.rate_hz = traj.rate_hz;
    rec.rows.reserve(traj.frames.size());
    for (std::size_t i = 0; i < traj.frames.size(); ++i) {
        RecordingRow row;
        row.t = static_cast<double>(i) / traj.rate_hz;
        row.tips = traj.frames[i];
        rec.rows.push_back(std::move(row));
    }
    return rec;
}

inline Trajectory trajectory_from_recording(const Recording& rec) {
    rec.validate();
    Trajectory traj;
    traj.rate_hz = rec.rate_hz;
    traj.frames.reserve(rec.rows.size());
    for (const auto& row : rec.rows) traj.frames.push_back(to_hand_frame(row.tips, row.hand_back));
    return traj;
}

inline void apply_log_level(const json& cfg) {
    if (cfg.contains("log_level"))
        log::set_threshold(log::parse_level(cfg.at("log_level").get<std::string>(), log::threshold()));
}

// ---------------------------------------------------------------------------
// Subcommands.

inline int cmd_synth(const json& cfg) {
    const auto seed = require<std::uint64_t>(cfg, "seed");
    const std::string out_dir = require<std::string>(cfg, "out_dir");
    if (!cfg.contains("object")) throw ConfigError("config is missing 'object'");
    const ObjectModel model = object_model_from_json(cfg.at("object"), /*with_cloud=*/false);

    SynthConfig base;
    base.object = model;
    base.contacts = cfg.contains("contacts") ? contacts_from_json(cfg.at("contacts"))
                                             : default_contacts(model);
    if (cfg.contains("object_center"))
        base.object_center = vec3_from_json(cfg.at("object_center"), "object_center");
    if (cfg.contains("rotation_axis"))
        base.rotation_axis = vec3_from_json(cfg.at("rotation_axis"), "rotation_axis");
    base.angular_speed = value_or(cfg, "angular_speed", 0.6);
    base.noise_std = value_or(cfg, "noise_std", 0.0005);
    base.duration_s = value_or(cfg, "duration_s", 120.0);
    base.rate_hz = value_or(cfg, "rate_hz", 100.0);
    const int n_train = value_or(cfg, "train_recordings", 5);
    if (n_train < 1) throw ConfigError("train_recordings must be >= 1");
    const double step = value_or(cfg, "initial_angle_step", 0.37);

    fs::create_directories(out_dir);
    for (int k = 0; k < n_train; ++k) {
        SynthConfig c = base;
        c.initial_angle = step * k;
        c.seed = detail::derive_seed(seed, static_cast<std::uint64_t>(k) + 1);
        write_recording(out_dir + "/train_" + std::to_string(k + 1) + ".csv", synth_demo(c));
    }
    SynthConfig c = base;
    c.initial_angle = value_or(cfg, "test_initial_angle", step * n_train);
    c.seed = detail::derive_seed(seed, 1000);
    write_recording(out_dir + "/test.csv", synth_demo(c));
    log::info("synthesized " + std::to_string(n_train) + " training recordings + 1 test recording in " +
              out_dir);
    return 0;
}

inline int cmd_train(const json& cfg) {
    const auto seed = require<std::uint64_t>(cfg, "seed");
    const auto train_csvs = require<std::vector<std::string>>(cfg, "train_csvs");
    const std::string object_name = require<std::string>(cfg, "object_name");
    const std::string out_dict = require<std::string>(cfg, "out_dict");
    const int window = value_or(cfg, "filter_window", 50);
    const double seconds = value_or(cfg, "segment_seconds", 1.0);

    NmfConfig nmf;
    nmf.seed = seed;
    if (cfg.contains("nmf")) {
        const auto& nj = cfg.at("nmf");
        nmf.I = value_or(nj, "I", nmf.I);
        nmf.max_iters = value_or(nj, "max_iters", nmf.max_iters);
        nmf.rel_tol = value_or(nj, "rel_tol", nmf.rel_tol);
        nmf.init_scale = value_or(nj, "init_scale", nmf.init_scale);
    }

    std::vector<Trajectory> segments;
    for (const auto& path : train_csvs) {
        const PreprocessResult pre = preprocess(parse_recording(path), window);
        auto segs = segment(pre.trajectory, seconds);
        segments.insert(segments.end(), std::make_move_iterator(segs.begin()),
                        std::make_move_iterator(segs.end()));
    }
    log::info("training on " + std::to_string(segments.size()) + " segments");
    const TrainedDictionary trained = learn_dictionary(segments, nmf, object_name);

    fs::path dict_path(out_dict);
    if (dict_path.has_parent_path()) fs::create_directories(dict_path.parent_path());
    save_dictionary(out_dict, trained.dict);
    if (cfg.contains("out_log")) {
        const std::string log_path = cfg.at("out_log").get<std::string>();
        fs::path lp(log_path);
        if (lp.has_parent_path()) fs::create_directories(lp.parent_path());
        std::ofstream out(log_path, std::ios::binary);
        if (!out) throw IoError("cannot write training log: " + log_path);
        out << "iter,objective\n";
        for (std::size_t i = 0; i < trained.objective.size(); ++i)
            out << i << ',' << detail::format_double(trained.objective[i]) << "\n";
    }
    log::info("dictionary written to " + out_dict);
    return 0;
}

inline int cmd_test_dict(const json& cfg) {
    const std::string dict_path = require<std::string>(cfg, "dict");
    const std::string test_csv = require<std::string>(cfg, "test_csv");
    const std::string out_stats = require<std::string>(cfg, "out_stats");
    const int window = value_or(cfg, "filter_window", 50);
    const double seconds = value_or(cfg, "segment_seconds", 1.0);
    const int max_segments = value_or(cfg, "max_segments", 0);

    const Dictionary dict = load_dictionary(dict_path);
    const TestData test = load_test_segments(test_csv, window, seconds, max_segments);
    const Eigen::MatrixXd V_test = stack_segments(test.segments);
    const Eigen::MatrixXd H = reconstruct_weights(dict, V_test);
    const ReconStats stats = reconstruction_error(V_test, dict, H);

    json j = recon_stats_to_json(stats);
    j["dict"] = dict_path;
    j["segments"] = test.segments.size();
    write_json_file(out_stats, j);

    if (cfg.contains("out_boxplot")) {
        const std::string box_path = cfg.at("out_boxplot").get<std::string>();
        fs::path bp(box_path);
        if (bp.has_parent_path()) fs::create_directories(bp.parent_path());
        std::ofstream out(box_path, std::ios::binary);
        if (!out) throw IoError("cannot write boxplot csv: " + box_path);
        out << "finger,min,q1,median,q3,max,mean,std\n";
        const auto put = [&](const std::string& name, const detail::SampleStats& s) {
            out << name << ',' << detail::format_double(s.min) << ',' << detail::format_double(s.q1)
                << ',' << detail::format_double(s.median) << ',' << detail::format_double(s.q3)
                << ',' << detail::format_double(s.max) << ',' << detail::format_double(s.mean)
                << ',' << detail::format_double(s.stddev) << "\n";
        };
        for (int f = 0; f < kFingerCount; ++f)
            put(std::string(kFingerNames[static_cast<std::size_t>(f)]),
                stats.per_finger[static_cast<std::size_t>(f)]);
        put("all", stats.overall);
    }
    log::info("reconstruction stats written to " + out_stats);
    return 0;
}

inline int cmd_plan(const json& cfg) {
    const std::string dict_path = require<std::string>(cfg, "dict");
    const std::string out_dir = require<std::string>(cfg, "out_dir");
    const double tol = value_or(cfg, "tol", 1e-8);
    const int window = value_or(cfg, "filter_window", 50);
    const double seconds = value_or(cfg, "segment_seconds", 1.0);
    const int max_segments = value_or(cfg, "max_segments", 0);

    const Dictionary dict = load_dictionary(dict_path);
    const json req_json = cfg.contains("request") ? cfg.at("request") : json::object();
    const PlanRequest base_req = plan_request_from_json(req_json);
    const bool pose_from_test = req_json.contains("object_target") &&
                                req_json.at("object_target").is_string() &&
                                req_json.at("object_target").get<std::string>() == "from_test";
    const std::string target_source = value_or<std::string>(cfg, "target_source", "test_final");
    if (target_source != "test_final" && target_source != "reconstruction")
        throw ConfigError("target_source must be 'test_final' or 'reconstruction'");

    std::vector<PlanRequest> requests;
    if (req_json.contains("target")) {
        PlanRequest req = base_req;
        const auto& tgt = req_json.at("target");
        if (!tgt.is_array() || tgt.size() != kFingerCount)
            throw ConfigError("request target must be 5 [x, y, z] points");
        for (int j = 0; j < kFingerCount; ++j)
            req.target[j] = vec3_from_json(tgt[static_cast<std::size_t>(j)], "target point");
        requests.push_back(std::move(req));
    } else {
        const std::string test_csv = require<std::string>(cfg, "test_csv");
        const TestData test = load_test_segments(test_csv, window, seconds, max_segments);
        if (pose_from_test && test.tracks.empty())
            throw ConfigError("object_target is 'from_test' but the test recording has no object pose");
        // "reconstruction" targets the final frame of the dictionary's own
        // projection of each test segment. Raw test frames carry residual
        // noise off the primitive span; fitting that noise exactly through a
        // 15-row final-frame cost recruits poorly-conditioned weight mixes
        // and degrades the interior of the generated trajectory.
        std::optional<Eigen::MatrixXd> H;
        if (target_source == "reconstruction")
            H = reconstruct_weights(dict, stack_segments(test.segments));
        for (std::size_t k = 0; k < test.segments.size(); ++k) {
            PlanRequest req = base_req;
            req.target = H ? generate(dict, H->col(static_cast<int>(k))).frames.back()
                           : test.segments[k].frames.back();
            if (pose_from_test) req.object_target = test.tracks[k].back();
            requests.push_back(std::move(req));
        }
    }

    fs::create_directories(out_dir);
    json summary;
    summary["format"] = "primplan-summary/1";
    summary["dict"] = dict_path;
    summary["plans"] = json::array();
    int failures = 0;
    for (std::size_t k = 0; k < requests.size(); ++k) {
        const PlanResult res = plan(dict, requests[k], tol);
        char tag[32];
        std::snprintf(tag, sizeof(tag), "%03zu", k);
        json rj;
        rj["format"] = "primplan/1";
        rj["status"] = to_string(res.status);
        rj["objective"] = res.objective;
        rj["h"] = std::vector<double>(res.h.data(), res.h.data() + res.h.size());
        rj["residuals"] = {{"stationarity", res.stationarity},
                           {"primal", res.primal_violation},
                           {"complementarity", res.complementarity}};
        rj["iterations"] = res.iterations;
        rj["active_constraints"] = res.active_constraints;
        rj["regularization"] = res.regularization;
        write_json_file(out_dir + "/plan_" + tag + ".json", rj);
        if (res.status != PlanStatus::infeasible)
            write_recording(out_dir + "/plan_" + tag + ".csv", trajectory_to_recording(res.trajectory));
        if (res.status != PlanStatus::optimal) ++failures;
        json s;
        s["index"] = k;
        s["status"] = to_string(res.status);
        s["objective"] = res.objective;
        summary["plans"].push_back(s);
    }
    summary["failures"] = failures;
    write_json_file(out_dir + "/summary.json", summary);
    log::info("planned " + std::to_string(requests.size()) + " segments into " + out_dir);
    if (failures > 0)
        throw ValidationError(std::to_string(failures) + " of " + std::to_string(requests.size()) +
                              " plans did not reach optimal status");
    return 0;
}

inline int cmd_verify(const json& cfg) {
    const auto train_csvs = require<std::vector<std::string>>(cfg, "train_csvs");
    const std::string test_csv = require<std::string>(cfg, "test_csv");
    const std::string plans_dir = require<std::string>(cfg, "plans_dir");
    const std::string out_report = require<std::string>(cfg, "out_report");
    if (!cfg.contains("object")) throw ConfigError("config is missing 'object'");
    const int window = value_or(cfg, "filter_window", 50);
    const double seconds = value_or(cfg, "segment_seconds", 1.0);
    const int max_segments = value_or(cfg, "max_segments", 0);
    const bool with_reference = value_or(cfg, "with_reference", true);

    VerifyConfig vc;
    if (cfg.contains("verify")) {
        const auto& vj = cfg.at("verify");
        vc.tau = value_or(vj, "tau", vc.tau);
        vc.d_min = value_or(vj, "d_min", vc.d_min);
        vc.epsilon = value_or(vj, "epsilon", vc.epsilon);
        vc.min_contacts = value_or(vj, "min_contacts", vc.min_contacts);
    }
    vc.validate();

    const Workspace ws(load_train_trajectories(train_csvs, window), vc.epsilon);
    const TestData test = load_test_segments(test_csv, window, seconds, max_segments);
    if (test.tracks.empty())
        throw ConfigError("verify needs a test recording with an object pose track");

    ObjectModel model = object_model_from_json(cfg.at("object"));
    const detail::KdTree3 cloud(model.cloud);
    log::info("object cloud: " + std::to_string(cloud.size()) + " points, resolution " +
              detail::format_double(model.resolution));

    std::vector<std::string> plan_files;
    if (!fs::is_directory(plans_dir)) throw IoError("plans directory not found: " + plans_dir);
    for (const auto& entry : fs::directory_iterator(plans_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("plan_", 0) == 0 && name.size() > 4 &&
            name.compare(name.size() - 4, 4, ".csv") == 0)
            plan_files.push_back(entry.path().string());
    }
    std::sort(plan_files.begin(), plan_files.end());
    if (plan_files.empty()) throw IoError("no plan_*.csv files in " + plans_dir);

    std::size_t count = std::min(plan_files.size(), test.segments.size());
    if (max_segments > 0) count = std::min(count, static_cast<std::size_t>(max_segments));
    if (count < plan_files.size() || count < test.segments.size())
        log::warn("verifying " + std::to_string(count) + " segments (plans: " +
                  std::to_string(plan_files.size()) + ", test segments: " +
                  std::to_string(test.segments.size()) + ")");

    std::vector<Trajectory> planned;
    std::vector<std::vector<Pose>> tracks;
    std::vector<Trajectory> refs;
    for (std::size_t k = 0; k < count; ++k) {
        planned.push_back(trajectory_from_recording(parse_recording(plan_files[k])));
        tracks.push_back(test.tracks[k]);
        refs.push_back(test.segments[k]);
    }
    const ConstraintReport rep =
        report(planned, ws, tracks, cloud, vc, with_reference ? &refs : nullptr);

    fs::path rp(out_report);
    if (rp.has_parent_path()) fs::create_directories(rp.parent_path());
    write_report_json(out_report, rep);
    if (cfg.contains("out_csv")) {
        const std::string csv_path = cfg.at("out_csv").get<std::string>();
        fs::path cp(csv_path);
        if (cp.has_parent_path()) fs::create_directories(cp.parent_path());
        write_report_csv(csv_path, rep);
    }
    log::info("report written to " + out_report + " (reach violations " +
              std::to_string(rep.reach_violations) + ", collision instants " +
              std::to_string(rep.collision_instants) + ", contact pct " +
              detail::format_double(rep.pct_min_contacts) + ")");
    return 0;
}

// ---------------------------------------------------------------------------
// Entry point.

inline int run(int argc, const char* const* argv) {
    CLI::App app{"motion-primitive in-hand manipulation pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    int jobs = 1;
    const std::array<std::pair<const char*, const char*>, 5> subs = {{
        {"synth", "synthesize demonstration recordings"},
        {"train", "learn a primitive dictionary from recordings"},
        {"test-dict", "evaluate a dictionary on held-out data"},
        {"plan", "solve the constrained planning problem per test segment"},
        {"verify", "run the constraint testing kit on planned trajectories"},
    }};
    for (const auto& [name, desc] : subs) {
        auto* s = app.add_subcommand(name, desc);
        s->add_option("--config", config_path, "JSON config file")->required();
        s->add_option("--jobs", jobs, "worker hint (execution is serial and deterministic)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const json cfg = load_json(config_path);
        apply_log_level(cfg);
        if (jobs != 1) log::debug("--jobs accepted; running serially for determinism");
        if (app.got_subcommand("synth")) return cmd_synth(cfg);
        if (app.got_subcommand("train")) return cmd_train(cfg);
        if (app.got_subcommand("test-dict")) return cmd_test_dict(cfg);
        if (app.got_subcommand("plan")) return cmd_plan(cfg);
        return cmd_verify(cfg);
    } catch (const Error& e) {
        json err;
        err["error"] = e.kind();
        err["message"] = e.what();
        std::cerr << err.dump(-1, ' ', false, json::error_handler_t::replace) << std::endl;
        return 1;
    } catch (const std::exception& e) {
        json err;
        err["error"] = "internal";
        err["message"] = e.what();
        std::cerr << err.dump(-1, ' ', false, json::error_handler_t::replace) << std::endl;
        return 1;
    }
}

}  // namespace primhand::cli
