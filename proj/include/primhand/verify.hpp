#pragma once

#include <Eigen/Dense>

#include <array>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "primhand/core.hpp"
#include "primhand/detail/csv.hpp"
#include "primhand/detail/kdtree.hpp"
#include "primhand/detail/stats.hpp"
#include "primhand/errors.hpp"

namespace primhand {

struct VerifyConfig {
    double tau = 0.005;      // contact threshold, m
    double d_min = 0.008;    // minimum inter-finger distance, m
    double epsilon = 0.002;  // workspace membership radius, m
    int min_contacts = 3;

    void validate() const {
        if (!(tau > 0) || !(d_min > 0) || !(epsilon > 0) || min_contacts < 1)
            throw ValidationError("verify thresholds must be positive");
    }
};

// Transform a hand-frame point into the object frame given the object's pose
// in the hand frame. Kept as the single definition so accelerated queries and
// exhaustive oracles share the exact same arithmetic.
inline Eigen::Vector3d to_object_frame(const Pose& object_pose, const Eigen::Vector3d& p) {
    return object_pose.orientation.conjugate() * (p - object_pose.position);
}

// ---------------------------------------------------------------------------
// Reachable workspace: per-finger training positions under radius membership.

class Workspace {
   public:
    Workspace(const std::vector<Trajectory>& training, double epsilon) : eps_(epsilon) {
        if (!(epsilon > 0)) throw ValidationError("workspace radius must be positive");
        if (training.empty()) throw ValidationError("workspace needs training data");
        std::array<std::vector<Eigen::Vector3d>, kFingerCount> pts;
        for (const auto& traj : training) {
            traj.validate();
            for (const auto& f : traj.frames)
                for (int j = 0; j < kFingerCount; ++j) pts[static_cast<std::size_t>(j)].push_back(f[j]);
        }
        trees_.reserve(kFingerCount);
        for (int j = 0; j < kFingerCount; ++j) trees_.emplace_back(std::move(pts[static_cast<std::size_t>(j)]));
    }

    double epsilon() const { return eps_; }
    double nearest_sq(int finger, const Eigen::Vector3d& p) const {
        return trees_[static_cast<std::size_t>(finger)].nearest_sq(p);
    }
    bool contains(int finger, const Eigen::Vector3d& p) const {
        return nearest_sq(finger, p) <= eps_ * eps_;
    }
    const detail::KdTree3& tree(int finger) const { return trees_[static_cast<std::size_t>(finger)]; }

   private:
    std::vector<detail::KdTree3> trees_;
    double eps_;
};

inline Workspace workspace_from_training(const std::vector<Trajectory>& training, double epsilon) {
    return Workspace(training, epsilon);
}

struct ReachResult {
    std::vector<std::array<bool, kFingerCount>> flags;  // per instant
    int violations = 0;                                 // (instant, finger) pairs outside
};

inline ReachResult check_reachability(const Trajectory& traj, const Workspace& ws) {
    traj.validate();
    ReachResult out;
    out.flags.reserve(traj.frames.size());
    for (const auto& f : traj.frames) {
        std::array<bool, kFingerCount> row{};
        for (int j = 0; j < kFingerCount; ++j) {
            row[static_cast<std::size_t>(j)] = ws.contains(j, f[j]);
            if (!row[static_cast<std::size_t>(j)]) ++out.violations;
        }
        out.flags.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Inter-finger collisions.

struct CollisionResult {
    struct Row {
        double min_dist;
        int finger_a, finger_b;
    };
    std::vector<Row> rows;           // per instant
    std::vector<int> flagged;        // instants with min_dist < d_min
};

inline CollisionResult check_collisions(const Trajectory& traj, double d_min) {
    traj.validate();
    CollisionResult out;
    out.rows.reserve(traj.frames.size());
    for (std::size_t i = 0; i < traj.frames.size(); ++i) {
        const auto& f = traj.frames[i];
        CollisionResult::Row best{std::numeric_limits<double>::infinity(), -1, -1};
        for (int a = 0; a < kFingerCount; ++a)
            for (int b = a + 1; b < kFingerCount; ++b) {
                const double d = (f[a] - f[b]).norm();
                if (d < best.min_dist) best = {d, a, b};
            }
        if (best.min_dist < d_min) out.flagged.push_back(static_cast<int>(i));
        out.rows.push_back(best);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Finger-to-object distances and contact counting.

inline std::array<double, kFingerCount> finger_object_distance(const FingertipFrame& frame,
                                                               const detail::KdTree3& cloud,
                                                               const Pose& object_pose) {
    frame.validate();
    std::array<double, kFingerCount> out{};
    for (int j = 0; j < kFingerCount; ++j)
        out[static_cast<std::size_t>(j)] = cloud.nearest(to_object_frame(object_pose, frame[j]));
    return out;
}

struct ContactResult {
    std::vector<std::array<double, kFingerCount>> distances;  // per instant
    std::vector<int> counts;                                  // contacts per instant
    double pct_min_contacts = 0.0;
};

inline ContactResult check_contacts(const Trajectory& traj, const std::vector<Pose>& object_track,
                                    const detail::KdTree3& cloud, const VerifyConfig& cfg) {
    traj.validate();
    cfg.validate();
    if (object_track.size() != traj.frames.size())
        throw ShapeError("object pose track length does not match trajectory");
    ContactResult out;
    out.distances.reserve(traj.frames.size());
    out.counts.reserve(traj.frames.size());
    int good = 0;
    for (std::size_t i = 0; i < traj.frames.size(); ++i) {
        const auto d = finger_object_distance(traj.frames[i], cloud, object_track[i]);
        int c = 0;
        for (double v : d)
            if (v <= cfg.tau) ++c;
        if (c >= cfg.min_contacts) ++good;
        out.distances.push_back(d);
        out.counts.push_back(c);
    }
    out.pct_min_contacts = 100.0 * static_cast<double>(good) / static_cast<double>(traj.frames.size());
    return out;
}

// ---------------------------------------------------------------------------
// Human-vs-generated distance comparison: per-instant d_ref - d_gen.

struct DistanceDiff {
    std::vector<std::array<double, kFingerCount>> rows;
    std::array<detail::SampleStats, kFingerCount> per_finger;
};

inline DistanceDiff distance_difference(const Trajectory& reference, const Trajectory& generated,
                                        const std::vector<Pose>& object_track,
                                        const detail::KdTree3& cloud) {
    reference.validate();
    generated.validate();
    if (reference.frames.size() != generated.frames.size())
        throw ShapeError("reference and generated trajectories differ in length");
    if (object_track.size() != reference.frames.size())
        throw ShapeError("object pose track length does not match trajectories");
    DistanceDiff out;
    std::array<std::vector<double>, kFingerCount> cols;
    out.rows.reserve(reference.frames.size());
    for (std::size_t i = 0; i < reference.frames.size(); ++i) {
        const auto dr = finger_object_distance(reference.frames[i], cloud, object_track[i]);
        const auto dg = finger_object_distance(generated.frames[i], cloud, object_track[i]);
        std::array<double, kFingerCount> row{};
        for (int j = 0; j < kFingerCount; ++j) {
            row[static_cast<std::size_t>(j)] = dr[static_cast<std::size_t>(j)] - dg[static_cast<std::size_t>(j)];
            cols[static_cast<std::size_t>(j)].push_back(row[static_cast<std::size_t>(j)]);
        }
        out.rows.push_back(row);
    }
    for (int j = 0; j < kFingerCount; ++j)
        out.per_finger[static_cast<std::size_t>(j)] = detail::describe(std::move(cols[static_cast<std::size_t>(j)]));
    return out;
}

// ---------------------------------------------------------------------------
// Aggregated report over a batch of trajectories.

struct InstantRow {
    double t = 0.0;
    std::array<bool, kFingerCount> reach{};
    double min_pair_dist = 0.0;
    std::array<double, kFingerCount> dist{};
    int n_contacts = 0;
};

struct ConstraintReport {
    VerifyConfig cfg;
    int trajectories = 0;
    std::vector<InstantRow> rows;
    int reach_violations = 0;
    int collision_instants = 0;
    double pct_min_contacts = 0.0;
    std::optional<std::array<detail::SampleStats, kFingerCount>> distance_diff;
};

inline ConstraintReport report(const std::vector<Trajectory>& trajs, const Workspace& ws,
                               const std::vector<std::vector<Pose>>& object_tracks,
                               const detail::KdTree3& cloud, const VerifyConfig& cfg,
                               const std::vector<Trajectory>* reference = nullptr) {
    cfg.validate();
    if (trajs.empty()) throw ValidationError("report needs at least one trajectory");
    if (object_tracks.size() != trajs.size())
        throw ShapeError("one object pose track per trajectory required");
    if (reference && reference->size() != trajs.size())
        throw ShapeError("one reference trajectory per generated trajectory required");

    ConstraintReport rep;
    rep.cfg = cfg;
    rep.trajectories = static_cast<int>(trajs.size());
    std::array<std::vector<double>, kFingerCount> diff_cols;
    std::size_t instant = 0;
    int contact_ok = 0;
    for (std::size_t k = 0; k < trajs.size(); ++k) {
        const auto& traj = trajs[k];
        const auto reach = check_reachability(traj, ws);
        const auto coll = check_collisions(traj, cfg.d_min);
        const auto contacts = check_contacts(traj, object_tracks[k], cloud, cfg);
        rep.reach_violations += reach.violations;
        rep.collision_instants += static_cast<int>(coll.flagged.size());
        for (std::size_t i = 0; i < traj.frames.size(); ++i, ++instant) {
            InstantRow row;
            row.t = static_cast<double>(instant) / traj.rate_hz;
            row.reach = reach.flags[i];
            row.min_pair_dist = coll.rows[i].min_dist;
            row.dist = contacts.distances[i];
            row.n_contacts = contacts.counts[i];
            if (row.n_contacts >= cfg.min_contacts) ++contact_ok;
            rep.rows.push_back(row);
        }
        if (reference) {
            const auto dd = distance_difference((*reference)[k], traj, object_tracks[k], cloud);
            for (std::size_t i = 0; i < dd.rows.size(); ++i)
                for (int j = 0; j < kFingerCount; ++j)
                    diff_cols[static_cast<std::size_t>(j)].push_back(dd.rows[i][static_cast<std::size_t>(j)]);
        }
    }
    rep.pct_min_contacts = 100.0 * static_cast<double>(contact_ok) / static_cast<double>(rep.rows.size());
    if (reference) {
        std::array<detail::SampleStats, kFingerCount> st;
        for (int j = 0; j < kFingerCount; ++j)
            st[static_cast<std::size_t>(j)] = detail::describe(std::move(diff_cols[static_cast<std::size_t>(j)]));
        rep.distance_diff = st;
    }
    return rep;
}

inline nlohmann::json report_to_json(const ConstraintReport& rep) {
    nlohmann::json j;
    j["format"] = "primreport/1";
    j["trajectories"] = rep.trajectories;
    j["instants"] = rep.rows.size();
    j["tau"] = rep.cfg.tau;
    j["d_min"] = rep.cfg.d_min;
    j["epsilon"] = rep.cfg.epsilon;
    j["min_contacts"] = rep.cfg.min_contacts;
    j["reachability_violations"] = rep.reach_violations;
    j["collision_instants"] = rep.collision_instants;
    j["pct_instants_min_contacts"] = rep.pct_min_contacts;
    if (rep.distance_diff) {
        nlohmann::json dd;
        for (int f = 0; f < kFingerCount; ++f) {
            const auto& s = (*rep.distance_diff)[static_cast<std::size_t>(f)];
            nlohmann::json sj;
            sj["min"] = s.min;
            sj["q1"] = s.q1;
            sj["median"] = s.median;
            sj["q3"] = s.q3;
            sj["max"] = s.max;
            sj["mean"] = s.mean;
            sj["std"] = s.stddev;
            dd[std::string(kFingerNames[static_cast<std::size_t>(f)])] = sj;
        }
        j["distance_difference"] = dd;
    }
    return j;
}

inline void write_report_json(const std::string& path, const ConstraintReport& rep) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report: " + path);
    out << report_to_json(rep).dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

inline void write_report_csv(const std::string& path, const ConstraintReport& rep) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report csv: " + path);
    out << "t";
    for (auto f : kFingerNames) out << ",reach_" << f;
    out << ",min_pair_dist";
    for (auto f : kFingerNames) out << ",d_" << f;
    out << ",n_contacts\n";
    for (const auto& row : rep.rows) {
        out << detail::format_double(row.t);
        for (bool b : row.reach) out << ',' << (b ? 1 : 0);
        out << ',' << detail::format_double(row.min_pair_dist);
        for (double d : row.dist) out << ',' << detail::format_double(d);
        out << ',' << row.n_contacts << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace primhand
