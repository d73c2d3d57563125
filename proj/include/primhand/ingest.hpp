#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "primhand/core.hpp"
#include "primhand/detail/csv.hpp"
#include "primhand/detail/kdtree.hpp"
#include "primhand/detail/random.hpp"
#include "primhand/errors.hpp"
#include "primhand/log.hpp"

namespace primhand {

// ---------------------------------------------------------------------------
// Recording: raw demonstration rows in world coordinates.

struct RecordingRow {
    double t = 0.0;
    FingertipFrame tips;  // world frame
    Pose hand_back;
    std::optional<Pose> object;
};

struct Recording {
    double rate_hz = 0.0;
    std::vector<RecordingRow> rows;

    bool has_object() const { return !rows.empty() && rows.front().object.has_value(); }

    void validate() const {
        if (rows.size() < 2) throw ValidationError("recording needs at least 2 rows");
        const double span = rows.back().t - rows.front().t;
        if (!(span > 0)) throw ValidationError("recording timestamps do not advance");
        const double mean_dt = span / static_cast<double>(rows.size() - 1);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double dt = rows[i].t - rows[i - 1].t;
            if (!(dt > 0))
                throw ValidationError("row " + std::to_string(i + 1) +
                                      ": timestamp not increasing");
            if (std::abs(dt - mean_dt) > 0.01 * mean_dt)
                throw ValidationError("row " + std::to_string(i + 1) +
                                      ": sample rate varies by more than 1%");
        }
        const bool with_object = rows.front().object.has_value();
        for (const auto& r : rows)
            if (r.object.has_value() != with_object)
                throw ValidationError("object pose present in some rows but not all");
    }
};

namespace detail {

inline std::string recording_header(bool with_object) {
    std::string h = "t";
    for (auto f : kFingerNames)
        for (const char* a : {"_x", "_y", "_z"}) h += "," + std::string(f) + a;
    h += ",hb_x,hb_y,hb_z,hb_qw,hb_qx,hb_qy,hb_qz";
    if (with_object) h += ",ob_x,ob_y,ob_z,ob_qw,ob_qx,ob_qy,ob_qz";
    return h;
}

}  // namespace detail

inline Recording parse_recording(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open recording: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();

    std::vector<std::string_view> lines;
    {
        std::string_view rest = text;
        while (!rest.empty()) {
            const auto nl = rest.find('\n');
            std::string_view line = rest.substr(0, nl);
            if (nl == std::string_view::npos)
                rest = {};
            else
                rest.remove_prefix(nl + 1);
            if (!detail::trim(line).empty()) lines.push_back(line);
        }
    }
    if (lines.empty()) throw ParseError(path + ": empty file");

    const auto header = detail::split_csv(lines[0]);
    const std::string base_names = detail::recording_header(false);
    const std::string obj_names = detail::recording_header(true);
    const auto expect_base = detail::split_csv(base_names);
    const auto expect_obj = detail::split_csv(obj_names);
    bool with_object = false;
    if (header.size() == expect_obj.size())
        with_object = true;
    else if (header.size() != expect_base.size())
        throw ParseError(path + ": header has " + std::to_string(header.size()) +
                         " columns, expected " + std::to_string(expect_base.size()) + " or " +
                         std::to_string(expect_obj.size()));
    const auto& expect = with_object ? expect_obj : expect_base;
    for (std::size_t c = 0; c < expect.size(); ++c)
        if (header[c] != expect[c])
            throw ParseError(path + ": header column " + std::to_string(c + 1) + " is '" +
                             std::string(header[c]) + "', expected '" + std::string(expect[c]) +
                             "'");

    Recording rec;
    rec.rows.reserve(lines.size() - 1);
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::string where = path + ": row " + std::to_string(li);
        const auto fields = detail::split_csv(lines[li]);
        if (fields.size() != expect.size())
            throw ParseError(where + ": has " + std::to_string(fields.size()) +
                             " columns, expected " + std::to_string(expect.size()));
        std::size_t c = 0;
        auto next = [&]() {
            const std::size_t i = c++;
            return detail::parse_double(fields[i], where + ", column " + std::string(expect[i]));
        };
        RecordingRow row;
        row.t = next();
        for (int j = 0; j < kFingerCount; ++j)
            for (int a = 0; a < 3; ++a) row.tips[j][a] = next();
        try {
            const double px = next(), py = next(), pz = next();
            const double qw = next(), qx = next(), qy = next(), qz = next();
            row.hand_back = Pose({px, py, pz}, Eigen::Quaterniond(qw, qx, qy, qz));
            if (with_object) {
                const double ox = next(), oy = next(), oz = next();
                const double ow = next(), oxq = next(), oyq = next(), ozq = next();
                row.object = Pose({ox, oy, oz}, Eigen::Quaterniond(ow, oxq, oyq, ozq));
            }
        } catch (const ValidationError& e) {
            throw ParseError(where + ": " + e.what());
        }
        if (!rec.rows.empty() && !(row.t > rec.rows.back().t))
            throw ParseError(where + ": timestamp not increasing");
        rec.rows.push_back(std::move(row));
    }
    if (rec.rows.size() < 2) throw ParseError(path + ": needs at least 2 data rows");
    rec.rate_hz = static_cast<double>(rec.rows.size() - 1) / (rec.rows.back().t - rec.rows.front().t);
    rec.validate();
    return rec;
}

inline void write_recording(const std::string& path, const Recording& rec) {
    rec.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write recording: " + path);
    const bool with_object = rec.has_object();
    out << detail::recording_header(with_object) << "\n";
    for (const auto& r : rec.rows) {
        out << detail::format_double(r.t);
        for (int j = 0; j < kFingerCount; ++j)
            for (int a = 0; a < 3; ++a) out << ',' << detail::format_double(r.tips[j][a]);
        const auto put_pose = [&](const Pose& p) {
            for (int a = 0; a < 3; ++a) out << ',' << detail::format_double(p.position[a]);
            out << ',' << detail::format_double(p.orientation.w())
                << ',' << detail::format_double(p.orientation.x())
                << ',' << detail::format_double(p.orientation.y())
                << ',' << detail::format_double(p.orientation.z());
        };
        put_pose(r.hand_back);
        if (with_object) put_pose(*r.object);
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Preprocessing: express everything in the hand-back frame, median-filter.

struct PreprocessResult {
    Trajectory trajectory;
    std::optional<std::vector<Pose>> object_track;
};

inline PreprocessResult preprocess(const Recording& rec, int filter_window = 50) {
    rec.validate();
    const int n = static_cast<int>(rec.rows.size());

    Eigen::MatrixXd coords(n, kCoordsPerFrame);
    for (int i = 0; i < n; ++i) {
        const auto& row = rec.rows[static_cast<std::size_t>(i)];
        const FingertipFrame local = to_hand_frame(row.tips, row.hand_back);
        for (int j = 0; j < kFingerCount; ++j) coords.block<1, 3>(i, 3 * j) = local[j].transpose();
    }
    for (int c = 0; c < kCoordsPerFrame; ++c)
        coords.col(c) = median_filter(coords.col(c), filter_window);

    PreprocessResult out;
    out.trajectory.rate_hz = rec.rate_hz;
    out.trajectory.frames.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < kFingerCount; ++j)
            out.trajectory.frames[static_cast<std::size_t>(i)][j] =
                coords.block<1, 3>(i, 3 * j).transpose();

    if (rec.has_object()) {
        Eigen::MatrixXd opos(n, 3);
        Eigen::MatrixXd oq(n, 4);
        Eigen::Vector4d prev;
        for (int i = 0; i < n; ++i) {
            const auto& row = rec.rows[static_cast<std::size_t>(i)];
            const Pose rel = [&] {
                const Pose hi = row.hand_back.inverse();
                Pose p;
                p.position = hi.orientation * row.object->position + hi.position;
                p.orientation = hi.orientation * row.object->orientation;
                return p;
            }();
            opos.row(i) = rel.position.transpose();
            Eigen::Vector4d q(rel.orientation.w(), rel.orientation.x(), rel.orientation.y(),
                              rel.orientation.z());
            // keep the component series continuous so the median filter never
            // straddles a quaternion sign flip
            if (i > 0 && prev.dot(q) < 0) q = -q;
            oq.row(i) = q.transpose();
            prev = q;
        }
        for (int c = 0; c < 3; ++c) opos.col(c) = median_filter(opos.col(c), filter_window);
        for (int c = 0; c < 4; ++c) oq.col(c) = median_filter(oq.col(c), filter_window);

        std::vector<Pose> track;
        track.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            Eigen::Quaterniond q(oq(i, 0), oq(i, 1), oq(i, 2), oq(i, 3));
            if (!(q.norm() > 1e-6))
                throw DegenerateError("filtered object quaternion collapsed near zero");
            q.normalize();
            Pose p;
            p.position = opos.row(i).transpose();
            p.orientation = q;
            p.canonicalize();
            track.push_back(p);
        }
        out.object_track = std::move(track);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Object models and surface point clouds.

struct ObjectModel {
    enum class Shape { cube, cylinder };

    Shape shape = Shape::cube;
    double edge = 0.0;      // cube
    double diameter = 0.0;  // cylinder
    double height = 0.0;    // cylinder
    int cloud_target = 0;
    std::uint64_t seed = 0;

    std::vector<Eigen::Vector3d> cloud;  // object frame, regenerated on load
    double resolution = 0.0;             // max nearest-neighbor spacing of the cloud

    std::string name() const { return shape == Shape::cube ? "cube" : "cylinder"; }

    void validate_dims() const {
        if (shape == Shape::cube) {
            if (!(edge > 0)) throw ValidationError("cube edge must be positive");
        } else {
            if (!(diameter > 0) || !(height > 0))
                throw ValidationError("cylinder dimensions must be positive");
        }
    }

    // Signed-free distance from p to the parametric surface (0 on the surface,
    // positive inside or outside).
    double surface_distance(const Eigen::Vector3d& p) const {
        validate_dims();
        if (shape == Shape::cube) {
            const double b = edge / 2.0;
            const Eigen::Vector3d q = p.cwiseAbs() - Eigen::Vector3d::Constant(b);
            const double outside = q.cwiseMax(0.0).norm();
            return outside > 0 ? outside : -q.maxCoeff();
        }
        const double r = diameter / 2.0;
        const double hh = height / 2.0;
        const double dr = std::hypot(p.x(), p.y()) - r;
        const double dz = std::abs(p.z()) - hh;
        if (dr <= 0 && dz <= 0) return std::min(-dr, -dz);
        return std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
    }
};

namespace detail {

inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
    double inv = 1.0 / static_cast<double>(base);
    double scale = inv;
    double v = 0.0;
    while (i > 0) {
        v += static_cast<double>(i % base) * scale;
        i /= base;
        scale *= inv;
    }
    return v;
}

// Largest-remainder apportionment of n samples over weights.
inline std::vector<int> apportion(const std::vector<double>& weights, int n) {
    const double total = [&] {
        double s = 0;
        for (double w : weights) s += w;
        return s;
    }();
    std::vector<int> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    int assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double quota = static_cast<double>(n) * weights[i] / total;
        counts[i] = static_cast<int>(std::floor(quota));
        assigned += counts[i];
        remainders.emplace_back(quota - std::floor(quota), i);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int k = 0; k < n - assigned; ++k)
        ++counts[remainders[static_cast<std::size_t>(k) % remainders.size()].second];
    return counts;
}

}  // namespace detail

// Quasi-uniform surface sampling: per face, a Halton (2,3) sequence with a
// seeded Cranley-Patterson rotation; samples apportioned by face area.
inline std::vector<Eigen::Vector3d> build_pointcloud(const ObjectModel& model, int n_points) {
    model.validate_dims();
    if (n_points < 6) throw ValidationError("point cloud needs at least 6 points");

    std::vector<Eigen::Vector3d> cloud;
    cloud.reserve(static_cast<std::size_t>(n_points));

    const auto face_samples = [&](std::uint64_t face, int count, auto&& place) {
        detail::Rng rng(detail::derive_seed(model.seed, 0x9C10'0000 + face));
        const double su = rng.uniform01();
        const double sv = rng.uniform01();
        for (int i = 1; i <= count; ++i) {
            double u = detail::radical_inverse(static_cast<std::uint64_t>(i), 2) + su;
            double v = detail::radical_inverse(static_cast<std::uint64_t>(i), 3) + sv;
            u -= std::floor(u);
            v -= std::floor(v);
            cloud.push_back(place(u, v));
        }
    };

    if (model.shape == ObjectModel::Shape::cube) {
        const double b = model.edge / 2.0;
        const auto counts = detail::apportion(std::vector<double>(6, 1.0), n_points);
        // faces: +x, -x, +y, -y, +z, -z
        for (int f = 0; f < 6; ++f) {
            const int axis = f / 2;
            const double sign = (f % 2 == 0) ? b : -b;
            face_samples(static_cast<std::uint64_t>(f), counts[static_cast<std::size_t>(f)],
                         [&](double u, double v) {
                             Eigen::Vector3d p;
                             p[axis] = sign;
                             p[(axis + 1) % 3] = (u - 0.5) * model.edge;
                             p[(axis + 2) % 3] = (v - 0.5) * model.edge;
                             return p;
                         });
        }
    } else {
        const double r = model.diameter / 2.0;
        const double hh = model.height / 2.0;
        const double pi = std::acos(-1.0);
        const std::vector<double> areas = {2.0 * pi * r * model.height, pi * r * r, pi * r * r};
        const auto counts = detail::apportion(areas, n_points);
        face_samples(0, counts[0], [&](double u, double v) {
            const double th = 2.0 * pi * u;
            return Eigen::Vector3d(r * std::cos(th), r * std::sin(th), (v - 0.5) * model.height);
        });
        for (int cap = 0; cap < 2; ++cap)
            face_samples(static_cast<std::uint64_t>(1 + cap), counts[static_cast<std::size_t>(1 + cap)],
                         [&](double u, double v) {
                             const double rad = r * std::sqrt(u);
                             const double th = 2.0 * pi * v;
                             return Eigen::Vector3d(rad * std::cos(th), rad * std::sin(th),
                                                    cap == 0 ? hh : -hh);
                         });
    }
    return cloud;
}

inline void populate_cloud(ObjectModel& model) {
    if (model.cloud_target < 6) throw ValidationError("object cloud size must be at least 6");
    model.cloud = build_pointcloud(model, model.cloud_target);
    detail::KdTree3 tree(model.cloud);
    model.resolution = tree.max_nn_spacing();
    log::debug("cloud for " + model.name() + ": " + std::to_string(model.cloud.size()) +
               " points, resolution " + std::to_string(model.resolution));
}

inline nlohmann::json object_model_to_json(const ObjectModel& model) {
    nlohmann::json j;
    j["shape"] = model.name();
    if (model.shape == ObjectModel::Shape::cube) {
        j["edge"] = model.edge;
    } else {
        j["diameter"] = model.diameter;
        j["height"] = model.height;
    }
    j["cloud_size"] = model.cloud_target;
    j["seed"] = model.seed;
    return j;
}

inline ObjectModel object_model_from_json(const nlohmann::json& j, bool with_cloud = true) {
    ObjectModel m;
    try {
        const std::string shape = j.at("shape").get<std::string>();
        if (shape == "cube") {
            m.shape = ObjectModel::Shape::cube;
            m.edge = j.at("edge").get<double>();
        } else if (shape == "cylinder") {
            m.shape = ObjectModel::Shape::cylinder;
            m.diameter = j.at("diameter").get<double>();
            m.height = j.at("height").get<double>();
        } else {
            throw ConfigError("unknown object shape: " + shape);
        }
        m.cloud_target = j.at("cloud_size").get<int>();
        m.seed = j.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("object model: ") + e.what());
    }
    m.validate_dims();
    if (with_cloud) populate_cloud(m);
    return m;
}

// ---------------------------------------------------------------------------
// Segmentation into fixed-length windows.

inline std::vector<Trajectory> segment(const Trajectory& traj, double seconds = 1.0) {
    traj.validate();
    if (!(seconds > 0)) throw ValidationError("segment length must be positive");
    const double exact = traj.rate_hz * seconds;
    const int n = static_cast<int>(std::lround(exact));
    if (n < 1 || std::abs(exact - n) > 1e-6)
        throw ValidationError("segment length is not a whole number of samples");
    if (traj.length() < n) throw ValidationError("trajectory shorter than one segment");
    std::vector<Trajectory> segments;
    segments.reserve(static_cast<std::size_t>(traj.length() / n));
    for (int s = 0; s + n <= traj.length(); s += n) {
        Trajectory seg;
        seg.rate_hz = traj.rate_hz;
        seg.frames.assign(traj.frames.begin() + s, traj.frames.begin() + s + n);
        segments.push_back(std::move(seg));
    }
    return segments;
}

// ---------------------------------------------------------------------------
// Synthetic demonstrations: an object spinning about a fixed axis while five
// fingertips ride fixed surface contact points.

struct SynthConfig {
    ObjectModel object;  // dimensions only; cloud not needed here
    std::array<Eigen::Vector3d, kFingerCount> contacts{};  // object frame, on surface
    Eigen::Vector3d object_center{0.0, 0.0, 0.10};         // hand frame
    Eigen::Vector3d rotation_axis{0.0, 0.0, 1.0};
    double angular_speed = 0.6;  // rad/s
    double initial_angle = 0.0;  // rad
    double noise_std = 0.0005;   // m, isotropic in hand frame
    double duration_s = 120.0;
    double rate_hz = 100.0;
    std::uint64_t seed = 0;
    Pose hand_pose;                          // world pose of the hand back at t=0
    Eigen::Vector3d hand_velocity{0, 0, 0};  // world, lets tests exercise a moving hand

    void validate() const {
        object.validate_dims();
        if (!(noise_std >= 0)) throw ConfigError("noise std must be >= 0");
        if (!(rate_hz > 0)) throw ConfigError("rate must be positive");
        if (!(duration_s * rate_hz >= 2)) throw ConfigError("duration must cover at least 2 samples");
        if (rotation_axis.norm() < 1e-12) throw ConfigError("rotation axis must be nonzero");
        for (int j = 0; j < kFingerCount; ++j)
            if (object.surface_distance(contacts[static_cast<std::size_t>(j)]) > 1e-9)
                throw ConfigError("contact point for finger " + std::string(kFingerNames[static_cast<std::size_t>(j)]) +
                                  " is off the object surface");
    }
};

inline Recording synth_demo(const SynthConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(std::lround(cfg.duration_s * cfg.rate_hz));
    const Eigen::Vector3d axis = cfg.rotation_axis.normalized();
    detail::Rng noise(detail::derive_seed(cfg.seed, 0x5E'0001));

    Recording rec;
    rec.rate_hz = cfg.rate_hz;
    rec.rows.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        RecordingRow row;
        row.t = static_cast<double>(k) / cfg.rate_hz;
        const double angle = cfg.initial_angle + cfg.angular_speed * row.t;
        const Eigen::Quaterniond q_obj(Eigen::AngleAxisd(angle, axis));

        Pose object_in_hand;
        object_in_hand.position = cfg.object_center;
        object_in_hand.orientation = q_obj;
        object_in_hand.canonicalize();

        Pose hand = cfg.hand_pose;
        hand.position += cfg.hand_velocity * row.t;

        FingertipFrame local;
        for (int j = 0; j < kFingerCount; ++j) {
            Eigen::Vector3d p = object_in_hand.apply(cfg.contacts[static_cast<std::size_t>(j)]);
            for (int a = 0; a < 3; ++a) p[a] += noise.gaussian(0.0, cfg.noise_std);
            local[j] = p;
        }
        row.tips = to_world_frame(local, hand);
        row.hand_back = hand;
        Pose object_world;
        object_world.position = hand.apply(object_in_hand.position);
        object_world.orientation = hand.orientation * object_in_hand.orientation;
        object_world.canonicalize();
        row.object = object_world;
        rec.rows.push_back(std::move(row));
    }
    rec.validate();
    return rec;
}

}  // namespace primhand
