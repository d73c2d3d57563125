#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "primhand/core.hpp"
#include "primhand/errors.hpp"
#include "primhand/log.hpp"

using namespace primhand;

namespace {

FingertipFrame make_frame(double base) {
    FingertipFrame f;
    for (int j = 0; j < kFingerCount; ++j)
        f[j] = Eigen::Vector3d(base + j, base + 0.1 * j, base - 0.2 * j);
    return f;
}

Eigen::Quaterniond random_quat(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
    q.normalize();
    return q;
}

}  // namespace

TEST_CASE("fingertip frame validates finiteness") {
    FingertipFrame f = make_frame(0.1);
    REQUIRE_NOTHROW(f.validate());
    f[2][1] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(f.validate(), ValidationError);
}

TEST_CASE("pose rejects non-unit quaternions and canonicalizes sign") {
    REQUIRE_THROWS_AS(Pose({0, 0, 0}, Eigen::Quaterniond(2.0, 0, 0, 0)), ValidationError);
    Pose p({0, 0, 0}, Eigen::Quaterniond(-1.0, 0, 0, 0));
    REQUIRE(p.orientation.w() == 1.0);  // sign flipped to the scalar >= 0 representative
    Pose q({1, 2, 3}, Eigen::Quaterniond(-0.6, 0.0, -0.8, 0.0));
    REQUIRE(q.orientation.w() > 0.0);
    REQUIRE(q.orientation.y() > 0.0);
}

TEST_CASE("pose apply/inverse round trip") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        Pose p({u(rng), u(rng), u(rng)}, random_quat(rng));
        Eigen::Vector3d x(u(rng), u(rng), u(rng));
        REQUIRE((p.inverse().apply(p.apply(x)) - x).norm() < 1e-12);
        REQUIRE((p.apply(p.inverse().apply(x)) - x).norm() < 1e-12);
    }
}

TEST_CASE("euler zyx round trips through the rotation") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double psi = 3.0 * u(rng), theta = 1.4 * u(rng), phi = 3.0 * u(rng);
        Pose p = Pose::from_euler_zyx({0, 0, 0}, psi, theta, phi);
        const Eigen::Vector3d e = p.euler_zyx();
        Pose p2 = Pose::from_euler_zyx({0, 0, 0}, e[0], e[1], e[2]);
        REQUIRE((p.rotation() - p2.rotation()).norm() < 1e-9);
    }
    // axis-angle agrees with the matching single-axis euler rotation
    Pose a = Pose::from_angle_axis({0, 0, 0}, 0.3, {0, 0, 1});
    Pose b = Pose::from_euler_zyx({0, 0, 0}, 0.3, 0, 0);
    REQUIRE((a.rotation() - b.rotation()).norm() < 1e-12);
}

TEST_CASE("to_hand_frame identity leaves the frame unchanged") {
    FingertipFrame f = make_frame(0.2);
    FingertipFrame g = to_hand_frame(f, Pose::identity());
    for (int j = 0; j < kFingerCount; ++j) REQUIRE((g[j] - f[j]).norm() == 0.0);
}

TEST_CASE("to_hand_frame subtracts a pure translation") {
    FingertipFrame f;
    for (int j = 0; j < kFingerCount; ++j) f[j] = Eigen::Vector3d(0.1, 0, 0);
    FingertipFrame g = to_hand_frame(f, Pose({0.1, 0, 0}, Eigen::Quaterniond::Identity()));
    for (int j = 0; j < kFingerCount; ++j) REQUIRE(g[j].norm() < 1e-15);
}

TEST_CASE("to_hand_frame round trips with to_world_frame") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int i = 0; i < 50; ++i) {
        Pose hand({u(rng), u(rng), u(rng)}, random_quat(rng));
        FingertipFrame f;
        for (int j = 0; j < kFingerCount; ++j) f[j] = Eigen::Vector3d(u(rng), u(rng), u(rng));
        FingertipFrame back = to_world_frame(to_hand_frame(f, hand), hand);
        for (int j = 0; j < kFingerCount; ++j) REQUIRE((back[j] - f[j]).norm() < 1e-12);
    }
}

TEST_CASE("to_hand_frame preserves pairwise distances") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    Pose hand({u(rng), u(rng), u(rng)}, random_quat(rng));
    FingertipFrame f = make_frame(0.3);
    FingertipFrame g = to_hand_frame(f, hand);
    for (int a = 0; a < kFingerCount; ++a)
        for (int b = a + 1; b < kFingerCount; ++b)
            REQUIRE(std::abs((f[a] - f[b]).norm() - (g[a] - g[b]).norm()) < 1e-12);
}

TEST_CASE("to_hand_frame rejects non-finite input") {
    FingertipFrame f = make_frame(0.1);
    f[0][0] = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(to_hand_frame(f, Pose::identity()), ValidationError);
}

TEST_CASE("median filter leaves constants alone") {
    Eigen::VectorXd s = Eigen::VectorXd::Constant(20, 3.5);
    for (int w : {1, 3, 7, 50}) REQUIRE((median_filter(s, w) - s).norm() == 0.0);
}

TEST_CASE("median filter removes an isolated spike") {
    Eigen::VectorXd s(5);
    s << 1, 100, 1, 1, 1;
    Eigen::VectorXd f = median_filter(s, 3);
    for (int i = 0; i < 5; ++i) REQUIRE(f[i] == 1.0);
}

TEST_CASE("median filter widens even windows") {
    Eigen::VectorXd s(9);
    s << 4, 2, 7, 1, 9, 3, 8, 5, 6;
    REQUIRE((median_filter(s, 4) - median_filter(s, 5)).norm() == 0.0);
}

TEST_CASE("median filter validates input") {
    Eigen::VectorXd s(3);
    s << 1, 2, 3;
    REQUIRE_THROWS_AS(median_filter(s, 0), ValidationError);
    s[1] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(median_filter(s, 3), ValidationError);
}

TEST_CASE("median filter is idempotent on monotone series and stays in range") {
    Eigen::VectorXd s(12);
    for (int i = 0; i < 12; ++i) s[i] = 0.5 * i - 2.0;
    REQUIRE((median_filter(s, 5) - s).norm() == 0.0);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd r(50);
    for (int i = 0; i < 50; ++i) r[i] = u(rng);
    Eigen::VectorXd f = median_filter(r, 7);
    REQUIRE(f.minCoeff() >= r.minCoeff());
    REQUIRE(f.maxCoeff() <= r.maxCoeff());
}

TEST_CASE("flatten produces time-major layout") {
    Trajectory traj;
    traj.frames = {make_frame(0.0), make_frame(1.0), make_frame(2.0)};
    FlatVector v = flatten(traj);
    REQUIRE(v.size() == 45);
    for (int t = 0; t < 3; ++t)
        for (int j = 0; j < kFingerCount; ++j)
            for (int a = 0; a < 3; ++a)
                REQUIRE(v[flat_index(t, j, a)] == traj.frames[static_cast<std::size_t>(t)][j][a]);
}

TEST_CASE("flatten handles a single frame and the standard segment length") {
    Trajectory one;
    one.frames = {make_frame(0.5)};
    REQUIRE(flatten(one).size() == 15);

    Trajectory seg;
    seg.frames.assign(100, make_frame(0.0));
    REQUIRE(flatten(seg).size() == 1500);
}

TEST_CASE("flatten and unflatten are exact inverses") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Trajectory traj;
    traj.rate_hz = 100.0;
    for (int t = 0; t < 17; ++t) {
        FingertipFrame f;
        for (int j = 0; j < kFingerCount; ++j) f[j] = Eigen::Vector3d(u(rng), u(rng), u(rng));
        traj.frames.push_back(f);
    }
    Trajectory back = unflatten(flatten(traj), traj.rate_hz);
    REQUIRE(back.length() == traj.length());
    REQUIRE(back.rate_hz == traj.rate_hz);
    for (int t = 0; t < 17; ++t)
        for (int j = 0; j < kFingerCount; ++j)
            REQUIRE(back.frames[static_cast<std::size_t>(t)][j] ==
                    traj.frames[static_cast<std::size_t>(t)][j]);
}

TEST_CASE("unflatten rejects bad lengths") {
    REQUIRE_THROWS_AS(unflatten(Eigen::VectorXd::Zero(16), 100.0), ShapeError);
    REQUIRE_THROWS_AS(unflatten(Eigen::VectorXd(), 100.0), ShapeError);
}

TEST_CASE("trajectory validation") {
    Trajectory t;
    REQUIRE_THROWS_AS(t.validate(), ValidationError);  // empty
    t.frames = {make_frame(0.0)};
    t.rate_hz = 0.0;
    REQUIRE_THROWS_AS(t.validate(), ValidationError);
    t.rate_hz = 100.0;
    REQUIRE_NOTHROW(t.validate());
}

TEST_CASE("log level parsing") {
    REQUIRE(log::parse_level("debug", log::Level::Warn) == log::Level::Debug);
    REQUIRE(log::parse_level("info", log::Level::Warn) == log::Level::Info);
    REQUIRE(log::parse_level("warn", log::Level::Error) == log::Level::Warn);
    REQUIRE(log::parse_level("error", log::Level::Warn) == log::Level::Error);
    REQUIRE(log::parse_level("bogus", log::Level::Info) == log::Level::Info);
}
