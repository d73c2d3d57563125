#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "primhand/core.hpp"
#include "primhand/detail/base64.hpp"
#include "primhand/detail/random.hpp"
#include "primhand/detail/stats.hpp"
#include "primhand/errors.hpp"
#include "primhand/log.hpp"

namespace primhand {

// Learned primitive dictionary: columns of W are motion primitives over one
// segment; `offset` is the per-row shift that made the training data
// nonnegative, so a generated flat trajectory is W*h - offset.
struct Dictionary {
    Eigen::MatrixXd W;       // 15N x I, entries >= 0
    Eigen::VectorXd offset;  // 15N
    int N = 0;
    double rate_hz = 100.0;
    int I = 0;
    std::string object;
    std::uint64_t seed = 0;

    void validate() const {
        if (N < 1 || I < 1) throw ValidationError("dictionary dimensions must be positive");
        if (W.rows() != kCoordsPerFrame * N || W.cols() != I)
            throw ShapeError("dictionary W shape does not match N and I");
        if (offset.size() != W.rows()) throw ShapeError("dictionary offset length mismatch");
        if (!W.allFinite() || !offset.allFinite())
            throw ValidationError("dictionary has non-finite entries");
        if ((W.array() < 0).any()) throw ValidationError("dictionary W has negative entries");
    }

    // Rows of the final time step; the planner's W_N.
    Eigen::MatrixXd final_rows() const { return W.middleRows(kCoordsPerFrame * (N - 1), kCoordsPerFrame); }
    Eigen::VectorXd final_offset() const { return offset.segment(kCoordsPerFrame * (N - 1), kCoordsPerFrame); }
};

using WeightVector = Eigen::VectorXd;

struct NmfConfig {
    int I = 200;
    int max_iters = 300;
    double rel_tol = 1e-8;  // stop when the objective decrease falls below rel_tol * objective
    std::uint64_t seed = 0;
    double init_scale = 1.0;

    void validate() const {
        if (I < 1) throw ValidationError("NMF needs I >= 1");
        if (max_iters < 1) throw ValidationError("NMF needs max_iters >= 1");
        if (!(rel_tol > 0)) throw ValidationError("NMF rel_tol must be positive");
        if (!(init_scale > 0)) throw ValidationError("NMF init_scale must be positive");
    }
};

// ---------------------------------------------------------------------------
// Nonnegativity shift.

struct ShiftedData {
    Eigen::MatrixXd V_shifted;
    Eigen::VectorXd offset;
};

inline ShiftedData nonneg_shift(const Eigen::MatrixXd& V, double margin = 1e-6) {
    if (!V.allFinite()) throw ValidationError("training matrix has non-finite entries");
    if (V.rows() == 0 || V.cols() == 0) throw ShapeError("training matrix is empty");
    ShiftedData out;
    out.offset = (margin - V.array().rowwise().minCoeff()).cwiseMax(0.0).matrix();
    out.V_shifted = V.colwise() + out.offset;
    return out;
}

// ---------------------------------------------------------------------------
// NMF with multiplicative updates on the squared-Frobenius objective.

struct NmfResult {
    Eigen::MatrixXd W;
    Eigen::MatrixXd H;
    std::vector<double> objective;  // ||V - WH||_F^2 before iteration 1, then after each iteration
    int iterations = 0;
};

inline NmfResult train_nmf(const Eigen::MatrixXd& V, const NmfConfig& cfg) {
    cfg.validate();
    if (!V.allFinite()) throw ValidationError("NMF input has non-finite entries");
    if ((V.array() < 0).any()) throw ValidationError("NMF input has negative entries");
    if (V.cols() < 1 || V.rows() < 1) throw ShapeError("NMF input is empty");
    if (cfg.I > V.cols())
        log::warn("NMF rank " + std::to_string(cfg.I) + " exceeds column count " +
                  std::to_string(V.cols()));

    const auto rows = V.rows();
    const auto cols = V.cols();
    constexpr double kFloor = 1e-12;

    detail::Rng rng(detail::derive_seed(cfg.seed, 0x4E4D'F001));
    Eigen::MatrixXd W(rows, cfg.I);
    Eigen::MatrixXd H(cfg.I, cols);
    for (Eigen::Index j = 0; j < W.cols(); ++j)
        for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = cfg.init_scale * rng.uniform_open0();
    for (Eigen::Index j = 0; j < H.cols(); ++j)
        for (Eigen::Index i = 0; i < H.rows(); ++i) H(i, j) = cfg.init_scale * rng.uniform_open0();

    NmfResult res;
    res.objective.reserve(static_cast<std::size_t>(cfg.max_iters) + 1);
    double obj = (V - W * H).squaredNorm();
    res.objective.push_back(obj);

    for (int it = 1; it <= cfg.max_iters; ++it) {
        // H <- H .* (W'V) ./ max(W'WH, floor)
        {
            const Eigen::MatrixXd WtV = W.transpose() * V;
            const Eigen::MatrixXd WtWH = (W.transpose() * W) * H;
            H.array() *= WtV.array() / WtWH.array().max(kFloor);
        }
        // W <- W .* (VH') ./ max(WHH', floor)
        {
            const Eigen::MatrixXd VHt = V * H.transpose();
            const Eigen::MatrixXd WHHt = W * (H * H.transpose());
            W.array() *= VHt.array() / WHHt.array().max(kFloor);
        }
        const double next = (V - W * H).squaredNorm();
        res.objective.push_back(next);
        res.iterations = it;
        const double decrease = obj - next;
        obj = next;
        if (decrease <= cfg.rel_tol * std::max(obj, 1e-300)) break;
    }
    log::info("NMF finished after " + std::to_string(res.iterations) + " iterations, objective " +
              std::to_string(obj));
    res.W = std::move(W);
    res.H = std::move(H);
    return res;
}

// ---------------------------------------------------------------------------
// Full training path: segments -> stacked matrix -> shift -> NMF -> Dictionary.

struct TrainedDictionary {
    Dictionary dict;
    Eigen::MatrixXd H_train;
    std::vector<double> objective;
};

inline Eigen::MatrixXd stack_segments(const std::vector<Trajectory>& segments) {
    if (segments.empty()) throw ValidationError("no training segments");
    const int n = segments.front().length();
    Eigen::MatrixXd V(kCoordsPerFrame * n, static_cast<Eigen::Index>(segments.size()));
    for (std::size_t s = 0; s < segments.size(); ++s) {
        if (segments[s].length() != n) throw ShapeError("segments have mixed lengths");
        V.col(static_cast<Eigen::Index>(s)) = flatten(segments[s]);
    }
    return V;
}

inline TrainedDictionary learn_dictionary(const std::vector<Trajectory>& segments,
                                          const NmfConfig& cfg, const std::string& object_name) {
    const Eigen::MatrixXd V = stack_segments(segments);
    const ShiftedData shifted = nonneg_shift(V);
    NmfResult nmf = train_nmf(shifted.V_shifted, cfg);

    TrainedDictionary out;
    out.dict.W = std::move(nmf.W);
    out.dict.offset = shifted.offset;
    out.dict.N = segments.front().length();
    out.dict.rate_hz = segments.front().rate_hz;
    out.dict.I = cfg.I;
    out.dict.object = object_name;
    out.dict.seed = cfg.seed;
    out.dict.validate();
    out.H_train = std::move(nmf.H);
    out.objective = std::move(nmf.objective);
    return out;
}

// ---------------------------------------------------------------------------
// Held-out evaluation.

// V_test holds raw (unshifted) flat segments as columns; the dictionary's
// offset is applied internally before the pseudo-inverse projection.
inline Eigen::MatrixXd reconstruct_weights(const Dictionary& dict, const Eigen::MatrixXd& V_test) {
    dict.validate();
    if (V_test.rows() != dict.W.rows())
        throw ShapeError("test matrix row count does not match dictionary");
    const Eigen::MatrixXd shifted = V_test.colwise() + dict.offset;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(dict.W);
    return cod.solve(shifted);
}

struct FingerStats {
    detail::SampleStats stats;
};

struct ReconStats {
    std::array<detail::SampleStats, kFingerCount> per_finger;
    detail::SampleStats overall;
    std::size_t instants = 0;  // instants per finger (segments * N)
};

inline ReconStats reconstruction_error(const Eigen::MatrixXd& V_test, const Dictionary& dict,
                                       const Eigen::MatrixXd& H_tilde) {
    dict.validate();
    if (V_test.rows() != dict.W.rows() || H_tilde.rows() != dict.I ||
        H_tilde.cols() != V_test.cols())
        throw ShapeError("reconstruction shapes are inconsistent");
    const Eigen::MatrixXd recon_shifted = dict.W * H_tilde;
    std::array<std::vector<double>, kFingerCount> errs;
    std::vector<double> all;
    const std::size_t total = static_cast<std::size_t>(V_test.cols()) * static_cast<std::size_t>(dict.N);
    for (auto& e : errs) e.reserve(total);
    all.reserve(total * kFingerCount);
    for (Eigen::Index s = 0; s < V_test.cols(); ++s) {
        for (int t = 0; t < dict.N; ++t) {
            for (int j = 0; j < kFingerCount; ++j) {
                const int row = flat_index(t, j, 0);
                // offset cancels: (recon - offset) - raw == recon - (raw + offset)
                const Eigen::Vector3d diff = recon_shifted.col(s).segment<3>(row) -
                                             (V_test.col(s).segment<3>(row) +
                                              dict.offset.segment<3>(row));
                const double e = diff.norm();
                errs[static_cast<std::size_t>(j)].push_back(e);
                all.push_back(e);
            }
        }
    }
    ReconStats out;
    out.instants = total;
    for (int j = 0; j < kFingerCount; ++j)
        out.per_finger[static_cast<std::size_t>(j)] = detail::describe(std::move(errs[static_cast<std::size_t>(j)]));
    out.overall = detail::describe(std::move(all));
    return out;
}

inline nlohmann::json recon_stats_to_json(const ReconStats& stats) {
    const auto pack = [](const detail::SampleStats& s) {
        nlohmann::json j;
        j["min"] = s.min;
        j["q1"] = s.q1;
        j["median"] = s.median;
        j["q3"] = s.q3;
        j["max"] = s.max;
        j["mean"] = s.mean;
        j["std"] = s.stddev;
        return j;
    };
    nlohmann::json j;
    j["instants_per_finger"] = stats.instants;
    for (int f = 0; f < kFingerCount; ++f)
        j["fingers"][std::string(kFingerNames[static_cast<std::size_t>(f)])] =
            pack(stats.per_finger[static_cast<std::size_t>(f)]);
    j["overall"] = pack(stats.overall);
    return j;
}

// ---------------------------------------------------------------------------
// Generation.

inline Trajectory generate(const Dictionary& dict, const WeightVector& h) {
    dict.validate();
    if (h.size() != dict.I) throw ShapeError("weight vector length does not match dictionary");
    if (!h.allFinite()) throw ValidationError("weight vector has non-finite entries");
    const FlatVector flat = dict.W * h - dict.offset;
    return unflatten(flat, dict.rate_hz);
}

// ---------------------------------------------------------------------------
// Serialization: JSON header plus a base64 row-major float64 W block.

inline void save_dictionary(const std::string& path, const Dictionary& dict) {
    dict.validate();
    nlohmann::json j;
    j["format"] = "primdict/1";
    j["N"] = dict.N;
    j["rate_hz"] = dict.rate_hz;
    j["I"] = dict.I;
    j["object"] = dict.object;
    j["seed"] = dict.seed;
    j["offset"] = std::vector<double>(dict.offset.data(), dict.offset.data() + dict.offset.size());
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(dict.W.size()) * sizeof(double));
    {
        std::size_t pos = 0;
        for (Eigen::Index r = 0; r < dict.W.rows(); ++r)
            for (Eigen::Index c = 0; c < dict.W.cols(); ++c) {
                const double v = dict.W(r, c);
                std::memcpy(bytes.data() + pos, &v, sizeof(double));
                pos += sizeof(double);
            }
    }
    j["W"] = detail::base64_encode(bytes.data(), bytes.size());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write dictionary: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

inline Dictionary load_dictionary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dictionary: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    Dictionary dict;
    try {
        if (j.at("format").get<std::string>() != "primdict/1")
            throw ParseError(path + ": unsupported dictionary format");
        dict.N = j.at("N").get<int>();
        dict.rate_hz = j.at("rate_hz").get<double>();
        dict.I = j.at("I").get<int>();
        dict.object = j.at("object").get<std::string>();
        dict.seed = j.at("seed").get<std::uint64_t>();
        const auto off = j.at("offset").get<std::vector<double>>();
        dict.offset = Eigen::Map<const Eigen::VectorXd>(off.data(), static_cast<Eigen::Index>(off.size()));
        const auto bytes = detail::base64_decode(j.at("W").get<std::string>());
        const std::size_t expect = static_cast<std::size_t>(dict.N) * kCoordsPerFrame *
                                   static_cast<std::size_t>(dict.I) * sizeof(double);
        if (bytes.size() != expect)
            throw ParseError(path + ": W block has " + std::to_string(bytes.size()) +
                             " bytes, expected " + std::to_string(expect));
        dict.W.resize(kCoordsPerFrame * dict.N, dict.I);
        std::size_t pos = 0;
        for (Eigen::Index r = 0; r < dict.W.rows(); ++r)
            for (Eigen::Index c = 0; c < dict.W.cols(); ++c) {
                double v;
                std::memcpy(&v, bytes.data() + pos, sizeof(double));
                pos += sizeof(double);
                dict.W(r, c) = v;
            }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    dict.validate();
    return dict;
}

}  // namespace primhand
