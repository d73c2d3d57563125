#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "primhand/core.hpp"
#include "primhand/dictionary.hpp"
#include "primhand/errors.hpp"
#include "primhand/log.hpp"
#include "primhand/pose.hpp"

namespace primhand {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PlanRequest {
    FingertipFrame target;  // desired final fingertips, hand frame
    std::optional<Pose> object_target;
    std::optional<ContactTemplate> contact_template;
    double alpha = 0.0;  // object-pose cost weight
    std::array<Eigen::Vector3d, kFingerCount> v_min;
    std::array<Eigen::Vector3d, kFingerCount> v_max;
    bool nonneg_weights = false;

    PlanRequest() {
        for (auto& v : v_min) v = Eigen::Vector3d::Constant(-1.0);
        for (auto& v : v_max) v = Eigen::Vector3d::Constant(1.0);
    }

    void validate() const {
        target.validate();
        if (!(alpha >= 0) || !std::isfinite(alpha)) throw ValidationError("alpha must be finite and >= 0");
        if (alpha > 0 && (!object_target || !contact_template))
            throw ConfigError("object-pose cost needs both a desired pose and a contact template");
        for (int j = 0; j < kFingerCount; ++j)
            for (int a = 0; a < 3; ++a) {
                const double lo = v_min[static_cast<std::size_t>(j)][a];
                const double hi = v_max[static_cast<std::size_t>(j)][a];
                if (std::isnan(lo) || std::isnan(hi)) throw ValidationError("velocity bound is NaN");
            }
        if (contact_template) contact_template->validate();
    }
};

struct QpProblem {
    Eigen::MatrixXd Q;  // I x I, symmetric PSD, unregularized
    Eigen::VectorXd q;
    Eigen::MatrixXd G;       // m x I
    Eigen::VectorXd lo, hi;  // per-row bounds, +-inf allowed
    std::vector<std::string> row_notes;
    double objective_constant = 0.0;  // makes 0.5 h'Qh + q'h + constant equal the cost J(h)

    void validate() const {
        if (Q.rows() != Q.cols() || Q.rows() < 1) throw ShapeError("Q must be square");
        if (q.size() != Q.rows()) throw ShapeError("q length does not match Q");
        const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
        if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw ValidationError("Q is not symmetric");
        if (G.rows() > 0 && G.cols() != Q.rows()) throw ShapeError("G width does not match Q");
        if (lo.size() != G.rows() || hi.size() != G.rows())
            throw ShapeError("constraint bounds do not match G");
        if (row_notes.size() != static_cast<std::size_t>(G.rows()))
            throw ShapeError("row notes do not match G");
    }
};

enum class PlanStatus { optimal, max_iter, infeasible };

inline std::string to_string(PlanStatus s) {
    switch (s) {
        case PlanStatus::optimal: return "optimal";
        case PlanStatus::max_iter: return "max-iter";
        default: return "infeasible";
    }
}

struct PlanResult {
    Eigen::VectorXd h;
    Trajectory trajectory;  // filled by plan(), not by solve_qp
    double objective = 0.0; // J(h), constant included
    double stationarity = 0.0;
    double primal_violation = 0.0;
    double complementarity = 0.0;
    int iterations = 0;
    PlanStatus status = PlanStatus::optimal;
    double regularization = 0.0;  // diagonal shift the solver added
    int active_constraints = 0;
};

// ---------------------------------------------------------------------------
// QP assembly.
//
// Cost: J(h) = || W_N h - (f_hat + off_N) ||^2 + alpha || (L h + c) - T_f ||^2.
// Velocity rows bound the finite-difference velocity of the *emitted*
// trajectory W h - offset, so the per-row offset difference moves into the
// bounds instead of cancelling.

inline QpProblem build_qp(const Dictionary& dict, const PlanRequest& req) {
    dict.validate();
    req.validate();
    const int I = dict.I;
    const int N = dict.N;

    const Eigen::MatrixXd W_N = dict.final_rows();
    const Eigen::VectorXd off_N = dict.final_offset();
    Eigen::VectorXd target(kCoordsPerFrame);
    for (int j = 0; j < kFingerCount; ++j) target.segment<3>(3 * j) = req.target[j];
    const Eigen::VectorXd shifted_target = target + off_N;

    QpProblem p;
    p.Q = Eigen::MatrixXd::Zero(I, I);
    p.Q.selfadjointView<Eigen::Lower>().rankUpdate(W_N.transpose(), 2.0);
    p.q = -2.0 * (W_N.transpose() * shifted_target);
    p.objective_constant = shifted_target.squaredNorm();

    if (req.alpha > 0) {
        const PoseMap pm = pose_map(dict, *req.contact_template);
        const AffineParams tf = pose_target(*req.object_target, *req.contact_template);
        const Eigen::VectorXd resid_target = tf - pm.c;
        p.Q.selfadjointView<Eigen::Lower>().rankUpdate(pm.L.transpose(), 2.0 * req.alpha);
        p.q -= 2.0 * req.alpha * (pm.L.transpose() * resid_target);
        p.objective_constant += req.alpha * resid_target.squaredNorm();
    }
    p.Q.triangularView<Eigen::StrictlyUpper>() = p.Q.transpose();

    // velocity rows (skipped when both bounds are infinite)
    std::vector<int> keep_t, keep_c;
    for (int t = 0; t + 1 < N; ++t)
        for (int c = 0; c < kCoordsPerFrame; ++c) {
            const double lo = req.v_min[static_cast<std::size_t>(c / 3)][c % 3];
            const double hi = req.v_max[static_cast<std::size_t>(c / 3)][c % 3];
            if (std::isinf(lo) && lo < 0 && std::isinf(hi) && hi > 0) continue;
            keep_t.push_back(t);
            keep_c.push_back(c);
        }
    const int n_vel = static_cast<int>(keep_t.size());
    const int n_rows = n_vel + (req.nonneg_weights ? I : 0);
    p.G.resize(n_rows, I);
    p.lo.resize(n_rows);
    p.hi.resize(n_rows);
    p.row_notes.reserve(static_cast<std::size_t>(n_rows));
    for (int r = 0; r < n_vel; ++r) {
        const int t = keep_t[static_cast<std::size_t>(r)];
        const int c = keep_c[static_cast<std::size_t>(r)];
        const int row0 = kCoordsPerFrame * t + c;
        const int row1 = kCoordsPerFrame * (t + 1) + c;
        p.G.row(r) = dict.rate_hz * (dict.W.row(row1) - dict.W.row(row0));
        const double doff = dict.rate_hz * (dict.offset[row1] - dict.offset[row0]);
        const double lo = req.v_min[static_cast<std::size_t>(c / 3)][c % 3];
        const double hi = req.v_max[static_cast<std::size_t>(c / 3)][c % 3];
        p.lo[r] = std::isinf(lo) ? -kInf : lo + doff;
        p.hi[r] = std::isinf(hi) ? kInf : hi + doff;
        p.row_notes.push_back("vel t=" + std::to_string(t) + " " +
                              std::string(kFingerNames[static_cast<std::size_t>(c / 3)]) + "_" +
                              std::string(1, "xyz"[c % 3]));
    }
    if (req.nonneg_weights) {
        p.G.bottomRows(I) = Eigen::MatrixXd::Identity(I, I);
        p.lo.tail(I).setZero();
        p.hi.tail(I).setConstant(kInf);
        for (int i = 0; i < I; ++i) p.row_notes.push_back("nonneg h[" + std::to_string(i) + "]");
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// Dual active-set solver (Goldfarb-Idnani). Starts at the unconstrained
// minimum of the (regularized) strictly convex problem and adds violated
// constraints one at a time, dropping blocking ones along the way. Finite,
// deterministic, and certificate-grade KKT residuals at the end.

inline PlanResult solve_qp(const QpProblem& p, double tol = 1e-8, int max_iter = 0) {
    p.validate();
    const int I = static_cast<int>(p.Q.rows());
    const int m = static_cast<int>(p.G.rows());
    if (max_iter <= 0) max_iter = 100 * (I + 10);
    if (!(tol > 0)) throw ValidationError("solver tolerance must be positive");

    PlanResult res;

    const double trace = p.Q.trace();
    if (!(trace > 0)) throw ValidationError("Q must have positive trace");
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.Q, Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues()(0);
        const double lmax = es.eigenvalues()(I - 1);
        if (lmin < -1e-9 * std::abs(lmax)) throw ValidationError("Q is not positive semidefinite");
        if (lmin < 1e-10 * trace) res.regularization = 1e-10 * trace;
    }
    Eigen::MatrixXd Qr = p.Q;
    if (res.regularization > 0) Qr.diagonal().array() += res.regularization;
    const Eigen::LLT<Eigen::MatrixXd> llt(Qr);
    if (llt.info() != Eigen::Success) throw ValidationError("Q factorization failed");

    Eigen::VectorXd h = llt.solve(-p.q);

    // infeasible boxes are detectable up front
    for (int i = 0; i < m; ++i)
        if (p.lo[i] > p.hi[i]) {
            res.status = PlanStatus::infeasible;
            res.h = std::move(h);
            res.objective = 0.5 * res.h.dot(p.Q * res.h) + p.q.dot(res.h) + p.objective_constant;
            return res;
        }

    // virtual one-sided constraints: id 2i   -> +G.row(i) * h >= lo(i)
    //                                id 2i+1 -> -G.row(i) * h >= -hi(i)
    const auto normal_dot = [&](int vid, const Eigen::VectorXd& x) {
        const int row = vid / 2;
        const double v = p.G.row(row).dot(x);
        return (vid % 2 == 0) ? v : -v;
    };
    const auto bound_of = [&](int vid) {
        const int row = vid / 2;
        return (vid % 2 == 0) ? p.lo[row] : -p.hi[row];
    };
    const auto normal_of = [&](int vid) -> Eigen::VectorXd {
        const int row = vid / 2;
        return (vid % 2 == 0) ? Eigen::VectorXd(p.G.row(row)) : Eigen::VectorXd(-p.G.row(row));
    };

    std::vector<int> active;
    Eigen::MatrixXd Nact(I, 0), QiN(I, 0);
    Eigen::VectorXd u(0);
    std::vector<char> is_active(static_cast<std::size_t>(2 * m), 0);

    const auto drop_col = [](Eigen::MatrixXd& M, int col) {
        const int last = static_cast<int>(M.cols()) - 1;
        for (int c = col; c < last; ++c) M.col(c) = M.col(c + 1);
        M.conservativeResize(Eigen::NoChange, last);
    };

    const double sel_scale = std::max(1e-13, 1e-3 * tol);
    int iter = 0;
    bool hit_cap = false;

    while (true) {
        // most violated inactive virtual constraint
        int pick = -1;
        double worst = 0.0;
        if (m > 0) {
            const Eigen::VectorXd Gh = p.G * h;
            for (int i = 0; i < m; ++i) {
                if (std::isfinite(p.lo[i]) && !is_active[static_cast<std::size_t>(2 * i)]) {
                    const double v = (p.lo[i] - Gh[i]) ;
                    if (v > sel_scale * (1.0 + std::abs(p.lo[i])) && v > worst) {
                        worst = v;
                        pick = 2 * i;
                    }
                }
                if (std::isfinite(p.hi[i]) && !is_active[static_cast<std::size_t>(2 * i + 1)]) {
                    const double v = (Gh[i] - p.hi[i]);
                    if (v > sel_scale * (1.0 + std::abs(p.hi[i])) && v > worst) {
                        worst = v;
                        pick = 2 * i + 1;
                    }
                }
            }
        }
        if (pick < 0) break;  // feasible -> done

        const Eigen::VectorXd n_p = normal_of(pick);
        const double b_p = bound_of(pick);
        const Eigen::VectorXd Qin = llt.solve(n_p);
        const double n_scale = n_p.squaredNorm();
        const double eps_z = 1e-12 * n_scale / (trace / I);
        double u_p = 0.0;

        bool placed = false;
        while (!placed) {
            if (++iter > max_iter) {
                hit_cap = true;
                break;
            }
            const int k = static_cast<int>(active.size());
            Eigen::VectorXd z, r;
            if (k == 0) {
                z = Qin;
            } else {
                const Eigen::MatrixXd S = Nact.transpose() * QiN;
                r = Eigen::PartialPivLU<Eigen::MatrixXd>(S).solve(Nact.transpose() * Qin);
                z = Qin - QiN * r;
            }
            const double nz = n_p.dot(z);
            const bool z_ok = nz > eps_z;

            double t1 = kInf;
            if (z_ok) {
                const double viol = b_p - normal_dot(pick, h);
                t1 = std::max(viol, 0.0) / nz;
            }
            double t2 = kInf;
            int drop = -1;
            for (int j = 0; j < k; ++j)
                if (r[j] > 1e-14) {
                    const double cand = u[j] / r[j];
                    if (cand < t2) {
                        t2 = cand;
                        drop = j;
                    }
                }
            if (!std::isfinite(t1) && !std::isfinite(t2)) {
                res.status = PlanStatus::infeasible;
                res.h = h;
                res.objective = 0.5 * h.dot(p.Q * h) + p.q.dot(h) + p.objective_constant;
                res.iterations = iter;
                return res;
            }
            const double t = std::min(t1, t2);
            if (z_ok) h += t * z;
            if (k > 0) u -= t * r;
            u_p += t;
            if (t == t1 && std::isfinite(t1)) {
                active.push_back(pick);
                is_active[static_cast<std::size_t>(pick)] = 1;
                Nact.conservativeResize(Eigen::NoChange, k + 1);
                Nact.col(k) = n_p;
                QiN.conservativeResize(Eigen::NoChange, k + 1);
                QiN.col(k) = Qin;
                u.conservativeResize(k + 1);
                u[k] = u_p;
                placed = true;
            } else {
                is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(drop)])] = 0;
                active.erase(active.begin() + drop);
                drop_col(Nact, drop);
                drop_col(QiN, drop);
                const int last = static_cast<int>(u.size()) - 1;
                for (int c = drop; c < last; ++c) u[c] = u[c + 1];
                u.conservativeResize(last);
            }
        }
        if (hit_cap) break;
    }

    res.h = h;
    res.iterations = iter;
    res.active_constraints = static_cast<int>(active.size());
    res.objective = 0.5 * h.dot(p.Q * h) + p.q.dot(h) + p.objective_constant;

    Eigen::VectorXd grad = Qr * h + p.q;
    double compl_resid = 0.0;
    for (std::size_t j = 0; j < active.size(); ++j) {
        const int vid = active[j];
        grad -= u[static_cast<Eigen::Index>(j)] * normal_of(vid);
        compl_resid = std::max(compl_resid, std::abs(u[static_cast<Eigen::Index>(j)] *
                                                     (normal_dot(vid, h) - bound_of(vid))));
    }
    res.stationarity = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
    res.complementarity = compl_resid;
    double primal = 0.0;
    if (m > 0) {
        const Eigen::VectorXd Gh = p.G * h;
        for (int i = 0; i < m; ++i) {
            if (std::isfinite(p.lo[i])) primal = std::max(primal, p.lo[i] - Gh[i]);
            if (std::isfinite(p.hi[i])) primal = std::max(primal, Gh[i] - p.hi[i]);
        }
    }
    res.primal_violation = std::max(primal, 0.0);

    const double q_scale = p.q.size() > 0 ? p.q.cwiseAbs().maxCoeff() : 0.0;
    const bool clean = !hit_cap && res.stationarity <= tol * (1.0 + q_scale) &&
                       res.primal_violation <= tol && res.complementarity <= tol * (1.0 + q_scale);
    res.status = clean ? PlanStatus::optimal : PlanStatus::max_iter;
    if (!clean)
        log::warn("QP ended without clean KKT certificate after " + std::to_string(iter) +
                  " iterations");
    return res;
}

inline PlanResult plan(const Dictionary& dict, const PlanRequest& req, double tol = 1e-8,
                       int max_iter = 0) {
    const QpProblem qp = build_qp(dict, req);
    PlanResult res = solve_qp(qp, tol, max_iter);
    if (res.status != PlanStatus::infeasible) res.trajectory = generate(dict, res.h);
    return res;
}

// Largest violation of the request's velocity box by the finite-differenced
// trajectory; the independent check the planner's constraints promise to pass.
inline double max_velocity_violation(const Trajectory& traj, const PlanRequest& req) {
    traj.validate();
    double worst = 0.0;
    for (int t = 0; t + 1 < traj.length(); ++t)
        for (int j = 0; j < kFingerCount; ++j)
            for (int a = 0; a < 3; ++a) {
                const double v = traj.rate_hz * (traj.frames[static_cast<std::size_t>(t + 1)][j][a] -
                                                 traj.frames[static_cast<std::size_t>(t)][j][a]);
                const double lo = req.v_min[static_cast<std::size_t>(j)][a];
                const double hi = req.v_max[static_cast<std::size_t>(j)][a];
                if (std::isfinite(lo)) worst = std::max(worst, lo - v);
                if (std::isfinite(hi)) worst = std::max(worst, v - hi);
            }
    return worst;
}

}  // namespace primhand
