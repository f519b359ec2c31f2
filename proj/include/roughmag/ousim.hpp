#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <vector>

#include "roughmag/errors.hpp"
#include "roughmag/grid.hpp"
#include "roughmag/matops.hpp"
#include "roughmag/rng.hpp"

namespace roughmag {

enum class Y0Mode { zero, stationary };

// Model of the fast-slow system
//   dY = -(1/m) M Y dt + (1/eps) dW,   dX = (1/eps) Y dt,   m = eps^2,
// with momentum P = eps * Y.
struct ModelParams {
    int n = 0;
    Matrix drift;  // M
    double mass = 0.0;
    double horizon = 0.0;
    Y0Mode y0_mode = Y0Mode::zero;

    double eps() const { return std::sqrt(mass); }

    void validate() const {
        if (n < 1) throw ValidationError("n", "dimension must be >= 1");
        if (drift.rows() != n || drift.cols() != n)
            throw ValidationError("M", "drift matrix must be n x n");
        if (!(mass > 0.0)) throw ValidationError("m", "mass must be > 0");
        if (!(horizon > 0.0)) throw ValidationError("T", "horizon must be > 0");
        spectral_abscissa(drift);
    }

    // Physical parametrization: friction A (symmetric PD), charge q, constant
    // magnetic field as antisymmetric B; drift M = A + qB.
    static ModelParams physical(const Matrix& friction, double charge, const Matrix& field,
                                double mass, double horizon, Y0Mode mode = Y0Mode::zero) {
        require_square_finite(friction, "ModelParams::physical");
        require_square_finite(field, "ModelParams::physical");
        if (friction.rows() != field.rows())
            throw ValidationError("B", "A and B dimensions differ");
        ModelParams p;
        p.n = static_cast<int>(friction.rows());
        p.drift = friction + charge * field;
        p.mass = mass;
        p.horizon = horizon;
        p.y0_mode = mode;
        p.validate();
        return p;
    }
};

// Drift of the sampled state (W, Y) in R^{2n}. The position X is not part of
// the Gaussian state: the coupling M X_t = W_t - eps (Y_t - Y_0) determines
// it exactly, and including it would make the joint covariance singular.
inline Matrix augmented_drift(const ModelParams& p) {
    const int n = p.n;
    Matrix a = Matrix::Zero(2 * n, 2 * n);
    a.block(n, n, n, n) = -p.drift / p.mass;
    return a;
}

// Noise loading is (I; I/eps); this returns B B^T.
inline Matrix augmented_noise_cov(const ModelParams& p) {
    const int n = p.n;
    const double ie = 1.0 / p.eps();
    Matrix g = Matrix::Zero(2 * n, 2 * n);
    g.block(0, 0, n, n) = Matrix::Identity(n, n);
    g.block(0, n, n, n) = ie * Matrix::Identity(n, n);
    g.block(n, 0, n, n) = ie * Matrix::Identity(n, n);
    g.block(n, n, n, n) = ie * ie * Matrix::Identity(n, n);
    return g;
}

// Exact one-step Gaussian transition of (W, Y), plus M^{-1} for the
// deterministic X update. Row-major flat storage for the sampling loop.
struct JointTransition {
    int n = 0;
    double h = 0.0;
    double eps = 0.0;
    std::vector<double> phi;   // (2n)^2
    std::vector<double> chol;  // (2n)^2, lower triangular
    std::vector<double> minv;  // n^2
};

// The Van Loan block exponential carries e^{+M^T h / m}; beyond
// stiffness ~ 20 its conditioning destroys Q. sample_joint substeps
// internally, so this limit only binds direct callers.
inline double transition_stiffness(const ModelParams& p, double h) {
    return p.drift.norm() * h / p.mass;
}

inline JointTransition make_joint_transition(const ModelParams& p, double h) {
    if (!(h > 0.0)) throw NumericalError("make_joint_transition: step must be > 0");
    if (transition_stiffness(p, h) > 20.0)
        throw StepTooLarge("make_joint_transition: |M| h / m > 20; use a finer grid");
    Transition tr;
    try {
        tr = van_loan_transition(augmented_drift(p), augmented_noise_cov(p), h);
    } catch (const std::overflow_error&) {
        throw StepTooLarge("make_joint_transition: transition overflowed");
    }
    const Matrix l = sampling_factor(tr.q);
    const Matrix minv = inverse_checked(p.drift, "make_joint_transition");
    JointTransition jt;
    jt.n = p.n;
    jt.h = h;
    jt.eps = p.eps();
    const int d = 2 * p.n;
    jt.phi.resize(d * d);
    jt.chol.resize(d * d);
    jt.minv.resize(p.n * p.n);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            jt.phi[i * d + j] = tr.phi(i, j);
            jt.chol[i * d + j] = l(i, j);
        }
    for (int i = 0; i < p.n; ++i)
        for (int j = 0; j < p.n; ++j) jt.minv[i * p.n + j] = minv(i, j);
    return jt;
}

namespace detail {

// One exact step: wy <- Phi wy + L z, then x += M^{-1} (dW - eps dY).
inline void joint_step(const JointTransition& jt, double* wy, double* x, const double* z,
                       double* scratch) {
    const int n = jt.n;
    const int d = 2 * n;
    for (int i = 0; i < d; ++i) {
        double acc = 0.0;
        const double* prow = jt.phi.data() + i * d;
        const double* crow = jt.chol.data() + i * d;
        for (int j = 0; j < d; ++j) acc += prow[j] * wy[j];
        for (int j = 0; j <= i; ++j) acc += crow[j] * z[j];
        scratch[i] = acc;
    }
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j)
            acc += jt.minv[i * n + j] *
                   ((scratch[j] - wy[j]) - jt.eps * (scratch[n + j] - wy[n + j]));
        x[i] += acc;
    }
    std::memcpy(wy, scratch, sizeof(double) * d);
}

inline std::vector<double> draw_initial_wy(const ModelParams& p, const Matrix& stationary_chol,
                                           std::uint64_t master, std::uint64_t path) {
    std::vector<double> wy(2 * p.n, 0.0);
    if (p.y0_mode == Y0Mode::stationary) {
        NoiseStream stream(master, path, kInitStep);
        std::vector<double> z(p.n);
        for (auto& v : z) v = stream.gauss();
        for (int i = 0; i < p.n; ++i) {
            double acc = 0.0;
            for (int j = 0; j <= i; ++j) acc += stationary_chol(i, j) * z[j];
            wy[p.n + i] = acc;
        }
    }
    return wy;
}

}  // namespace detail

struct JointSample {
    GridPath w;
    GridPath y;
    GridPath x;
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
};

// Exact joint sampling of (W, Y, X) on an arbitrary grid: the law at every
// node is the true Gaussian law of the linear SDE, with no discretization
// bias. Grid steps that exceed the fast scale are substepped internally
// (compositions of exact transitions are exact), drawing further normals
// from the same per-(path, step) substream.
inline JointSample sample_joint(const ModelParams& p, const std::vector<double>& times,
                                std::uint64_t master_seed, std::uint64_t path_index = 0) {
    p.validate();
    GridPath probe(times, 1);  // validates the grid
    if (times.back() > p.horizon * (1.0 + 1e-12))
        throw NumericalError("sample_joint: grid exceeds horizon");

    const int n = p.n;
    Matrix stat_chol = Matrix::Zero(n, n);
    if (p.y0_mode == Y0Mode::stationary) stat_chol = sampling_factor(solve_C(p.drift));

    struct SplitTransition {
        JointTransition jt;
        std::size_t splits;
    };
    std::map<std::uint64_t, SplitTransition> cache;
    auto transition_for = [&](double h) -> const SplitTransition& {
        std::uint64_t key;
        std::memcpy(&key, &h, sizeof(key));
        auto it = cache.find(key);
        if (it == cache.end()) {
            const double splits_needed = std::ceil(transition_stiffness(p, h) / 5.0);
            if (splits_needed > 1e6)
                throw StepTooLarge("sample_joint: step needs more than 1e6 substeps");
            const auto splits = static_cast<std::size_t>(std::max(1.0, splits_needed));
            it = cache.emplace(key, SplitTransition{
                                        make_joint_transition(p, h / static_cast<double>(splits)),
                                        splits})
                     .first;
        }
        return it->second;
    };

    std::vector<double> wy = detail::draw_initial_wy(p, stat_chol, master_seed, path_index);
    std::vector<double> x(n, 0.0), z(2 * n), scratch(2 * n);

    JointSample s;
    s.master_seed = master_seed;
    s.path_index = path_index;
    s.w = GridPath(times, n);
    s.y = GridPath(times, n);
    s.x = GridPath(times, n);
    auto record = [&](std::size_t k) {
        for (int i = 0; i < n; ++i) {
            s.w.value(k, i) = wy[i];
            s.y.value(k, i) = wy[n + i];
            s.x.value(k, i) = x[i];
        }
    };
    record(0);
    for (std::size_t k = 1; k < times.size(); ++k) {
        const auto& split = transition_for(times[k] - times[k - 1]);
        NoiseStream stream(master_seed, path_index, k - 1);
        for (std::size_t sub = 0; sub < split.splits; ++sub) {
            for (auto& v : z) v = stream.gauss();
            detail::joint_step(split.jt, wy.data(), x.data(), z.data(), scratch.data());
        }
        record(k);
    }
    return s;
}

// Uniform-grid fast path with a prebuilt transition (shared across paths).
inline JointSample sample_joint_uniform(const ModelParams& p, const JointTransition& jt,
                                        std::size_t steps, std::uint64_t master_seed,
                                        std::uint64_t path_index) {
    const int n = p.n;
    Matrix stat_chol = Matrix::Zero(n, n);
    if (p.y0_mode == Y0Mode::stationary) stat_chol = sampling_factor(solve_C(p.drift));

    std::vector<double> wy = detail::draw_initial_wy(p, stat_chol, master_seed, path_index);
    std::vector<double> x(n, 0.0), z(2 * n), scratch(2 * n);
    std::vector<double> times(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) times[k] = jt.h * static_cast<double>(k);

    JointSample s;
    s.master_seed = master_seed;
    s.path_index = path_index;
    s.w = GridPath(times, n);
    s.y = GridPath(times, n);
    s.x = GridPath(times, n);
    for (int i = 0; i < n; ++i) {
        s.w.value(0, i) = wy[i];
        s.y.value(0, i) = wy[n + i];
        s.x.value(0, i) = x[i];
    }
    for (std::size_t k = 1; k <= steps; ++k) {
        NoiseStream stream(master_seed, path_index, k - 1);
        for (auto& v : z) v = stream.gauss();
        detail::joint_step(jt, wy.data(), x.data(), z.data(), scratch.data());
        for (int i = 0; i < n; ++i) {
            s.w.value(k, i) = wy[i];
            s.y.value(k, i) = wy[n + i];
            s.x.value(k, i) = x[i];
        }
    }
    return s;
}

// P = eps * Y, pointwise.
inline GridPath momentum_path(const JointSample& s, const ModelParams& p) {
    GridPath out = s.y;
    for (auto& v : out.values) v *= p.eps();
    return out;
}

// W - M X pointwise. The coupled construction forces this to equal
// eps*(Y - Y0) pathwise; a deviation beyond rel_tol * scale indicates a
// simulation bug and throws IdentityViolation.
inline GridPath residual_path(const JointSample& s, const ModelParams& p,
                              double rel_tol = 1e-10) {
    const int n = p.n;
    if (s.w.dim != n) throw DimensionMismatch("residual_path: dimension mismatch");
    const double eps = p.eps();
    GridPath r(s.w.times, n);
    double scale = 1.0, defect = 0.0;
    for (std::size_t k = 0; k < r.nodes(); ++k)
        for (int i = 0; i < n; ++i) {
            double mx = 0.0;
            for (int j = 0; j < n; ++j) mx += p.drift(i, j) * s.x.value(k, j);
            r.value(k, i) = s.w.value(k, i) - mx;
            const double expected = eps * (s.y.value(k, i) - s.y.value(0, i));
            defect = std::max(defect, std::abs(r.value(k, i) - expected));
            scale = std::max(scale, std::abs(s.w.value(k, i)) + std::abs(mx));
        }
    if (defect > rel_tol * scale)
        throw IdentityViolation("residual_path: W - MX vs eps*(Y-Y0) defect " +
                                std::to_string(defect));
    return r;
}

// Relaxation equation z' = -(M/m) z + gamma_dot, gamma piecewise linear on
// its grid, solved by the exact exponential integrator per step. Returns x
// with M x = gamma_{0,.} - z.
struct DriveResult {
    GridPath x;
    GridPath z;
};

inline DriveResult deterministic_drive_full(const Matrix& m, double mass, const GridPath& gamma) {
    require_square_finite(m, "deterministic_drive");
    if (!(mass > 0.0)) throw NumericalError("deterministic_drive: mass must be > 0");
    const int n = gamma.dim;
    if (m.rows() != n) throw DimensionMismatch("deterministic_drive: dimension mismatch");
    if (m.norm() * (gamma.times[1] - gamma.times[0]) / mass > 1e9)
        throw StepTooLarge("deterministic_drive: step too large for the fast scale");
    const Matrix minv = inverse_checked(m, "deterministic_drive");

    struct StepOp {
        Matrix decay;  // e^{-(M/m) h}
        Matrix load;   // m M^{-1} (I - decay) / h, applied to the increment
    };
    std::map<std::uint64_t, StepOp> cache;
    auto op_for = [&](double h) -> const StepOp& {
        std::uint64_t key;
        std::memcpy(&key, &h, sizeof(key));
        auto it = cache.find(key);
        if (it == cache.end()) {
            Matrix decay = expm((-h / mass) * m);
            Matrix load = mass * minv * (Matrix::Identity(n, n) - decay) / h;
            it = cache.emplace(key, StepOp{std::move(decay), std::move(load)}).first;
        }
        return it->second;
    };

    DriveResult out;
    out.z = GridPath(gamma.times, n);
    out.x = GridPath(gamma.times, n);
    Vector z = Vector::Zero(n);
    for (std::size_t k = 1; k < gamma.nodes(); ++k) {
        const double h = gamma.times[k] - gamma.times[k - 1];
        const auto& op = op_for(h);
        Vector dg(n);
        for (int i = 0; i < n; ++i) dg(i) = gamma.value(k, i) - gamma.value(k - 1, i);
        z = (op.decay * z + op.load * dg).eval();
        Vector g0t(n);
        for (int i = 0; i < n; ++i) g0t(i) = gamma.value(k, i) - gamma.value(0, i);
        const Vector x = minv * (g0t - z);
        for (int i = 0; i < n; ++i) {
            out.z.value(k, i) = z(i);
            out.x.value(k, i) = x(i);
        }
    }
    return out;
}

inline GridPath deterministic_drive(const Matrix& m, double mass, const GridPath& gamma) {
    return deterministic_drive_full(m, mass, gamma).x;
}

// ---------------------------------------------------------------------------
// Streaming engine for the Monte Carlo experiments: advance the exact
// transition on a fine sub-grid, record (W, Y, X) on the coarse observation
// grid, and accumulate the level-2 quadratures in one pass.
// ---------------------------------------------------------------------------

struct ObserveFlags {
    bool xx_mx = false;   // trapezoid of (MX - MX_a) (x) d(MX)
    bool ww_ito = false;  // left sums of (W - W_a) (x) dW
    bool pp_ito = false;  // Ito integral (P - P_a) (x) dP, P = eps Y, with the
                          // martingale part as an (unbiased) left sum in dW and
                          // the drift part d P = -MY/eps dt by trapezoid; plain
                          // left sums in dP would carry an O(h |M| / eps^2) bias
    bool yy_int = false;  // trapezoid of Y (x) Y dt
};

struct ObservedSample {
    int n = 0;
    std::vector<double> times;          // obs nodes, size K+1
    std::vector<double> w, y, x;        // (K+1) * n, node-major
    std::vector<double> xx_mx;          // K * n^2 per-step tensors
    std::vector<double> ww_ito;
    std::vector<double> pp_ito;
    std::vector<double> yy_int;
};

inline ObservedSample simulate_observed(const ModelParams& p, const JointTransition& jt,
                                        std::size_t obs_steps, std::size_t substeps,
                                        const Matrix& stationary_chol, std::uint64_t master,
                                        std::uint64_t path, const ObserveFlags& flags) {
    const int n = p.n;
    const int nn = n * n;
    const double eps = p.eps();
    const double h = jt.h;
    const double obs_h = h * static_cast<double>(substeps);

    ObservedSample out;
    out.n = n;
    out.times.resize(obs_steps + 1);
    out.w.assign((obs_steps + 1) * n, 0.0);
    out.y.assign((obs_steps + 1) * n, 0.0);
    out.x.assign((obs_steps + 1) * n, 0.0);
    if (flags.xx_mx) out.xx_mx.assign(obs_steps * nn, 0.0);
    if (flags.ww_ito) out.ww_ito.assign(obs_steps * nn, 0.0);
    if (flags.pp_ito) out.pp_ito.assign(obs_steps * nn, 0.0);
    if (flags.yy_int) out.yy_int.assign(obs_steps * nn, 0.0);

    std::vector<double> wy = detail::draw_initial_wy(p, stationary_chol, master, path);
    std::vector<double> x(n, 0.0), z(2 * n), scratch(2 * n);
    std::vector<double> y0(n);
    for (int i = 0; i < n; ++i) y0[i] = wy[n + i];

    // MX at nodes through the coupling identity; M Y / eps via one matvec.
    std::vector<double> mx_prev(n), mx_next(n), mydot_prev(n), mydot_next(n);
    std::vector<double> mx_anchor(n), w_anchor(n), p_anchor(n);
    std::vector<double> wprev(n), yprev(n);
    auto fill_node = [&](const double* wy_state, std::vector<double>& mx,
                         std::vector<double>& mydot) {
        for (int i = 0; i < n; ++i) {
            mx[i] = wy_state[i] - eps * (wy_state[n + i] - y0[i]);
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += p.drift(i, j) * wy_state[n + j];
            mydot[i] = acc / eps;
        }
    };

    auto record = [&](std::size_t k) {
        out.times[k] = obs_h * static_cast<double>(k);
        for (int i = 0; i < n; ++i) {
            out.w[k * n + i] = wy[i];
            out.y[k * n + i] = wy[n + i];
            out.x[k * n + i] = x[i];
        }
    };
    record(0);

    const bool need_node_fields = flags.xx_mx || flags.pp_ito;
    std::uint64_t step_counter = 0;
    for (std::size_t k = 0; k < obs_steps; ++k) {
        if (need_node_fields) fill_node(wy.data(), mx_prev, mydot_prev);
        for (int i = 0; i < n; ++i) {
            mx_anchor[i] = mx_prev[i];
            w_anchor[i] = wy[i];
            p_anchor[i] = eps * wy[n + i];
        }
        double* xx = flags.xx_mx ? out.xx_mx.data() + k * nn : nullptr;
        double* ww = flags.ww_ito ? out.ww_ito.data() + k * nn : nullptr;
        double* pp = flags.pp_ito ? out.pp_ito.data() + k * nn : nullptr;
        double* yy = flags.yy_int ? out.yy_int.data() + k * nn : nullptr;

        for (std::size_t s = 0; s < substeps; ++s, ++step_counter) {
            NoiseStream stream(master, path, step_counter);
            for (auto& v : z) v = stream.gauss();
            for (int i = 0; i < n; ++i) {
                wprev[i] = wy[i];
                yprev[i] = wy[n + i];
            }
            detail::joint_step(jt, wy.data(), x.data(), z.data(), scratch.data());
            if (need_node_fields) fill_node(wy.data(), mx_next, mydot_next);

            if (ww)
                for (int i = 0; i < n; ++i) {
                    const double wi = wprev[i] - w_anchor[i];
                    for (int j = 0; j < n; ++j) ww[i * n + j] += wi * (wy[j] - wprev[j]);
                }
            if (pp)
                for (int i = 0; i < n; ++i) {
                    const double pi = eps * yprev[i] - p_anchor[i];
                    const double pn = eps * wy[n + i] - p_anchor[i];
                    for (int j = 0; j < n; ++j)
                        pp[i * n + j] += pi * (wy[j] - wprev[j]) -
                                         0.5 * h * (pi * mydot_prev[j] + pn * mydot_next[j]);
                }
            if (yy)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        yy[i * n + j] += 0.5 * h * (yprev[i] * yprev[j] + wy[n + i] * wy[n + j]);
            if (xx)
                for (int i = 0; i < n; ++i) {
                    const double a = mx_prev[i] - mx_anchor[i];
                    const double b = mx_next[i] - mx_anchor[i];
                    for (int j = 0; j < n; ++j)
                        xx[i * n + j] += 0.5 * h * (a * mydot_prev[j] + b * mydot_next[j]);
                }
            if (need_node_fields) {
                mx_prev.swap(mx_next);
                mydot_prev.swap(mydot_next);
            }
        }
        record(k + 1);
    }
    return out;
}

}  // namespace roughmag
