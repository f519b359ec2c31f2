#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <utility>
#include <vector>

#include "roughmag/errors.hpp"
#include "roughmag/grid.hpp"
#include "roughmag/matops.hpp"

namespace roughmag {

enum class LiftKind { ito, stratonovich, smooth };

// Level-2 rough path on a grid. Second-level data is stored per consecutive
// step only; interval values over non-adjacent pairs flow through Chen's
// relation, which makes them additive-consistent by construction.
struct RoughPathL2 {
    GridPath base;
    std::vector<double> level2;  // steps * n^2, row-major tensor per step
    LiftKind kind = LiftKind::smooth;

    int dim() const { return base.dim; }
    std::size_t steps() const { return base.steps(); }

    void check() const {
        if (level2.size() != steps() * static_cast<std::size_t>(dim()) * dim())
            throw DimensionMismatch("RoughPathL2: level2 size mismatch");
    }
};

// Chen's relation: XX_{s,t} = XX_{s,u} + XX_{u,t} + X_{s,u} (x) X_{u,t}.
inline Matrix chen_combine(const Vector& x_su, const Matrix& xx_su, const Vector& x_ut,
                           const Matrix& xx_ut) {
    const Eigen::Index n = x_su.size();
    if (x_ut.size() != n || xx_su.rows() != n || xx_su.cols() != n || xx_ut.rows() != n ||
        xx_ut.cols() != n)
        throw DimensionMismatch("chen_combine: incompatible dimensions");
    return xx_su + xx_ut + x_su * x_ut.transpose();
}

// Running XX_{0,k} for every node, via the Chen recursion.
inline std::vector<double> level2_prefix(const RoughPathL2& rp) {
    rp.check();
    const int n = rp.dim();
    const int nn = n * n;
    const std::size_t steps = rp.steps();
    std::vector<double> prefix((steps + 1) * nn, 0.0);
    for (std::size_t k = 0; k < steps; ++k) {
        const double* cur = prefix.data() + k * nn;
        const double* step = rp.level2.data() + k * nn;
        double* nxt = prefix.data() + (k + 1) * nn;
        for (int i = 0; i < n; ++i) {
            const double xi = rp.base.value(k, i) - rp.base.value(0, i);
            for (int j = 0; j < n; ++j) {
                const double dxj = rp.base.value(k + 1, j) - rp.base.value(k, j);
                nxt[i * n + j] = cur[i * n + j] + step[i * n + j] + xi * dxj;
            }
        }
    }
    return prefix;
}

// XX_{s,t} for grid nodes s = node_i < node_j, reconstructed through Chen.
inline Matrix reconstruct_level2(const RoughPathL2& rp, std::size_t node_i, std::size_t node_j) {
    if (node_j <= node_i || node_j > rp.steps())
        throw GridMismatch("reconstruct_level2: need node_i < node_j within grid");
    const auto prefix = level2_prefix(rp);
    const int n = rp.dim();
    Matrix out(n, n);
    for (int a = 0; a < n; ++a) {
        const double xs = rp.base.value(node_i, a) - rp.base.value(0, a);
        for (int b = 0; b < n; ++b) {
            const double dx = rp.base.value(node_j, b) - rp.base.value(node_i, b);
            out(a, b) = prefix[node_j * n * n + a * n + b] - prefix[node_i * n * n + a * n + b] -
                        xs * dx;
        }
    }
    return out;
}

// Lift of a continuously differentiable path sampled on a grid, with
// X'(t) = Ydot(t) / eps. Per-step tensors are the trapezoidal quadrature of
// int (X_u - X_{t_k}) (x) X'(u) du; bias is O(h^2) per step for smooth
// integrands.
inline RoughPathL2 lift_smooth(const GridPath& x, const GridPath& ydot, double eps) {
    if (x.times != ydot.times || x.dim != ydot.dim)
        throw GridMismatch("lift_smooth: X and Ydot must share the grid");
    if (x.steps() < 2) throw GridTooCoarse("lift_smooth: need at least 2 steps");
    const int n = x.dim;
    RoughPathL2 rp;
    rp.base = x;
    rp.kind = LiftKind::smooth;
    rp.level2.assign(x.steps() * n * n, 0.0);
    const double ie = 1.0 / eps;
    for (std::size_t k = 0; k < x.steps(); ++k) {
        const double h = x.times[k + 1] - x.times[k];
        double* t = rp.level2.data() + k * n * n;
        for (int i = 0; i < n; ++i) {
            const double dxi = x.value(k + 1, i) - x.value(k, i);
            for (int j = 0; j < n; ++j)
                t[i * n + j] = 0.5 * h * dxi * ie * ydot.value(k + 1, j);
        }
    }
    return rp;
}

// Canonical lift of the piecewise-linear interpolant: per-step tensor
// dx (x) dx / 2. Used for drivers whose derivative is not available.
inline RoughPathL2 lift_piecewise_linear(const GridPath& x) {
    if (x.steps() < 2) throw GridTooCoarse("lift_piecewise_linear: need at least 2 steps");
    const int n = x.dim;
    RoughPathL2 rp;
    rp.base = x;
    rp.kind = LiftKind::smooth;
    rp.level2.assign(x.steps() * n * n, 0.0);
    for (std::size_t k = 0; k < x.steps(); ++k)
        for (int i = 0; i < n; ++i) {
            const double dxi = x.value(k + 1, i) - x.value(k, i);
            for (int j = 0; j < n; ++j)
                rp.level2[k * n * n + i * n + j] = 0.5 * dxi * (x.value(k + 1, j) - x.value(k, j));
        }
    return rp;
}

// Ito lift of a Brownian sample: left-point Riemann sums. Per consecutive
// step the left sum is identically zero; sums over coarser intervals arise
// from Chen reconstruction, which reproduces the grid left-point sum exactly.
inline RoughPathL2 lift_brownian_ito(const GridPath& w) {
    if (w.steps() < 2) throw GridTooCoarse("lift_brownian_ito: need at least 2 steps");
    RoughPathL2 rp;
    rp.base = w;
    rp.kind = LiftKind::ito;
    rp.level2.assign(w.steps() * w.dim * w.dim, 0.0);
    return rp;
}

namespace detail {

inline void add_diagonal_per_step(RoughPathL2& rp, double sign) {
    const int n = rp.dim();
    for (std::size_t k = 0; k < rp.steps(); ++k) {
        const double h = rp.base.times[k + 1] - rp.base.times[k];
        for (int i = 0; i < n; ++i) rp.level2[k * n * n + i * n + i] += sign * 0.5 * h;
    }
}

}  // namespace detail

// Ito <-> Stratonovich: +/- (t-s)/2 I on each step's tensor.
inline RoughPathL2 to_stratonovich(RoughPathL2 rp) {
    if (rp.kind != LiftKind::ito) throw NumericalError("to_stratonovich: expected an Ito lift");
    detail::add_diagonal_per_step(rp, +1.0);
    rp.kind = LiftKind::stratonovich;
    return rp;
}

inline RoughPathL2 to_ito(RoughPathL2 rp) {
    if (rp.kind != LiftKind::stratonovich) throw NumericalError("to_ito: expected a Stratonovich lift");
    detail::add_diagonal_per_step(rp, -1.0);
    rp.kind = LiftKind::ito;
    return rp;
}

// Add (t_{k+1} - t_k) * G to every step tensor (area-type drift shift).
inline RoughPathL2 shift_level2(RoughPathL2 rp, const Matrix& g) {
    const int n = rp.dim();
    if (g.rows() != n || g.cols() != n) throw DimensionMismatch("shift_level2: G dimension");
    for (std::size_t k = 0; k < rp.steps(); ++k) {
        const double h = rp.base.times[k + 1] - rp.base.times[k];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) rp.level2[k * n * n + i * n + j] += h * g(i, j);
    }
    return rp;
}

// Pure-area rough path: zero first level, step tensors (t_{k+1}-t_k) * G.
inline RoughPathL2 make_pure_area(const std::vector<double>& times, const Matrix& g) {
    RoughPathL2 rp;
    rp.base = GridPath(times, static_cast<int>(g.rows()));
    rp.kind = LiftKind::smooth;
    rp.level2.assign(rp.steps() * g.rows() * g.cols(), 0.0);
    return shift_level2(std::move(rp), g);
}

// Restrict to every stride-th node, composing step tensors through Chen.
inline RoughPathL2 coarsen(const RoughPathL2& rp, std::size_t stride) {
    rp.check();
    if (stride == 0 || rp.steps() % stride != 0)
        throw GridMismatch("coarsen: stride must divide the step count");
    const int n = rp.dim();
    const int nn = n * n;
    const std::size_t coarse_steps = rp.steps() / stride;
    RoughPathL2 out;
    out.kind = rp.kind;
    std::vector<double> times(coarse_steps + 1);
    std::vector<double> values((coarse_steps + 1) * n);
    for (std::size_t k = 0; k <= coarse_steps; ++k) {
        times[k] = rp.base.times[k * stride];
        for (int i = 0; i < n; ++i) values[k * n + i] = rp.base.value(k * stride, i);
    }
    out.base = GridPath(std::move(times), n, std::move(values));
    out.level2.assign(coarse_steps * nn, 0.0);
    for (std::size_t k = 0; k < coarse_steps; ++k) {
        double* acc = out.level2.data() + k * nn;
        const std::size_t a = k * stride;
        for (std::size_t f = 0; f < stride; ++f) {
            const std::size_t node = a + f;
            const double* step = rp.level2.data() + node * nn;
            for (int i = 0; i < n; ++i) {
                const double xi = rp.base.value(node, i) - rp.base.value(a, i);
                for (int j = 0; j < n; ++j) {
                    const double dxj = rp.base.value(node + 1, j) - rp.base.value(node, j);
                    acc[i * n + j] += step[i * n + j] + xi * dxj;
                }
            }
        }
    }
    return out;
}

namespace detail {

struct HolderAccum {
    double level1 = 0.0;
    double level2 = 0.0;
};

// Shared pair loop for distances and norms. For grids over 2000 nodes the
// sup is restricted to dyadic-scale pairs (i, i + 2^k); a full sup is
// bounded by a constant multiple of the dyadic sup for Holder-type
// quantities.
template <typename PairFn>
inline void for_each_pair(std::size_t nodes, PairFn&& fn) {
    const std::size_t steps = nodes - 1;
    if (nodes <= 2000) {
        for (std::size_t i = 0; i + 1 < nodes; ++i)
            for (std::size_t j = i + 1; j < nodes; ++j) fn(i, j);
    } else {
        for (std::size_t span = 1; span <= steps; span *= 2)
            for (std::size_t i = 0; i + span < nodes; ++i) fn(i, i + span);
    }
}

inline HolderAccum holder_pair_sups(const RoughPathL2& a, const RoughPathL2* b, double alpha) {
    const int n = a.dim();
    const int nn = n * n;
    const std::size_t nodes = a.base.nodes();
    const auto pa = level2_prefix(a);
    std::vector<double> pb;
    if (b) pb = level2_prefix(*b);

    const double* va = a.base.values.data();
    const double* vb = b ? b->base.values.data() : nullptr;
    const double* ta = a.base.times.data();

    HolderAccum acc;
    for_each_pair(nodes, [&](std::size_t i, std::size_t j) {
        const double tau = ta[j] - ta[i];
        const double w1 = std::pow(tau, -alpha);
        const double w2 = w1 * w1;
        double d1 = 0.0;
        for (int c = 0; c < n; ++c) {
            double d = va[j * n + c] - va[i * n + c];
            if (vb) d -= vb[j * n + c] - vb[i * n + c];
            d1 += d * d;
        }
        acc.level1 = std::max(acc.level1, std::sqrt(d1) * w1);

        double d2 = 0.0;
        for (int p = 0; p < n; ++p) {
            const double xap = va[i * n + p] - va[0 * n + p];
            for (int q = 0; q < n; ++q) {
                const double dxaq = va[j * n + q] - va[i * n + q];
                double d = pa[j * nn + p * n + q] - pa[i * nn + p * n + q] - xap * dxaq;
                if (b) {
                    const double xbp = vb[i * n + p] - vb[0 * n + p];
                    const double dxbq = vb[j * n + q] - vb[i * n + q];
                    d -= pb[j * nn + p * n + q] - pb[i * nn + p * n + q] - xbp * dxbq;
                }
                d2 += d * d;
            }
        }
        acc.level2 = std::max(acc.level2, std::sqrt(d2) * w2);
    });
    return acc;
}

inline void holder_preconditions(const RoughPathL2& a, const RoughPathL2* b, double alpha) {
    a.check();
    if (!(alpha > 1.0 / 3.0) || !(alpha <= 0.5))
        throw NumericalError("holder metric: alpha must lie in (1/3, 1/2]");
    if (b) {
        b->check();
        if (a.base.times != b->base.times || a.dim() != b->dim())
            throw GridMismatch("holder metric: paths must share the grid");
    }
}

}  // namespace detail

// Both Holder sups of the difference, separately (first level, second level).
inline std::pair<double, double> holder_distance_parts(const RoughPathL2& a, const RoughPathL2& b,
                                                       double alpha) {
    detail::holder_preconditions(a, &b, alpha);
    const auto acc = detail::holder_pair_sups(a, &b, alpha);
    return {acc.level1, acc.level2};
}

// Inhomogeneous alpha-Holder rough path metric on the grid:
//   sup |X_{s,t}-Y_{s,t}| / |t-s|^alpha + sup |XX_{s,t}-YY_{s,t}| / |t-s|^{2 alpha}.
inline double holder_distance(const RoughPathL2& a, const RoughPathL2& b, double alpha) {
    const auto [l1, l2] = holder_distance_parts(a, b, alpha);
    return l1 + l2;
}

// (|X|_alpha, |XX|_{2 alpha}) against the zero rough path.
inline std::pair<double, double> holder_norms(const RoughPathL2& a, double alpha) {
    detail::holder_preconditions(a, nullptr, alpha);
    const auto acc = detail::holder_pair_sups(a, nullptr, alpha);
    return {acc.level1, acc.level2};
}

// CSV layout: per-step rows t_k, t_{k+1}, dx_0..dx_{n-1}, xx_00..xx_{n-1,n-1}.
inline void write_csv(const RoughPathL2& rp, std::ostream& os) {
    rp.check();
    const int n = rp.dim();
    os << "t_k,t_k1";
    for (int i = 0; i < n; ++i) os << ",dx_" << i;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) os << ",xx_" << i << j;
    os << '\n';
    for (std::size_t k = 0; k < rp.steps(); ++k) {
        os << format_full(rp.base.times[k]) << ',' << format_full(rp.base.times[k + 1]);
        for (int i = 0; i < n; ++i)
            os << ',' << format_full(rp.base.value(k + 1, i) - rp.base.value(k, i));
        for (int i = 0; i < n * n; ++i) os << ',' << format_full(rp.level2[k * n * n + i]);
        os << '\n';
    }
}

inline void write_csv(const RoughPathL2& rp, const std::string& filename) {
    std::ofstream os(filename);
    if (!os) throw std::runtime_error("cannot open " + filename);
    write_csv(rp, os);
}

}  // namespace roughmag
