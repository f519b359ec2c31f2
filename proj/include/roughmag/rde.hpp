#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "roughmag/errors.hpp"
#include "roughmag/grid.hpp"
#include "roughmag/matops.hpp"
#include "roughmag/ousim.hpp"

namespace roughmag {

// Vector field on R^e of polynomial degree <= 2 with analytic Jacobian:
//   V(y) = offset + linear y + (y^T quad[i] y)_i.
struct PolyField {
    Matrix linear;
    Vector offset;
    std::vector<Matrix> quad;  // one symmetric e x e form per output row; empty => affine

    static PolyField zero(int e) {
        return {Matrix::Zero(e, e), Vector::Zero(e), {}};
    }
    static PolyField affine(Matrix a, Vector b) { return {std::move(a), std::move(b), {}}; }

    int state_dim() const { return static_cast<int>(linear.rows()); }
    bool is_affine() const { return quad.empty(); }

    Vector eval(const Vector& y) const {
        Vector v = offset + linear * y;
        for (std::size_t i = 0; i < quad.size(); ++i) v(static_cast<Eigen::Index>(i)) += y.dot(quad[i] * y);
        return v;
    }

    Matrix jacobian(const Vector& y) const {
        Matrix j = linear;
        for (std::size_t i = 0; i < quad.size(); ++i)
            j.row(static_cast<Eigen::Index>(i)) += 2.0 * (quad[i] * y).transpose();
        return j;
    }

    void validate(int e) const {
        if (linear.rows() != e || linear.cols() != e || offset.size() != e)
            throw DimensionMismatch("PolyField: wrong state dimension");
        if (!linear.allFinite() || !offset.allFinite())
            throw UnsupportedRepresentation("PolyField: non-finite coefficients");
        if (!quad.empty() && quad.size() != static_cast<std::size_t>(e))
            throw DimensionMismatch("PolyField: quadratic part needs one form per row");
        for (const auto& q : quad)
            if (q.rows() != e || q.cols() != e || !q.allFinite())
                throw UnsupportedRepresentation("PolyField: bad quadratic form");
    }
};

// Drift V0 plus n driving fields V_1..V_n on R^e.
struct VectorFieldSet {
    int state_dim = 0;
    PolyField drift;
    std::vector<PolyField> driving;

    int driver_dim() const { return static_cast<int>(driving.size()); }

    void validate() const {
        if (state_dim < 1) throw DimensionMismatch("VectorFieldSet: state_dim < 1");
        drift.validate(state_dim);
        for (const auto& v : driving) v.validate(state_dim);
    }
};

// Recombine the driving fields by M^{-1} acting on the index:
// tilde V_j = sum_i V_i (M^{-1})_{ij}. Closed within the representation.
inline VectorFieldSet tilde_fields(const VectorFieldSet& vf, const Matrix& m) {
    vf.validate();
    if (m.rows() != vf.driver_dim())
        throw DimensionMismatch("tilde_fields: driver dimension does not match M");
    const Matrix minv = inverse_checked(m, "tilde_fields");
    const int e = vf.state_dim;
    const int n = vf.driver_dim();
    const bool any_quad = [&] {
        for (const auto& v : vf.driving)
            if (!v.is_affine()) return true;
        return false;
    }();

    VectorFieldSet out;
    out.state_dim = e;
    out.drift = vf.drift;
    out.driving.reserve(n);
    for (int j = 0; j < n; ++j) {
        PolyField f = PolyField::zero(e);
        if (any_quad) f.quad.assign(e, Matrix::Zero(e, e));
        for (int i = 0; i < n; ++i) {
            const double c = minv(i, j);
            if (c == 0.0) continue;
            f.linear += c * vf.driving[i].linear;
            f.offset += c * vf.driving[i].offset;
            if (!vf.driving[i].quad.empty())
                for (int r = 0; r < e; ++r) f.quad[r] += c * vf.driving[i].quad[r];
        }
        out.driving.push_back(std::move(f));
    }
    return out;
}

// Lie bracket [V, W](y) = DW(y) V(y) - DV(y) W(y).
inline Vector lie_bracket_eval(const PolyField& v, const PolyField& w, const Vector& y) {
    return w.jacobian(y) * v.eval(y) - v.jacobian(y) * w.eval(y);
}

// Drift of the limiting Ito SDE:
//   tilde V0 = V0 + 1/2 sum_i (D tilde V_i) tilde V_i
//                 + 1/2 sum_{i<j} gamma_{ij} [tilde V_i, tilde V_j],
// with gamma_{ij} decomposing M C - C M^T. With include_bracket = false this
// is the plain Wong-Zakai (Stratonovich-to-Ito) drift, used as the wrong
// reference in discrimination experiments.
struct CorrectedDrift {
    PolyField base;
    std::vector<PolyField> tilde;
    Matrix gamma;  // n x n antisymmetric coefficients; zero when bracket omitted

    Vector eval(const Vector& y) const {
        Vector v = base.eval(y);
        const int n = static_cast<int>(tilde.size());
        std::vector<Vector> vals(n);
        std::vector<Matrix> jacs(n);
        for (int i = 0; i < n; ++i) {
            vals[i] = tilde[i].eval(y);
            jacs[i] = tilde[i].jacobian(y);
        }
        for (int i = 0; i < n; ++i) v += 0.5 * (jacs[i] * vals[i]);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double g = gamma(i, j);
                if (g != 0.0) v += 0.5 * g * (jacs[j] * vals[i] - jacs[i] * vals[j]);
            }
        return v;
    }
};

inline CorrectedDrift corrected_drift(const VectorFieldSet& vf, const Matrix& m,
                                      bool include_bracket = true) {
    VectorFieldSet tf = tilde_fields(vf, m);
    CorrectedDrift d;
    d.base = vf.drift;
    d.tilde = std::move(tf.driving);
    d.gamma = include_bracket ? gamma_coefficients(m)
                              : Matrix::Zero(m.rows(), m.cols()).eval();
    return d;
}

struct OdeOptions {
    double local_tol = 1e-8;  // per-step, relative to 1 + |y|
    int max_halvings = 10;
};

namespace detail {

// One Heun update over an interval carrying increments (dt, dx); on a large
// local-error estimate the interval is halved with linearly interpolated
// increments, which is consistent with X being C^1 between grid nodes.
inline void heun_interval(const VectorFieldSet& vf, Vector& y, double dt,
                          std::span<const double> dx, const OdeOptions& opt, int depth) {
    const int n = vf.driver_dim();
    auto rhs = [&](const Vector& state) {
        Vector k = vf.drift.eval(state) * dt;
        for (int i = 0; i < n; ++i) k += vf.driving[i].eval(state) * dx[i];
        return k;
    };
    const Vector k1 = rhs(y);
    const Vector k2 = rhs((y + k1).eval());
    const double err = 0.5 * (k2 - k1).norm();
    if (err > opt.local_tol * (1.0 + y.norm())) {
        if (depth >= opt.max_halvings)
            throw StepRejected("heun_interval: local error above tolerance after max halvings");
        std::vector<double> half(dx.size());
        for (std::size_t i = 0; i < dx.size(); ++i) half[i] = 0.5 * dx[i];
        heun_interval(vf, y, 0.5 * dt, half, opt, depth + 1);
        heun_interval(vf, y, 0.5 * dt, half, opt, depth + 1);
        return;
    }
    y += 0.5 * (k1 + k2);
}

}  // namespace detail

// Random ODE dY = V0(Y) dt + sum_i V_i(Y) dX^{eps;i} along a sampled driver
// path, Heun with the exact per-step X increments. record_path = false keeps
// only the endpoint (still returned as a 2-node GridPath).
inline GridPath solve_driven_ode(const VectorFieldSet& vf, const GridPath& x_path,
                                 const Vector& y0, const OdeOptions& opt = {},
                                 bool record_path = true) {
    vf.validate();
    if (vf.driver_dim() != x_path.dim)
        throw DimensionMismatch("solve_driven_ode: driver dimension mismatch");
    if (y0.size() != vf.state_dim) throw DimensionMismatch("solve_driven_ode: y0 dimension");
    const int e = vf.state_dim;
    const int n = x_path.dim;

    Vector y = y0;
    std::vector<double> dx(n);
    GridPath out;
    if (record_path) {
        out = GridPath(x_path.times, e);
        for (int i = 0; i < e; ++i) out.value(0, i) = y(i);
    }
    for (std::size_t k = 0; k < x_path.steps(); ++k) {
        const double dt = x_path.times[k + 1] - x_path.times[k];
        for (int i = 0; i < n; ++i) dx[i] = x_path.value(k + 1, i) - x_path.value(k, i);
        detail::heun_interval(vf, y, dt, dx, opt, 0);
        if (record_path)
            for (int i = 0; i < e; ++i) out.value(k + 1, i) = y(i);
    }
    if (!record_path) {
        out = GridPath({0.0, x_path.times.back()}, e);
        for (int i = 0; i < e; ++i) {
            out.value(0, i) = y0(i);
            out.value(1, i) = y(i);
        }
    }
    return out;
}

// Convenience overload running against the position path of a joint sample.
inline GridPath solve_driven_ode(const VectorFieldSet& vf, const JointSample& sample,
                                 const ModelParams& params, const Vector& y0,
                                 const OdeOptions& opt = {}) {
    (void)params;
    return solve_driven_ode(vf, sample.x, y0, opt);
}

// Euler-Maruyama for the limiting Ito SDE dY = drift(Y) dt + sum_i tilde
// V_i(Y) dW^i on the observation grid, against a given W realization.
inline GridPath solve_limit_sde(const std::vector<PolyField>& tilde, const CorrectedDrift& drift,
                                const GridPath& w, const Vector& y0, bool record_path = true) {
    const int n = w.dim;
    if (tilde.size() != static_cast<std::size_t>(n))
        throw DimensionMismatch("solve_limit_sde: field count vs driver dimension");
    const int e = static_cast<int>(y0.size());

    Vector y = y0;
    GridPath out;
    if (record_path) {
        out = GridPath(w.times, e);
        for (int i = 0; i < e; ++i) out.value(0, i) = y(i);
    }
    for (std::size_t k = 0; k < w.steps(); ++k) {
        const double dt = w.times[k + 1] - w.times[k];
        Vector dy = drift.eval(y) * dt;
        for (int i = 0; i < n; ++i)
            dy += tilde[static_cast<std::size_t>(i)].eval(y) * (w.value(k + 1, i) - w.value(k, i));
        if (!dy.allFinite() || dy.norm() > 1e6 * (1.0 + y.norm()))
            throw StepRejected("solve_limit_sde: diverging Euler-Maruyama step");
        y += dy;
        if (record_path)
            for (int i = 0; i < e; ++i) out.value(k + 1, i) = y(i);
    }
    if (!record_path) {
        out = GridPath({0.0, w.times.back()}, e);
        for (int i = 0; i < e; ++i) {
            out.value(0, i) = y0(i);
            out.value(1, i) = y(i);
        }
    }
    return out;
}

}  // namespace roughmag
