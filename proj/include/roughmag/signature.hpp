#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "roughmag/errors.hpp"
#include "roughmag/matops.hpp"
#include "roughmag/roughpath.hpp"

namespace roughmag {

// Element of the free tensor algebra over R^n truncated at level L. Level k
// is stored flat with lexicographic multi-indices: (i_1,...,i_k) sits at
// i_1 n^{k-1} + ... + i_k.
struct TensorPoly {
    int n = 0;
    int level_cap = 0;
    std::vector<std::vector<double>> levels;

    static TensorPoly zero(int n, int cap) {
        TensorPoly t;
        t.n = n;
        t.level_cap = cap;
        t.levels.resize(cap + 1);
        std::size_t size = 1;
        for (int k = 0; k <= cap; ++k) {
            t.levels[k].assign(size, 0.0);
            size *= n;
        }
        return t;
    }

    static TensorPoly unit(int n, int cap) {
        TensorPoly t = zero(n, cap);
        t.levels[0][0] = 1.0;
        return t;
    }

    double& scalar() { return levels[0][0]; }
    double scalar() const { return levels[0][0]; }
};

inline void require_compatible(const TensorPoly& a, const TensorPoly& b, const char* who) {
    if (a.n != b.n || a.level_cap != b.level_cap)
        throw DimensionMismatch(std::string(who) + ": alphabet or truncation mismatch");
}

// Graded convolution product truncated at the common level cap.
inline TensorPoly tensor_mul(const TensorPoly& a, const TensorPoly& b) {
    require_compatible(a, b, "tensor_mul");
    TensorPoly c = TensorPoly::zero(a.n, a.level_cap);
    for (int ka = 0; ka <= a.level_cap; ++ka)
        for (int kb = 0; ka + kb <= a.level_cap; ++kb) {
            const auto& la = a.levels[ka];
            const auto& lb = b.levels[kb];
            auto& lc = c.levels[ka + kb];
            for (std::size_t i = 0; i < la.size(); ++i) {
                if (la[i] == 0.0) continue;
                const double v = la[i];
                const std::size_t base = i * lb.size();
                for (std::size_t j = 0; j < lb.size(); ++j) lc[base + j] += v * lb[j];
            }
        }
    return c;
}

inline TensorPoly& axpy(TensorPoly& y, double alpha, const TensorPoly& x) {
    require_compatible(y, x, "axpy");
    for (int k = 0; k <= y.level_cap; ++k)
        for (std::size_t i = 0; i < y.levels[k].size(); ++i) y.levels[k][i] += alpha * x.levels[k][i];
    return y;
}

// exp(a) = sum_k a^k / k!, exact at the truncation since a has zero scalar
// part (terms beyond the cap are nilpotent).
inline TensorPoly tensor_exp(const TensorPoly& a) {
    if (a.scalar() != 0.0) throw NonZeroScalarPart("tensor_exp: scalar part must be 0");
    TensorPoly result = TensorPoly::unit(a.n, a.level_cap);
    TensorPoly term = TensorPoly::unit(a.n, a.level_cap);
    for (int k = 1; k <= a.level_cap; ++k) {
        term = tensor_mul(term, a);
        axpy(result, 1.0 / std::tgamma(k + 1.0), term);
    }
    return result;
}

namespace detail {

// Truncated log-signature of one step of a level-2 lift: level 1 is the
// increment, level 2 is XX_step - dx (x) dx / 2 (zero for geometric lifts up
// to quadrature, the Ito defect otherwise).
inline TensorPoly step_log_signature(const RoughPathL2& rp, std::size_t k, int cap) {
    const int n = rp.dim();
    TensorPoly ell = TensorPoly::zero(n, cap);
    for (int i = 0; i < n; ++i)
        ell.levels[1][i] = rp.base.value(k + 1, i) - rp.base.value(k, i);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            ell.levels[2][i * n + j] = rp.level2[k * n * n + i * n + j] -
                                       0.5 * ell.levels[1][i] * ell.levels[1][j];
    return ell;
}

}  // namespace detail

// Signature of a lifted grid path up to level cap <= 4: per-step exponentials
// of the level-2 log-signature, combined by Chen's (tensor) multiplication.
// Level 1 equals the total increment and level 2 the reconstructed XX_{0,T}
// exactly; levels 3 and 4 carry an O(h^3)-per-step truncation bias.
inline TensorPoly path_signature(const RoughPathL2& rp, int cap) {
    rp.check();
    if (cap < 1 || cap > 4) throw TruncationUnsupported("path_signature: level cap must be in [1,4]");
    TensorPoly sig = TensorPoly::unit(rp.dim(), cap);
    for (std::size_t k = 0; k < rp.steps(); ++k)
        sig = tensor_mul(sig, tensor_exp(detail::step_log_signature(rp, k, cap)));
    return sig;
}

// Closed-form limit of the expected signature of M X^eps:
//   exp( (T/2) ( sum_i e_i (x) e_i + sum_{i<j} gamma_{ij} [e_i, e_j] ) ),
// with the gamma_{ij} decomposing M C - C M^T.
inline TensorPoly expected_signature_limit(const Matrix& m, double horizon, int cap) {
    if (cap < 2 || cap > 4)
        throw TruncationUnsupported("expected_signature_limit: level cap must be in [2,4]");
    const int n = static_cast<int>(m.rows());
    const Matrix g = gamma_coefficients(m);
    TensorPoly arg = TensorPoly::zero(n, cap);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            arg.levels[2][i * n + j] = 0.5 * horizon * ((i == j ? 1.0 : 0.0) + g(i, j));
    return tensor_exp(arg);
}

}  // namespace roughmag
