#pragma once

// Independent numerical oracles for the test suite. These deliberately avoid
// the library's own code paths: the matrix exponential is a plain truncated
// Taylor series and the stationary covariance comes from direct quadrature of
// its defining integral.

#include <random>

#include "roughmag/matops.hpp"
#include "roughmag/roughpath.hpp"

namespace oracles {

using roughmag::Matrix;

// Truncated Taylor series sum_{k<=terms} A^k / k!. Adequate for |A| up to a
// few tens; used to validate the production exponential on small inputs.
inline Matrix taylor_expm(const Matrix& a, int terms = 60) {
    Matrix result = Matrix::Identity(a.rows(), a.cols());
    Matrix term = Matrix::Identity(a.rows(), a.cols());
    for (int k = 1; k <= terms; ++k) {
        term = (term * a / static_cast<double>(k)).eval();
        result += term;
    }
    return result;
}

// Taylor series on a halved argument, then repeated squaring, so the series
// stays in its convergent sweet spot for large |A|.
inline Matrix scaled_taylor_expm(const Matrix& a) {
    int squarings = 0;
    double norm = a.norm();
    while (norm > 0.5 && squarings < 60) {
        norm *= 0.5;
        ++squarings;
    }
    Matrix p = taylor_expm(a / std::pow(2.0, squarings), 30);
    for (int i = 0; i < squarings; ++i) p = (p * p).eval();
    return p;
}

// Composite-Simpson quadrature of int_0^S e^{-Ms} e^{-M^T s} ds. The
// integrand decays like e^{-2 lambda s}, so S = 40 / lambda truncates far
// below the tolerances used in tests.
inline Matrix quadrature_C(const Matrix& m, double lambda, int panels = 4000) {
    const double s_max = 40.0 / lambda;
    const double h = s_max / (2 * panels);
    auto f = [&](double s) {
        const Matrix e = scaled_taylor_expm((-s) * m);
        return Matrix(e * e.transpose());
    };
    Matrix acc = f(0.0) + f(s_max);
    for (int k = 1; k < 2 * panels; ++k) acc += (k % 2 == 1 ? 4.0 : 2.0) * f(k * h);
    return Matrix(acc * (h / 3.0));
}

// Random drift with guaranteed spectral margin: Re(eig) >= lambda_min(Sym)
// by the numerical-range bound, so Sym = B B^T / n + 0.3 I is admissible for
// any antisymmetric part.
inline Matrix random_admissible(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix b(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b(i, j) = u(rng);
    Matrix sym = b * b.transpose() / n + 0.3 * Matrix::Identity(n, n);
    Matrix anti = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = u(rng);
            anti(i, j) = v;
            anti(j, i) = -v;
        }
    return sym + anti;
}

// Random normal matrix: orthogonal conjugation of a block diagonal with
// 2x2 rotation-scaling blocks (a I + b J) and positive scalars.
inline Matrix random_normal_admissible(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(0.3, 2.0);
    std::uniform_real_distribution<double> v(-1.5, 1.5);
    Matrix d = Matrix::Zero(n, n);
    int i = 0;
    while (i + 1 < n) {
        const double a = u(rng), b = v(rng);
        d(i, i) = a;
        d(i + 1, i + 1) = a;
        d(i, i + 1) = -b;
        d(i + 1, i) = b;
        i += 2;
    }
    if (i < n) d(i, i) = u(rng);
    Matrix g(n, n);
    std::normal_distribution<double> nd;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) g(r, c) = nd(rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    return q * d * q.transpose();
}

// Direct double-sum reconstruction of XX_{s,t} over a grid: sum of per-step
// tensors plus all cross terms, with no Chen recursion.
inline Matrix brute_force_level2(const roughmag::RoughPathL2& rp, std::size_t s, std::size_t t) {
    const int n = rp.dim();
    Matrix acc = Matrix::Zero(n, n);
    for (std::size_t k = s; k < t; ++k) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) acc(i, j) += rp.level2[k * n * n + i * n + j];
        for (int i = 0; i < n; ++i) {
            const double xi = rp.base.value(k, i) - rp.base.value(s, i);
            for (int j = 0; j < n; ++j)
                acc(i, j) += xi * (rp.base.value(k + 1, j) - rp.base.value(k, j));
        }
    }
    return acc;
}

}  // namespace oracles
