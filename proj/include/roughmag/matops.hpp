#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <unsupported/Eigen/MatrixFunctions>

#include "roughmag/errors.hpp"

namespace roughmag {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Lower bound on the real parts of the eigenvalues of a drift matrix.
struct SpectralGap {
    double lambda;
};

inline void require_square_finite(const Matrix& m, const char* who) {
    if (m.rows() != m.cols() || m.rows() < 1)
        throw DimensionMismatch(std::string(who) + ": matrix must be square, n >= 1");
    if (!m.allFinite()) throw NumericalError(std::string(who) + ": non-finite entries");
}

inline Matrix sym_part(const Matrix& m) { return 0.5 * (m + m.transpose()); }
inline Matrix anti_part(const Matrix& m) { return 0.5 * (m - m.transpose()); }

// Smallest real part over the spectrum of M; throws unless it clears the
// admissibility tolerance.
inline SpectralGap spectral_abscissa(const Matrix& m, double tol = 1e-12) {
    require_square_finite(m, "spectral_abscissa");
    Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw NumericalError("spectral_abscissa: eigensolver failed");
    const double lambda = es.eigenvalues().real().minCoeff();
    if (!(lambda > tol))
        throw SpectrumViolation("spectral_abscissa: eigenvalue with Re <= " + std::to_string(tol) +
                                " (min Re = " + std::to_string(lambda) + ")");
    return SpectralGap{lambda};
}

// Matrix exponential (scaling-and-squaring, order-13 Pade).
inline Matrix expm(const Matrix& a) {
    require_square_finite(a, "expm");
    Matrix e = a.exp();
    if (!e.allFinite()) throw std::overflow_error("expm: result exceeds floating-point range");
    return e;
}

// Stationary covariance C = \int_0^\infty e^{-Ms} e^{-M^T s} ds, computed as
// the solution of M C + C M^T = I via a dense Kronecker solve. The
// equivalence with the integral follows by differentiating the integrand;
// tests cross-check against direct quadrature.
inline Matrix solve_C(const Matrix& m) {
    spectral_abscissa(m);
    const Eigen::Index n = m.rows();
    Matrix kron = Matrix::Zero(n * n, n * n);
    // vec is column-stacking: vec(MC) = (I (x) M) vec(C), vec(C M^T) = (M (x) I) vec(C).
    for (Eigen::Index j = 0; j < n; ++j)
        kron.block(j * n, j * n, n, n) += m;
    for (Eigen::Index bj = 0; bj < n; ++bj)
        for (Eigen::Index bi = 0; bi < n; ++bi)
            kron.block(bi * n, bj * n, n, n) += m(bi, bj) * Matrix::Identity(n, n);

    Vector rhs = Vector::Zero(n * n);
    for (Eigen::Index i = 0; i < n; ++i) rhs(i * n + i) = 1.0;

    Eigen::PartialPivLU<Matrix> lu(kron);
    Vector sol = lu.solve(rhs);
    if (!sol.allFinite() || (kron * sol - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm()))
        throw SingularSystem("solve_C: Lyapunov system numerically singular");

    Matrix c = Eigen::Map<Matrix>(sol.data(), n, n);
    c = sym_part(c).eval();
    const double residual = (m * c + c * m.transpose() - Matrix::Identity(n, n)).norm();
    if (residual > 1e-10)
        throw SingularSystem("solve_C: Lyapunov residual " + std::to_string(residual) + " > 1e-10");
    return c;
}

namespace detail {

// Antisymmetrize and insist the discarded symmetric part is rounding-level;
// downstream formulas assume exact antisymmetry.
inline Matrix enforce_antisymmetric(Matrix g, const char* who) {
    const Matrix a = anti_part(g);
    const double discarded = sym_part(g).norm();
    if (discarded > 1e-12 * std::max(1.0, a.norm()))
        throw IdentityViolation(std::string(who) + ": symmetric defect " + std::to_string(discarded));
    return a;
}

}  // namespace detail

// Area correction of the momentum / W-level limit: Gamma = (M C - C M^T)/2.
inline Matrix area_correction_W(const Matrix& m) {
    const Matrix c = solve_C(m);
    Matrix g = 0.5 * (m * c - c * m.transpose());
    return detail::enforce_antisymmetric(std::move(g), "area_correction_W");
}

// Coefficients gamma_{ij} (i<j) with M C - C M^T = sum_{i<j} gamma_{ij} (e_i e_j^T - e_j e_i^T).
inline Matrix gamma_coefficients(const Matrix& m) {
    return 2.0 * area_correction_W(m);
}

inline Matrix inverse_checked(const Matrix& m, const char* who) {
    Eigen::FullPivLU<Matrix> lu(m);
    if (!lu.isInvertible()) throw SingularSystem(std::string(who) + ": matrix not invertible");
    return lu.inverse();
}

// Area correction on the X side: (C (M^{-1})^T - M^{-1} C)/2.
inline Matrix area_correction_X(const Matrix& m) {
    const Matrix c = solve_C(m);
    const Matrix minv = inverse_checked(m, "area_correction_X");
    Matrix g = 0.5 * (c * minv.transpose() - minv * c);
    return detail::enforce_antisymmetric(std::move(g), "area_correction_X");
}

// Exact one-step discretization of d xi = A xi dt + B dW with G = B B^T:
//   Phi = e^{A h},  Q = \int_0^h e^{A s} G e^{A^T s} ds,
// via the block exponential of [[A, G], [0, -A^T]] * h.
struct Transition {
    Matrix phi;
    Matrix q;
};

inline Transition van_loan_transition(const Matrix& a, const Matrix& g, double h) {
    require_square_finite(a, "van_loan_transition");
    require_square_finite(g, "van_loan_transition");
    if (a.rows() != g.rows()) throw DimensionMismatch("van_loan_transition: A and BB^T sizes differ");
    if (h < 0.0) throw NumericalError("van_loan_transition: negative step");
    const Eigen::Index n = a.rows();
    if (h == 0.0) return {Matrix::Identity(n, n), Matrix::Zero(n, n)};

    Matrix block = Matrix::Zero(2 * n, 2 * n);
    block.topLeftCorner(n, n) = a * h;
    block.topRightCorner(n, n) = g * h;
    block.bottomRightCorner(n, n) = -a.transpose() * h;
    const Matrix f = expm(block);

    Matrix phi = f.topLeftCorner(n, n);
    Matrix q = f.topRightCorner(n, n) * phi.transpose();
    q = sym_part(q).eval();

    Eigen::SelfAdjointEigenSolver<Matrix> es(q, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("van_loan_transition: eigensolver failed");
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, q.norm()))
        throw NonPSD("van_loan_transition: Q has eigenvalue below -1e-10");
    return {std::move(phi), std::move(q)};
}

// Cholesky factor for sampling N(0, Q); plain LLT first, one shot of
// 1e-12 * trace jitter on failure, NonPSD beyond that.
inline Matrix sampling_factor(Matrix q) {
    const Eigen::Index n = q.rows();
    if (q.norm() == 0.0) return Matrix::Zero(n, n);
    Eigen::LLT<Matrix> llt(q);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    const double jitter = 1e-12 * q.trace();
    q += jitter * Matrix::Identity(n, n);
    llt.compute(q);
    if (llt.info() != Eigen::Success) throw NonPSD("sampling_factor: Cholesky failed beyond jitter");
    return llt.matrixL();
}

}  // namespace roughmag
