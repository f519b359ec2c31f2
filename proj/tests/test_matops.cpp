#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "roughmag/matops.hpp"
#include "support/oracles.hpp"

using namespace roughmag;

namespace {

Matrix rotation_generator(double theta) {
    Matrix j(2, 2);
    j << 0.0, -theta, theta, 0.0;
    return j;
}

Matrix example_drift(double alpha) {
    // M = I - alpha J with J = [[0,-1],[1,0]]
    return Matrix::Identity(2, 2) - alpha * rotation_generator(1.0);
}

}  // namespace

TEST_CASE("spectral abscissa on closed-form spectra") {
    CHECK(spectral_abscissa(Matrix::Identity(2, 2)).lambda == Catch::Approx(1.0));
    CHECK(spectral_abscissa(example_drift(1.0)).lambda == Catch::Approx(1.0));
    Matrix upper(2, 2);
    upper << 1.0, 2.0, 0.0, 3.0;  // triangular: eigenvalues 1 and 3
    CHECK(spectral_abscissa(upper).lambda == Catch::Approx(1.0));
}

TEST_CASE("spectral abscissa rejects inadmissible drifts") {
    CHECK_THROWS_AS(spectral_abscissa(-Matrix::Identity(2, 2)), SpectrumViolation);
    Matrix nilpotent(2, 2);
    nilpotent << 0.0, 1.0, 0.0, 0.0;
    CHECK_THROWS_AS(spectral_abscissa(nilpotent), SpectrumViolation);
    CHECK_THROWS_AS(spectral_abscissa(rotation_generator(1.0)), SpectrumViolation);
}

TEST_CASE("matrix exponential matches closed forms and the Taylor oracle") {
    CHECK((expm(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).norm() < 1e-15);

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    const Matrix ed = expm(d);
    CHECK(ed(0, 0) == Catch::Approx(std::exp(1.0)).epsilon(1e-14));
    CHECK(ed(1, 1) == Catch::Approx(std::exp(2.0)).epsilon(1e-14));
    CHECK(std::abs(ed(0, 1)) + std::abs(ed(1, 0)) < 1e-15);

    const Matrix rot = rotation_generator(std::numbers::pi);
    CHECK((expm(rot) + Matrix::Identity(2, 2)).norm() < 1e-13);
    CHECK((expm(rot) - oracles::taylor_expm(rot)).norm() < 1e-13);
}

TEST_CASE("expm inverse identity for random matrices") {
    // The defect of e^A e^{-A} is bounded below by rounding amplified through
    // |e^A| |e^{-A}|, so the flat 1e-11 tolerance is checked on the half
    // domain and a conditioning-aware bound covers norms up to 10.
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 3;
        Matrix a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = u(rng);

        Matrix half = a * (5.0 / std::max(1.0, a.norm()));
        Matrix prod = expm(half) * expm(Matrix(-half));
        CHECK((prod - Matrix::Identity(n, n)).norm() < 1e-11);

        Matrix full = a * (10.0 / std::max(1.0, a.norm()));
        const Matrix ef = expm(full);
        const Matrix eb = expm(Matrix(-full));
        const double kappa = ef.norm() * eb.norm();
        CHECK((ef * eb - Matrix::Identity(n, n)).norm() <
              std::max(1e-11, 100.0 * 1e-16 * kappa));
    }
}

TEST_CASE("expm overflow raises") {
    Matrix big = Matrix::Identity(2, 2) * 1e4;
    CHECK_THROWS_AS(expm(big), std::overflow_error);
}

TEST_CASE("stationary covariance closed forms") {
    // M = I: C = I/2 from the scalar integral.
    CHECK((solve_C(Matrix::Identity(2, 2)) - 0.5 * Matrix::Identity(2, 2)).norm() < 1e-14);
    // Normal drift: C = Sym(M)^{-1} / 2 = I/2 for M = I - J.
    CHECK((solve_C(example_drift(1.0)) - 0.5 * Matrix::Identity(2, 2)).norm() < 1e-13);

    // Triangular example, solved by hand from M C + C M^T = I.
    Matrix m(2, 2);
    m << 2.0, 1.0, 0.0, 1.0;
    Matrix expected(2, 2);
    expected << 1.0 / 3.0, -1.0 / 6.0, -1.0 / 6.0, 0.5;
    CHECK((solve_C(m) - expected).norm() < 1e-13);
}

TEST_CASE("stationary covariance agrees with direct quadrature") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 3; ++trial) {
        const Matrix m = oracles::random_admissible(rng, 2 + trial);
        const double lambda = spectral_abscissa(m).lambda;
        const Matrix c = solve_C(m);
        const Matrix cq = oracles::quadrature_C(m, lambda);
        CHECK((c - cq).norm() < 1e-8);
    }
}

TEST_CASE("Lyapunov residual, symmetry, and positivity over random drifts") {
    std::mt19937_64 rng(99);
    const int dims[] = {2, 3, 5};
    for (int trial = 0; trial < 100; ++trial) {
        const int n = dims[trial % 3];
        const Matrix m = oracles::random_admissible(rng, n);
        const Matrix c = solve_C(m);
        CHECK((m * c + c * m.transpose() - Matrix::Identity(n, n)).norm() <= 1e-10);
        CHECK((c - c.transpose()).norm() < 1e-14);
        Eigen::SelfAdjointEigenSolver<Matrix> es(c, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() > 0.0);

        const Matrix g = area_correction_W(m);
        CHECK((g + g.transpose()).norm() <= 1e-12);
    }
}

TEST_CASE("area correction of W: closed forms") {
    Matrix sym = Matrix::Zero(2, 2);
    sym(0, 0) = 1.0;
    sym(1, 1) = 3.0;
    CHECK(area_correction_W(sym).norm() < 1e-13);

    // M = I - J is normal with Sym(M) = I: Gamma = Anti(M)/2 = -J/2.
    Matrix expected(2, 2);
    expected << 0.0, 0.5, -0.5, 0.0;
    CHECK((area_correction_W(example_drift(1.0)) - expected).norm() < 1e-13);
}

TEST_CASE("area correction of W via the quadrature route") {
    std::mt19937_64 rng(321);
    const Matrix m = oracles::random_admissible(rng, 3);
    const double lambda = spectral_abscissa(m).lambda;
    const Matrix cq = oracles::quadrature_C(m, lambda);
    const Matrix gq = 0.5 * (m * cq - cq * m.transpose());
    CHECK((area_correction_W(m) - gq).norm() < 1e-8);
}

TEST_CASE("normal drifts reduce to Anti(M) Sym(M)^{-1} / 2") {
    std::mt19937_64 rng(5150);
    const int dims[] = {2, 3, 5};
    for (int trial = 0; trial < 30; ++trial) {
        const int n = dims[trial % 3];
        const Matrix m = oracles::random_normal_admissible(rng, n);
        REQUIRE((m * m.transpose() - m.transpose() * m).norm() < 1e-10);
        const Matrix closed = 0.5 * anti_part(m) * sym_part(m).inverse();
        CHECK((area_correction_W(m) - closed).norm() < 1e-10);
    }
}

TEST_CASE("area correction of X matches the two-dimensional closed form") {
    for (const double alpha : {-2.0, -1.0, 0.0, 0.5, 1.0, 2.0}) {
        const Matrix m = example_drift(alpha);
        Matrix expected(2, 2);
        const double v = alpha / (2.0 * (1.0 + alpha * alpha));
        expected << 0.0, v, -v, 0.0;
        CHECK((area_correction_X(m) - expected).norm() < 1e-12);
    }
    Matrix sym = Matrix::Zero(2, 2);
    sym(0, 0) = 2.0;
    sym(1, 1) = 0.7;
    CHECK(area_correction_X(sym).norm() < 1e-13);
}

TEST_CASE("normal drifts: X correction reduces to -Anti(M^{-1}) Sym(M)^{-1} / 2") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix m = oracles::random_normal_admissible(rng, 3);
        const Matrix minv = m.inverse();
        const Matrix closed = -0.5 * anti_part(minv) * sym_part(m).inverse();
        CHECK((area_correction_X(m) - closed).norm() < 1e-10);
    }
}

TEST_CASE("gamma coefficients reconstruct M C - C M^T") {
    std::mt19937_64 rng(88);
    const Matrix m = oracles::random_admissible(rng, 4);
    const Matrix g = gamma_coefficients(m);
    const Matrix c = solve_C(m);
    const int n = 4;
    Matrix rebuilt = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            rebuilt(i, j) += g(i, j);
            rebuilt(j, i) -= g(i, j);
        }
    CHECK((rebuilt - (m * c - c * m.transpose())).norm() < 1e-12);
}

TEST_CASE("van Loan transition closed forms") {
    const Matrix zero = Matrix::Zero(2, 2);
    const Matrix eye = Matrix::Identity(2, 2);

    auto [phi0, q0] = van_loan_transition(zero, eye, 0.5);
    CHECK((phi0 - eye).norm() < 1e-14);
    CHECK((q0 - 0.5 * eye).norm() < 1e-13);

    // Scalar OU variance: Q = (1 - e^{-2h}) / 2 per coordinate.
    for (const double h : {0.1, 0.7, 2.0}) {
        auto [phi, q] = van_loan_transition(Matrix(-eye), eye, h);
        CHECK((phi - std::exp(-h) * eye).norm() < 1e-13);
        CHECK((q - 0.5 * (1.0 - std::exp(-2.0 * h)) * eye).norm() < 1e-12);
    }

    auto [phi_id, q_id] = van_loan_transition(Matrix(3.0 * eye), eye, 0.0);
    CHECK((phi_id - eye).norm() == 0.0);
    CHECK(q_id.norm() == 0.0);

    auto [phi_nd, q_nd] = van_loan_transition(Matrix(-eye), zero, 1.0);
    CHECK(q_nd.norm() < 1e-15);
}

TEST_CASE("van Loan Q is symmetric PSD for a generic system") {
    std::mt19937_64 rng(404);
    const Matrix a = -oracles::random_admissible(rng, 3);
    Matrix b(3, 3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b(i, j) = u(rng);
    const Matrix g = b * b.transpose();
    auto [phi, q] = van_loan_transition(a, g, 0.37);
    CHECK((q - q.transpose()).norm() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Matrix> es(q, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
    CHECK((phi - expm(Matrix(a * 0.37))).norm() < 1e-13);
}
