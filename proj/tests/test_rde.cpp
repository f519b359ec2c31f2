#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "roughmag/rde.hpp"
#include "roughmag/rng.hpp"

using namespace roughmag;

namespace {

Matrix example_drift() {
    Matrix m(2, 2);
    m << 1.0, 1.0, -1.0, 1.0;  // I - J
    return m;
}

Matrix pauli_x() {
    Matrix a(2, 2);
    a << 0.0, 1.0, 1.0, 0.0;
    return a;
}

Matrix pauli_z() {
    Matrix a(2, 2);
    a << 1.0, 0.0, 0.0, -1.0;
    return a;
}

VectorFieldSet linear_fields(const Matrix& a1, const Matrix& a2) {
    VectorFieldSet vf;
    vf.state_dim = 2;
    vf.drift = PolyField::zero(2);
    vf.driving = {PolyField::affine(a1, Vector::Zero(2)),
                  PolyField::affine(a2, Vector::Zero(2))};
    return vf;
}

GridPath brownian_path(std::uint64_t seed, std::uint64_t path, std::size_t steps, double horizon) {
    GridPath w(uniform_grid(horizon, steps), 2);
    const double sqh = std::sqrt(horizon / steps);
    for (std::size_t k = 1; k <= steps; ++k) {
        NoiseStream stream(seed, path, k - 1);
        for (int i = 0; i < 2; ++i) w.value(k, i) = w.value(k - 1, i) + sqh * stream.gauss();
    }
    return w;
}

}  // namespace

TEST_CASE("tilde fields: identity, scaling, and the example recombination") {
    const VectorFieldSet vf = linear_fields(pauli_x(), pauli_z());

    const VectorFieldSet id = tilde_fields(vf, Matrix::Identity(2, 2));
    CHECK((id.driving[0].linear - pauli_x()).norm() == 0.0);
    CHECK((id.driving[1].linear - pauli_z()).norm() == 0.0);

    const VectorFieldSet halved = tilde_fields(vf, Matrix(2.0 * Matrix::Identity(2, 2)));
    CHECK((halved.driving[0].linear - 0.5 * pauli_x()).norm() < 1e-15);
    CHECK((halved.driving[1].linear - 0.5 * pauli_z()).norm() < 1e-15);

    // M = I - J: M^{-1} = (I + J)/2, so tilde A_1 = (A_1 + A_2)/2,
    // tilde A_2 = (-A_1 + A_2)/2 with J = [[0,-1],[1,0]].
    const VectorFieldSet tf = tilde_fields(vf, example_drift());
    CHECK((tf.driving[0].linear - 0.5 * (pauli_x() + pauli_z())).norm() < 1e-14);
    CHECK((tf.driving[1].linear - 0.5 * (pauli_z() - pauli_x())).norm() < 1e-14);

    CHECK_THROWS_AS(tilde_fields(vf, Matrix(Matrix::Zero(2, 2))), SingularSystem);
}

TEST_CASE("lie bracket of linear fields is the matrix commutator") {
    const PolyField v1 = PolyField::affine(pauli_x(), Vector::Zero(2));
    const PolyField v2 = PolyField::affine(pauli_z(), Vector::Zero(2));
    const Matrix commutator = pauli_z() * pauli_x() - pauli_x() * pauli_z();
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 5; ++trial) {
        Vector y(2);
        y << g(rng), g(rng);
        CHECK((lie_bracket_eval(v1, v2, y) - commutator * y).norm() < 1e-13);
        CHECK((lie_bracket_eval(v1, v2, y) + lie_bracket_eval(v2, v1, y)).norm() == 0.0);
    }
}

TEST_CASE("corrected drift: constant fields collapse to V0") {
    VectorFieldSet vf;
    vf.state_dim = 2;
    Vector b0(2);
    b0 << 0.3, -1.1;
    vf.drift = PolyField::affine(Matrix::Zero(2, 2), b0);
    Vector c1(2), c2(2);
    c1 << 1.0, 0.0;
    c2 << 0.0, 1.0;
    vf.driving = {PolyField::affine(Matrix::Zero(2, 2), c1),
                  PolyField::affine(Matrix::Zero(2, 2), c2)};
    const CorrectedDrift d = corrected_drift(vf, example_drift());
    Vector y(2);
    y << 2.0, -0.5;
    CHECK((d.eval(y) - b0).norm() < 1e-14);
}

TEST_CASE("corrected drift: linear fields carry the Ito term plus the bracket term") {
    const Matrix m = example_drift();
    const VectorFieldSet vf = linear_fields(pauli_x(), pauli_z());
    const VectorFieldSet tf = tilde_fields(vf, m);
    const Matrix a1 = tf.driving[0].linear;
    const Matrix a2 = tf.driving[1].linear;
    const Matrix g = gamma_coefficients(m);

    const Matrix expected =
        0.5 * (a1 * a1 + a2 * a2) + 0.5 * g(0, 1) * (a2 * a1 - a1 * a2);
    const CorrectedDrift d = corrected_drift(vf, m);
    Vector y(2);
    y << 0.7, 1.3;
    CHECK((d.eval(y) - expected * y).norm() < 1e-13);

    // Symmetric drift matrix: gamma vanishes, only the Ito term remains.
    Matrix sym = Matrix::Zero(2, 2);
    sym(0, 0) = 1.0;
    sym(1, 1) = 2.0;
    const CorrectedDrift ds = corrected_drift(vf, sym);
    const CorrectedDrift ds_plain = corrected_drift(vf, sym, false);
    CHECK(ds.gamma.norm() < 1e-12);
    CHECK((ds.eval(y) - ds_plain.eval(y)).norm() < 1e-13);
}

TEST_CASE("corrected drift supports degree-2 fields through analytic Jacobians") {
    VectorFieldSet vf;
    vf.state_dim = 2;
    vf.drift = PolyField::zero(2);
    PolyField quad = PolyField::zero(2);
    quad.quad.assign(2, Matrix::Zero(2, 2));
    quad.quad[0](0, 0) = 1.0;  // V_1(y) = (y_0^2, 0)
    PolyField lin = PolyField::affine(pauli_x(), Vector::Zero(2));
    vf.driving = {quad, lin};

    Vector y(2);
    y << 0.5, -2.0;
    const Matrix j = quad.jacobian(y);
    CHECK(j(0, 0) == Catch::Approx(2.0 * y(0)));
    CHECK(j(0, 1) == 0.0);

    const CorrectedDrift d = corrected_drift(vf, Matrix::Identity(2, 2));
    // 1/2 [ DV1 V1 + DV2 V2 ] with V1 = (y0^2, 0), V2 = (y1, y0).
    Vector expected(2);
    expected << 0.5 * (2.0 * y(0) * y(0) * y(0)) + 0.5 * y(0), 0.5 * y(1);
    CHECK((d.eval(y) - expected).norm() < 1e-13);
}

TEST_CASE("driven ODE with zero driving fields reproduces the affine flow") {
    VectorFieldSet vf;
    vf.state_dim = 2;
    Matrix a0(2, 2);
    a0 << -0.3, 0.4, -0.2, -0.1;
    vf.drift = PolyField::affine(a0, Vector::Zero(2));
    vf.driving = {PolyField::zero(2), PolyField::zero(2)};

    GridPath x(uniform_grid(1.0, 8192), 2);  // driver ignored by zero fields
    Vector y0(2);
    y0 << 1.0, -1.0;
    const GridPath y = solve_driven_ode(vf, x, y0, {}, false);
    const Vector expected = expm(a0) * y0;
    CHECK(std::abs(y.value(1, 0) - expected(0)) < 1e-8);
    CHECK(std::abs(y.value(1, 1) - expected(1)) < 1e-8);
}

TEST_CASE("identity transport: constant frame fields copy the driver") {
    VectorFieldSet vf;
    vf.state_dim = 2;
    vf.drift = PolyField::zero(2);
    Vector e1(2), e2(2);
    e1 << 1.0, 0.0;
    e2 << 0.0, 1.0;
    vf.driving = {PolyField::affine(Matrix::Zero(2, 2), e1),
                  PolyField::affine(Matrix::Zero(2, 2), e2)};
    const GridPath w = brownian_path(3, 0, 128, 1.0);
    Vector y0(2);
    y0 << 0.25, -0.75;
    const GridPath y = solve_driven_ode(vf, w, y0, {}, true);
    for (std::size_t k = 0; k <= 128; ++k)
        for (int i = 0; i < 2; ++i)
            CHECK(y.value(k, i) == Catch::Approx(y0(i) + w.value(k, i)).margin(1e-12));
}

TEST_CASE("step rejection after exhausting halvings") {
    VectorFieldSet vf;
    vf.state_dim = 1;
    vf.drift = PolyField::zero(1);
    Matrix a(1, 1);
    a << 4.0;
    vf.driving = {PolyField::affine(a, Vector::Zero(1))};
    GridPath x({0.0, 1.0}, 1);
    x.value(1, 0) = 50.0;  // one violent increment
    Vector y0(1);
    y0 << 1.0;
    OdeOptions opt;
    opt.local_tol = 1e-14;
    opt.max_halvings = 2;
    CHECK_THROWS_AS(solve_driven_ode(vf, x, y0, opt, false), StepRejected);
}

TEST_CASE("limit SDE: zero fields give a constant path") {
    const GridPath w = brownian_path(9, 1, 64, 1.0);
    CorrectedDrift drift;
    drift.base = PolyField::zero(2);
    drift.gamma = Matrix::Zero(2, 2);
    std::vector<PolyField> fields = {PolyField::zero(2), PolyField::zero(2)};
    Vector y0(2);
    y0 << 0.5, 0.5;
    const GridPath y = solve_limit_sde(fields, drift, w, y0, true);
    for (std::size_t k = 0; k <= 64; ++k)
        for (int i = 0; i < 2; ++i) CHECK(y.value(k, i) == 0.5);
}

TEST_CASE("scalar linear Ito SDE keeps its mean") {
    // dY = Y dW has E[Y_T] = Y_0 exactly, and Euler-Maruyama preserves the
    // mean identically; Monte Carlo confirms within 3 SE.
    Matrix a(1, 1);
    a << 1.0;
    std::vector<PolyField> fields = {PolyField::affine(a, Vector::Zero(1))};
    CorrectedDrift drift;
    drift.base = PolyField::zero(1);
    drift.gamma = Matrix::Zero(1, 1);

    const std::size_t paths = 4000;
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t p = 0; p < paths; ++p) {
        GridPath w(uniform_grid(1.0, 128), 1);
        NoiseStream stream(404, p, 0);
        for (std::size_t k = 1; k <= 128; ++k)
            w.value(k, 0) = w.value(k - 1, 0) + std::sqrt(1.0 / 128.0) * stream.gauss();
        Vector y0(1);
        y0 << 1.0;
        const GridPath y = solve_limit_sde(fields, drift, w, y0, false);
        acc += y.value(1, 0);
        acc2 += y.value(1, 0) * y.value(1, 0);
    }
    const double mean = acc / paths;
    const double se = std::sqrt((acc2 / paths - mean * mean) / paths);
    CHECK(std::abs(mean - 1.0) <= 3.0 * se);
}

TEST_CASE("limit SDE rejects diverging steps") {
    Matrix a(1, 1);
    a << 1.0;
    std::vector<PolyField> fields = {PolyField::affine(a, Vector::Zero(1))};
    CorrectedDrift drift;
    drift.base = PolyField::zero(1);
    drift.gamma = Matrix::Zero(1, 1);
    GridPath w({0.0, 1.0}, 1);
    w.value(1, 0) = 5e6;
    Vector y0(1);
    y0 << 1.0;
    CHECK_THROWS_AS(solve_limit_sde(fields, drift, w, y0, false), StepRejected);
}
