#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "roughmag/ousim.hpp"
#include "support/oracles.hpp"

using namespace roughmag;

namespace {

Matrix example_drift(double alpha = 1.0) {
    Matrix j(2, 2);
    j << 0.0, -1.0, 1.0, 0.0;
    return Matrix::Identity(2, 2) - alpha * j;
}

ModelParams make_params(Matrix m, double mass, double horizon, Y0Mode mode = Y0Mode::zero) {
    ModelParams p;
    p.n = static_cast<int>(m.rows());
    p.drift = std::move(m);
    p.mass = mass;
    p.horizon = horizon;
    p.y0_mode = mode;
    return p;
}

// Full covariance of the augmented state after k exact steps from zero init.
Matrix propagate_cov(const Transition& tr, int k) {
    Matrix cov = Matrix::Zero(tr.phi.rows(), tr.phi.cols());
    for (int i = 0; i < k; ++i) cov = (tr.phi * cov * tr.phi.transpose() + tr.q).eval();
    return cov;
}

}  // namespace

TEST_CASE("driftless W block has variance h I exactly") {
    const ModelParams p = make_params(Matrix::Identity(2, 2), 1.0, 1.0);
    const auto tr = van_loan_transition(augmented_drift(p), augmented_noise_cov(p), 0.25);
    CHECK((tr.q.topLeftCorner(2, 2) - 0.25 * Matrix::Identity(2, 2)).norm() < 1e-13);
}

TEST_CASE("zero-noise variant reduces to the deterministic linear flow") {
    const ModelParams p = make_params(example_drift(), 0.04, 1.0);
    const double t = 0.3;
    const auto tr = van_loan_transition(augmented_drift(p), Matrix::Zero(4, 4), t);
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(4);
    xi(2) = 0.7;  // Y0
    xi(3) = -0.2;
    const Eigen::VectorXd out = tr.phi * xi;
    const Matrix flow = expm(Matrix((-t / p.mass) * p.drift));
    Eigen::Vector2d y0(0.7, -0.2);
    const Eigen::Vector2d expected = flow * y0;
    CHECK(std::abs(out(2) - expected(0)) < 1e-12);
    CHECK(std::abs(out(3) - expected(1)) < 1e-12);
    CHECK(tr.q.norm() < 1e-15);
}

TEST_CASE("exact transitions compose: no discretization bias at shared nodes") {
    const ModelParams p = make_params(example_drift(), 0.01, 1.0);
    const Matrix a = augmented_drift(p);
    const Matrix g = augmented_noise_cov(p);
    const double h = 1.0 / 256.0;
    const auto coarse = van_loan_transition(a, g, h);
    const auto fine = van_loan_transition(a, g, h / 2.0);

    CHECK((coarse.phi - fine.phi * fine.phi).norm() < 1e-10 * coarse.phi.norm());
    const Matrix q2 = fine.phi * fine.q * fine.phi.transpose() + fine.q;
    CHECK((coarse.q - q2).norm() < 1e-10 * std::max(1.0, coarse.q.norm()));

    // Marginal covariance at t = 8h through either refinement.
    const Matrix cov_coarse = propagate_cov(coarse, 8);
    const Matrix cov_fine = propagate_cov(fine, 16);
    CHECK((cov_coarse - cov_fine).norm() < 1e-10 * std::max(1.0, cov_coarse.norm()));
}

TEST_CASE("stationary initialization keeps the Y marginal at C") {
    const Matrix m = example_drift();
    const ModelParams p = make_params(m, 1e-4, 1.0, Y0Mode::stationary);
    const Matrix c = solve_C(m);

    // Algebraic stationarity of the exact transition (step within the
    // well-conditioned stiffness range; sample_joint substeps beyond it).
    const auto tr = van_loan_transition(augmented_drift(p), augmented_noise_cov(p), 3e-4);
    const Matrix phi_y = tr.phi.block(2, 2, 2, 2);
    const Matrix q_y = tr.q.block(2, 2, 2, 2);
    CHECK((phi_y * c * phi_y.transpose() + q_y - c).norm() < 1e-6);

    // Monte Carlo marginal at a grid node, 4 standard errors.
    const std::size_t draws = 20000;
    const std::vector<double> times = {0.0, 0.01, 0.02};
    Matrix acc = Matrix::Zero(2, 2);
    for (std::size_t d = 0; d < draws; ++d) {
        const JointSample s = sample_joint(p, times, 777, d);
        Eigen::Vector2d y(s.y.value(2, 0), s.y.value(2, 1));
        acc += y * y.transpose();
    }
    acc /= static_cast<double>(draws);
    const double se = std::sqrt(2.0 / static_cast<double>(draws)) * c.norm();
    CHECK((acc - c).norm() < 4.0 * se + 1e-6);
}

TEST_CASE("momentum path is eps times Y with the stationary second moment") {
    const Matrix m = example_drift();
    const double mass = 0.01;
    const ModelParams p = make_params(m, mass, 1.0, Y0Mode::stationary);
    const std::vector<double> times = {0.0, 0.5, 1.0};

    const JointSample one = sample_joint(p, times, 5, 0);
    const GridPath momentum = momentum_path(one, p);
    for (std::size_t k = 0; k < momentum.nodes(); ++k)
        for (int i = 0; i < 2; ++i)
            CHECK(momentum.value(k, i) == Catch::Approx(p.eps() * one.y.value(k, i)).margin(0.0));

    const Matrix c = solve_C(m);
    const double expected = mass * c.trace();
    const std::size_t draws = 10000;
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
        const JointSample s = sample_joint(p, times, 99, d);
        const double p2 = mass * (s.y.value(2, 0) * s.y.value(2, 0) +
                                  s.y.value(2, 1) * s.y.value(2, 1));
        acc += p2;
        acc2 += p2 * p2;
    }
    const double mean = acc / draws;
    const double se = std::sqrt((acc2 / draws - mean * mean) / draws);
    CHECK(std::abs(mean - expected) < 4.0 * se);
}

TEST_CASE("coupling identity W - MX = eps (Y - Y0) holds pathwise") {
    const ModelParams p = make_params(example_drift(), 0.01, 1.0, Y0Mode::stationary);
    const auto times = uniform_grid(1.0, 256);
    const JointSample s = sample_joint(p, times, 31, 4);
    const GridPath r = residual_path(s, p);  // throws on violation
    for (int i = 0; i < 2; ++i) {
        CHECK(r.value(0, i) == Catch::Approx(0.0).margin(1e-14));
        CHECK(r.value(100, i) ==
              Catch::Approx(p.eps() * (s.y.value(100, i) - s.y.value(0, i))).margin(1e-10));
    }
}

TEST_CASE("residual shrinks like sqrt(mass)") {
    const Matrix m = example_drift();
    const auto times = uniform_grid(1.0, 128);
    auto sup_residual = [&](double mass) {
        const ModelParams p = make_params(m, mass, 1.0, Y0Mode::stationary);
        double acc = 0.0;
        const std::size_t paths = 40;
        for (std::size_t d = 0; d < paths; ++d) {
            const JointSample s = sample_joint(p, times, 1234, d);
            const GridPath r = residual_path(s, p);
            double sup = 0.0;
            for (std::size_t k = 0; k < r.nodes(); ++k)
                sup = std::max(sup, std::hypot(r.value(k, 0), r.value(k, 1)));
            acc += sup;
        }
        return acc / paths;
    };
    const double big = sup_residual(1e-2);
    const double small = sup_residual(1e-4);
    // sqrt(mass) scaling: a factor-100 mass drop gives ~10x; allow slack.
    CHECK(small < 0.3 * big);
    CHECK(small > 0.03 * big);
}

TEST_CASE("deterministic drive: zero driver stays at rest") {
    GridPath gamma(uniform_grid(1.0, 64), 2);
    const GridPath x = deterministic_drive(example_drift(), 0.05, gamma);
    for (std::size_t k = 0; k < x.nodes(); ++k)
        CHECK(std::hypot(x.value(k, 0), x.value(k, 1)) == 0.0);
}

TEST_CASE("deterministic drive: linear driver has the closed-form relaxation") {
    const Matrix m = example_drift();
    const double mass = 0.02;
    Eigen::Vector2d v(0.8, -0.3);
    GridPath gamma(uniform_grid(1.0, 512), 2);
    for (std::size_t k = 0; k < gamma.nodes(); ++k)
        for (int i = 0; i < 2; ++i) gamma.value(k, i) = gamma.times[k] * v(i);

    const auto drive = deterministic_drive_full(m, mass, gamma);
    const Matrix minv = m.inverse();
    for (const std::size_t k : {std::size_t{1}, std::size_t{100}, std::size_t{512}}) {
        const double t = gamma.times[k];
        const Eigen::Vector2d z_exact =
            (Matrix::Identity(2, 2) - expm(Matrix((-t / mass) * m))) * (mass * minv * v);
        CHECK(std::abs(drive.z.value(k, 0) - z_exact(0)) < 1e-12);
        CHECK(std::abs(drive.z.value(k, 1) - z_exact(1)) < 1e-12);
        // M x = gamma - z, so |M x - gamma| = |z| = O(mass).
        const Eigen::Vector2d mx = m * Eigen::Vector2d(drive.x.value(k, 0), drive.x.value(k, 1));
        CHECK((mx - t * v + z_exact).norm() < 1e-10);
        CHECK(z_exact.norm() <= 2.0 * mass * (minv * v).norm());
    }
}

TEST_CASE("deterministic drive: sinusoid residual decreases with mass") {
    const Matrix m = example_drift();
    GridPath gamma(uniform_grid(1.0, 4096), 2);
    for (std::size_t k = 0; k < gamma.nodes(); ++k) {
        const double t = gamma.times[k];
        gamma.value(k, 0) = std::sin(2.0 * std::numbers::pi * t);
        gamma.value(k, 1) = std::cos(4.0 * std::numbers::pi * t);
    }
    double prev = 1e300;
    for (int k = 2; k <= 8; ++k) {
        const double mass = std::pow(2.0, -k);
        const auto drive = deterministic_drive_full(m, mass, gamma);
        double sup = 0.0;
        for (std::size_t node = 0; node < drive.z.nodes(); ++node)
            sup = std::max(sup, std::hypot(drive.z.value(node, 0), drive.z.value(node, 1)));
        CHECK(sup < 0.9 * prev);
        prev = sup;
    }
}

TEST_CASE("identical seeds give bit-identical samples; paths differ") {
    const ModelParams p = make_params(example_drift(), 0.09, 1.0, Y0Mode::stationary);
    const auto times = uniform_grid(1.0, 32);
    const JointSample a = sample_joint(p, times, 42, 7);
    const JointSample b = sample_joint(p, times, 42, 7);
    CHECK(a.w.values == b.w.values);
    CHECK(a.y.values == b.y.values);
    CHECK(a.x.values == b.x.values);
    const JointSample c = sample_joint(p, times, 42, 8);
    CHECK(a.w.values != c.w.values);
}

TEST_CASE("uniform fast path agrees with the generic sampler") {
    const ModelParams p = make_params(example_drift(), 0.25, 1.0);
    const auto times = uniform_grid(1.0, 16);
    const JointSample generic = sample_joint(p, times, 11, 3);
    const JointTransition jt = make_joint_transition(p, 1.0 / 16.0);
    const JointSample fast = sample_joint_uniform(p, jt, 16, 11, 3);
    for (std::size_t k = 0; k <= 16; ++k)
        for (int i = 0; i < 2; ++i) {
            CHECK(generic.w.value(k, i) == Catch::Approx(fast.w.value(k, i)).margin(1e-12));
            CHECK(generic.x.value(k, i) == Catch::Approx(fast.x.value(k, i)).margin(1e-12));
        }
}

TEST_CASE("uniform Holder moment bound: E|MX_{s,t}|^2 <= const |t-s|, uniformly in eps") {
    // MX_{s,t} = W_{s,t} - eps Y_{s,t} exactly, so the second moment follows
    // from the exact (W, Y) covariances with no Monte Carlo noise.
    const Matrix m = example_drift();
    const int nodes = 2048;
    std::mt19937_64 rng(1000);
    std::uniform_int_distribution<int> node(0, nodes);

    std::vector<std::pair<int, int>> pairs;
    while (pairs.size() < 20) {
        int a = node(rng), b = node(rng);
        if (a == b) continue;
        pairs.emplace_back(std::min(a, b), std::max(a, b));
    }

    double worst_ratio_large_eps = 0.0;
    double worst_ratio = 0.0;
    for (const double eps : {1.0, 0.1, 0.01}) {
        const ModelParams p = make_params(m, eps * eps, 1.0);
        const double h = 1.0 / nodes;
        const auto tr = van_loan_transition(augmented_drift(p), augmented_noise_cov(p), h);

        std::vector<Matrix> phi_pow(nodes + 1, Matrix::Identity(4, 4));
        for (int k = 1; k <= nodes; ++k) phi_pow[k] = tr.phi * phi_pow[k - 1];
        std::vector<Matrix> cov(nodes + 1, Matrix::Zero(4, 4));
        for (int k = 1; k <= nodes; ++k)
            cov[k] = tr.phi * cov[k - 1] * tr.phi.transpose() + tr.q;

        double worst = 0.0;
        for (const auto& [i, j] : pairs) {
            const Matrix cross = cov[i] * phi_pow[j - i].transpose();  // Cov(xi_i, xi_j)
            const Matrix var_wy =
                cov[i] + cov[j] - cross - cross.transpose();  // Var of (W,Y)_{s,t}
            double second_moment = 0.0;
            for (int c = 0; c < 2; ++c) {
                Eigen::Vector4d u = Eigen::Vector4d::Zero();
                u(c) = 1.0;
                u(2 + c) = -eps;
                second_moment += u.dot(var_wy * u);
            }
            worst = std::max(worst, second_moment / ((j - i) * h));
        }
        if (eps == 1.0) worst_ratio_large_eps = worst;
        worst_ratio = std::max(worst_ratio, worst);
    }
    // Uniform-in-eps constant: no blow-up relative to the eps = 1 value.
    CHECK(worst_ratio <= 2.0 * worst_ratio_large_eps + 0.5);
}

TEST_CASE("steps far beyond the fast scale are rejected") {
    const ModelParams p = make_params(example_drift(), 1e-8, 1.0);
    CHECK_THROWS_AS(make_joint_transition(p, 0.5), StepTooLarge);
}
