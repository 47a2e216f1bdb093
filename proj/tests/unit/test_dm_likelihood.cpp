#include "sinc/dm_likelihood.hpp"
#include "sinc/lbfgs.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sinc;

namespace {

// log pmf of the Dirichlet-multinomial minus the log multinomial coefficient,
// written from the textbook density with std::lgamma.
double reference_kernel(const Vector& x, const Vector& z)
{
    const Vector a = z.array().exp().matrix();
    const double n = x.sum();
    const double A = a.sum();
    double log_pmf = std::lgamma(n + 1) + std::lgamma(A) - std::lgamma(n + A);
    double log_coef = std::lgamma(n + 1);
    for (Index j = 0; j < x.size(); ++j) {
        log_pmf += std::lgamma(x(j) + a(j)) - std::lgamma(a(j)) - std::lgamma(x(j) + 1);
        log_coef -= std::lgamma(x(j) + 1);
    }
    return log_pmf - log_coef;
}

Vector vec(std::initializer_list<double> v)
{
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

Matrix random_spd(Index p, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix a(p, p);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
    return a * a.transpose() / static_cast<double>(p) + Matrix::Identity(p, p) * 0.5;
}

}  // namespace

TEST_CASE("kernel: one category cancels")
{
    CHECK(std::abs(dm_kernel_loglik(vec({5}), vec({std::log(3.0)}))) < 1e-12);
}

TEST_CASE("kernel: zero counts give zero")
{
    CHECK(dm_kernel_loglik(vec({0, 0, 0}), vec({0.3, -2, 4})) == 0.0);
}

TEST_CASE("kernel: two categories with unit alpha")
{
    const double v = dm_kernel_loglik(vec({1, 1}), vec({0, 0}));
    CHECK(v == doctest::Approx(-std::log(6.0)).epsilon(1e-12));
    CHECK(v == doctest::Approx(reference_kernel(vec({1, 1}), vec({0, 0}))).epsilon(1e-12));
}

TEST_CASE("kernel matches the textbook density on random rows")
{
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> count(0, 40);
    std::normal_distribution<double> normal(0.0, 1.5);
    for (int rep = 0; rep < 50; ++rep) {
        Vector x(6), z(6);
        for (Index j = 0; j < 6; ++j) {
            x(j) = count(rng);
            z(j) = normal(rng);
        }
        CHECK(dm_kernel_loglik(x, z) == doctest::Approx(reference_kernel(x, z)).epsilon(1e-10));
    }
}

TEST_CASE("row objective examples")
{
    const Matrix eye = Matrix::Identity(2, 2);
    RowObjectiveContext ctx{vec({0, 0}), vec({0.4, -1}), &eye};
    CHECK(z_objective_row(ctx, ctx.mean_row) == 0.0);
    CHECK(z_objective_row(ctx, vec({1.4, -1})) == doctest::Approx(0.5).epsilon(1e-12));

    RowObjectiveContext ones{vec({1, 1}), vec({0, 0}), &eye};
    CHECK(z_objective_row(ones, vec({0, 0})) == doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("gradient without counts is the quadratic gradient")
{
    std::mt19937_64 rng(2);
    const Matrix omega = random_spd(4, rng);
    RowObjectiveContext ctx{Vector::Zero(4), vec({1, 2, 3, 4}), &omega};
    CHECK(z_gradient_row(ctx, ctx.mean_row).isZero(0.0));
    const Vector z = vec({0.5, -1, 2, 7});
    CHECK((z_gradient_row(ctx, z) - omega * (z - ctx.mean_row)).norm() < 1e-12);
}

TEST_CASE("gradient matches central differences")
{
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> count(0, 30);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto check = [](const RowObjectiveContext& ctx, const Vector& z) {
        const Vector g = z_gradient_row(ctx, z);
        const double h = 1e-5;
        for (Index j = 0; j < z.size(); ++j) {
            Vector up = z, down = z;
            up(j) += h;
            down(j) -= h;
            const double fd = (z_objective_row(ctx, up) - z_objective_row(ctx, down)) / (2 * h);
            CHECK(std::abs(g(j) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
        }
    };
    const Matrix eye = Matrix::Identity(2, 2);
    check(RowObjectiveContext{vec({1, 1}), vec({0, 0}), &eye}, vec({0, 0}));
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix omega = random_spd(5, rng);
        Vector x(5), m(5), z(5);
        for (Index j = 0; j < 5; ++j) {
            x(j) = count(rng);
            m(j) = normal(rng);
            z(j) = normal(rng);
        }
        check(RowObjectiveContext{x, m, &omega}, z);
    }
}

TEST_CASE("latent step: zero rows land on their mean")
{
    Matrix x = Matrix::Zero(2, 3);
    x(1, 0) = 4;
    x(1, 2) = 1;
    Matrix means(2, 3);
    means << 0.5, -1, 2, 0, 0, 0;
    const Matrix eye = Matrix::Identity(3, 3);
    LatentState init{Matrix::Zero(2, 3)};
    FitConfig cfg;
    const LatentState out = optimize_latent(CountMatrix(x), means, eye, init, cfg);
    CHECK((out.Z.row(0) - means.row(0)).norm() < 1e-8);
}

TEST_CASE("latent step: single category optimum is the mean")
{
    Matrix x(1, 1);
    x << 3;
    const Matrix means = Matrix::Zero(1, 1);
    const Matrix omega = Matrix::Identity(1, 1);
    LatentState init{Matrix::Constant(1, 1, 2.5)};
    const LatentState out = optimize_latent(CountMatrix(x), means, omega, init, FitConfig{});
    CHECK(std::abs(out.Z(0, 0)) < 1e-6);
}

TEST_CASE("latent step never raises a row objective")
{
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> count(0, 200);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index n = 15, p = 6;
    Matrix x(n, p), means(n, p), z0(n, p);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) {
            x(i, j) = count(rng);
            means(i, j) = 2 + normal(rng);
            z0(i, j) = std::log(x(i, j) + 1);
        }
    }
    const Matrix omega = random_spd(p, rng);
    FitConfig cfg;
    const CountMatrix X(x);
    const LatentState out = optimize_latent(X, means, omega, LatentState{z0}, cfg);
    for (Index i = 0; i < n; ++i) {
        RowObjectiveContext ctx{x.row(i).transpose(), means.row(i).transpose(), &omega};
        const double before = z_objective_row(ctx, z0.row(i).transpose());
        const double after = z_objective_row(ctx, out.Z.row(i).transpose());
        CHECK(after <= before);
        CHECK(z_gradient_row(ctx, out.Z.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-3);
    }
    FitConfig two = cfg;
    two.thread_count = 3;
    CHECK(optimize_latent(X, means, omega, LatentState{z0}, two).Z == out.Z);
}

TEST_CASE("lbfgs minimizes the Rosenbrock function")
{
    auto rosen = [](const Vector& v, Vector& g) {
        const double a = 1 - v(0), b = v(1) - v(0) * v(0);
        g.resize(2);
        g(0) = -2 * a - 400 * v(0) * b;
        g(1) = 200 * b;
        return a * a + 100 * b * b;
    };
    Vector x = vec({-1.2, 1.0});
    LbfgsSettings s;
    s.max_evaluations = 2000;
    s.gradient_tol = 1e-8;
    const LbfgsReport r = minimize_lbfgs(rosen, x, s);
    CHECK(r.converged);
    CHECK(std::abs(x(0) - 1) < 1e-6);
    CHECK(std::abs(x(1) - 1) < 1e-6);
}

TEST_CASE("lbfgs solves a quadratic and never returns a worse point")
{
    std::mt19937_64 rng(5);
    const Matrix a = random_spd(8, rng);
    const Vector b = Vector::LinSpaced(8, -1, 1);
    auto quad = [&](const Vector& v, Vector& g) {
        g = a * v - b;
        return 0.5 * v.dot(a * v) - b.dot(v);
    };
    Vector x = Vector::Zero(8);
    const LbfgsReport r = minimize_lbfgs(quad, x, LbfgsSettings{});
    CHECK((x - a.ldlt().solve(b)).norm() < 1e-5);
    CHECK(r.value <= 0.0);

    Vector bad = vec({NAN, 0});
    auto any = [](const Vector& v, Vector& g) {
        g = v;
        return v.squaredNorm();
    };
    CHECK_THROWS_AS(minimize_lbfgs(any, bad, LbfgsSettings{}), Error);
}

TEST_CASE("underflowed concentrations raise a library error")
{
    const Vector x = vec({3, 4});
    const Vector z = vec({-800, 1});
    CHECK_THROWS_AS(dm_kernel_loglik(x, z), Error);
    const Matrix eye = Matrix::Identity(2, 2);
    RowObjectiveContext ctx{x, Vector::Zero(2), &eye};
    CHECK_THROWS_AS(z_gradient_row(ctx, z), Error);
}
