#include "sinc/vi_regression.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sinc;

namespace {

ColumnRegressionProblem problem(const Vector& mt, const Matrix& gram, double sigma_star,
                                double theta = 0.5, double nuB = 1.0)
{
    ColumnRegressionProblem p;
    p.Mt_response = mt;
    p.gram = &gram;
    p.sigma_star = sigma_star;
    p.theta_gamma = theta;
    p.nuB = nuB;
    return p;
}

// n x q design with orthogonal, centered columns of squared norm n - 1.
Matrix orthogonal_design(Index n, Index q, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix a(n, q);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
    a.rowwise() -= a.colwise().mean();
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix qm = qr.householderQ() * Matrix::Identity(n, q);
    return qm * std::sqrt(static_cast<double>(n - 1));
}

}  // namespace

TEST_CASE("slab variance")
{
    Matrix g(1, 1);
    g << 9;
    CHECK(update_sigma_entry(problem(Vector::Zero(1), g, 1.0), 0) ==
          doctest::Approx(0.1).epsilon(1e-15));
    g << 0;
    CHECK(update_sigma_entry(problem(Vector::Zero(1), g, 1.0), 0) == 1.0);
    g << 100;
    CHECK(update_sigma_entry(problem(Vector::Zero(1), g, 2.0), 0) ==
          doctest::Approx(2.0 / 101.0).epsilon(1e-15));
}

TEST_CASE("slab mean")
{
    Matrix g = Matrix::Identity(2, 2) * 4;
    Vector mt(2);
    mt << 5, 1;
    const ColumnRegressionProblem p = problem(mt, g, 1.0);
    const Vector zero = Vector::Zero(2);
    CHECK(update_mu_entry(p, 0, zero, zero, 0.1) == doctest::Approx(0.5).epsilon(1e-15));
    const ColumnRegressionProblem flat = problem(Vector::Zero(2), g, 1.0);
    CHECK(update_mu_entry(flat, 0, zero, zero, 0.1) == 0.0);
}

TEST_CASE("mean on an orthogonal design is the univariate ridge solution")
{
    std::mt19937_64 rng(7);
    const Matrix M = orthogonal_design(20, 3, rng);
    const Matrix gram = M.transpose() * M;
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector y(20);
    for (Index i = 0; i < 20; ++i) y(i) = 1.0 + normal(rng);
    const double b0 = 0.7, sigma_star = 1.3;
    const ColumnRegressionProblem p = make_column_problem(M, gram, y, b0, sigma_star, 0.5, 1.0);
    Vector mu(3), phi(3);
    mu << 0.4, -2, 1;
    phi << 0.9, 0.2, 0.6;
    for (Index k = 0; k < 3; ++k) {
        const double s = update_sigma_entry(p, k);
        const double ridge =
            M.col(k).dot(y.array().matrix() - Vector::Constant(20, b0)) / (gram(k, k) + 1.0);
        CHECK(update_mu_entry(p, k, mu, phi, s) == doctest::Approx(ridge).epsilon(1e-10));
        CHECK(s * (gram(k, k) + 1.0) / sigma_star == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("inclusion probability")
{
    Matrix g(1, 1);
    g << 9;
    const ColumnRegressionProblem p = problem(Vector::Zero(1), g, 2.0, 0.5, 1.5);
    CHECK(update_phi_entry(p, 0, 0.0, 3.0) == doctest::Approx(0.5).epsilon(1e-15));
    const ColumnRegressionProblem strong = problem(Vector::Zero(1), g, 2.0, 0.999, 1.5);
    CHECK(update_phi_entry(strong, 0, 0.0, 3.0) == doctest::Approx(0.999).epsilon(1e-12));
}

TEST_CASE("single covariate inclusion matches the exact Bayes factor")
{
    // With one covariate the factorized posterior is exact, so phi must equal
    // the posterior inclusion probability of the two-model comparison.
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index n = 2000;
    Vector raw(n);
    for (Index i = 0; i < n; ++i) raw(i) = normal(rng);
    const CovariateMatrix cov{Matrix(raw)};
    const Matrix& M = cov.scaled();
    const Vector m = M.col(0);
    const double sigma_star = 1.0, nuB = 1.0, theta = 0.5;
    const Matrix gram = M.transpose() * M;
    Vector noise(n);
    for (Index i = 0; i < n; ++i) noise(i) = normal(rng);

    for (double effect : {1.0, 0.05}) {
        const Vector y = effect * m + noise;
        const ColumnRegressionProblem p =
            make_column_problem(M, gram, y, 0.0, sigma_star, theta, nuB);
        ColumnFactors f{Vector::Zero(1), Vector::Ones(1), Vector::Constant(1, 0.5)};
        vi_sweep_column(p, f, FitConfig{});

        const double mm = m.squaredNorm();
        const double my = m.dot(y);
        const double log_bf =
            -0.5 * std::log1p(nuB * mm) + 0.5 * my * my * nuB / (sigma_star * (1 + nuB * mm));
        const double log_odds = std::log(theta / (1 - theta)) + log_bf;
        const double exact = std::min(1.0 / (1.0 + std::exp(-log_odds)), 1.0 - 1e-12);
        if (effect == 1.0) {
            CHECK(f.phi(0) > 0.99);
        } else {
            CHECK(exact > 0.01);
            CHECK(exact < 0.99);
        }
        CHECK(f.phi(0) == doctest::Approx(exact).epsilon(1e-9));
        CHECK(f.mu(0) == doctest::Approx(my * nuB / (1 + nuB * mm)).epsilon(1e-12));
    }
}

TEST_CASE("sweeps: no covariates, fixed points, one-sweep convergence on orthogonal designs")
{
    Matrix empty(0, 0);
    ColumnRegressionProblem none = problem(Vector(0), empty, 1.0);
    ColumnFactors nf{Vector(0), Vector(0), Vector(0)};
    const SweepReport r0 = vi_sweep_column(none, nf, FitConfig{});
    CHECK(r0.converged);
    CHECK(r0.sweeps == 0);

    std::mt19937_64 rng(9);
    const Matrix M = orthogonal_design(40, 4, rng);
    const Matrix gram = M.transpose() * M;
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector y(40);
    for (Index i = 0; i < 40; ++i) y(i) = 0.8 * M(i, 0) - 0.3 * M(i, 2) + normal(rng);
    const ColumnRegressionProblem p = make_column_problem(M, gram, y, 0.0, 1.0, 0.5, 1.0);

    ColumnFactors once{Vector::Zero(4), Vector::Ones(4), Vector::Constant(4, 0.5)};
    FitConfig one;
    one.max_inner_iters = 1;
    vi_sweep_column(p, once, one);
    ColumnFactors again = once;
    vi_sweep_column(p, again, one);
    CHECK((again.mu - once.mu).cwiseAbs().maxCoeff() == 0.0);
    CHECK((again.phi - once.phi).cwiseAbs().maxCoeff() == 0.0);

    // General design: run to convergence, then sweeps leave the factors in place.
    Matrix Mg(40, 4);
    for (Index i = 0; i < Mg.size(); ++i) Mg.data()[i] = normal(rng);
    const Matrix gg = Mg.transpose() * Mg;
    const ColumnRegressionProblem pg = make_column_problem(Mg, gg, y, 0.0, 1.0, 0.5, 1.0);
    ColumnFactors f{Vector::Zero(4), Vector::Ones(4), Vector::Constant(4, 0.5)};
    for (int sweep = 0; sweep < 2000; ++sweep) vi_sweep_column(pg, f, one);
    ColumnFactors g = f;
    vi_sweep_column(pg, g, one);
    CHECK((g.mu - f.mu).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.sigma - f.sigma).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.phi - f.phi).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("each entry update does not lower the column objective")
{
    std::mt19937_64 rng(12);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix M(30, 5);
    for (Index i = 0; i < M.size(); ++i) M.data()[i] = normal(rng);
    const Matrix gram = M.transpose() * M;
    Vector y(30);
    for (Index i = 0; i < 30; ++i) y(i) = M(i, 1) - 0.5 * M(i, 3) + normal(rng);
    const ColumnRegressionProblem p = make_column_problem(M, gram, y, 0.1, 0.8, 0.3, 2.0);
    REQUIRE(p.response_ss > 0);
    ColumnFactors f{Vector::Zero(5), Vector::Ones(5), Vector::Constant(5, 0.5)};
    double last = column_elbo(p, f);
    for (int sweep = 0; sweep < 5; ++sweep) {
        for (Index k = 0; k < 5; ++k) {
            f.sigma(k) = update_sigma_entry(p, k);
            f.mu(k) = update_mu_entry(p, k, f.mu, f.phi, f.sigma(k));
            f.phi(k) = update_phi_entry(p, k, f.mu(k), f.sigma(k));
            const double now = column_elbo(p, f);
            CHECK(now >= last - 1e-12 * std::abs(last));
            last = now;
        }
    }
}

TEST_CASE("residual variances")
{
    Matrix omega(2, 2);
    omega << 2, 0.5, 0.5, 1;
    const Vector c = residual_variances(omega, ResidualVariance::Conditional);
    CHECK(c(0) == 0.5);
    CHECK(c(1) == 1.0);
    const Vector m = residual_variances(omega, ResidualVariance::Marginal);
    const Matrix inv = omega.inverse();
    CHECK(m(0) == doctest::Approx(inv(0, 0)).epsilon(1e-14));
    CHECK(m(1) == doctest::Approx(inv(1, 1)).epsilon(1e-14));
}

TEST_CASE("vi step sets B to mu times phi and is thread-count independent")
{
    std::mt19937_64 rng(13);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index n = 25, p = 4, q = 3;
    Matrix M(n, q), Z(n, p);
    for (Index i = 0; i < M.size(); ++i) M.data()[i] = normal(rng);
    for (Index i = 0; i < Z.size(); ++i) Z.data()[i] = normal(rng);
    Z.col(0) += 2 * M.col(1);
    const Matrix gram = M.transpose() * M;
    Matrix omega = Matrix::Identity(p, p) * 2;
    omega(0, 1) = omega(1, 0) = 0.4;
    for (ResidualVariance mode : {ResidualVariance::Conditional, ResidualVariance::Marginal}) {
        RegressionState a = RegressionState::initial(q, p);
        RegressionState b = a;
        FitConfig one, three;
        three.thread_count = 3;
        vi_step(Z, M, gram, omega, a, Hyperparameters{}, one, mode);
        vi_step(Z, M, gram, omega, b, Hyperparameters{}, three, mode);
        CHECK(a.mu == b.mu);
        CHECK(a.phi == b.phi);
        CHECK((a.B - a.mu.cwiseProduct(a.phi)).isZero(0.0));
        CHECK(a.phi(1, 0) > 0.99);
    }
}

TEST_CASE("negating a covariate negates its means; permuting columns permutes the results")
{
    std::mt19937_64 rng(14);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index n = 30, p = 5, q = 4;
    Matrix M(n, q), Z(n, p);
    for (Index i = 0; i < M.size(); ++i) M.data()[i] = normal(rng);
    for (Index i = 0; i < Z.size(); ++i) Z.data()[i] = normal(rng);
    Z.col(2) += 1.5 * M.col(0) - M.col(3);
    Matrix omega = Matrix::Identity(p, p) * 1.5;
    omega(1, 2) = omega(2, 1) = -0.3;
    const FitConfig cfg;

    RegressionState base = RegressionState::initial(q, p);
    vi_step(Z, M, M.transpose() * M, omega, base, Hyperparameters{}, cfg, ResidualVariance::Marginal);

    Matrix flipped = M;
    flipped.col(1) = -flipped.col(1);
    RegressionState neg = RegressionState::initial(q, p);
    vi_step(Z, flipped, flipped.transpose() * flipped, omega, neg, Hyperparameters{}, cfg,
            ResidualVariance::Marginal);
    CHECK(neg.mu.row(1) == -base.mu.row(1));
    CHECK(neg.phi == base.phi);
    CHECK(neg.mu.row(0) == base.mu.row(0));

    const std::vector<Index> perm{3, 0, 4, 2, 1};
    Matrix Zp(n, p), omegap(p, p);
    for (Index a = 0; a < p; ++a) {
        Zp.col(a) = Z.col(perm[a]);
        for (Index b = 0; b < p; ++b) omegap(a, b) = omega(perm[a], perm[b]);
    }
    RegressionState permuted = RegressionState::initial(q, p);
    vi_step(Zp, M, M.transpose() * M, omegap, permuted, Hyperparameters{}, cfg,
            ResidualVariance::Marginal);
    for (Index a = 0; a < p; ++a) {
        CHECK(permuted.mu.col(a) == base.mu.col(perm[a]));
        CHECK(permuted.phi.col(a) == base.phi.col(perm[a]));
    }
}
