#include "sinc/types.hpp"

#include <doctest.h>

#include <functional>

using namespace sinc;

namespace {

ErrorKind kind_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("validate_inputs accepts a well-formed pair")
{
    Matrix x(3, 2);
    x << 1, 2, 3, 0, 0, 4;
    Matrix m(3, 1);
    m << 0.1, -0.2, 0.3;
    CHECK_NOTHROW(validate_inputs(CountMatrix(x), CovariateMatrix(m)));
}

TEST_CASE("validate_inputs rejects an all-zero count column")
{
    Matrix x(3, 2);
    x << 1, 0, 3, 0, 2, 0;
    Matrix m(3, 1);
    m << 0.1, -0.2, 0.3;
    CHECK(kind_of([&] { validate_inputs(CountMatrix(x), CovariateMatrix(m)); }) ==
          ErrorKind::DegenerateColumn);
}

TEST_CASE("validate_inputs rejects mismatched row counts")
{
    Matrix x = Matrix::Ones(3, 2);
    Matrix m(4, 1);
    m << 1, 2, 3, 4;
    CHECK(kind_of([&] { validate_inputs(CountMatrix(x), CovariateMatrix(m)); }) ==
          ErrorKind::DimensionMismatch);
}

TEST_CASE("validate_inputs rejects constant and non-finite covariates")
{
    Matrix x = Matrix::Ones(3, 2);
    CHECK(kind_of([&] { validate_inputs(CountMatrix(x), CovariateMatrix(Matrix::Ones(3, 1))); }) ==
          ErrorKind::DegenerateColumn);
    Matrix m(3, 1);
    m << 1, NAN, 2;
    CHECK(kind_of([&] { validate_inputs(CountMatrix(x), CovariateMatrix(m)); }) ==
          ErrorKind::NonFiniteEntry);
}

TEST_CASE("count matrix rejects negative and fractional entries")
{
    Matrix neg(1, 2);
    neg << 1, -1;
    CHECK(kind_of([&] { CountMatrix c(neg); }) == ErrorKind::NegativeCount);
    Matrix frac(1, 2);
    frac << 1, 0.5;
    CHECK(kind_of([&] { CountMatrix c(frac); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("covariates are centered and scaled to unit sample sd")
{
    Matrix m(4, 1);
    m << 1, 2, 3, 6;
    const CovariateMatrix c(m);
    const Vector s = c.scaled().col(0);
    CHECK(std::abs(s.mean()) < 1e-15);
    CHECK(s.squaredNorm() / 3.0 == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c.center()(0) == 3.0);
}

TEST_CASE("median model keeps mu only above one half")
{
    RegressionState s = RegressionState::initial(3, 1);
    s.mu << 0.3, 7.0, -2.0;
    s.phi << 0.6, 0.5, 0.49;
    const RegressionState f = finalize_coefficients(s);
    CHECK(f.B(0, 0) == 0.3);
    CHECK(f.B(1, 0) == 0.0);
    CHECK(f.B(2, 0) == 0.0);
    CHECK(f.finalized);
    CHECK(finalize_coefficients(f).B == f.B);
}

TEST_CASE("network invariants flag asymmetric or indefinite precision")
{
    NetworkState net;
    net.omega = Matrix::Identity(2, 2);
    net.p_star = Matrix::Zero(2, 2);
    net.d_star = Matrix::Zero(2, 2);
    CHECK_NOTHROW(net.check_invariants());
    net.omega(0, 1) = 1e-6;
    CHECK_THROWS_AS(net.check_invariants(), std::logic_error);
    net.omega(0, 1) = net.omega(1, 0) = 2.0;
    CHECK_THROWS_AS(net.check_invariants(), std::logic_error);
}

TEST_CASE("eigen helpers")
{
    Matrix m(2, 2);
    m << 2, 1, 1, 2;
    CHECK(min_eigenvalue(m) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(max_asymmetry(m) == 0.0);
}
