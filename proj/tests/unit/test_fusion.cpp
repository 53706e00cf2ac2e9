#include "drfuse/errors.hpp"
#include "drfuse/fusion.hpp"
#include "drfuse/linalg.hpp"
#include "random_instances.hpp"

#include <doctest.h>

#include <cmath>

using namespace drfuse;
namespace dt = drfuse::testing;

namespace {

Matrix diag(std::initializer_list<double> v) {
    Vector d(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) d(i++) = x;
    return d.asDiagonal();
}

Matrix I(Eigen::Index n) { return Matrix::Identity(n, n); }

ReducedEstimate full_remote(const Vector& y, const Matrix& r) { return ReducedEstimate::identity({y, r}); }

// Error covariance of the linear rule x̂ = K₁y₁ + K_M y_M under the true joint covariance.
Matrix true_error_cov(const LinearRule& rule, const Matrix& reduced_joint) {
    Matrix k(rule.local_gain.rows(), rule.local_gain.cols() + rule.remote_gain.cols());
    k << rule.local_gain, rule.remote_gain;
    return k * reduced_joint * k.transpose();
}

}  // namespace

TEST_CASE("BSC with zero cross-covariance is the KF rule") {
    dt::Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const Eigen::Index nx = dt::uniform_int(rng, 1, 4), n2 = dt::uniform_int(rng, 1, 4);
        const Eigen::Index m = dt::uniform_int(rng, 1, static_cast<int>(n2));
        const Matrix r1 = dt::random_pd(rng, nx), r2 = dt::random_pd(rng, n2);
        const Matrix h = dt::gaussian(rng, n2, nx);
        const Matrix map = dt::random_orthonormal_rows(rng, m, n2);
        const Estimate local{dt::gaussian_vector(rng, nx), r1};
        const ReducedEstimate remote = ReducedEstimate::from_full({dt::gaussian_vector(rng, n2), r2}, map);
        const FusedEstimate a = fuse_bsc(local, remote, h, Matrix::Zero(nx, n2));
        const FusedEstimate b = fuse_kf(local, remote, h);
        CHECK(a.cov == b.cov);
        CHECK(a.mean == b.mean);
        CHECK(*a.gain == *b.gain);
    }
}

TEST_CASE("scalar equal-weight fusion") {
    const Vector y1{{1.0}}, y2{{3.0}};
    const FusedEstimate f = fuse_bsc({y1, I(1)}, full_remote(y2, I(1)), I(1), Matrix::Zero(1, 1));
    CHECK(f.cov(0, 0) == doctest::Approx(0.5));
    CHECK(f.mean(0) == doctest::Approx(2.0));
}

TEST_CASE("fully correlated operands fall back to the pseudoinverse") {
    dt::Rng rng(2);
    const Matrix r = dt::random_pd(rng, 3);
    const FusedEstimate f = fuse_bsc({Vector::Zero(3), r}, full_remote(Vector::Zero(3), r), I(3), r);
    CHECK(f.used_pseudoinverse);
    CHECK((f.cov - r).norm() < 1e-9 * r.norm());
}

TEST_CASE("KF examples") {
    const Matrix map{{0.0, 1.0}};
    const ReducedEstimate remote = ReducedEstimate::from_full({Vector::Zero(2), diag({4, 1})}, map);
    const FusedEstimate f = fuse_kf({Vector::Zero(2), diag({1, 4})}, remote, I(2));
    CHECK((f.cov - diag({1, 0.8})).norm() < 1e-12);

    dt::Rng rng(3);
    const Matrix r1 = dt::random_pd(rng, 4), r2 = dt::random_pd(rng, 4);
    const FusedEstimate g = fuse_kf({Vector::Zero(4), r1}, full_remote(Vector::Zero(4), r2), I(4));
    const Matrix info = r1.inverse() + r2.inverse();
    CHECK((g.cov - info.inverse()).norm() < 1e-9);

    const FusedEstimate u = fuse_kf({Vector::Zero(4), r1}, full_remote(Vector::Zero(4), 1e6 * r2), I(4));
    CHECK((u.cov - r1).norm() <= 1e-4 * r1.norm());
}

TEST_CASE("unbiasedness and the mean formula") {
    dt::Rng rng(4);
    for (int t = 0; t < 30; ++t) {
        const Eigen::Index nx = dt::uniform_int(rng, 1, 4), n2 = dt::uniform_int(rng, 1, 4);
        const Eigen::Index m = dt::uniform_int(rng, 1, static_cast<int>(n2));
        const dt::JointCov j = dt::random_joint(rng, nx, n2);
        const Matrix h = dt::gaussian(rng, n2, nx);
        const Matrix map = dt::random_orthonormal_rows(rng, m, n2);
        const Estimate local{dt::gaussian_vector(rng, nx), j.r1};
        const ReducedEstimate remote = ReducedEstimate::from_full({dt::gaussian_vector(rng, n2), j.r2}, map);
        const FusedEstimate f = fuse_bsc(local, remote, h, j.r12);
        const LinearRule rule = linear_rule(*f.gain, remote, h);
        const Matrix sum = rule.local_gain + rule.remote_gain * map * h;
        CHECK((sum - I(nx)).cwiseAbs().maxCoeff() < 1e-12);
        const Vector mean = rule.local_gain * local.mean + rule.remote_gain * remote.mean;
        CHECK((mean - f.mean).norm() < 1e-10 * std::max(1.0, f.mean.norm()));
        CHECK(f.cov.trace() <= j.r1.trace() + 1e-12);
        CHECK((f.cov - f.cov.transpose()).norm() == 0.0);
    }
}

TEST_CASE("BSC beats random unbiased gains") {
    dt::Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const Eigen::Index nx = dt::uniform_int(rng, 1, 4), n2 = dt::uniform_int(rng, 1, 4);
        const Eigen::Index m = dt::uniform_int(rng, 1, static_cast<int>(n2));
        const dt::JointCov j = dt::random_joint(rng, nx, n2);
        const Matrix h = dt::gaussian(rng, n2, nx);
        const Matrix map = dt::random_map(rng, m, n2);
        const Matrix rj = dt::reduced_joint(j, map);
        const double best = dt::bsc_cov(j, map, h).trace();
        const ReducedEstimate remote{Vector::Zero(m), map * j.r2 * map.transpose(), map};
        const Matrix km = *fuse_bsc({Vector::Zero(nx), j.r1}, remote, h, j.r12).gain;
        CHECK(std::abs(dt::rule_trace(km, map, h, rj) - best) < 1e-9 * std::max(1.0, best));
        for (int k = 0; k < 1000; ++k) {
            const Matrix g = km + dt::gaussian(rng, nx, m) * std::pow(10.0, dt::uniform(rng, -4, 1));
            CHECK(dt::rule_trace(g, map, h, rj) >= best - 1e-9);
        }
    }
}

TEST_CASE("dimension checks") {
    const Estimate local{Vector::Zero(2), I(2)};
    const ReducedEstimate remote = full_remote(Vector::Zero(3), I(3));
    CHECK_THROWS_AS(fuse_kf(local, remote, I(2)), DimensionError);
    CHECK_THROWS_AS(fuse_bsc(local, full_remote(Vector::Zero(2), I(2)), I(2), Matrix::Zero(3, 3)), DimensionError);
}

TEST_CASE("CI weight domain") {
    CHECK_THROWS_AS(CiWeight(0.0), InputError);
    CHECK_THROWS_AS(CiWeight(1.5), InputError);
    CHECK_THROWS_AS(CiWeight(-0.1), InputError);
    CHECK(CiWeight(1.0).value() == 1.0);
}

TEST_CASE("optimize_ci_omega") {
    dt::Rng rng(6);
    const Matrix r1 = dt::random_pd(rng, 3);
    const Matrix dominated = r1 + dt::random_pd(rng, 3);
    CHECK(optimize_ci_omega(r1, full_remote(Vector::Zero(3), dominated), I(3)).value() == 1.0);
    CHECK(optimize_ci_omega(r1, full_remote(Vector::Zero(3), r1), I(3)).value() == 0.5);

    const double w = optimize_ci_omega(diag({1, 100}), full_remote(Vector::Zero(2), diag({100, 1})), I(2)).value();
    CHECK(w == doctest::Approx(0.5).epsilon(1e-6));

    // dense grid oracle
    for (int t = 0; t < 20; ++t) {
        const Matrix a = dt::random_pd(rng, 3);
        const Matrix map = dt::random_orthonormal_rows(rng, 2, 3);
        const ReducedEstimate remote = ReducedEstimate::from_full({Vector::Zero(3), dt::random_pd(rng, 3)}, map);
        const double omega = optimize_ci_omega(a, remote, I(3)).value();
        const Matrix li = a.inverse();
        const Matrix ri = remote_information(remote, I(3));
        double grid_best = ci_trace(li, ri, 1.0), grid_arg = 1.0;
        for (int k = 1; k <= 100000; ++k) {
            const double x = k / 100000.0;
            const double v = ci_trace(li, ri, x);
            if (v < grid_best) grid_best = v, grid_arg = x;
        }
        CHECK(ci_trace(li, ri, omega) <= grid_best + 1e-10 * grid_best);
        CHECK(std::abs(omega - grid_arg) < 2e-5);
    }
}

TEST_CASE("CI fusion") {
    dt::Rng rng(7);
    const Matrix r = dt::random_pd(rng, 3);
    for (double w : {0.1, 0.5, 0.9}) {
        const FusedEstimate f = fuse_ci({Vector::Zero(3), r}, full_remote(Vector::Zero(3), r), I(3), CiWeight(w));
        CHECK((f.cov - r).norm() < 1e-9 * r.norm());
    }
    const Vector y1 = dt::gaussian_vector(rng, 3);
    const FusedEstimate one = fuse_ci({y1, r}, full_remote(dt::gaussian_vector(rng, 3), dt::random_pd(rng, 3)), I(3),
                                      CiWeight(1.0));
    CHECK(one.mean == y1);
    CHECK(one.cov == r);
}

TEST_CASE("CI is conservative for consistent joint covariances") {
    dt::Rng rng(8);
    for (int t = 0; t < 100; ++t) {
        const Eigen::Index nx = dt::uniform_int(rng, 1, 4), n2 = dt::uniform_int(rng, 1, 4);
        const Eigen::Index m = dt::uniform_int(rng, 1, static_cast<int>(n2));
        const dt::JointCov j = dt::random_joint(rng, nx, n2, 0.1);
        const Matrix h = dt::gaussian(rng, n2, nx);
        const Matrix map = dt::random_orthonormal_rows(rng, m, n2);
        const ReducedEstimate remote{Vector::Zero(m), map * j.r2 * map.transpose(), map};
        const Matrix rj = dt::reduced_joint(j, map);
        for (double w : {optimize_ci_omega(j.r1, remote, h).value(), dt::uniform(rng, 1e-3, 1.0)}) {
            const FusedEstimate f = fuse_ci({Vector::Zero(nx), j.r1}, remote, h, CiWeight(w));
            const Matrix truth = true_error_cov(linear_rule(*f.gain, remote, h), rj);
            const double lmin = eig_sym(symmetrize(f.cov - truth)).values.minCoeff();
            CHECK(lmin >= -1e-9 * std::max(1.0, f.cov.norm()));
        }
    }
}

TEST_CASE("LE special cases") {
    dt::Rng rng(9);
    const Matrix r = dt::random_pd(rng, 3);
    const Vector y = dt::gaussian_vector(rng, 3);
    const FusedEstimate same = fuse_le({y, r}, full_remote(y, r), I(3));
    CHECK((same.cov - r).norm() < 1e-9 * r.norm());
    CHECK((same.mean - y).norm() < 1e-9 * std::max(1.0, y.norm()));

    const Vector y2 = dt::gaussian_vector(rng, 3);
    const FusedEstimate worse = fuse_le({y, r}, full_remote(y2, 4.0 * r), I(3));
    CHECK((worse.cov - r).norm() < 1e-9 * r.norm());
    CHECK((worse.mean - y).norm() < 1e-9);

    const FusedEstimate better = fuse_le({y, r}, full_remote(y2, 0.25 * r), I(3));
    CHECK((better.cov - 0.25 * r).norm() < 1e-9 * r.norm());
    CHECK((better.mean - y2).norm() < 1e-9);
}

TEST_CASE("LE selects each whitened component from one operand") {
    dt::Rng rng(10);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index nx = dt::uniform_int(rng, 1, 4);
        const Eigen::Index n2 = dt::uniform_int(rng, static_cast<int>(nx), 5);
        const Eigen::Index m = dt::uniform_int(rng, 1, static_cast<int>(n2));
        const Matrix r1 = dt::random_pd(rng, nx);
        const Matrix h = dt::gaussian(rng, n2, nx);
        const Matrix map = dt::random_orthonormal_rows(rng, m, n2);
        const ReducedEstimate remote = ReducedEstimate::from_full({dt::gaussian_vector(rng, n2), dt::random_pd(rng, n2)}, map);
        const Estimate local{dt::gaussian_vector(rng, nx), r1};
        const FusedEstimate f = fuse_le(local, remote, h);
        const JointDiagonalization jd = jointly_diagonalize(r1.inverse(), remote_information(remote, h));
        const Matrix t_info = jd.transform * f.cov.inverse() * jd.transform.transpose();
        for (Eigen::Index i = 0; i < nx; ++i) {
            const double expect = jd.remote_diag(i) > 1.0 ? jd.remote_diag(i) : 1.0;
            CHECK(std::abs(t_info(i, i) - expect) < 1e-8 * std::max(1.0, expect));
        }
        CHECK(max_off_diagonal(t_info) < 1e-8 * std::max(1.0, t_info.norm()));

        const LinearRule rule = le_gains(r1, remote, h);
        const Vector mean = rule.local_gain * local.mean + rule.remote_gain * remote.mean;
        CHECK((mean - f.mean).norm() < 1e-8 * std::max(1.0, f.mean.norm()));
        CHECK(is_pd(f.cov));
    }
}

TEST_CASE("LE with an uninformative remote returns the local estimate") {
    const Estimate local{Vector{{1.0, 2.0}}, diag({1, 2})};
    const ReducedEstimate remote{Vector{{0.0}}, Matrix{{1.0}}, Matrix{{0.0, 1.0}}};
    const FusedEstimate f = fuse_le(local, remote, Matrix{{1.0, 0.0}, {0.0, 0.0}});
    CHECK(f.remote_uninformative);
    CHECK(f.mean == local.mean);
    CHECK(f.cov == local.cov);
}
