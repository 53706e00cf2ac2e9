#include "drfuse/errors.hpp"
#include "drfuse/fusion.hpp"
#include "drfuse/reduction.hpp"
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

bool same_up_to_sign(const Matrix& a, const Matrix& b, double tol = 1e-12) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        if ((a.row(i) - b.row(i)).norm() > tol && (a.row(i) + b.row(i)).norm() > tol) return false;
    return true;
}

double kf_trace(const Matrix& r1, const Matrix& r2, const Matrix& h, const Matrix& map) {
    const ReducedEstimate remote{Vector::Zero(map.rows()), map * r2 * map.transpose(), map};
    return fuse_kf({Vector::Zero(r1.rows()), r1}, remote, h).cov.trace();
}

// Mᵀ(MSMᵀ)⁺M through an eigenvalue-thresholded pseudoinverse.
Matrix sandwich(const Matrix& map, const Matrix& s) {
    return map.transpose() * pinv_sym(symmetrize(map * s * map.transpose()), 1e-9) * map;
}

}  // namespace

TEST_CASE("two-dimensional comparison with principal components") {
    const Matrix local_i = diag({1, 4}), local_ii = diag({4, 1}), remote = diag({4, 1});
    CHECK(same_up_to_sign(gevo_kf(local_i, remote, I(2), 1), Matrix{{0.0, 1.0}}));
    CHECK(same_up_to_sign(gevo_kf(local_ii, remote, I(2), 1), Matrix{{1.0, 0.0}}));
    CHECK(same_up_to_sign(pco(remote, 1), Matrix{{0.0, 1.0}}));
    CHECK(same_up_to_sign(gevo({local_ii, remote, Matrix::Zero(2, 2), I(2), 1}), Matrix{{1.0, 0.0}}));
}

TEST_CASE("gevo_kf is gevo with zero cross-covariance") {
    dt::Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const Eigen::Index nx = dt::uniform_int(rng, 1, 4), n2 = dt::uniform_int(rng, 1, 4);
        const Eigen::Index m = dt::uniform_int(rng, 1, static_cast<int>(n2));
        const Matrix r1 = dt::random_pd(rng, nx), r2 = dt::random_pd(rng, n2), h = dt::gaussian(rng, n2, nx);
        CHECK(gevo_kf(r1, r2, h, m) == gevo({r1, r2, Matrix::Zero(nx, n2), h, m}));
    }
}

TEST_CASE("gevo output contract and trace identity") {
    dt::Rng rng(2);
    for (int t = 0; t < 100; ++t) {
        const Eigen::Index nx = dt::uniform_int(rng, 1, 5), n2 = dt::uniform_int(rng, 1, 5);
        const Eigen::Index m = dt::uniform_int(rng, 1, static_cast<int>(n2));
        const dt::JointCov j = dt::random_joint(rng, nx, n2);
        const Matrix h = dt::gaussian(rng, n2, nx);
        const GevoInputs in{j.r1, j.r2, j.r12, h, m};
        const GevoResult res = gevo_detailed(in);
        const Matrix& map = res.map;
        CHECK(orthonormality_residual(map) < 1e-9);
        CHECK(max_off_diagonal(map * j.r2 * map.transpose()) < 1e-9 * std::max(1.0, j.r2.norm()));
        const GevoProblem p = gevo_problem(in);
        const double gain = ((map * p.s * map.transpose()).inverse() * map * p.q * map.transpose()).trace();
        CHECK(std::abs(gain - res.pairs.values.head(m).sum()) <= 1e-8 * std::max(1.0, gain));
    }
}

TEST_CASE("gevo at full rank recovers full fusion") {
    dt::Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const dt::JointCov j = dt::random_joint(rng, 3, 3);
        const Matrix map = gevo({j.r1, j.r2, j.r12, I(3), 3});
        const double reduced = dt::bsc_cov(j, map, I(3)).trace();
        const double full = dt::bsc_cov(j, I(3), I(3)).trace();
        CHECK(std::abs(reduced - full) < 1e-9 * std::max(1.0, full));
    }
}

TEST_CASE("gevo_kf beats random unit rows") {
    dt::Rng rng(4);
    for (int t = 0; t < 5; ++t) {
        const Matrix r1 = dt::random_pd(rng, 4), r2 = dt::random_pd(rng, 4);
        const double best = kf_trace(r1, r2, I(4), gevo_kf(r1, r2, I(4), 1));
        for (int k = 0; k < 10000; ++k) {
            const Matrix row = dt::random_orthonormal_rows(rng, 1, 4);
            CHECK(best <= kf_trace(r1, r2, I(4), row) + 1e-9);
        }
    }
}

TEST_CASE("shared eigenvectors give the leading common eigenvectors") {
    dt::Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const Matrix v = dt::random_orthogonal(rng, 4);
        Vector mu(4), pi(4);
        mu << 8, 4, 2, 1;
        pi = mu * dt::uniform(rng, 0.2, 5.0);
        const Matrix r1 = v * mu.asDiagonal() * v.transpose(), r2 = v * pi.asDiagonal() * v.transpose();
        for (int m = 1; m <= 3; ++m) {
            const Matrix map = gevo_kf(symmetrize(r1), symmetrize(r2), I(4), m);
            CHECK(same_up_to_sign(map, v.leftCols(m).transpose(), 1e-8));
            CHECK(same_up_to_sign(pco(symmetrize(r2), m), v.rightCols(m).transpose(), 1e-8));
        }
    }
}

TEST_CASE("rank errors") {
    CHECK_THROWS_AS(gevo_kf(I(2), I(2), I(2), 0), RankError);
    CHECK_THROWS_AS(gevo_kf(I(2), I(2), I(2), 3), RankError);
    // S = diag(1, 0): only one informative direction
    const Matrix r1 = diag({1, 1});
    const Matrix r2 = diag({1, 1});
    const Matrix r12 = diag({0, 1});
    CHECK_NOTHROW(gevo({r1, r2, r12, I(2), 1}));
    CHECK_THROWS_AS(gevo({r1, r2, r12, I(2), 2}), RankError);
}

TEST_CASE("loss ladder") {
    dt::Rng rng(6);
    for (int t = 0; t < 30; ++t) {
        const dt::JointCov j = dt::random_joint(rng, 3, 3);
        const GevoInputs in{j.r1, j.r2, j.r12, I(3), 1};
        const LossLadder l = loss_ladder(in);
        CHECK(l.ell(0) == doctest::Approx(j.r1.trace()));
        for (Eigen::Index m = 1; m < l.ell.size(); ++m) {
            CHECK(l.ell(m) <= l.ell(m - 1) + 1e-12);
            GevoInputs cur = in;
            cur.m = m;
            const double direct = dt::bsc_cov(j, gevo(cur), I(3)).trace();
            CHECK(std::abs(l.ell(m) - direct) < 1e-8 * std::max(1.0, direct));
        }
    }
    // No information: R₁₂ = R₁ Hᵀ makes Q = 0.
    const Matrix r1 = dt::random_pd(rng, 2);
    const LossLadder flat = loss_ladder({r1, r1 + I(2), r1, I(2), 1});
    CHECK((flat.ell.array() - r1.trace()).abs().maxCoeff() < 1e-12);
}

TEST_CASE("select_m") {
    LossLadder l;
    l.lambdas = Vector{{9.0, 0.9, 0.1}};
    CHECK(select_m(l, 0.9).m == 1);
    CHECK(select_m(l, 0.95).m == 2);
    CHECK(select_m(l, 0.0).m == 1);
    CHECK(select_m(l, 1.0).m == 3);
    CHECK_THROWS_AS(select_m(l, 1.5), InputError);
    CHECK_THROWS_AS(select_m(l, -0.1), InputError);
    l.lambdas = Vector::Zero(3);
    const RankSelection z = select_m(l, 0.5);
    CHECK(z.m == 0);
    CHECK(z.degenerate);
}

TEST_CASE("pco") {
    CHECK(same_up_to_sign(pco(diag({4, 1}), 1), Matrix{{0.0, 1.0}}));
    CHECK(same_up_to_sign(pco(I(3), 1), Matrix{{0.0, 0.0, 1.0}}));
    dt::Rng rng(7);
    const Matrix r2 = dt::random_pd(rng, 4);
    const Matrix full = pco(r2, 4);
    CHECK(orthonormality_residual(full) < 1e-12);
    CHECK((full * r2 * full.transpose()).trace() == doctest::Approx(r2.trace()));
    const Matrix one = pco(r2, 1);
    const double smallest = (one * r2 * one.transpose()).trace();
    for (int k = 0; k < 1000; ++k) {
        const Matrix row = dt::random_orthonormal_rows(rng, 1, 4);
        CHECK(smallest <= (row * r2 * row.transpose()).trace() + 1e-12);
    }
}

TEST_CASE("dca_eig") {
    const Matrix d = diag({3, 1, 2});
    const DiagonalApproximation a = dca_eig(d);
    CHECK(a.scale == doctest::Approx(1.0));
    CHECK((a.cov - d).norm() < 1e-12);

    Matrix r(2, 2);
    r << 2, 1, 1, 2;
    const DiagonalApproximation b = dca_eig(r);
    CHECK(b.scale == doctest::Approx(1.5));
    CHECK((b.cov - diag({3, 3})).norm() < 1e-12);
    CHECK((dca_eig(I(3)).cov - I(3)).norm() < 1e-12);

    dt::Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        const Matrix r2 = dt::random_pd(rng, dt::uniform_int(rng, 1, 6));
        const DiagonalApproximation x = dca_eig(r2);
        CHECK(is_psd(x.cov - r2, 1e-12 * r2.norm()));
        const Matrix smaller = x.cov * (1.0 - 1e-6);
        CHECK_FALSE(is_psd(smaller - r2, 0.0));
    }
}

TEST_CASE("CI map search") {
    dt::Rng rng(9);
    long decreases = 0;
    for (int t = 0; t < 100; ++t) {
        const int nx = dt::uniform_int(rng, 2, 6);
        const int m = dt::uniform_int(rng, 1, nx);
        const Matrix r1 = dt::random_pd(rng, nx), r2 = dt::random_pd(rng, nx);
        const GevoCiResult res = gevo_ci(r1, r2, I(nx), m);
        double prev = r1.trace();
        for (double j : res.trace.j_values) {
            CHECK(j <= prev * (1.0 + 1e-10));
            if (j < prev) ++decreases;
            prev = j;
        }
        CHECK(orthonormality_residual(res.map) < 1e-9);
        CHECK(max_off_diagonal(res.map * r2 * res.map.transpose()) < 1e-9 * r2.norm());
        CHECK(res.trace.iterations == static_cast<int>(res.trace.j_values.size()));
    }
    CHECK(decreases > 0);
}

TEST_CASE("CI map search when the remote is dominated") {
    dt::Rng rng(10);
    const Matrix r1 = dt::random_pd(rng, 3);
    const Matrix r2 = r1 + dt::random_pd(rng, 3);
    const GevoCiResult res = gevo_ci(r1, r2, I(3), 2);
    CHECK(res.omega.value() == 1.0);
    CHECK(res.trace.iterations == 1);
    const ReducedEstimate remote = ReducedEstimate::from_full({Vector::Zero(3), r2}, res.map);
    const FusedEstimate f = fuse_ci({Vector::Zero(3), r1}, remote, I(3), res.omega);
    CHECK((f.cov - r1).norm() < 1e-12);
}

TEST_CASE("CI map search truncation and config checks") {
    dt::Rng rng(11);
    const Matrix r1 = dt::random_pd(rng, 5), r2 = dt::random_pd(rng, 5);
    GevoCiConfig cfg;
    cfg.epsilon = 1e-300;
    cfg.max_iters = 2;
    const GevoCiResult res = gevo_ci(r1, r2, I(5), 2, cfg);
    CHECK(res.trace.iterations <= 2);
    if (res.trace.iterations == 2) CHECK(res.trace.truncated);
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(gevo_ci(r1, r2, I(5), 2, cfg), InputError);
    cfg = {};
    cfg.omega0 = 1.0;
    CHECK_THROWS_AS(gevo_ci(r1, r2, I(5), 2, cfg), InputError);
}

TEST_CASE("implicit cross-covariance of largest-ellipsoid fusion") {
    dt::Rng rng(12);
    const Matrix r1 = dt::random_pd(rng, 3);
    const ImplicitCrossCov same = le_implicit_cross_covariance(r1, r1, I(3));
    CHECK((same.d.array() - 1.0).abs().maxCoeff() < 1e-9);
    CHECK((same.common_info - r1.inverse()).norm() < 1e-9 * r1.inverse().norm());
    CHECK((same.r12 - r1).norm() < 1e-9 * r1.norm());

    // all common information comes from the less informative remote side
    const Matrix r2 = 4.0 * r1;
    const ImplicitCrossCov loose = le_implicit_cross_covariance(r1, r2, I(3));
    CHECK((loose.d.array() - 0.25).abs().maxCoeff() < 1e-9);
    CHECK((loose.common_info - r2.inverse()).norm() < 1e-9);
    CHECK((loose.r12 - r1 * r2.inverse() * r2).norm() < 1e-9 * r1.norm());

    for (int t = 0; t < 30; ++t) {
        const int n = dt::uniform_int(rng, 1, 5);
        const Matrix a = dt::random_pd(rng, n), b = dt::random_pd(rng, n);
        const ImplicitCrossCov c = le_implicit_cross_covariance(a, b, I(n));
        const Matrix g = c.common_info;
        CHECK((g * pinv_sym(g, 1e-9) * g - g).norm() < 1e-8 * std::max(1.0, g.norm()));
        const Matrix map = gevo_le(a, b, I(n), dt::uniform_int(rng, 1, n));
        CHECK(orthonormality_residual(map) < 1e-9);

        // a general tall H2 can make the implied joint covariance indefinite
        const Matrix h = dt::gaussian(rng, n + 1, n);
        const Matrix b2 = dt::random_pd(rng, n + 1);
        const ImplicitCrossCov c2 = le_implicit_cross_covariance(a, b2, h);
        CHECK((c2.common_info * pinv_sym(c2.common_info, 1e-9) * c2.common_info - c2.common_info).norm() <
              1e-8 * std::max(1.0, c2.common_info.norm()));
        bool indefinite = false;
        Matrix tall_map;
        try {
            tall_map = gevo_le(a, b2, h, 1);
        } catch (const DefinitenessError&) {
            indefinite = true;
        }
        if (!indefinite) CHECK(orthonormality_residual(tall_map) < 1e-9);
    }
    CHECK_THROWS_AS(le_implicit_cross_covariance(I(2), I(2), Matrix{{1.0, 0.0}, {1.0, 0.0}}), PreconditionError);
}

TEST_CASE("change of basis leaves the fused result unchanged") {
    dt::Rng rng(13);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index nx = dt::uniform_int(rng, 1, 4), n2 = dt::uniform_int(rng, 1, 5);
        const Eigen::Index m = dt::uniform_int(rng, 1, static_cast<int>(n2));
        const dt::JointCov j = dt::random_joint(rng, nx, n2);
        const Matrix h = dt::gaussian(rng, n2, nx);
        const Matrix map = dt::random_map(rng, m, n2);
        const Matrix tmap = dt::random_pd(rng, m) * map;
        const GevoProblem p = gevo_problem({j.r1, j.r2, j.r12, h, m});
        CHECK((sandwich(map, p.s) - sandwich(tmap, p.s)).norm() < 1e-9 * std::max(1.0, sandwich(map, p.s).norm()));
        const Estimate local{dt::gaussian_vector(rng, nx), j.r1};
        const Estimate remote_full{dt::gaussian_vector(rng, n2), j.r2};
        const FusedEstimate a = fuse_bsc(local, ReducedEstimate::from_full(remote_full, map), h, j.r12);
        const FusedEstimate b = fuse_bsc(local, ReducedEstimate::from_full(remote_full, tmap), h, j.r12);
        CHECK((a.cov - b.cov).norm() < 1e-9 * std::max(1.0, a.cov.norm()));
        CHECK((a.mean - b.mean).norm() < 1e-9 * std::max(1.0, a.mean.norm()));
    }
}

TEST_CASE("appending rows beyond the rank of S changes nothing") {
    dt::Rng rng(14);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index n2 = dt::uniform_int(rng, 2, 5);
        const Eigen::Index r = dt::uniform_int(rng, 1, static_cast<int>(n2) - 1);
        const Eigen::Index nx = n2 + dt::uniform_int(rng, 0, 2);
        const dt::SingularInstance si = dt::singular_instance(rng, nx, n2, r);
        const GevoInputs in{si.r1, si.r2, si.r12, si.h2, r};
        const GevoProblem p = gevo_problem(in);
        REQUIRE(numerical_rank(p.s) == r);
        const Matrix m1 = gevo(in);
        const Eigen::Index extra = dt::uniform_int(rng, 1, static_cast<int>(n2 - r));
        Matrix mm(r + extra, n2);
        mm << m1, dt::gaussian(rng, extra, n2);

        // S-weighted identity and the fused covariance are invariant for any appended rows.
        const Matrix a = p.s * sandwich(m1, p.s) * p.s, b = p.s * sandwich(mm, p.s) * p.s;
        CHECK((a - b).norm() < 1e-9 * std::max(1.0, a.norm()));
        const Vector x = dt::gaussian_vector(rng, nx);
        const Vector e = si.factor * dt::gaussian_vector(rng, nx + r);
        const Estimate local{x + e.head(nx), si.r1};
        const Estimate remote_full{si.h2 * x + e.tail(n2), si.r2};
        const FusedEstimate f1 = fuse_bsc(local, ReducedEstimate::from_full(remote_full, m1), si.h2, si.r12);
        const FusedEstimate f2 = fuse_bsc(local, ReducedEstimate::from_full(remote_full, mm), si.h2, si.r12);
        CHECK(f2.used_pseudoinverse);
        CHECK((f1.cov - f2.cov).norm() < 1e-9 * std::max(1.0, f1.cov.norm()));
        CHECK((f1.mean - f2.mean).norm() < 1e-9 * std::max(1.0, f1.mean.norm()));

        // Rows inside the span of M₁ leave even the bare sandwich unchanged.
        Matrix inside(r + extra, n2);
        inside << m1, dt::gaussian(rng, extra, r) * m1;
        CHECK((sandwich(m1, p.s) - sandwich(inside, p.s)).norm() < 1e-9 * std::max(1.0, sandwich(m1, p.s).norm()));
    }
}
