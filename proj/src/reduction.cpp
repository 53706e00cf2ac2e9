#include "drfuse/reduction.hpp"

#include "drfuse/errors.hpp"

#include <algorithm>
#include <cmath>

namespace drfuse {
namespace {

constexpr double kOmegaClamp = 1e-6;

void check_inputs(const GevoInputs& in) {
    require_symmetric(in.r1, "R1");
    require_symmetric(in.r2, "R2");
    require_finite(in.h2, "H2");
    require_finite(in.r12, "R12");
    const Eigen::Index nx = in.r1.rows();
    const Eigen::Index n2 = in.r2.rows();
    if (in.h2.rows() != n2 || in.h2.cols() != nx) throw DimensionError("H2 must be n2 x nx");
    if (in.r12.rows() != nx || in.r12.cols() != n2) throw DimensionError("R12 must be nx x n2");
    if (in.m < 1 || in.m > n2) throw RankError("m must satisfy 1 <= m <= n2");
}

EigenPairs gevo_pairs(const GevoProblem& p) {
    if (is_pd(p.s)) return solve_gevp(p.q, p.s);
    const double scale = std::max(1.0, p.s.cwiseAbs().maxCoeff());
    if (!is_psd(p.s, 1e-9 * scale)) throw DefinitenessError("S is not positive semidefinite");
    const Eigen::Index rank = numerical_rank(p.s);
    if (rank == 0) throw DegenerateError("S has rank zero");
    return solve_gevp_singular(p.q, p.s, rank);
}

double ci_objective(const Matrix& local_info, const Matrix& r2, const Matrix& h2, const Matrix& phi, double omega) {
    const ReducedEstimate remote{Vector::Zero(phi.rows()), symmetrize(phi * r2 * phi.transpose()), phi};
    return ci_trace(local_info, remote_information(remote, h2), omega);
}

}  // namespace

GevoProblem gevo_problem(const GevoInputs& in) {
    const Matrix delta = in.r1 * in.h2.transpose() - in.r12;
    const Matrix hr12 = in.h2 * in.r12;
    return {symmetrize(delta.transpose() * delta),
            symmetrize(in.h2 * in.r1 * in.h2.transpose() + in.r2 - hr12 - hr12.transpose())};
}

GevoResult gevo_detailed(const GevoInputs& in) {
    check_inputs(in);
    GevoResult out;
    out.pairs = gevo_pairs(gevo_problem(in));
    if (in.m > out.pairs.size()) throw RankError("m exceeds the rank of S");
    out.map = finalize_map(out.pairs.top_rows(in.m), in.r2);
    return out;
}

Matrix gevo(const GevoInputs& in) { return gevo_detailed(in).map; }

Matrix gevo_kf(const Matrix& r1, const Matrix& r2, const Matrix& h2, Eigen::Index m) {
    return gevo({r1, r2, Matrix::Zero(r1.rows(), r2.rows()), h2, m});
}

Matrix finalize_map(const Matrix& phi, const Matrix& r2) {
    if (phi.cols() != r2.rows()) throw DimensionError("map does not match R2");
    const Matrix omega = orthonormalize_rows(phi);
    const EigenPairs rot = eig_sym(symmetrize(omega * r2 * omega.transpose()));
    return rot.vectors.transpose() * omega;
}

GevoCiResult gevo_ci(const Matrix& r1, const Matrix& r2, const Matrix& h2, Eigen::Index m, const GevoCiConfig& cfg) {
    check_inputs({r1, r2, Matrix::Zero(r1.rows(), r2.rows()), h2, m});
    if (!(cfg.epsilon > 0.0)) throw InputError("epsilon must be positive");
    if (!(cfg.omega0 > 0.0 && cfg.omega0 < 1.0)) throw InputError("omega0 must lie in (0, 1)");
    if (cfg.max_iters < 1) throw InputError("max_iters must be at least 1");

    const Matrix local_info = inverse_pd(r1, "R1");
    const Matrix hr1 = h2 * r1;
    const Matrix q_base = symmetrize(hr1 * hr1.transpose());
    const Matrix s_base = symmetrize(hr1 * h2.transpose());

    GevoCiResult out;
    double omega = cfg.omega0;
    double j_prev = r1.trace();
    Matrix phi;
    for (int k = 1;; ++k) {
        const double w = std::clamp(omega, kOmegaClamp, 1.0 - kOmegaClamp);
        const Matrix q = q_base / (w * w);
        const Matrix s = symmetrize(s_base / w + r2 / (1.0 - w));
        phi = solve_gevp(q, s).top_rows(m);

        const ReducedEstimate remote{Vector::Zero(m), symmetrize(phi * r2 * phi.transpose()), phi};
        double next = optimize_ci_omega(r1, remote, h2).value();
        double j = ci_objective(local_info, r2, h2, phi, next);
        const double j_keep = ci_objective(local_info, r2, h2, phi, omega);
        if (j_keep < j) {
            next = omega;
            j = j_keep;
        }
        omega = next;
        out.trace.j_values.push_back(j);
        out.trace.omegas.push_back(omega);
        out.trace.iterations = k;

        if ((j_prev - j) / j <= cfg.epsilon) break;
        if (k == cfg.max_iters) {
            out.trace.truncated = true;
            break;
        }
        j_prev = j;
    }
    out.map = finalize_map(phi, r2);
    out.omega = CiWeight(omega);
    return out;
}

ImplicitCrossCov le_implicit_cross_covariance(const Matrix& r1, const Matrix& r2, const Matrix& h2) {
    require_symmetric(r1, "R1");
    require_symmetric(r2, "R2");
    require_finite(h2, "H2");
    const Eigen::Index nx = r1.rows();
    if (h2.rows() != r2.rows() || h2.cols() != nx) throw DimensionError("H2 must be n2 x nx");
    if (h2.rows() < nx || numerical_rank(symmetrize(h2.transpose() * h2)) < nx)
        throw PreconditionError("largest-ellipsoid map requires rank(H2) = nx");

    const Matrix local_info = inverse_pd(r1, "R1");
    const Matrix remote_info = symmetrize(h2.transpose() * inverse_pd(r2, "R2") * h2);
    const JointDiagonalization jd = jointly_diagonalize(local_info, remote_info);

    ImplicitCrossCov out;
    out.d = jd.remote_diag.cwiseMin(1.0);
    // T I₁ Tᵀ = I gives T⁻¹ = I₁ Tᵀ.
    const Matrix t_inv = local_info * jd.transform.transpose();
    out.common_info = symmetrize(t_inv * out.d.asDiagonal() * t_inv.transpose());
    out.r12 = r1 * out.common_info * h2.transpose() * r2;
    return out;
}

Matrix gevo_le(const Matrix& r1, const Matrix& r2, const Matrix& h2, Eigen::Index m) {
    const ImplicitCrossCov implicit = le_implicit_cross_covariance(r1, r2, h2);
    return gevo({r1, r2, implicit.r12, h2, m});
}

Matrix pco(const Matrix& r2, Eigen::Index m) {
    if (m < 1 || m > r2.rows()) throw RankError("m must satisfy 1 <= m <= n2");
    return eig_sym(r2).bottom_rows(m);
}

DiagonalApproximation dca_eig(const Matrix& r2) {
    require_symmetric(r2, "R2");
    const Vector diag = r2.diagonal();
    if ((diag.array() <= 0.0).any()) throw DefinitenessError("R2 has a non-positive diagonal");
    const Vector inv_sqrt = diag.cwiseSqrt().cwiseInverse();
    const Matrix normalized = symmetrize(inv_sqrt.asDiagonal() * r2 * inv_sqrt.asDiagonal());
    const double s = eig_sym(normalized).values(0);
    return {s, Matrix((s * diag).asDiagonal())};
}

LossLadder loss_ladder(const GevoInputs& in) {
    GevoInputs probe = in;
    probe.m = 1;
    check_inputs(probe);
    const EigenPairs pairs = gevo_pairs(gevo_problem(in));
    LossLadder out;
    out.lambdas = pairs.values;
    out.ell.resize(pairs.size() + 1);
    out.ell(0) = in.r1.trace();
    for (Eigen::Index i = 0; i < pairs.size(); ++i) out.ell(i + 1) = out.ell(i) - pairs.values(i);
    return out;
}

RankSelection select_m(const LossLadder& ladder, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw InputError("tau must lie in [0, 1]");
    const Vector& lambdas = ladder.lambdas;
    const double total = lambdas.sum();
    if (lambdas.size() == 0 || !(total > 0.0)) return {0, true};
    const Eigen::Index r = lambdas.size();
    if (tau == 1.0) return {r, false};
    double partial = 0.0;
    for (Eigen::Index m = 1; m <= r; ++m) {
        partial += lambdas(m - 1);
        // Relative slack keeps exact boundary ratios such as 9/10 inclusive.
        if (partial >= tau * total * (1.0 - 1e-12)) return {m, false};
    }
    return {r, false};
}

}  // namespace drfuse
