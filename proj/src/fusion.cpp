#include "drfuse/fusion.hpp"

#include "drfuse/errors.hpp"

#include <cmath>
#include <limits>

namespace drfuse {
namespace {

constexpr double kOmegaLowerBound = 1e-6;
constexpr double kOmegaTolerance = 1e-8;

void check_operands(const Estimate& local, const ReducedEstimate& remote, const Matrix& h2) {
    const Eigen::Index nx = local.cov.rows();
    if (local.cov.cols() != nx || local.mean.size() != nx) throw DimensionError("local estimate is inconsistent");
    const Eigen::Index m = remote.map.rows();
    if (remote.mean.size() != m || remote.cov.rows() != m || remote.cov.cols() != m)
        throw DimensionError("reduced estimate is inconsistent with its map");
    if (h2.cols() != nx || h2.rows() != remote.map.cols())
        throw DimensionError("observation model does not match the operands");
    require_finite(local.mean, "local mean");
    require_finite(remote.mean, "remote mean");
    require_finite(h2, "observation model");
    require_finite(remote.map, "reduction map");
}

Vector gain_form_mean(const Estimate& local, const ReducedEstimate& remote, const Matrix& mh, const Matrix& gain) {
    const Eigen::Index nx = local.mean.size();
    return (Matrix::Identity(nx, nx) - gain * mh) * local.mean + gain * remote.mean;
}

// Transformed-domain component selection of the largest-ellipsoid rule.
struct LeSelection {
    Matrix transform;
    Vector fused_diag;
    Eigen::Array<bool, Eigen::Dynamic, 1> take_remote;
    bool remote_uninformative = false;
};

LeSelection le_select(const Matrix& local_info, const Matrix& remote_info) {
    const JointDiagonalization jd = jointly_diagonalize(local_info, remote_info);
    const Eigen::Index nx = local_info.rows();
    LeSelection sel;
    sel.transform = jd.transform;
    sel.fused_diag = Vector::Ones(nx);
    sel.take_remote.setConstant(nx, false);
    for (Eigen::Index i = 0; i < nx; ++i) {
        // Ties go to the local operand.
        if (jd.remote_diag(i) > 1.0) {
            sel.take_remote(i) = true;
            sel.fused_diag(i) = jd.remote_diag(i);
        }
    }
    const double top = remote_info.cwiseAbs().maxCoeff();
    sel.remote_uninformative = top == 0.0 || numerical_rank(remote_info) == 0;
    return sel;
}

}  // namespace

ReducedEstimate ReducedEstimate::from_full(const Estimate& full, const Matrix& map) {
    if (map.cols() != full.mean.size()) throw DimensionError("map does not match the estimate");
    return {map * full.mean, symmetrize(map * full.cov * map.transpose()), map};
}

ReducedEstimate ReducedEstimate::identity(const Estimate& full) {
    const Eigen::Index n = full.mean.size();
    return {full.mean, full.cov, Matrix::Identity(n, n)};
}

CiWeight::CiWeight(double omega) : omega_(omega) {
    if (!(omega > 0.0 && omega <= 1.0)) throw InputError("CI weight must lie in (0, 1]");
}

Matrix remote_information(const ReducedEstimate& remote, const Matrix& h2) {
    const Matrix mh = remote.map * h2;
    const Eigen::LLT<Matrix> llt(symmetrize(remote.cov));
    if (llt.info() != Eigen::Success) throw DefinitenessError("reduced covariance is not positive definite");
    return symmetrize(mh.transpose() * llt.solve(mh));
}

FusedEstimate fuse_bsc(const Estimate& local, const ReducedEstimate& remote, const Matrix& h2,
                       const Matrix& cross_cov) {
    check_operands(local, remote, h2);
    require_symmetric(local.cov, "local covariance");
    require_symmetric(remote.cov, "reduced covariance");
    if (cross_cov.rows() != local.mean.size() || cross_cov.cols() != h2.rows())
        throw DimensionError("cross-covariance has the wrong shape");

    const Matrix mh = remote.map * h2;
    const Matrix cross_m = cross_cov * remote.map.transpose();
    const Matrix s_m = symmetrize(mh * local.cov * mh.transpose() + remote.cov - mh * cross_m -
                                  cross_m.transpose() * mh.transpose());
    const Matrix cross = local.cov * mh.transpose() - cross_m;

    FusedEstimate out;
    const Eigen::SelfAdjointEigenSolver<Matrix> spectrum(s_m, Eigen::EigenvaluesOnly);
    const double top = spectrum.eigenvalues().cwiseAbs().maxCoeff();
    const double bottom = spectrum.eigenvalues().minCoeff();
    out.joint_not_psd = bottom < -1e-9 * std::max(top, 1.0);

    Matrix gain;
    if (top > 0.0 && bottom > kRankTolerance * top) {
        const Eigen::LLT<Matrix> llt(s_m);
        gain = llt.solve(cross.transpose()).transpose();
    } else {
        out.used_pseudoinverse = true;
        gain = cross * pinv_sym(s_m);
    }
    out.cov = symmetrize(local.cov - gain * s_m * gain.transpose());
    out.mean = gain_form_mean(local, remote, mh, gain);
    out.gain = std::move(gain);
    return out;
}

FusedEstimate fuse_kf(const Estimate& local, const ReducedEstimate& remote, const Matrix& h2) {
    return fuse_bsc(local, remote, h2, Matrix::Zero(local.mean.size(), h2.rows()));
}

double ci_trace(const Matrix& local_info, const Matrix& remote_info, double omega) {
    const Matrix info = omega * local_info + (1.0 - omega) * remote_info;
    const Eigen::LLT<Matrix> llt(symmetrize(info));
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Matrix l_inv = llt.matrixL().solve(Matrix::Identity(info.rows(), info.cols()));
    const double value = l_inv.squaredNorm();
    return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
}

CiWeight optimize_ci_omega(const Matrix& local_cov, const ReducedEstimate& remote, const Matrix& h2) {
    check_operands({Vector::Zero(local_cov.rows()), local_cov}, remote, h2);
    const Matrix local_info = inverse_pd(local_cov, "local covariance");
    const Matrix remote_info = remote_information(remote, h2);
    const auto objective = [&](double w) { return ci_trace(local_info, remote_info, w); };

    // Golden-section search; the objective is convex in ω.
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = kOmegaLowerBound;
    double b = 1.0;
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = objective(c);
    double fd = objective(d);
    while (b - a > kOmegaTolerance) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d);
        }
    }
    double best = fc <= fd ? c : d;
    double f_best = std::min(fc, fd);

    // One parabolic step through the final bracket.
    const double fa = objective(a);
    const double fb = objective(b);
    const double mid = 0.5 * (a + b);
    const double fm = objective(mid);
    const double denom = (mid - a) * (fm - fb) - (mid - b) * (fm - fa);
    if (std::isfinite(fa) && std::isfinite(fb) && denom != 0.0) {
        const double vertex =
            mid - 0.5 * ((mid - a) * (mid - a) * (fm - fb) - (mid - b) * (mid - b) * (fm - fa)) / denom;
        if (vertex >= a && vertex <= b) {
            const double fv = objective(vertex);
            if (fv < f_best) {
                best = vertex;
                f_best = fv;
            }
        }
    }
    if (fm < f_best) {
        best = mid;
        f_best = fm;
    }

    const double f_lo = objective(kOmegaLowerBound);
    const double f_hi = objective(1.0);
    const double hi_value = std::max({f_lo, f_hi, f_best});
    const double lo_value = std::min({f_lo, f_hi, f_best});
    if (std::isfinite(hi_value) && hi_value - lo_value <= 1e-12 * std::abs(hi_value)) return CiWeight(0.5);
    if (f_hi <= f_best) return CiWeight(1.0);
    if (f_lo < f_best) return CiWeight(kOmegaLowerBound);
    return CiWeight(best);
}

FusedEstimate fuse_ci(const Estimate& local, const ReducedEstimate& remote, const Matrix& h2, CiWeight omega) {
    check_operands(local, remote, h2);
    require_symmetric(local.cov, "local covariance");
    require_symmetric(remote.cov, "reduced covariance");
    const double w = omega.value();
    const Eigen::Index nx = local.mean.size();
    const Matrix mh = remote.map * h2;

    FusedEstimate out;
    Matrix gain;
    if (w == 1.0) {
        out.cov = local.cov;
        gain = Matrix::Zero(nx, remote.mean.size());
    } else {
        const Matrix local_info = inverse_pd(local.cov, "local covariance");
        const Matrix remote_info = remote_information(remote, h2);
        out.cov = inverse_pd(w * local_info + (1.0 - w) * remote_info, "CI information matrix");
        const Eigen::LLT<Matrix> llt(symmetrize(remote.cov));
        gain = (1.0 - w) * out.cov * llt.solve(mh).transpose();
    }
    out.mean = gain_form_mean(local, remote, mh, gain);
    out.gain = std::move(gain);
    return out;
}

JointDiagonalization jointly_diagonalize(const Matrix& local_info, const Matrix& remote_info) {
    const EigenPairs local_pairs = eig_sym(symmetrize(local_info));
    if (local_pairs.values(local_pairs.size() - 1) <= 0.0)
        throw DefinitenessError("local information matrix is not positive definite");
    const Matrix t1 = local_pairs.values.cwiseSqrt().cwiseInverse().asDiagonal() * local_pairs.vectors.transpose();
    const EigenPairs remote_pairs = eig_sym(symmetrize(t1 * remote_info * t1.transpose()));
    JointDiagonalization out;
    out.transform = remote_pairs.vectors.transpose() * t1;
    out.remote_diag = (out.transform * remote_info * out.transform.transpose()).diagonal();
    return out;
}

FusedEstimate fuse_le(const Estimate& local, const ReducedEstimate& remote, const Matrix& h2) {
    check_operands(local, remote, h2);
    require_symmetric(local.cov, "local covariance");
    require_symmetric(remote.cov, "reduced covariance");
    const Matrix local_info = inverse_pd(local.cov, "local covariance");
    const Matrix remote_info = remote_information(remote, h2);
    const LeSelection sel = le_select(local_info, remote_info);

    FusedEstimate out;
    if (sel.remote_uninformative) {
        out.mean = local.mean;
        out.cov = local.cov;
        out.remote_uninformative = true;
        return out;
    }

    const Matrix mh = remote.map * h2;
    const Eigen::LLT<Matrix> llt(symmetrize(remote.cov));
    const Vector local_vec = sel.transform * (local_info * local.mean);
    const Vector remote_vec = sel.transform * (mh.transpose() * llt.solve(remote.mean));
    const Vector fused_vec = sel.take_remote.select(remote_vec, local_vec);

    // P = (T⁻¹ 𝓘 T⁻ᵀ)⁻¹ = Tᵀ 𝓘⁻¹ T and x̂ = P T⁻¹ ι = Tᵀ 𝓘⁻¹ ι.
    const Vector inv_diag = sel.fused_diag.cwiseInverse();
    out.cov = symmetrize(sel.transform.transpose() * inv_diag.asDiagonal() * sel.transform);
    out.mean = sel.transform.transpose() * inv_diag.cwiseProduct(fused_vec);
    return out;
}

LinearRule le_gains(const Matrix& local_cov, const ReducedEstimate& remote, const Matrix& h2) {
    check_operands({Vector::Zero(local_cov.rows()), local_cov}, remote, h2);
    const Matrix local_info = inverse_pd(local_cov, "local covariance");
    const Matrix remote_info = remote_information(remote, h2);
    const Eigen::Index nx = local_cov.rows();
    if (numerical_rank(remote_info) == 0 || remote_info.cwiseAbs().maxCoeff() == 0.0)
        return {Matrix::Identity(nx, nx), Matrix::Zero(nx, remote.mean.size())};

    const LeSelection sel = le_select(local_info, remote_info);
    Vector local_weight(nx);
    Vector remote_weight(nx);
    for (Eigen::Index i = 0; i < nx; ++i) {
        local_weight(i) = sel.take_remote(i) ? 0.0 : 1.0 / sel.fused_diag(i);
        remote_weight(i) = sel.take_remote(i) ? 1.0 / sel.fused_diag(i) : 0.0;
    }
    const Matrix mh = remote.map * h2;
    const Eigen::LLT<Matrix> llt(symmetrize(remote.cov));
    const Matrix& t = sel.transform;
    LinearRule rule;
    rule.local_gain = t.transpose() * local_weight.asDiagonal() * t * local_info;
    rule.remote_gain = t.transpose() * remote_weight.asDiagonal() * t * llt.solve(mh).transpose();
    return rule;
}

LinearRule linear_rule(const Matrix& remote_gain, const ReducedEstimate& remote, const Matrix& h2) {
    const Eigen::Index nx = remote_gain.rows();
    return {Matrix::Identity(nx, nx) - remote_gain * remote.map * h2, remote_gain};
}

}  // namespace drfuse
