#pragma once

#include "drfuse/linalg.hpp"

#include <optional>

namespace drfuse {

/// Mean and covariance of a full local estimate.
struct Estimate {
    Vector mean;
    Matrix cov;
};

/// Dimension-reduced estimate (M y₂, M R₂ Mᵀ) together with its map M.
///
/// The fusion rules accept any PD `cov`; the codec additionally requires
/// `cov` diagonal and `map` with orthonormal rows.
struct ReducedEstimate {
    Vector mean;
    Matrix cov;
    Matrix map;

    /// Applies `map` to a full estimate.
    static ReducedEstimate from_full(const Estimate& full, const Matrix& map);
    /// The full estimate itself, with M = I.
    static ReducedEstimate identity(const Estimate& full);
};

/// Covariance intersection weight in (0, 1].
class CiWeight {
public:
    explicit CiWeight(double omega);
    double value() const { return omega_; }

private:
    double omega_;
};

struct FusedEstimate {
    Vector mean;
    Matrix cov;
    /// K_M applied to the reduced mean; absent for the largest-ellipsoid rule.
    std::optional<Matrix> gain;
    /// S_M was singular and its pseudoinverse was used (BSC/KF only).
    bool used_pseudoinverse = false;
    /// S_M had a clearly negative eigenvalue, i.e. the joint covariance is not PSD.
    bool joint_not_psd = false;
    /// Largest-ellipsoid only: the remote operand carried no information.
    bool remote_uninformative = false;
};

/// Fused mean expressed linearly in the operands: x̂ = K₁ y₁ + K_M y_M.
struct LinearRule {
    Matrix local_gain;
    Matrix remote_gain;
};

/// Bar-Shalom-Campo fusion with known cross-covariance R₁₂ = cov(v₁, v₂) (n_x × n₂).
FusedEstimate fuse_bsc(const Estimate& local, const ReducedEstimate& remote, const Matrix& h2,
                       const Matrix& cross_cov);

/// Kalman fusion, i.e. BSC with R₁₂ = 0.
FusedEstimate fuse_kf(const Estimate& local, const ReducedEstimate& remote, const Matrix& h2);

/// Trace of the CI fused covariance for weight ω; +inf where the information matrix is singular.
double ci_trace(const Matrix& local_info, const Matrix& remote_info, double omega);

/// Minimizes the CI fused trace over ω ∈ [1e-6, 1].
CiWeight optimize_ci_omega(const Matrix& local_cov, const ReducedEstimate& remote, const Matrix& h2);

FusedEstimate fuse_ci(const Estimate& local, const ReducedEstimate& remote, const Matrix& h2, CiWeight omega);

/// Largest-ellipsoid fusion.
FusedEstimate fuse_le(const Estimate& local, const ReducedEstimate& remote, const Matrix& h2);

/// Gains of the largest-ellipsoid rule. They depend on covariances only.
LinearRule le_gains(const Matrix& local_cov, const ReducedEstimate& remote, const Matrix& h2);

/// Gains of a gain-parametrized rule (BSC/KF/CI): K₁ = I − K_M M H₂.
LinearRule linear_rule(const Matrix& remote_gain, const ReducedEstimate& remote, const Matrix& h2);

/// Joint diagonalization used by the largest-ellipsoid rule.
///
/// With T = T₂T₁, T I₁ Tᵀ = I and T I₂ Tᵀ = diag(remote_diag).
struct JointDiagonalization {
    Matrix transform;
    Vector remote_diag;
};
JointDiagonalization jointly_diagonalize(const Matrix& local_info, const Matrix& remote_info);

/// Information-domain quantities of the remote operand: Hᵀ Mᵀ R_M⁻¹ M H.
Matrix remote_information(const ReducedEstimate& remote, const Matrix& h2);

}  // namespace drfuse
