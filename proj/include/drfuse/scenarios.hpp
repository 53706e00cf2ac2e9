#pragma once

#include "drfuse/linalg.hpp"
#include "drfuse/reduction.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace drfuse {

/// SplitMix64 finalizer of `master + index·γ`; gives independent per-run seeds.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Bartlett-decomposition sample of 𝒲(scale, dof). Requires dof ≥ dim.
Matrix sample_wishart(const Matrix& scale, int dof, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Convergence study of the alternating CI map search.

struct ConvergenceStudyConfig {
    int nx = 9;
    double epsilon = 1e-4;
    std::vector<int> ms{1, 2, 3, 4};
    int trials = 10000;
    std::uint64_t seed = 1;
    /// Resample R₁ while R₂ ⪰ R₁.
    bool resample = true;
    int max_iters = 100;
    int threads = 1;
};

struct ConvergenceSummary {
    int m = 0;
    std::map<int, long> histogram;
    int typical = 0;
    double mean = 0.0;
    double std = 0.0;
    long truncated = 0;
    /// Largest observed J_k − J_{k−1} relative to J_{k−1} (including J₀ = trace R₁).
    double worst_increase = 0.0;
};

std::vector<ConvergenceSummary> run_convergence_study(const ConvergenceStudyConfig& cfg);

// ---------------------------------------------------------------------------
// Correlated two-estimate example parametrized by ρ.

struct RhoConfig {
    std::vector<double> rhos;
    std::vector<int> ms{1, 2, 3};
    /// 100 points 0, 0.01, …, 0.99.
    static RhoConfig defaults();
};

struct RhoMatrices {
    Matrix r1;
    Matrix r2;
    Matrix r12;
    /// Decorrelated remote covariance ((1−ρ)B⁻¹)⁻¹.
    Matrix r2_decorrelated;
};
RhoMatrices rho_matrices(double rho);
Matrix rho_common_information();

struct RhoRow {
    double rho = 0.0;
    std::string method;
    int m = 0;
    double coin = 0.0;
    double anees = 0.0;
    double rmtr = 0.0;
    bool ok = true;
    std::string note;
};

/// Methods: dkf, ci, le, nkf.
std::vector<RhoRow> run_rho_example(const RhoConfig& cfg);

// ---------------------------------------------------------------------------
// Decentralized target tracking.

/// F and Q of the constant-velocity model with state (p_x, p_y, v_x, v_y).
std::pair<Matrix, Matrix> cvm_model(double ts, double sigma_w);
Estimate cvm_predict(const Estimate& e, double ts, double sigma_w);
Estimate kf_update(const Estimate& e, const Vector& z, const Matrix& c, const Matrix& h_meas);

struct DttConfig {
    double ts = 1.0;
    double sigma_w = 2.0;
    std::vector<Matrix> meas_covs;
    int runs = 10000;
    int m = 2;
    int steps = 15;
    std::uint64_t seed = 1;
    /// (sender, receiver), 1-based agent ids.
    std::vector<std::pair<int, int>> edges{{2, 1}, {2, 3}, {3, 2}};
    Vector p0_diag;
    double init_velocity_var = 100.0;
    int threads = 1;

    static DttConfig defaults();
    int agents() const { return static_cast<int>(meas_covs.size()); }
};

struct DttRow {
    int agent = 0;
    int step = 0;
    std::string method;
    int m = 0;
    double coin = 0.0;
    double anees = 0.0;
    double rmtr = 0.0;
    double trace = 0.0;
    /// Largest |mean error| component divided by its standard error.
    double mean_error_z = 0.0;
};

/// Methods: nkf, ci, le (GEVO maps), nkf-pco, ci-pco, le-pco, nkf-full, ci-full,
/// le-full (M = I) and dca-eig. Rows are emitted at each agent's fusion steps.
std::vector<DttRow> run_dtt(const DttConfig& cfg);

std::vector<std::string> dtt_methods();

}  // namespace drfuse
