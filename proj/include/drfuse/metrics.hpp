#pragma once

#include "drfuse/linalg.hpp"

#include <vector>

namespace drfuse {

/// Conservativeness index λmax(L⁻¹P̃L⁻ᵀ) with P = LLᵀ. Values ≤ 1 mean conservative.
double coin(const Matrix& p, const Matrix& p_true);

/// trace(P⁻¹P̃)/n.
double anees(const Matrix& p, const Matrix& p_true);

/// sqrt(trace(P) / trace(P_ref)).
double rmtr(const Matrix& p, const Matrix& p_ref);

/// Raw second moment (1/M) Σ x̃ x̃ᵀ of zero-mean errors.
Matrix mc_error_cov(const std::vector<Vector>& errors);

/// Running sums for the raw second moment and the mean error.
class ErrorMoments {
public:
    explicit ErrorMoments(Eigen::Index dim);

    void add(const Vector& error);
    /// Adds the sums of another accumulator of the same dimension.
    void merge(const ErrorMoments& other);

    std::size_t count() const { return count_; }
    Matrix second_moment() const;
    Vector mean() const;

private:
    Matrix sum_outer_;
    Vector sum_;
    std::size_t count_ = 0;
};

}  // namespace drfuse
