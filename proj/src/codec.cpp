#include "drfuse/codec.hpp"

#include "drfuse/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <optional>

namespace drfuse {
namespace {

constexpr double kDetThreshold = 1e-8;
constexpr std::size_t kMaxCombinations = 200000;

Matrix columns(const Matrix& a, const std::vector<int>& cols) {
    Matrix out(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
    return out;
}

double abs_det(const Matrix& a) { return a.size() == 0 ? 1.0 : std::abs(a.partialPivLu().determinant()); }

// Exhaustive search over index sets, keeping the best-conditioned one.
std::optional<std::vector<int>> best_combination(const Matrix& prev, int count, double threshold) {
    const int n = static_cast<int>(prev.cols());
    double total = 1.0;
    for (int k = 0; k < count; ++k) total = total * (n - k) / (k + 1);
    if (total > static_cast<double>(kMaxCombinations)) return std::nullopt;

    std::vector<int> idx(static_cast<std::size_t>(count));
    std::iota(idx.begin(), idx.end(), 0);
    std::optional<std::vector<int>> best;
    double best_det = threshold;
    while (true) {
        const double det = abs_det(columns(prev, idx));
        if (det >= best_det) {
            best = idx;
            best_det = det;
        }
        int pos = count - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - count + pos) --pos;
        if (pos < 0) break;
        ++idx[static_cast<std::size_t>(pos)];
        for (int k = pos + 1; k < count; ++k) idx[static_cast<std::size_t>(k)] = idx[static_cast<std::size_t>(k - 1)] + 1;
    }
    return best;
}

std::optional<std::vector<int>> choose_dropped(const Matrix& prev) {
    const int count = static_cast<int>(prev.rows());
    double threshold = kDetThreshold;
    for (Eigen::Index j = 0; j < prev.rows(); ++j) threshold *= prev.row(j).norm();

    const Eigen::ColPivHouseholderQR<Matrix> qr(prev);
    std::vector<int> idx(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) idx[static_cast<std::size_t>(k)] = qr.colsPermutation().indices()(k);
    std::sort(idx.begin(), idx.end());
    if (abs_det(columns(prev, idx)) >= threshold) return idx;
    return best_combination(prev, count, threshold);
}

void put_f32(std::vector<std::uint8_t>& out, double value) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
}

double get_f32(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(bytes[pos + static_cast<std::size_t>(k)]) << (8 * k);
    pos += 4;
    const double value = std::bit_cast<float>(bits);
    if (!std::isfinite(value)) throw CorruptMessageError("non-finite scalar in message");
    return value;
}

std::size_t excluded_count(int m) { return static_cast<std::size_t>(m) * static_cast<std::size_t>(m - 1) / 2; }

}  // namespace

std::vector<int> WireMessage::indices() const {
    std::vector<int> out;
    for (const auto& row : dropped) out.insert(out.end(), row.begin(), row.end());
    return out;
}

std::size_t WireMessage::scalar_count() const {
    std::size_t count = static_cast<std::size_t>(mean.size());
    for (const auto& row : kept) count += row.size();
    return count;
}

WireMessage encode(const ReducedEstimate& e) {
    const Eigen::Index m = e.map.rows();
    const Eigen::Index n2 = e.map.cols();
    if (m < 1 || m > n2) throw DimensionError("map must satisfy 1 <= m <= n2");
    if (n2 > 255) throw DimensionError("n2 exceeds the wire format limit of 255");
    if (e.mean.size() != m || e.cov.rows() != m || e.cov.cols() != m)
        throw DimensionError("reduced estimate is inconsistent with its map");
    require_finite(e.mean, "reduced mean");
    require_finite(e.cov, "reduced covariance");
    require_finite(e.map, "reduction map");
    if (orthonormality_residual(e.map) > 1e-9) throw PreconditionError("map rows are not orthonormal");
    const Vector diag = e.cov.diagonal();
    if ((diag.array() <= 0.0).any()) throw DefinitenessError("reduced covariance has a non-positive diagonal");
    if (max_off_diagonal(e.cov) > 1e-9 * diag.maxCoeff()) throw PreconditionError("reduced covariance is not diagonal");

    const Matrix phi = diag.asDiagonal() * e.map;
    WireMessage msg;
    msg.m = static_cast<int>(m);
    msg.n2 = static_cast<int>(n2);
    msg.mean = e.mean;
    msg.dropped.assign(static_cast<std::size_t>(m), {});
    for (Eigen::Index i = 1; i < m; ++i) {
        auto choice = choose_dropped(phi.topRows(i));
        if (!choice) {
            msg.oversize = true;
            break;
        }
        msg.dropped[static_cast<std::size_t>(i)] = std::move(*choice);
    }
    if (msg.oversize) msg.dropped.assign(static_cast<std::size_t>(m), {});

    msg.kept.resize(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& drop = msg.dropped[static_cast<std::size_t>(i)];
        auto& row = msg.kept[static_cast<std::size_t>(i)];
        for (Eigen::Index c = 0; c < n2; ++c)
            if (!std::binary_search(drop.begin(), drop.end(), static_cast<int>(c))) row.push_back(phi(i, c));
    }
    return msg;
}

ReducedEstimate decode(const WireMessage& msg) {
    const int m = msg.m;
    const int n2 = msg.n2;
    if (m < 1 || m > n2) throw FramingError("message dimensions are invalid");
    if (msg.mean.size() != m || msg.kept.size() != static_cast<std::size_t>(m) ||
        msg.dropped.size() != static_cast<std::size_t>(m))
        throw FramingError("message row count does not match m");

    Matrix phi = Matrix::Zero(m, n2);
    for (int i = 0; i < m; ++i) {
        const auto& drop = msg.dropped[static_cast<std::size_t>(i)];
        const auto& kept = msg.kept[static_cast<std::size_t>(i)];
        const std::size_t expected = msg.oversize ? 0 : static_cast<std::size_t>(i);
        if (drop.size() != expected) throw FramingError("dropped index count does not match the row");
        if (kept.size() + drop.size() != static_cast<std::size_t>(n2))
            throw FramingError("row component count does not match n2");
        for (std::size_t k = 0; k < drop.size(); ++k) {
            if (drop[k] < 0 || drop[k] >= n2 || (k > 0 && drop[k] <= drop[k - 1]))
                throw CorruptMessageError("dropped indices are out of range or unordered");
        }

        std::vector<int> kept_cols;
        for (int c = 0; c < n2; ++c)
            if (!std::binary_search(drop.begin(), drop.end(), c)) kept_cols.push_back(c);
        for (std::size_t k = 0; k < kept_cols.size(); ++k) phi(i, kept_cols[k]) = kept[k];
        if (drop.empty()) continue;

        // Orthogonality to the previous rows: A_i φ_i^D = −Φ_{<i}^K φ_i^K.
        const Matrix prev = phi.topRows(i);
        const Matrix a = columns(prev, drop);
        Vector kept_values(static_cast<Eigen::Index>(kept.size()));
        for (std::size_t k = 0; k < kept.size(); ++k) kept_values(static_cast<Eigen::Index>(k)) = kept[k];
        const Vector b = -columns(prev, kept_cols) * kept_values;
        double scale = 1.0;
        for (Eigen::Index j = 0; j < prev.rows(); ++j) scale *= prev.row(j).norm();
        const Eigen::PartialPivLU<Matrix> lu(a);
        if (!(std::abs(lu.determinant()) > 1e-12 * scale)) throw CorruptMessageError("reconstruction system is singular");
        const Vector solved = lu.solve(b);
        for (std::size_t k = 0; k < drop.size(); ++k) phi(i, drop[k]) = solved(static_cast<Eigen::Index>(k));
    }

    const Vector norms = phi.rowwise().norm();
    if (!(norms.minCoeff() > 0.0) || !norms.allFinite()) throw CorruptMessageError("message contains a zero row");
    ReducedEstimate out;
    out.mean = msg.mean;
    out.cov = norms.asDiagonal();
    out.map = norms.cwiseInverse().asDiagonal() * phi;
    return out;
}

std::vector<std::uint8_t> serialize(const WireMessage& msg) {
    if (msg.m < 1 || msg.m > msg.n2 || msg.n2 > 255) throw FramingError("message dimensions are invalid");
    const bool wide = msg.n2 > 16;
    std::vector<std::uint8_t> out{kWireMagic, kWireVersion, static_cast<std::uint8_t>(msg.m),
                                  static_cast<std::uint8_t>(msg.n2),
                                  static_cast<std::uint8_t>((wide ? kFlagWideIndices : 0) |
                                                            (msg.oversize ? kFlagOversize : 0))};
    const std::vector<int> idx = msg.indices();
    if (wide) {
        for (const int j : idx) out.push_back(static_cast<std::uint8_t>(j));
    } else {
        for (std::size_t k = 0; k < idx.size(); k += 2) {
            const int hi = idx[k];
            const int lo = k + 1 < idx.size() ? idx[k + 1] : 0;
            out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
        }
    }
    for (Eigen::Index i = 0; i < msg.mean.size(); ++i) put_f32(out, msg.mean(i));
    for (const auto& row : msg.kept)
        for (const double v : row) put_f32(out, v);
    return out;
}

WireMessage deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 5) throw FramingError("message is shorter than its header");
    if (bytes[0] != kWireMagic || bytes[1] != kWireVersion) throw FramingError("bad magic or version");
    WireMessage msg;
    msg.m = bytes[2];
    msg.n2 = bytes[3];
    const std::uint8_t flags = bytes[4];
    if (msg.m < 1 || msg.m > msg.n2) throw FramingError("header dimensions are invalid");
    if ((flags & ~(kFlagWideIndices | kFlagOversize)) != 0) throw FramingError("unknown header flags");
    const bool wide = (flags & kFlagWideIndices) != 0;
    if (wide != (msg.n2 > 16)) throw FramingError("index width flag does not match n2");
    msg.oversize = (flags & kFlagOversize) != 0;

    const std::size_t n_idx = msg.oversize ? 0 : excluded_count(msg.m);
    const std::size_t idx_bytes = wide ? n_idx : (n_idx + 1) / 2;
    const std::size_t n_scalars =
        static_cast<std::size_t>(msg.m) + static_cast<std::size_t>(msg.m) * static_cast<std::size_t>(msg.n2) - n_idx;
    if (bytes.size() != 5 + idx_bytes + 4 * n_scalars) throw FramingError("message length does not match its header");

    std::vector<int> idx;
    std::size_t pos = 5;
    if (wide) {
        for (std::size_t k = 0; k < n_idx; ++k) idx.push_back(bytes[pos++]);
    } else {
        for (std::size_t k = 0; k < idx_bytes; ++k) {
            const std::uint8_t b = bytes[pos++];
            idx.push_back(b >> 4);
            if (idx.size() < n_idx) {
                idx.push_back(b & 0x0F);
            } else if ((b & 0x0F) != 0) {
                throw CorruptMessageError("nonzero index padding");
            }
        }
    }

    msg.dropped.assign(static_cast<std::size_t>(msg.m), {});
    std::size_t next = 0;
    for (int i = 0; i < msg.m && !msg.oversize; ++i) {
        auto& row = msg.dropped[static_cast<std::size_t>(i)];
        for (int k = 0; k < i; ++k) {
            const int j = idx[next++];
            if (j >= msg.n2 || (!row.empty() && j <= row.back()))
                throw CorruptMessageError("dropped indices are out of range or unordered");
            row.push_back(j);
        }
    }

    msg.mean.resize(msg.m);
    for (int i = 0; i < msg.m; ++i) msg.mean(i) = get_f32(bytes, pos);
    msg.kept.resize(static_cast<std::size_t>(msg.m));
    for (int i = 0; i < msg.m; ++i) {
        const std::size_t count = static_cast<std::size_t>(msg.n2) - msg.dropped[static_cast<std::size_t>(i)].size();
        for (std::size_t k = 0; k < count; ++k) msg.kept[static_cast<std::size_t>(i)].push_back(get_f32(bytes, pos));
    }
    return msg;
}

CostReport cost_report(long n2, long m) {
    if (n2 < 1 || m < 1) throw InputError("n2 and m must be positive");
    if (m > n2) throw InputError("m must not exceed n2");
    CostReport r;
    r.n2 = n2;
    r.m = m;
    r.n_dr = (2 * m * n2 - m * m + 3 * m) / 2;
    r.n_full = n2 * (n2 + 3) / 2;
    r.n_dca = 2 * n2;
    r.n_excl = m * (m - 1) / 2;
    r.ratio = static_cast<double>(r.n_dr) / static_cast<double>(r.n_full);
    r.extra_bits_ratio = static_cast<double>(m - 1) / static_cast<double>(8 * (2 * n2 - m + 3));
    return r;
}

}  // namespace drfuse
