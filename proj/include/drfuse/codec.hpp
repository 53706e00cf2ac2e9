#pragma once

#include "drfuse/fusion.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace drfuse {

/// Encoded transmission (y_M, Φ^K, 𝒥) with Φ = R_M M.
///
/// Row i (0-based) of Φ is sent with i components dropped; `dropped[i]` holds
/// their column indices in ascending order and `kept[i]` the remaining values
/// in column order. With `oversize` set, every row is sent in full.
struct WireMessage {
    int m = 0;
    int n2 = 0;
    Vector mean;
    std::vector<std::vector<double>> kept;
    std::vector<std::vector<int>> dropped;
    bool oversize = false;

    /// 𝒥 flattened in row order.
    std::vector<int> indices() const;
    /// Number of transmitted reals: |y_M| + |Φ^K|.
    std::size_t scalar_count() const;
};

/// Requires orthonormal map rows and a diagonal positive covariance.
WireMessage encode(const ReducedEstimate& e);
ReducedEstimate decode(const WireMessage& msg);

inline constexpr std::uint8_t kWireMagic = 0xD2;
inline constexpr std::uint8_t kWireVersion = 0x01;
inline constexpr std::uint8_t kFlagWideIndices = 0x01;
inline constexpr std::uint8_t kFlagOversize = 0x02;

/// Header (magic, version, m, n₂, flags), packed 𝒥, y_M and Φ^K as little-endian binary32.
std::vector<std::uint8_t> serialize(const WireMessage& msg);
WireMessage deserialize(std::span<const std::uint8_t> bytes);

struct CostReport {
    long n2 = 0;
    long m = 0;
    long n_dr = 0;
    long n_full = 0;
    long n_dca = 0;
    long n_excl = 0;
    double ratio = 0.0;
    double extra_bits_ratio = 0.0;
};
CostReport cost_report(long n2, long m);

}  // namespace drfuse
