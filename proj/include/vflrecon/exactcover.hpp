#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vflrecon/errors.hpp"

namespace vflrecon::exactcover {

/// Universe {0, .., n-1} plus m nonempty subsets. The text format uses
/// 1-based element labels; in memory everything is 0-based.
struct ExactCoverInstance {
    int n = 0;
    std::vector<std::vector<int>> subsets;

    void validate() const;
};

struct CoverResult {
    bool covered = false;
    std::optional<std::vector<int>> cover;  // subset indices
};

/// Exhaustive 2^m search; returns the first cover in ascending-mask order.
/// Capped at m <= 22.
CoverResult brute_force_cover(const ExactCoverInstance& inst);

/// Each subset includes each element independently with probability
/// `density`; empty subsets are redrawn. Deterministic per seed.
ExactCoverInstance random_instance(int n, int m, double density,
                                   std::uint64_t seed);

/// Checks that `cover` covers every element exactly once.
bool verify_cover(const ExactCoverInstance& inst,
                  const std::vector<int>& cover);

/// Text format: first line "n m", then one line per subset listing 1-based
/// elements.
std::string format_instance(const ExactCoverInstance& inst);
ExactCoverInstance parse_instance(const std::string& text);

}  // namespace vflrecon::exactcover
