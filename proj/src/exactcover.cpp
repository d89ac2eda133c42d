#include "vflrecon/exactcover.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace vflrecon::exactcover {

void ExactCoverInstance::validate() const {
    if (n < 1) throw InvalidConfig("universe must be nonempty");
    if (subsets.empty()) throw InvalidConfig("need at least one subset");
    for (const auto& s : subsets) {
        if (s.empty()) throw InvalidConfig("subsets must be nonempty");
        for (int e : s) {
            if (e < 0 || e >= n) {
                throw IndexOutOfRange("subset element out of universe");
            }
        }
    }
}

CoverResult brute_force_cover(const ExactCoverInstance& inst) {
    inst.validate();
    const int m = static_cast<int>(inst.subsets.size());
    if (m > 22) throw DimensionCap("brute force capped at 22 subsets");
    std::vector<int> counts(static_cast<std::size_t>(inst.n));
    for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
        std::fill(counts.begin(), counts.end(), 0);
        for (int j = 0; j < m; ++j) {
            if (mask & (1u << j)) {
                for (int e : inst.subsets[static_cast<std::size_t>(j)]) {
                    ++counts[static_cast<std::size_t>(e)];
                }
            }
        }
        bool exact = true;
        for (int c : counts) {
            if (c != 1) {
                exact = false;
                break;
            }
        }
        if (exact) {
            std::vector<int> cover;
            for (int j = 0; j < m; ++j) {
                if (mask & (1u << j)) cover.push_back(j);
            }
            return {true, std::move(cover)};
        }
    }
    return {false, std::nullopt};
}

ExactCoverInstance random_instance(int n, int m, double density,
                                   std::uint64_t seed) {
    if (!(density > 0.0 && density < 1.0)) {
        throw InvalidConfig("density must be in (0,1)");
    }
    if (n < 1 || m < 1) throw InvalidConfig("n and m must be >= 1");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution include(density);
    ExactCoverInstance inst;
    inst.n = n;
    for (int j = 0; j < m; ++j) {
        std::vector<int> s;
        while (s.empty()) {
            for (int e = 0; e < n; ++e) {
                if (include(rng)) s.push_back(e);
            }
        }
        inst.subsets.push_back(std::move(s));
    }
    return inst;
}

bool verify_cover(const ExactCoverInstance& inst,
                  const std::vector<int>& cover) {
    std::vector<int> counts(static_cast<std::size_t>(inst.n));
    for (int j : cover) {
        if (j < 0 || j >= static_cast<int>(inst.subsets.size())) return false;
        for (int e : inst.subsets[static_cast<std::size_t>(j)]) {
            ++counts[static_cast<std::size_t>(e)];
        }
    }
    for (int c : counts) {
        if (c != 1) return false;
    }
    return true;
}

std::string format_instance(const ExactCoverInstance& inst) {
    std::ostringstream out;
    out << inst.n << ' ' << inst.subsets.size() << '\n';
    for (const auto& s : inst.subsets) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            out << (i ? " " : "") << s[i] + 1;
        }
        out << '\n';
    }
    return out.str();
}

ExactCoverInstance parse_instance(const std::string& text) {
    std::istringstream in(text);
    ExactCoverInstance inst;
    std::size_t m = 0;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty instance");
    {
        std::istringstream head(line);
        if (!(head >> inst.n >> m)) throw ParseError("bad instance header");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<int> s;
        int e = 0;
        while (ls >> e) s.push_back(e - 1);
        inst.subsets.push_back(std::move(s));
    }
    if (inst.subsets.size() != m) {
        throw ParseError("subset count does not match header");
    }
    inst.validate();
    return inst;
}

}  // namespace vflrecon::exactcover
