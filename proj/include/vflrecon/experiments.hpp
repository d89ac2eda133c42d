#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vflrecon/attack.hpp"
#include "vflrecon/data.hpp"
#include "vflrecon/vfl.hpp"

namespace vflrecon::experiments {

/// Twenty pinned seeds shared by every sweep.
std::vector<std::uint64_t> default_seeds();

struct PipelineConfig {
    data::SynthSpec synth;                       // passive-side features
    Eigen::Index d_b = 8;                        // active-side feature count
    std::vector<Eigen::Index> hidden = {32, 16}; // first entry is the cut width
    int epochs = 3;
    Eigen::Index batch_size = 256;
    std::string defense = "none";  // none | gaussian | masquerade
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

struct PipelineResult {
    data::Dataset ds;            // passive features with schema
    Matrix x_b;                  // active features
    vfl::Transcript inference;   // what the adversary attacks
    std::vector<vfl::EpochMetrics> metrics;
    Vector fabricated;           // masquerade only, empty otherwise
};

/// synth passive features + Gaussian active features, split training, then
/// one inference pass through the same (possibly defended) passive party.
PipelineResult run_pipeline(const PipelineConfig& cfg);

struct SweepCell {
    double sigma = 0.0;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    std::size_t solutions = 0;
};

/// Regression attack accuracy per (sigma, seed) cell.
std::vector<SweepCell> gaussian_regression_sweep(
    const std::vector<double>& sigmas,
    const std::vector<std::uint64_t>& seeds);

struct BenchCell {
    Eigen::Index n = 0;
    int d = 0;
    double seconds = 0.0;
};

std::vector<BenchCell> bench_equations(const std::vector<Eigen::Index>& ns,
                                       int d_min, int d_max,
                                       std::uint64_t seed);
/// Least-squares slope of log2(seconds) against d over the n == ns[0] cells.
double log2_slope(const std::vector<BenchCell>& cells, Eigen::Index n);

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

CriterionResult criterion_undefended_completeness();   // 1
CriterionResult criterion_onehot_solution_set();       // 2
CriterionResult criterion_exact_cover_oracle();        // 3
CriterionResult criterion_invariance();                // 4
CriterionResult criterion_gaussian_blocks_equations(); // 5
CriterionResult criterion_gaussian_degrades_regression(); // 6
CriterionResult criterion_masquerade_single_solution();   // 7
CriterionResult criterion_masquerade_utility();        // 8
CriterionResult criterion_runtime_scaling();           // 9
CriterionResult criterion_numerics();                  // 10

std::vector<CriterionResult> run_all_criteria();

/// Named suites for the repro command.
std::vector<CriterionResult> run_suite(const std::string& name);
std::vector<std::string> suite_names();

}  // namespace vflrecon::experiments
