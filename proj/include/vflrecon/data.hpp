#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vflrecon/linalg.hpp"

namespace vflrecon::data {

enum class ColumnKind { Numeric, Binary, OneHot };

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    int onehot_group = -1;        // valid when kind == OneHot
    std::string onehot_category;  // source category label, if any
};

struct FeatureSchema {
    std::vector<Column> columns;

    std::size_t size() const { return columns.size(); }
    /// Distinct one-hot group ids, ascending.
    std::vector<int> onehot_groups() const;
    /// Column indices belonging to a one-hot group, ascending.
    std::vector<Eigen::Index> group_columns(int group) const;
};

struct Dataset {
    Matrix features;             // n x d
    std::vector<int> labels;     // length n, values in [0, class_count)
    FeatureSchema schema;
    int class_count = 0;

    Eigen::Index rows() const { return features.rows(); }
    Eigen::Index cols() const { return features.cols(); }
    void validate() const;  // throws on any broken invariant
};

struct VerticalSplit {
    std::vector<Eigen::Index> passive_cols;
    std::vector<Eigen::Index> active_cols;
};

/// Optional per-column kind overrides for load_csv, keyed by column name.
struct SchemaHints {
    std::vector<std::pair<std::string, ColumnKind>> kinds;
    std::optional<ColumnKind> lookup(const std::string& name) const;
};

/// Loads an RFC-4180-style CSV with a header row. Numeric columns are
/// standardized to zero mean / unit variance over the full dataset,
/// two-valued text columns become a single {0,1} column, other categoricals
/// are one-hot encoded. Missing values are rejected.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const SchemaHints& hints = {});

std::pair<Matrix, Matrix> vertical_split(const Dataset& ds,
                                         const VerticalSplit& split);

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds,
                                             double test_fraction,
                                             std::uint64_t seed);

struct SynthSpec {
    Eigen::Index n = 0;
    Eigen::Index d_a = 0;                    // columns the planting refers to
    std::vector<Eigen::Index> binary_cols;   // Bernoulli(0.5) plants
    std::vector<Eigen::Index> onehot_group;  // optional disjoint group
    double label_flip = 0.0;                 // chance each label is inverted
    std::uint64_t seed = 0;
};

/// Gaussian feature matrix with planted Bernoulli(0.5) binary columns and an
/// optional one-hot group; labels from a random linear threshold, each then
/// flipped independently with probability label_flip so the task can be given
/// an irreducible error floor. The result has full column rank (regenerated
/// on the measure-zero failure).
Dataset synth_planted(const SynthSpec& spec);

/// Binary dump (row-major little-endian f64) with a JSON schema sidecar.
void save_cache(const Dataset& ds, const std::string& path_base);
Dataset load_cache(const std::string& path_base);

}  // namespace vflrecon::data
