#include "vflrecon/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace vflrecon::data {

namespace {

using nlohmann::json;

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

std::vector<std::string> split_csv_line(const std::string& line,
                                        std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) {
        throw ParseError("unterminated quote on line " +
                         std::to_string(line_no));
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

std::vector<int> FeatureSchema::onehot_groups() const {
    std::set<int> g;
    for (const auto& c : columns) {
        if (c.kind == ColumnKind::OneHot) g.insert(c.onehot_group);
    }
    return {g.begin(), g.end()};
}

std::vector<Eigen::Index> FeatureSchema::group_columns(int group) const {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].kind == ColumnKind::OneHot &&
            columns[i].onehot_group == group) {
            idx.push_back(static_cast<Eigen::Index>(i));
        }
    }
    return idx;
}

std::optional<ColumnKind> SchemaHints::lookup(const std::string& name) const {
    for (const auto& [n, k] : kinds) {
        if (n == name) return k;
    }
    return std::nullopt;
}

void Dataset::validate() const {
    if (rows() < 1 || cols() < 1) throw ParseError("empty dataset");
    if (static_cast<Eigen::Index>(labels.size()) != rows()) {
        throw DimensionMismatch("labels length != feature rows");
    }
    if (schema.size() != static_cast<std::size_t>(cols())) {
        throw DimensionMismatch("schema column count != feature cols");
    }
    for (int y : labels) {
        if (y < 0 || y >= class_count) throw ParseError("label out of range");
    }
    if (!features.allFinite()) throw ParseError("non-finite feature value");
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema.columns[j].kind == ColumnKind::Binary ||
            schema.columns[j].kind == ColumnKind::OneHot) {
            for (Eigen::Index i = 0; i < rows(); ++i) {
                double v = features(i, static_cast<Eigen::Index>(j));
                if (v != 0.0 && v != 1.0) {
                    throw ParseError("non-binary value in binary column " +
                                     schema.columns[j].name);
                }
            }
        }
    }
    for (int g : schema.onehot_groups()) {
        auto idx = schema.group_columns(g);
        for (Eigen::Index i = 0; i < rows(); ++i) {
            double s = 0.0;
            for (auto j : idx) s += features(i, j);
            if (s != 1.0) throw ParseError("one-hot group row sum != 1");
        }
    }
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const SchemaHints& hints) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header row");
    const auto header = split_csv_line(line, 1);

    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) label_idx = i;
    }
    if (label_idx == header.size()) {
        throw ParseError("label column '" + label_column + "' not found");
    }

    std::vector<std::vector<std::string>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line, line_no);
        if (fields.size() != header.size()) {
            throw ParseError("line " + std::to_string(line_no) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(header.size()));
        }
        for (const auto& f : fields) {
            if (f.empty()) {
                throw ParseError("missing value on line " +
                                 std::to_string(line_no));
            }
        }
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw ParseError("dataset has no data rows");
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());

    // Labels: sorted distinct values map to class ids 0..C-1.
    std::map<std::string, int> label_map;
    for (const auto& r : rows) label_map.emplace(r[label_idx], 0);
    int next_id = 0;
    for (auto& [k, v] : label_map) v = next_id++;
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (const auto& r : rows) labels.push_back(label_map.at(r[label_idx]));

    // Per source column, decide encoding and emit feature columns.
    std::vector<std::vector<double>> out_cols;
    FeatureSchema schema;
    int next_group = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == label_idx) continue;
        bool numeric = true;
        std::vector<double> vals(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!parse_double(rows[i][c], vals[i])) {
                numeric = false;
                break;
            }
        }
        auto hint = hints.lookup(header[c]);
        if (numeric) {
            std::set<double> distinct(vals.begin(), vals.end());
            const bool binary01 = distinct == std::set<double>{0.0, 1.0} ||
                                  distinct == std::set<double>{0.0} ||
                                  distinct == std::set<double>{1.0};
            if ((hint && *hint == ColumnKind::Binary) || (!hint && binary01)) {
                schema.columns.push_back({header[c], ColumnKind::Binary, -1, ""});
                out_cols.push_back(std::move(vals));
            } else {
                double mean = 0.0;
                for (double v : vals) mean += v;
                mean /= static_cast<double>(n);
                double var = 0.0;
                for (double v : vals) var += (v - mean) * (v - mean);
                var /= static_cast<double>(n);
                const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
                for (double& v : vals) v = (v - mean) / sd;
                schema.columns.push_back({header[c], ColumnKind::Numeric, -1, ""});
                out_cols.push_back(std::move(vals));
            }
            continue;
        }
        std::set<std::string> cats;
        for (const auto& r : rows) cats.insert(r[c]);
        if (cats.size() < 2) {
            throw ParseError("column '" + header[c] + "' is constant text");
        }
        if (cats.size() == 2) {
            const std::string& one = *std::next(cats.begin());
            std::vector<double> col(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                col[i] = rows[i][c] == one ? 1.0 : 0.0;
            }
            schema.columns.push_back({header[c], ColumnKind::Binary, -1, ""});
            out_cols.push_back(std::move(col));
        } else {
            const int group = next_group++;
            for (const auto& cat : cats) {
                std::vector<double> col(rows.size());
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    col[i] = rows[i][c] == cat ? 1.0 : 0.0;
                }
                schema.columns.push_back(
                    {header[c] + "=" + cat, ColumnKind::OneHot, group, cat});
                out_cols.push_back(std::move(col));
            }
        }
    }

    Dataset ds;
    ds.features.resize(n, static_cast<Eigen::Index>(out_cols.size()));
    for (std::size_t j = 0; j < out_cols.size(); ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            ds.features(i, static_cast<Eigen::Index>(j)) = out_cols[j][i];
        }
    }
    ds.labels = std::move(labels);
    ds.schema = std::move(schema);
    ds.class_count = next_id;
    ds.validate();
    return ds;
}

std::pair<Matrix, Matrix> vertical_split(const Dataset& ds,
                                         const VerticalSplit& split) {
    if (split.passive_cols.empty()) {
        throw InvalidConfig("passive column set must be nonempty");
    }
    std::set<Eigen::Index> seen;
    for (auto j : split.passive_cols) {
        if (j < 0 || j >= ds.cols()) throw IndexOutOfRange("passive col");
        if (!seen.insert(j).second) throw InvalidConfig("overlapping split");
    }
    for (auto j : split.active_cols) {
        if (j < 0 || j >= ds.cols()) throw IndexOutOfRange("active col");
        if (!seen.insert(j).second) throw InvalidConfig("overlapping split");
    }
    if (seen.size() != static_cast<std::size_t>(ds.cols())) {
        throw InvalidConfig("split does not cover all columns");
    }
    Matrix xa(ds.rows(), static_cast<Eigen::Index>(split.passive_cols.size()));
    Matrix xb(ds.rows(), static_cast<Eigen::Index>(split.active_cols.size()));
    for (std::size_t j = 0; j < split.passive_cols.size(); ++j) {
        xa.col(static_cast<Eigen::Index>(j)) = ds.features.col(split.passive_cols[j]);
    }
    for (std::size_t j = 0; j < split.active_cols.size(); ++j) {
        xb.col(static_cast<Eigen::Index>(j)) = ds.features.col(split.active_cols[j]);
    }
    return {std::move(xa), std::move(xb)};
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds,
                                             double test_fraction,
                                             std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw InvalidConfig("test_fraction must be in (0,1)");
    }
    const Eigen::Index n = ds.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const Eigen::Index n_test = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::llround(test_fraction * n)));
    if (n_test >= n) throw InvalidConfig("test fraction leaves no train rows");

    auto take = [&](Eigen::Index begin, Eigen::Index count) {
        Dataset out;
        out.features.resize(count, ds.cols());
        out.labels.resize(static_cast<std::size_t>(count));
        for (Eigen::Index i = 0; i < count; ++i) {
            const Eigen::Index src = order[static_cast<std::size_t>(begin + i)];
            out.features.row(i) = ds.features.row(src);
            out.labels[static_cast<std::size_t>(i)] =
                ds.labels[static_cast<std::size_t>(src)];
        }
        out.schema = ds.schema;
        out.class_count = ds.class_count;
        return out;
    };
    return {take(n_test, n - n_test), take(0, n_test)};
}

Dataset synth_planted(const SynthSpec& spec) {
    if (spec.n < 1 || spec.d_a < 1) throw InvalidConfig("n and d_A must be >= 1");
    if (spec.label_flip < 0.0 || spec.label_flip >= 0.5) {
        throw InvalidConfig("label_flip must be in [0, 0.5)");
    }
    std::set<Eigen::Index> planted;
    for (auto j : spec.binary_cols) {
        if (j < 0 || j >= spec.d_a) throw IndexOutOfRange("binary col");
        planted.insert(j);
    }
    for (auto j : spec.onehot_group) {
        if (j < 0 || j >= spec.d_a) throw IndexOutOfRange("one-hot col");
        if (!planted.insert(j).second) {
            throw InvalidConfig("one-hot group overlaps binary columns");
        }
    }

    std::uint64_t seed = spec.seed;
    for (int attempt = 0; attempt < 16; ++attempt, ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::bernoulli_distribution coin(0.5);

        Dataset ds;
        ds.features.resize(spec.n, spec.d_a);
        ds.schema.columns.resize(static_cast<std::size_t>(spec.d_a));
        for (Eigen::Index j = 0; j < spec.d_a; ++j) {
            ds.schema.columns[static_cast<std::size_t>(j)] = {
                "f" + std::to_string(j), ColumnKind::Numeric, -1, ""};
        }
        for (Eigen::Index i = 0; i < spec.n; ++i) {
            for (Eigen::Index j = 0; j < spec.d_a; ++j) {
                ds.features(i, j) = gauss(rng);
            }
        }
        for (auto j : spec.binary_cols) {
            ds.schema.columns[static_cast<std::size_t>(j)].kind =
                ColumnKind::Binary;
            for (Eigen::Index i = 0; i < spec.n; ++i) {
                ds.features(i, j) = coin(rng) ? 1.0 : 0.0;
            }
        }
        if (!spec.onehot_group.empty()) {
            std::uniform_int_distribution<std::size_t> pick(
                0, spec.onehot_group.size() - 1);
            for (auto j : spec.onehot_group) {
                auto& col = ds.schema.columns[static_cast<std::size_t>(j)];
                col.kind = ColumnKind::OneHot;
                col.onehot_group = 0;
            }
            for (Eigen::Index i = 0; i < spec.n; ++i) {
                for (auto j : spec.onehot_group) ds.features(i, j) = 0.0;
                ds.features(i, spec.onehot_group[pick(rng)]) = 1.0;
            }
        }

        // Labels from a random linear threshold.
        Vector v(spec.d_a);
        for (Eigen::Index j = 0; j < spec.d_a; ++j) v(j) = gauss(rng);
        Vector score = ds.features * v;
        const double thresh = score.mean();
        ds.labels.resize(static_cast<std::size_t>(spec.n));
        for (Eigen::Index i = 0; i < spec.n; ++i) {
            ds.labels[static_cast<std::size_t>(i)] = score(i) > thresh ? 1 : 0;
        }
        if (spec.label_flip > 0.0) {
            std::bernoulli_distribution flip(spec.label_flip);
            for (auto& y : ds.labels) {
                if (flip(rng)) y = 1 - y;
            }
        }
        ds.class_count = 2;

        if (linalg::numerical_rank(ds.features) == spec.d_a) {
            ds.validate();
            return ds;
        }
    }
    throw InvalidConfig("failed to generate full-rank synthetic data");
}

void save_cache(const Dataset& ds, const std::string& path_base) {
    std::ofstream bin(path_base + ".bin", std::ios::binary);
    if (!bin) throw IoError("cannot write " + path_base + ".bin");
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.cols(); ++j) {
            const double v = ds.features(i, j);
            bin.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    }
    json meta;
    meta["rows"] = ds.rows();
    meta["cols"] = ds.cols();
    meta["class_count"] = ds.class_count;
    meta["labels"] = ds.labels;
    json cols = json::array();
    for (const auto& c : ds.schema.columns) {
        cols.push_back({{"name", c.name},
                        {"kind", c.kind == ColumnKind::Numeric  ? "numeric"
                                 : c.kind == ColumnKind::Binary ? "binary"
                                                                : "onehot"},
                        {"group", c.onehot_group},
                        {"category", c.onehot_category}});
    }
    meta["schema"] = cols;
    std::ofstream js(path_base + ".json");
    js << meta.dump(2) << "\n";
}

Dataset load_cache(const std::string& path_base) {
    std::ifstream js(path_base + ".json");
    if (!js) throw IoError("cannot open " + path_base + ".json");
    json meta = json::parse(js);
    Dataset ds;
    const Eigen::Index rows = meta.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = meta.at("cols").get<Eigen::Index>();
    ds.class_count = meta.at("class_count").get<int>();
    ds.labels = meta.at("labels").get<std::vector<int>>();
    for (const auto& c : meta.at("schema")) {
        const std::string kind = c.at("kind").get<std::string>();
        ds.schema.columns.push_back(
            {c.at("name").get<std::string>(),
             kind == "numeric"  ? ColumnKind::Numeric
             : kind == "binary" ? ColumnKind::Binary
                                : ColumnKind::OneHot,
             c.at("group").get<int>(), c.at("category").get<std::string>()});
    }
    std::ifstream bin(path_base + ".bin", std::ios::binary);
    if (!bin) throw IoError("cannot open " + path_base + ".bin");
    ds.features.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            double v = 0.0;
            bin.read(reinterpret_cast<char*>(&v), sizeof(v));
            ds.features(i, j) = v;
        }
    }
    if (!bin) throw IoError("truncated cache file " + path_base + ".bin");
    ds.validate();
    return ds;
}

}  // namespace vflrecon::data
