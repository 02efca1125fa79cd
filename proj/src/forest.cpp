#include "kiln/forest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "kiln/error.hpp"
#include "kiln/parallel.hpp"

namespace kiln {
namespace {

constexpr int kFeatureCount = 3;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t tree_seed(std::uint64_t base, int tree_index) {
    return splitmix64(base + 0x9E3779B97F4A7C15ULL *
                                 (static_cast<std::uint64_t>(tree_index) + 1));
}

// Lemire's unbiased bounded draw; avoids std::uniform_int_distribution so
// identical seeds give identical forests on every platform.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    auto wide = static_cast<unsigned __int128>(rng()) * n;
    auto low = static_cast<std::uint64_t>(wide);
    if (low < n) {
        std::uint64_t cutoff = (0 - n) % n;
        while (low < cutoff) {
            wide = static_cast<unsigned __int128>(rng()) * n;
            low = static_cast<std::uint64_t>(wide);
        }
    }
    return static_cast<std::uint64_t>(wide >> 64);
}

template <typename T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[bounded(rng, i)]);
}

std::uint8_t feature_of(const LabeledPixel& p, int f) {
    return f == 0 ? p.r : f == 1 ? p.g : p.b;
}

double gini(const std::vector<std::uint64_t>& counts, double n) {
    double sum_sq = 0.0;
    for (auto c : counts) {
        double p = static_cast<double>(c) / n;
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

struct TreeBuilder {
    const std::vector<LabeledPixel>& rows;
    const ForestConfig& config;
    int n_classes;
    int max_features;
    std::mt19937_64 rng;
    DecisionTree tree;
    std::vector<std::uint32_t> idx;

    // Scratch reused across nodes: per-bin totals and per-bin class counts.
    std::array<std::uint32_t, 256> bin_total{};
    std::vector<std::uint32_t> bin_class;  // 256 * n_classes

    TreeBuilder(const std::vector<LabeledPixel>& rows_, const ForestConfig& config_,
                int n_classes_, int max_features_, std::uint64_t seed)
        : rows(rows_),
          config(config_),
          n_classes(n_classes_),
          max_features(max_features_),
          rng(seed),
          bin_class(256 * static_cast<std::size_t>(n_classes_), 0) {}

    void run() {
        idx.resize(rows.size());
        for (auto& i : idx)
            i = static_cast<std::uint32_t>(bounded(rng, rows.size()));
        build_node(0, idx.size(), 0);
    }

    int make_leaf(std::size_t lo, std::size_t hi) {
        TreeNode leaf;
        leaf.histogram.assign(n_classes, 0);
        for (std::size_t i = lo; i < hi; ++i) ++leaf.histogram[rows[idx[i]].label - 1];
        tree.nodes.push_back(std::move(leaf));
        return static_cast<int>(tree.nodes.size() - 1);
    }

    std::vector<int> pick_features() {
        std::vector<int> feats(kFeatureCount);
        std::iota(feats.begin(), feats.end(), 0);
        if (max_features < kFeatureCount) {
            fisher_yates(feats, rng);
            feats.resize(max_features);
            std::sort(feats.begin(), feats.end());
        }
        return feats;
    }

    int build_node(std::size_t lo, std::size_t hi, int depth) {
        std::size_t n = hi - lo;
        std::vector<std::uint64_t> class_counts(n_classes, 0);
        for (std::size_t i = lo; i < hi; ++i) ++class_counts[rows[idx[i]].label - 1];
        bool pure =
            std::count_if(class_counts.begin(), class_counts.end(),
                          [](std::uint64_t c) { return c > 0; }) <= 1;
        if (depth >= config.max_depth || pure ||
            n < static_cast<std::size_t>(config.min_samples_split))
            return make_leaf(lo, hi);

        double parent = gini(class_counts, static_cast<double>(n));
        double best_score = std::numeric_limits<double>::infinity();
        int best_feature = -1;
        double best_threshold = 0.0;

        // Features are evaluated in ascending order and thresholds in
        // ascending order, so keeping only strict improvements realizes the
        // lowest-feature, lowest-threshold tie-break.
        for (int f : pick_features()) {
            bin_total.fill(0);
            for (std::size_t i = lo; i < hi; ++i) {
                auto v = feature_of(rows[idx[i]], f);
                ++bin_total[v];
                ++bin_class[static_cast<std::size_t>(v) * n_classes +
                            (rows[idx[i]].label - 1)];
            }
            std::vector<std::uint64_t> left(n_classes, 0);
            std::uint64_t n_left = 0;
            int prev_occupied = -1;
            for (int v = 0; v < 256; ++v) {
                if (bin_total[v] == 0) continue;
                if (prev_occupied >= 0) {
                    std::uint64_t n_right = n - n_left;
                    if (n_left >= static_cast<std::uint64_t>(config.min_samples_leaf) &&
                        n_right >= static_cast<std::uint64_t>(config.min_samples_leaf)) {
                        std::vector<std::uint64_t> right(n_classes);
                        for (int c = 0; c < n_classes; ++c)
                            right[c] = class_counts[c] - left[c];
                        double score =
                            (n_left * gini(left, static_cast<double>(n_left)) +
                             n_right * gini(right, static_cast<double>(n_right))) /
                            static_cast<double>(n);
                        if (score < best_score) {
                            best_score = score;
                            best_feature = f;
                            best_threshold = (prev_occupied + v) / 2.0;
                        }
                    }
                }
                for (int c = 0; c < n_classes; ++c)
                    left[c] += bin_class[static_cast<std::size_t>(v) * n_classes + c];
                n_left += bin_total[v];
                prev_occupied = v;
            }
            for (int v = 0; v < 256; ++v) {
                if (bin_total[v] == 0) continue;
                for (int c = 0; c < n_classes; ++c)
                    bin_class[static_cast<std::size_t>(v) * n_classes + c] = 0;
            }
        }

        if (best_feature < 0 || best_score >= parent) return make_leaf(lo, hi);

        auto mid = std::stable_partition(
            idx.begin() + static_cast<std::ptrdiff_t>(lo),
            idx.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::uint32_t i) {
                return feature_of(rows[i], best_feature) <= best_threshold;
            });
        std::size_t split = static_cast<std::size_t>(mid - idx.begin());

        int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].threshold = best_threshold;
        int left_id = build_node(lo, split, depth + 1);
        int right_id = build_node(split, hi, depth + 1);
        tree.nodes[node_id].left = left_id;
        tree.nodes[node_id].right = right_id;
        return node_id;
    }
};

const TreeNode& leaf_for(const DecisionTree& tree, std::uint8_t r, std::uint8_t g,
                         std::uint8_t b) {
    const TreeNode* node = &tree.nodes[0];
    while (!node->is_leaf()) {
        std::uint8_t v = node->feature == 0 ? r : node->feature == 1 ? g : b;
        node = &tree.nodes[v <= node->threshold ? node->left : node->right];
    }
    return *node;
}

int vote_class(const Forest& forest, std::uint8_t r, std::uint8_t g, std::uint8_t b,
               std::vector<double>* fractions_out) {
    int nc = forest.schema.n_classes();
    std::vector<double> votes(nc, 0.0);
    for (const auto& tree : forest.trees) {
        const TreeNode& leaf = leaf_for(tree, r, g, b);
        double total = 0.0;
        for (auto c : leaf.histogram) total += c;
        if (total == 0.0) continue;
        for (int c = 0; c < nc; ++c) votes[c] += leaf.histogram[c] / total;
    }
    int best = 0;
    for (int c = 1; c < nc; ++c)
        if (votes[c] > votes[best]) best = c;
    if (fractions_out) {
        double total = std::accumulate(votes.begin(), votes.end(), 0.0);
        for (auto& v : votes) v = total > 0.0 ? v / total : 0.0;
        *fractions_out = std::move(votes);
    }
    return best + 1;
}

nlohmann::ordered_json tree_to_json(const DecisionTree& tree) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& node : tree.nodes) {
        if (node.is_leaf()) {
            nodes.push_back({{"h", node.histogram}});
        } else {
            nodes.push_back(
                {{"f", node.feature}, {"t", node.threshold}, {"l", node.left}, {"r", node.right}});
        }
    }
    return {{"nodes", std::move(nodes)}};
}

DecisionTree tree_from_json(const nlohmann::json& doc, int n_classes,
                            const std::filesystem::path& path) {
    DecisionTree tree;
    const auto& nodes = doc.at("nodes");
    for (const auto& jn : nodes) {
        TreeNode node;
        if (jn.contains("h")) {
            node.histogram = jn.at("h").get<std::vector<std::uint32_t>>();
            if (static_cast<int>(node.histogram.size()) != n_classes)
                throw ParseError("leaf histogram size mismatch in " + path.string());
        } else {
            node.feature = jn.at("f").get<int>();
            node.threshold = jn.at("t").get<double>();
            node.left = jn.at("l").get<int>();
            node.right = jn.at("r").get<int>();
            if (node.feature < 0 || node.feature >= kFeatureCount)
                throw ParseError("node feature out of range in " + path.string());
        }
        tree.nodes.push_back(std::move(node));
    }
    if (tree.nodes.empty()) throw ParseError("empty tree in " + path.string());
    int n = static_cast<int>(tree.nodes.size());
    for (const auto& node : tree.nodes) {
        if (node.is_leaf()) continue;
        if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n)
            throw ParseError("node child index out of range in " + path.string());
    }
    return tree;
}

}  // namespace

const std::string& LabelSchema::name_of(int class_index) const {
    if (class_index < 1 || class_index > n_classes())
        throw Error("class index " + std::to_string(class_index) +
                    " outside schema of " + std::to_string(n_classes()) + " classes");
    return class_names[static_cast<std::size_t>(class_index) - 1];
}

LabelSchema LabelSchema::default_schema() {
    return {{"Brick Kilns", "Redroof Structures", "Water Bodies", "Green Areas",
             "Forests", "Fallow Lands", "Desert", "Urban Areas", "Roads",
             "Rocky Terrain"}};
}

void validate(const LabeledPixelSet& set, const LabelSchema& schema) {
    for (std::size_t i = 0; i < set.rows.size(); ++i) {
        int label = set.rows[i].label;
        if (label < 1 || label > schema.n_classes())
            throw Error("row " + std::to_string(i) + " has class " +
                        std::to_string(label) + " outside 1.." +
                        std::to_string(schema.n_classes()));
    }
}

void validate(const ForestConfig& config) {
    if (config.n_trees < 1) throw Error("n_trees must be positive");
    if (config.max_depth < 1) throw Error("max_depth must be positive");
    if (config.max_features < 1) throw Error("max_features must be positive");
    if (config.min_samples_split < 2) throw Error("min_samples_split must be at least 2");
    if (config.min_samples_leaf < 1) throw Error("min_samples_leaf must be positive");
    if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0))
        throw Error("train_fraction must lie in (0, 1)");
}

std::pair<LabeledPixelSet, LabeledPixelSet> split_train_test(const LabeledPixelSet& set,
                                                             double fraction,
                                                             std::uint64_t seed) {
    if (set.rows.empty()) throw Error("cannot split an empty pixel set");
    if (!(fraction > 0.0 && fraction < 1.0))
        throw Error("split fraction must lie in (0, 1), got " + std::to_string(fraction));
    std::vector<std::uint32_t> order(set.rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(splitmix64(seed));
    fisher_yates(order, rng);
    auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(set.rows.size()) * fraction));
    LabeledPixelSet train, test;
    train.rows.reserve(n_train);
    test.rows.reserve(set.rows.size() - n_train);
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_train ? train : test).rows.push_back(set.rows[order[i]]);
    return {std::move(train), std::move(test)};
}

std::vector<std::uint32_t> bootstrap_indices(std::uint64_t rng_seed, int tree_index,
                                             std::size_t n_rows) {
    std::mt19937_64 rng(tree_seed(rng_seed, tree_index));
    std::vector<std::uint32_t> idx(n_rows);
    for (auto& i : idx) i = static_cast<std::uint32_t>(bounded(rng, n_rows));
    return idx;
}

Forest train_forest(const LabeledPixelSet& train, const ForestConfig& config,
                    int workers) {
    validate(config);
    if (train.rows.empty()) throw Error("cannot train on an empty pixel set");

    Forest forest;
    forest.schema = LabelSchema::default_schema();
    validate(train, forest.schema);
    forest.config = config;
    forest.max_features_effective = std::min(config.max_features, kFeatureCount);

    std::vector<bool> present(forest.schema.n_classes() + 1, false);
    for (const auto& row : train.rows) present[row.label] = true;
    forest.degenerate = std::count(present.begin(), present.end(), true) < 2;

    forest.trees.resize(static_cast<std::size_t>(config.n_trees));
    parallel_for(forest.trees.size(), workers, [&](std::size_t t) {
        TreeBuilder builder(train.rows, config, forest.schema.n_classes(),
                            forest.max_features_effective,
                            tree_seed(config.rng_seed, static_cast<int>(t)));
        builder.run();
        forest.trees[t] = std::move(builder.tree);
    });
    return forest;
}

Prediction predict_pixel(const Forest& forest, std::uint8_t r, std::uint8_t g,
                         std::uint8_t b) {
    if (forest.trees.empty()) throw Error("forest has no trees");
    Prediction p;
    p.class_index = vote_class(forest, r, g, b, &p.vote_fractions);
    return p;
}

BinaryMask classify_tile(const Forest& forest, const RasterTile& tile, int target_class) {
    if (forest.trees.empty()) throw Error("forest has no trees");
    if (target_class < 1 || target_class > forest.schema.n_classes())
        throw Error("target class " + std::to_string(target_class) + " outside schema");
    BinaryMask mask(tile.georef, tile.tile_id);
    // Distinct 24-bit colors map to a fixed class, so tile classification is
    // memoized over the color cube.
    std::vector<std::uint8_t> memo(1u << 24, 0);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const std::uint8_t* px = tile.rgb(x, y);
            std::uint32_t key = (static_cast<std::uint32_t>(px[0]) << 16) |
                                (static_cast<std::uint32_t>(px[1]) << 8) | px[2];
            std::uint8_t cls = memo[key];
            if (cls == 0) {
                cls = static_cast<std::uint8_t>(
                    vote_class(forest, px[0], px[1], px[2], nullptr));
                memo[key] = cls;
            }
            mask.set(x, y, cls == target_class);
        }
    }
    return mask;
}

EvaluationReport evaluate(const std::vector<int>& predicted, const std::vector<int>& truth,
                          const LabelSchema& schema) {
    if (predicted.size() != truth.size())
        throw Error("evaluate needs equal-length sequences, got " +
                    std::to_string(predicted.size()) + " and " +
                    std::to_string(truth.size()));
    int nc = schema.n_classes();
    auto check = [&](int label) {
        if (label < 1 || label > nc)
            throw Error("label " + std::to_string(label) + " outside schema");
    };
    std::vector<std::vector<std::size_t>> counts(nc, std::vector<std::size_t>(nc, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        check(truth[i]);
        check(predicted[i]);
        ++counts[truth[i] - 1][predicted[i] - 1];
    }

    double nan = std::numeric_limits<double>::quiet_NaN();
    EvaluationReport report;
    report.per_class.resize(nc);
    report.confusion.assign(nc, std::vector<double>(nc, 0.0));
    for (int c = 0; c < nc; ++c) {
        std::size_t tp = counts[c][c];
        std::size_t support = 0, predicted_count = 0;
        for (int k = 0; k < nc; ++k) {
            support += counts[c][k];
            predicted_count += counts[k][c];
        }
        ClassMetrics& m = report.per_class[c];
        m.support = support;
        m.precision = predicted_count ? static_cast<double>(tp) / predicted_count : nan;
        m.recall = support ? static_cast<double>(tp) / support : nan;
        if (std::isnan(m.precision) || std::isnan(m.recall))
            m.f1 = nan;
        else if (m.precision + m.recall == 0.0)
            m.f1 = 0.0;
        else
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        for (int k = 0; k < nc; ++k)
            report.confusion[c][k] =
                support ? static_cast<double>(counts[c][k]) / support : nan;
    }
    return report;
}

void save_model(const Forest& forest, const std::filesystem::path& path) {
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["schema"] = forest.schema.class_names;
    doc["config"] = {{"n_trees", forest.config.n_trees},
                     {"max_depth", forest.config.max_depth},
                     {"max_features_requested", forest.config.max_features},
                     {"max_features_effective", forest.max_features_effective},
                     {"min_samples_split", forest.config.min_samples_split},
                     {"min_samples_leaf", forest.config.min_samples_leaf},
                     {"train_fraction", forest.config.train_fraction},
                     {"rng_seed", forest.config.rng_seed}};
    doc["degenerate"] = forest.degenerate;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& tree : forest.trees) trees.push_back(tree_to_json(tree));
    doc["trees"] = std::move(trees);

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write model " + path.string());
    out << doc.dump(1) << '\n';
    if (!out) throw Error("short write to " + path.string());
}

Forest load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad model JSON in " + path.string() + ": " + e.what());
    }
    try {
        if (doc.at("format_version").get<int>() != 1)
            throw ParseError("unsupported model format_version in " + path.string());
        Forest forest;
        forest.schema.class_names = doc.at("schema").get<std::vector<std::string>>();
        if (forest.schema.n_classes() < 1)
            throw ParseError("model schema is empty in " + path.string());
        const auto& cfg = doc.at("config");
        forest.config.n_trees = cfg.at("n_trees").get<int>();
        forest.config.max_depth = cfg.at("max_depth").get<int>();
        forest.config.max_features = cfg.at("max_features_requested").get<int>();
        forest.max_features_effective = cfg.at("max_features_effective").get<int>();
        forest.config.min_samples_split = cfg.at("min_samples_split").get<int>();
        forest.config.min_samples_leaf = cfg.at("min_samples_leaf").get<int>();
        forest.config.train_fraction = cfg.at("train_fraction").get<double>();
        forest.config.rng_seed = cfg.at("rng_seed").get<std::uint64_t>();
        forest.degenerate = doc.at("degenerate").get<bool>();
        for (const auto& jt : doc.at("trees"))
            forest.trees.push_back(tree_from_json(jt, forest.schema.n_classes(), path));
        if (forest.trees.empty()) throw ParseError("model has no trees: " + path.string());
        return forest;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad model content in " + path.string() + ": " + e.what());
    }
}

LabeledPixelSet load_labeled_csv(const std::filesystem::path& path,
                                 const LabelSchema& schema) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open training data " + path.string());
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    };
    if (!next_line() || line != "r,g,b,class")
        throw ParseError("expected header 'r,g,b,class' in " + path.string(), line_no);

    auto parse_field = [&](std::string_view field, int lo, int hi, const char* what) {
        int value = 0;
        auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
        if (ec != std::errc() || end != field.data() + field.size() || value < lo ||
            value > hi)
            throw ParseError("bad " + std::string(what) + " value '" + std::string(field) +
                                 "' in " + path.string(),
                             line_no);
        return value;
    };

    LabeledPixelSet set;
    while (next_line()) {
        std::array<std::string_view, 4> fields;
        std::string_view rest = line;
        for (int f = 0; f < 4; ++f) {
            auto comma = rest.find(',');
            if ((f < 3) != (comma != std::string_view::npos))
                throw ParseError("expected 4 comma-separated fields in " + path.string(),
                                 line_no);
            fields[f] = rest.substr(0, comma);
            if (comma != std::string_view::npos) rest = rest.substr(comma + 1);
        }
        LabeledPixel row;
        row.r = static_cast<std::uint8_t>(parse_field(fields[0], 0, 255, "r"));
        row.g = static_cast<std::uint8_t>(parse_field(fields[1], 0, 255, "g"));
        row.b = static_cast<std::uint8_t>(parse_field(fields[2], 0, 255, "b"));
        row.label = static_cast<std::uint8_t>(
            parse_field(fields[3], 1, schema.n_classes(), "class"));
        set.rows.push_back(row);
    }
    return set;
}

void save_labeled_csv(const LabeledPixelSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write training data " + path.string());
    out << "r,g,b,class\n";
    for (const auto& row : set.rows)
        out << static_cast<int>(row.r) << ',' << static_cast<int>(row.g) << ','
            << static_cast<int>(row.b) << ',' << static_cast<int>(row.label) << '\n';
    if (!out) throw Error("short write to " + path.string());
}

}  // namespace kiln
