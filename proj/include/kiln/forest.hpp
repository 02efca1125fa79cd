#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "kiln/mask.hpp"
#include "kiln/raster.hpp"

namespace kiln {

/// Land-cover classes, indexed 1..n in `class_names` order.
struct LabelSchema {
    std::vector<std::string> class_names;

    int n_classes() const { return static_cast<int>(class_names.size()); }
    const std::string& name_of(int class_index) const;

    /// The ten-class land-cover schema used throughout the pipeline.
    static LabelSchema default_schema();
};

/// Class index of "Brick Kilns" in the default schema.
inline constexpr int kBrickKilnClass = 1;

struct LabeledPixel {
    std::uint8_t r = 0, g = 0, b = 0;
    std::uint8_t label = 0;  // class index, 1-based
};

struct LabeledPixelSet {
    std::vector<LabeledPixel> rows;
};

/// Throws Error when any row's label falls outside the schema.
void validate(const LabeledPixelSet& set, const LabelSchema& schema);

struct ForestConfig {
    int n_trees = 500;
    int max_depth = 50;
    int max_features = 10;  // clamped to the feature count at training time
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    double train_fraction = 0.8;
    std::uint64_t rng_seed = 0;
};

void validate(const ForestConfig& config);

/// Binary tree in array form; leaves carry per-class training counts.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<std::uint32_t> histogram;  // leaves only, size n_classes

    bool is_leaf() const { return left < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // node 0 is the root

    bool operator==(const DecisionTree&) const = default;
};

struct Forest {
    LabelSchema schema;
    ForestConfig config;
    int max_features_effective = 0;  // records the clamp to the feature count
    bool degenerate = false;         // single-class training input
    std::vector<DecisionTree> trees;
};

struct Prediction {
    int class_index = 0;
    std::vector<double> vote_fractions;  // per class, sums to 1
};

/// Deterministic seeded shuffle, then a floor(n * fraction) / remainder
/// partition. Throws Error on an empty set or a fraction outside (0, 1).
std::pair<LabeledPixelSet, LabeledPixelSet> split_train_test(const LabeledPixelSet& set,
                                                             double fraction,
                                                             std::uint64_t seed);

/// Trains one tree per bootstrap sample; node splits choose the best Gini
/// decrease over a seeded random feature subset. Bit-identical output for
/// identical (data, config) regardless of `workers`.
Forest train_forest(const LabeledPixelSet& train, const ForestConfig& config,
                    int workers = 1);

/// The bootstrap row draw for one tree, exposed so coverage properties can
/// be checked against exactly what training consumes.
std::vector<std::uint32_t> bootstrap_indices(std::uint64_t rng_seed, int tree_index,
                                             std::size_t n_rows);

/// Soft majority vote over all trees; ties go to the lowest class index.
Prediction predict_pixel(const Forest& forest, std::uint8_t r, std::uint8_t g,
                         std::uint8_t b);

/// Per-pixel forest vote against `target_class`; the mask inherits the
/// tile's georef and id.
BinaryMask classify_tile(const Forest& forest, const RasterTile& tile, int target_class);

struct ClassMetrics {
    double precision = 0.0;  // NaN when the class was never predicted
    double recall = 0.0;     // NaN when the class has no true samples
    double f1 = 0.0;
    std::size_t support = 0;
};

struct EvaluationReport {
    std::vector<ClassMetrics> per_class;     // index i is class i+1
    std::vector<std::vector<double>> confusion;  // rows truth-normalized; NaN row
                                                 // when the class has no support
};

EvaluationReport evaluate(const std::vector<int>& predicted,
                          const std::vector<int>& truth, const LabelSchema& schema);

/// Versioned JSON model dump; load rejects unknown versions and malformed
/// trees. Round trips are exact.
void save_model(const Forest& forest, const std::filesystem::path& path);
Forest load_model(const std::filesystem::path& path);

/// CSV with header r,g,b,class. Parse errors carry 1-based line numbers.
LabeledPixelSet load_labeled_csv(const std::filesystem::path& path,
                                 const LabelSchema& schema);
void save_labeled_csv(const LabeledPixelSet& set, const std::filesystem::path& path);

}  // namespace kiln
