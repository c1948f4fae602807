#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apiscan/dataset.hpp"
#include "apiscan/features.hpp"
#include "apiscan/label.hpp"

namespace apiscan {

using ClassCounts = std::array<std::size_t, kNumClasses>;
using Proba = std::array<double, kNumClasses>;

// Shannon entropy in bits. EmptySet when all counts are zero.
double entropy(const ClassCounts& counts);

// H(parent) - (|L|/|T|) H(L) - (|R|/|T|) H(R) with R = parent - left.
// 0 when either side is empty. Every gain in this module goes through here.
double split_gain(const ClassCounts& parent, const ClassCounts& left);

// Gain of splitting on "counts[feature] <= threshold".
double information_gain(const LabeledDataset& data, std::size_t feature, double threshold);

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

// Best split over candidate features x midpoint thresholds, restricted to
// `rows` (duplicates count with multiplicity). Ties go to the lowest feature,
// then the lowest threshold. Both sides must keep >= min_samples_leaf rows.
// Throws NoUsefulSplit when no candidate has positive gain.
Split best_split(const LabeledDataset& data, std::span<const std::size_t> rows,
                 std::span<const std::size_t> candidate_features, std::size_t min_samples_leaf = 1);
Split best_split(const LabeledDataset& data, std::span<const std::size_t> candidate_features);

struct ForestParams {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // unlimited when empty
  std::size_t min_samples_leaf = 1;
  std::size_t features_per_split = 0;  // 0 selects ceil(sqrt(dimension))
  std::uint64_t seed = 0;

  bool operator==(const ForestParams&) const = default;
};

// Pre-order node array: an internal node's left child is the next node.
struct TreeNode {
  static constexpr std::int32_t kLeaf = -1;
  std::int32_t feature = kLeaf;
  double threshold = 0.0;  // go left iff count <= threshold
  std::uint32_t right = 0;
  Proba distribution{};  // leaves only

  bool is_leaf() const noexcept { return feature == kLeaf; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(std::span<const std::uint32_t> counts) const;
  std::size_t depth() const;
  bool operator==(const Tree&) const = default;
};

struct RankedFeature {
  std::size_t index = 0;
  double mean_gain = 0.0;
  bool operator==(const RankedFeature&) const = default;
};

struct RandomForestModel {
  std::vector<Tree> trees;
  ForestParams params;  // features_per_split stored resolved
  std::string reference_fingerprint;
  std::size_t dimension = 0;
  // Optional evidence ordering used when explaining a scan.
  std::vector<RankedFeature> feature_ranking;

  bool operator==(const RandomForestModel&) const = default;
};

// Seed of tree t's private stream; independent of the number of trees.
std::uint64_t tree_seed(std::uint64_t seed, std::size_t tree_index) noexcept;

// The bootstrap resample tree t is grown from (first draws of its stream).
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t tree_index);

// Errors: SingleClassData, InvalidHyperparams.
RandomForestModel train_forest(const LabeledDataset& data, const ForestParams& params);

// Mean of the leaf distributions. FingerprintMismatch on a foreign vector.
Proba predict_proba(const RandomForestModel& model, const FeatureVector& features);
Proba predict_proba(const RandomForestModel& model, std::span<const std::uint32_t> counts);
Label predict(const RandomForestModel& model, const FeatureVector& features);
// Ties resolve toward the earlier class in kClassOrder.
Label argmax_label(const Proba& p) noexcept;

// Stratified fold assignment: each class is shuffled and dealt round-robin.
std::vector<std::vector<std::size_t>> stratified_folds(const LabeledDataset& data, std::size_t k,
                                                       std::uint64_t seed);

struct CvTable {
  std::size_t chosen = 0;
  std::vector<std::pair<std::size_t, double>> mean_accuracy;  // grid value -> accuracy
};

// 10-fold stratified CV over a grid of tree counts; ties go to the smaller
// value. Errors: TooFewSamples (< 10 samples), InvalidHyperparams (empty grid).
CvTable cross_validate_n_trees(const LabeledDataset& data, std::span<const std::size_t> grid,
                               const ForestParams& base, std::size_t folds = 10);
std::size_t select_n_trees(const LabeledDataset& data, std::span<const std::size_t> grid,
                           const ForestParams& base = {});

// Highest gain of `feature` over all midpoint thresholds (0 when constant).
double best_threshold_gain(const LabeledDataset& data, std::size_t feature);

// Mean best-threshold gain across datasets, descending; ties by lower index.
std::vector<RankedFeature> rank_features(std::span<const LabeledDataset> datasets);

inline constexpr int kModelFormatVersion = 1;

std::string serialize_model(const RandomForestModel& model);
// Errors: CorruptModel, VersionMismatch.
RandomForestModel parse_model(std::string_view text);
void save_model(const RandomForestModel& model, const std::filesystem::path& path);
RandomForestModel load_model(const std::filesystem::path& path);

}  // namespace apiscan
