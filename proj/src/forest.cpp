#include "apiscan/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "apiscan/error.hpp"
#include "apiscan/hash.hpp"
#include "apiscan/random.hpp"
#include "json.hpp"

namespace apiscan {

namespace {

// Gains at or below this are rounding noise from splits that leave the class
// mix unchanged.
constexpr double kGainFloor = 1e-12;
// Gains closer than this are equal; the earlier candidate keeps the split.
constexpr double kTieTolerance = 1e-12;

ClassCounts count_labels(const LabeledDataset& data, std::span<const std::size_t> rows) {
  ClassCounts c{};
  for (auto r : rows) ++c[class_index(data[r].label)];
  return c;
}

std::size_t total(const ClassCounts& c) { return c[0] + c[1] + c[2]; }

std::size_t distinct_labels(const ClassCounts& c) {
  return static_cast<std::size_t>(std::count_if(c.begin(), c.end(), [](auto n) { return n > 0; }));
}

// Sorted sweep over one feature; returns the best (threshold, gain) with gain
// > floor, lowest threshold on ties.
std::optional<std::pair<double, double>> sweep_feature(const LabeledDataset& data,
                                                       std::span<const std::size_t> rows,
                                                       std::size_t feature,
                                                       const ClassCounts& parent,
                                                       std::size_t min_leaf,
                                                       std::vector<std::pair<std::uint32_t, std::uint8_t>>& scratch) {
  scratch.clear();
  for (auto r : rows) {
    scratch.emplace_back(data[r].counts[feature], static_cast<std::uint8_t>(data[r].label));
  }
  std::sort(scratch.begin(), scratch.end());
  if (scratch.front().first == scratch.back().first) return std::nullopt;

  std::optional<std::pair<double, double>> best;
  ClassCounts left{};
  const std::size_t n = scratch.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    ++left[scratch[i].second];
    if (scratch[i].first == scratch[i + 1].first) continue;
    const std::size_t n_left = i + 1;
    if (n_left < min_leaf || n - n_left < min_leaf) continue;
    const double gain = split_gain(parent, left);
    if (gain > 0.0 && (!best || gain > best->second + kTieTolerance)) {
      const double threshold =
          (static_cast<double>(scratch[i].first) + static_cast<double>(scratch[i + 1].first)) / 2.0;
      best = std::make_pair(threshold, gain);
    }
  }
  return best;
}

std::optional<Split> find_split(const LabeledDataset& data, std::span<const std::size_t> rows,
                                std::span<const std::size_t> features, std::size_t min_leaf) {
  const ClassCounts parent = count_labels(data, rows);
  if (rows.size() < 2 || distinct_labels(parent) < 2) return std::nullopt;
  std::vector<std::size_t> ordered(features.begin(), features.end());
  std::sort(ordered.begin(), ordered.end());
  std::vector<std::pair<std::uint32_t, std::uint8_t>> scratch;
  scratch.reserve(rows.size());
  std::optional<Split> best;
  for (auto f : ordered) {
    if (f >= data.dimension()) throw Error(Errc::InvalidHyperparams, "feature index out of range");
    if (auto hit = sweep_feature(data, rows, f, parent, std::max<std::size_t>(min_leaf, 1), scratch)) {
      if (!best || hit->second > best->gain + kTieTolerance) best = Split{f, hit->first, hit->second};
    }
  }
  return best;
}

// Floyd's algorithm; result sorted.
std::vector<std::size_t> sample_features(Rng& rng, std::size_t dimension, std::size_t k) {
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  for (std::size_t j = dimension - k; j < dimension; ++j) {
    const std::size_t t = static_cast<std::size_t>(rng.below(j + 1));
    const auto pos = std::lower_bound(chosen.begin(), chosen.end(), t);
    if (pos != chosen.end() && *pos == t) {
      chosen.insert(std::lower_bound(chosen.begin(), chosen.end(), j), j);
    } else {
      chosen.insert(pos, t);
    }
  }
  return chosen;
}

class TreeGrower {
 public:
  TreeGrower(const LabeledDataset& data, const ForestParams& params, std::uint64_t seed)
      : data_(data), params_(params), rng_(seed) {}

  Tree grow() {
    std::vector<std::size_t> rows(data_.size());
    for (auto& r : rows) r = static_cast<std::size_t>(rng_.below(data_.size()));
    grow_node(rows, 0);
    return std::move(tree_);
  }

 private:
  void make_leaf(std::size_t idx, const ClassCounts& c) {
    const double n = static_cast<double>(total(c));
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      tree_.nodes[idx].distribution[k] = static_cast<double>(c[k]) / n;
    }
  }

  void grow_node(std::vector<std::size_t>& rows, std::size_t depth) {
    const std::size_t idx = tree_.nodes.size();
    tree_.nodes.emplace_back();
    const ClassCounts c = count_labels(data_, rows);
    const bool depth_limited = params_.max_depth && depth >= *params_.max_depth;
    if (depth_limited || distinct_labels(c) < 2 || rows.size() < 2 * params_.min_samples_leaf) {
      make_leaf(idx, c);
      return;
    }
    const auto features = sample_features(rng_, data_.dimension(), params_.features_per_split);
    const auto split = find_split(data_, rows, features, params_.min_samples_leaf);
    if (!split) {
      make_leaf(idx, c);
      return;
    }
    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (data_[r].counts[split->feature] <= split->threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree_.nodes[idx].feature = static_cast<std::int32_t>(split->feature);
    tree_.nodes[idx].threshold = split->threshold;
    grow_node(left, depth + 1);
    tree_.nodes[idx].right = static_cast<std::uint32_t>(tree_.nodes.size());
    grow_node(right, depth + 1);
  }

  const LabeledDataset& data_;
  const ForestParams& params_;
  Rng rng_;
  Tree tree_;
};

void check_params(const ForestParams& p) {
  if (p.n_trees < 1) throw Error(Errc::InvalidHyperparams, "n_trees must be >= 1");
  if (p.min_samples_leaf < 1) throw Error(Errc::InvalidHyperparams, "min_samples_leaf must be >= 1");
}

std::size_t resolve_features_per_split(std::size_t requested, std::size_t dimension) {
  if (requested == 0) {
    std::size_t k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dimension))));
    while (k * k < dimension) ++k;
    while (k > 0 && (k - 1) * (k - 1) >= dimension) --k;
    requested = k;
  }
  return std::clamp<std::size_t>(requested, 1, std::max<std::size_t>(dimension, 1));
}

}  // namespace

double entropy(const ClassCounts& counts) {
  const std::size_t n = total(counts);
  if (n == 0) throw Error(Errc::EmptySet, "entropy of an empty set");
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log2(p);
  }
  return h;
}

double split_gain(const ClassCounts& parent, const ClassCounts& left) {
  ClassCounts right{};
  for (std::size_t k = 0; k < kNumClasses; ++k) right[k] = parent[k] - left[k];
  const std::size_t n = total(parent), n_left = total(left), n_right = total(right);
  if (n_left == 0 || n_right == 0) return 0.0;
  const double nd = static_cast<double>(n);
  const double conditional = (static_cast<double>(n_left) / nd) * entropy(left) +
                             (static_cast<double>(n_right) / nd) * entropy(right);
  const double gain = entropy(parent) - conditional;
  return gain > kGainFloor ? gain : 0.0;
}

double information_gain(const LabeledDataset& data, std::size_t feature, double threshold) {
  if (data.empty()) throw Error(Errc::EmptySet, "information gain of an empty dataset");
  if (feature >= data.dimension()) throw Error(Errc::InvalidHyperparams, "feature index out of range");
  ClassCounts parent{}, left{};
  for (const auto& s : data.samples()) {
    ++parent[class_index(s.label)];
    if (s.counts[feature] <= threshold) ++left[class_index(s.label)];
  }
  return split_gain(parent, left);
}

Split best_split(const LabeledDataset& data, std::span<const std::size_t> rows,
                 std::span<const std::size_t> candidate_features, std::size_t min_samples_leaf) {
  auto s = find_split(data, rows, candidate_features, min_samples_leaf);
  if (!s) throw Error(Errc::NoUsefulSplit, "no candidate split has positive gain");
  return *s;
}

Split best_split(const LabeledDataset& data, std::span<const std::size_t> candidate_features) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return best_split(data, rows, candidate_features);
}

const TreeNode& Tree::leaf_for(std::span<const std::uint32_t> counts) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = counts[static_cast<std::size_t>(n.feature)] <= n.threshold ? i + 1 : n.right;
  }
  return nodes[i];
}

std::size_t Tree::depth() const {
  // Pre-order walk with an explicit stack of (node, depth).
  std::size_t deepest = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[i].is_leaf()) {
      stack.emplace_back(i + 1, d + 1);
      stack.emplace_back(nodes[i].right, d + 1);
    }
  }
  return deepest;
}

std::uint64_t tree_seed(std::uint64_t seed, std::size_t tree_index) noexcept {
  return seed ^ mix64(static_cast<std::uint64_t>(tree_index));
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t tree_index) {
  Rng rng(tree_seed(seed, tree_index));
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
  return rows;
}

RandomForestModel train_forest(const LabeledDataset& data, const ForestParams& params) {
  check_params(params);
  if (data.empty() || distinct_labels(data.class_counts()) < 2) {
    throw Error(Errc::SingleClassData, "training data needs at least two classes");
  }
  if (data.dimension() == 0) throw Error(Errc::InvalidHyperparams, "zero-dimensional features");

  RandomForestModel model;
  model.params = params;
  model.params.features_per_split = resolve_features_per_split(params.features_per_split, data.dimension());
  model.reference_fingerprint = data.reference_fingerprint();
  model.dimension = data.dimension();
  model.trees.resize(params.n_trees);

  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), params.n_trees);
  auto grow_range = [&](std::size_t first) {
    for (std::size_t t = first; t < params.n_trees; t += workers) {
      model.trees[t] = TreeGrower(data, model.params, tree_seed(params.seed, t)).grow();
    }
  };
  if (workers == 1) {
    grow_range(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(grow_range, w);
  }
  return model;
}

Proba predict_proba(const RandomForestModel& model, std::span<const std::uint32_t> counts) {
  if (counts.size() != model.dimension) {
    throw Error(Errc::FingerprintMismatch, "vector dimension " + std::to_string(counts.size()) +
                                               " != model dimension " + std::to_string(model.dimension));
  }
  Proba sum{};
  for (const auto& tree : model.trees) {
    const auto& leaf = tree.leaf_for(counts);
    for (std::size_t k = 0; k < kNumClasses; ++k) sum[k] += leaf.distribution[k];
  }
  const double n = static_cast<double>(model.trees.size());
  for (auto& v : sum) v /= n;
  return sum;
}

Proba predict_proba(const RandomForestModel& model, const FeatureVector& features) {
  if (features.reference_fingerprint != model.reference_fingerprint) {
    throw Error(Errc::FingerprintMismatch, "feature vector and model use different reference lists");
  }
  return predict_proba(model, std::span<const std::uint32_t>(features.counts));
}

Label argmax_label(const Proba& p) noexcept {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumClasses; ++k) {
    if (p[k] > p[best]) best = k;
  }
  return kClassOrder[best];
}

Label predict(const RandomForestModel& model, const FeatureVector& features) {
  return argmax_label(predict_proba(model, features));
}

std::vector<std::vector<std::size_t>> stratified_folds(const LabeledDataset& data, std::size_t k,
                                                       std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> folds(k);
  Rng rng(seed);
  std::size_t next = 0;
  for (auto label : kClassOrder) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].label == label) members.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(members));
    for (auto i : members) {
      folds[next].push_back(i);
      next = (next + 1) % k;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

CvTable cross_validate_n_trees(const LabeledDataset& data, std::span<const std::size_t> grid,
                               const ForestParams& base, std::size_t folds) {
  if (grid.empty()) throw Error(Errc::InvalidHyperparams, "empty n_trees grid");
  if (data.size() < folds || folds < 2) {
    throw Error(Errc::TooFewSamples, std::to_string(data.size()) + " samples for " +
                                         std::to_string(folds) + "-fold cross-validation");
  }
  std::vector<std::size_t> values(grid.begin(), grid.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  const auto assignment = stratified_folds(data, folds, mix64(base.seed ^ 0xc5f01d5ull));
  // Training/validation subsets are the same for every grid value.
  std::vector<LabeledDataset> train_parts, test_parts;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < folds; ++g) {
      if (g != f) train_idx.insert(train_idx.end(), assignment[g].begin(), assignment[g].end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    train_parts.push_back(data.subset(train_idx));
    test_parts.push_back(data.subset(assignment[f]));
  }

  CvTable table;
  double best_acc = -1.0;
  for (auto n_trees : values) {
    ForestParams p = base;
    p.n_trees = n_trees;
    double acc_sum = 0.0;
    std::size_t used = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      const auto& test = test_parts[f];
      if (test.empty()) continue;
      const auto& train = train_parts[f];
      std::size_t correct = 0;
      const auto cc = train.class_counts();
      if (distinct_labels(cc) < 2) {
        // A single-class training fold predicts its only class.
        const Label only = kClassOrder[static_cast<std::size_t>(
            std::max_element(cc.begin(), cc.end()) - cc.begin())];
        for (const auto& s : test.samples()) correct += s.label == only;
      } else {
        const auto model = train_forest(train, p);
        for (const auto& s : test.samples()) {
          correct += argmax_label(predict_proba(model, std::span<const std::uint32_t>(s.counts))) == s.label;
        }
      }
      acc_sum += static_cast<double>(correct) / static_cast<double>(test.size());
      ++used;
    }
    const double mean = acc_sum / static_cast<double>(used);
    table.mean_accuracy.emplace_back(n_trees, mean);
    if (mean > best_acc) {
      best_acc = mean;
      table.chosen = n_trees;
    }
  }
  return table;
}

std::size_t select_n_trees(const LabeledDataset& data, std::span<const std::size_t> grid,
                           const ForestParams& base) {
  return cross_validate_n_trees(data, grid, base).chosen;
}

double best_threshold_gain(const LabeledDataset& data, std::size_t feature) {
  if (data.empty()) throw Error(Errc::EmptySet, "gain over an empty dataset");
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const ClassCounts parent = count_labels(data, rows);
  std::vector<std::pair<std::uint32_t, std::uint8_t>> scratch;
  scratch.reserve(rows.size());
  const auto hit = sweep_feature(data, rows, feature, parent, 1, scratch);
  return hit ? hit->second : 0.0;
}

std::vector<RankedFeature> rank_features(std::span<const LabeledDataset> datasets) {
  if (datasets.empty()) return {};
  const auto& fp = datasets.front().reference_fingerprint();
  const std::size_t d = datasets.front().dimension();
  for (const auto& ds : datasets) {
    if (ds.reference_fingerprint() != fp || ds.dimension() != d) {
      throw Error(Errc::FingerprintMismatch, "datasets use different reference lists");
    }
  }
  std::vector<RankedFeature> ranked(d);
  for (std::size_t f = 0; f < d; ++f) {
    double sum = 0.0;
    for (const auto& ds : datasets) sum += best_threshold_gain(ds, f);
    ranked[f] = {f, sum / static_cast<double>(datasets.size())};
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedFeature& a, const RankedFeature& b) { return a.mean_gain > b.mean_gain; });
  return ranked;
}

// ---------------------------------------------------------------------------
// Model file

namespace {

using nlohmann::json;

constexpr std::string_view kModelFormat = "apiscan-random-forest";

[[noreturn]] void corrupt(const std::string& why) { throw Error(Errc::CorruptModel, why); }

json node_to_json(const TreeNode& n) {
  if (n.is_leaf()) return json{{"leaf", {n.distribution[0], n.distribution[1], n.distribution[2]}}};
  return json{{"feature", n.feature}, {"threshold", n.threshold}};
}

// Rebuilds `right` links from the pre-order sequence; returns one past the
// subtree rooted at `pos`.
std::size_t link_subtree(std::vector<TreeNode>& nodes, std::size_t pos, std::size_t depth) {
  if (pos >= nodes.size()) corrupt("tree node array is truncated");
  if (depth > nodes.size()) corrupt("tree is not finite");
  if (nodes[pos].is_leaf()) return pos + 1;
  const std::size_t right = link_subtree(nodes, pos + 1, depth + 1);
  nodes[pos].right = static_cast<std::uint32_t>(right);
  return link_subtree(nodes, right, depth + 1);
}

}  // namespace

std::string serialize_model(const RandomForestModel& model) {
  json hp{{"n_trees", model.params.n_trees},
          {"max_depth", model.params.max_depth ? json(*model.params.max_depth) : json(nullptr)},
          {"min_samples_leaf", model.params.min_samples_leaf},
          {"features_per_split", model.params.features_per_split},
          {"seed", model.params.seed}};
  json classes = json::array();
  for (auto l : kClassOrder) classes.push_back(label_name(l));
  json ranking = json::array();
  for (const auto& r : model.feature_ranking) ranking.push_back({r.index, r.mean_gain});
  json trees = json::array();
  for (const auto& t : model.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) nodes.push_back(node_to_json(n));
    trees.push_back(std::move(nodes));
  }
  json doc{{"format", kModelFormat},
           {"version", kModelFormatVersion},
           {"class_order", classes},
           {"reference_fingerprint", model.reference_fingerprint},
           {"feature_dimension", model.dimension},
           {"hyperparams", hp},
           {"feature_ranking", ranking},
           {"trees", trees}};
  return doc.dump(1) + "\n";
}

RandomForestModel parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    corrupt(std::string("unreadable model document: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != kModelFormat) corrupt("not a model document");
    if (!doc.at("version").is_number_integer()) corrupt("missing format version");
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(Errc::VersionMismatch, "model format version " + std::to_string(version) +
                                             ", this build reads " +
                                             std::to_string(kModelFormatVersion));
    }
    const auto& classes = doc.at("class_order");
    if (!classes.is_array() || classes.size() != kNumClasses) corrupt("bad class order");
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      if (classes[k].get<std::string>() != label_name(kClassOrder[k])) corrupt("unexpected class order");
    }

    RandomForestModel model;
    model.reference_fingerprint = doc.at("reference_fingerprint").get<std::string>();
    if (model.reference_fingerprint.size() != 16) corrupt("bad reference fingerprint");
    model.dimension = doc.at("feature_dimension").get<std::size_t>();
    const auto& hp = doc.at("hyperparams");
    model.params.n_trees = hp.at("n_trees").get<std::size_t>();
    if (!hp.at("max_depth").is_null()) model.params.max_depth = hp.at("max_depth").get<std::size_t>();
    model.params.min_samples_leaf = hp.at("min_samples_leaf").get<std::size_t>();
    model.params.features_per_split = hp.at("features_per_split").get<std::size_t>();
    model.params.seed = hp.at("seed").get<std::uint64_t>();

    for (const auto& r : doc.at("feature_ranking")) {
      const auto idx = r.at(0).get<std::size_t>();
      if (idx >= model.dimension) corrupt("feature ranking index out of range");
      model.feature_ranking.push_back({idx, r.at(1).get<double>()});
    }

    const auto& trees = doc.at("trees");
    if (!trees.is_array() || trees.size() != model.params.n_trees || trees.empty()) {
      corrupt("tree count disagrees with n_trees");
    }
    for (const auto& jt : trees) {
      Tree t;
      for (const auto& jn : jt) {
        TreeNode n;
        if (jn.contains("leaf")) {
          const auto& p = jn.at("leaf");
          if (p.size() != kNumClasses) corrupt("leaf distribution must have 3 entries");
          double sum = 0.0;
          for (std::size_t k = 0; k < kNumClasses; ++k) {
            n.distribution[k] = p[k].get<double>();
            if (!(n.distribution[k] >= 0.0)) corrupt("negative leaf probability");
            sum += n.distribution[k];
          }
          if (std::abs(sum - 1.0) > 1e-9) corrupt("leaf distribution does not sum to 1");
        } else {
          const auto f = jn.at("feature").get<std::int64_t>();
          if (f < 0 || static_cast<std::size_t>(f) >= model.dimension) corrupt("split feature out of range");
          n.feature = static_cast<std::int32_t>(f);
          n.threshold = jn.at("threshold").get<double>();
        }
        t.nodes.push_back(n);
      }
      if (link_subtree(t.nodes, 0, 0) != t.nodes.size()) corrupt("trailing nodes after tree");
      model.trees.push_back(std::move(t));
    }
    return model;
  } catch (const json::exception& e) {
    corrupt(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const RandomForestModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << serialize_model(model);
  if (!out) throw Error(Errc::IoFailure, "write error on " + path.string());
}

RandomForestModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

}  // namespace apiscan
