#include "apiscan/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <unordered_set>

#include "apiscan/error.hpp"
#include "apiscan/hash.hpp"
#include "apiscan/random.hpp"
#include "apiscan/version.hpp"

namespace apiscan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t choose_n_trees(const LabeledDataset& train, const EvalConfig& config) {
  if (config.n_trees_grid.empty()) throw Error(Errc::InvalidHyperparams, "empty n_trees grid");
  if (config.n_trees_grid.size() == 1) return config.n_trees_grid.front();
  return cross_validate_n_trees(train, config.n_trees_grid, config.forest, config.cv_folds).chosen;
}

}  // namespace

RocCurve roc_from_scores(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw Error(Errc::ConfigError, "scores and labels differ in length");
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t n_neg = positive.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error(Errc::MissingClass, "ROC needs both positive and negative samples");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({kInf, 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (positive[order[i]] ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({s, static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  return curve;
}

RocCurve roc_one_vs_benign(const RandomForestModel& model, const LabeledDataset& test,
                           Label positive_class) {
  if (positive_class == Label::Trusted) {
    throw Error(Errc::MissingClass, "positive class must be malware or ransomware");
  }
  if (test.reference_fingerprint() != model.reference_fingerprint) {
    throw Error(Errc::FingerprintMismatch, "test data and model use different reference lists");
  }
  std::vector<double> scores;
  // vector<bool> is not contiguous, so the flags live in a plain array.
  auto flags = std::make_unique<bool[]>(test.size());
  std::size_t n = 0;
  for (const auto& s : test.samples()) {
    if (s.label != positive_class && s.label != Label::Trusted) continue;
    scores.push_back(predict_proba(model, std::span<const std::uint32_t>(s.counts))[class_index(positive_class)]);
    flags[n++] = s.label == positive_class;
  }
  return roc_from_scores(scores, std::span<const bool>(flags.get(), n));
}

double operating_point(const RocCurve& curve, double target_fpr) {
  if (curve.points.empty()) throw Error(Errc::ConfigError, "empty ROC curve");
  std::optional<double> best;
  for (const auto& p : curve.points) {
    if (p.fpr <= target_fpr && (!best || p.threshold < *best)) best = p.threshold;
  }
  if (best) return *best;
  return std::max_element(curve.points.begin(), curve.points.end(),
                          [](const auto& a, const auto& b) { return a.threshold < b.threshold; })
      ->threshold;
}

double tpr_at_fpr(const RocCurve& curve, double target_fpr) {
  double best = 0.0;
  for (const auto& p : curve.points) {
    if (p.fpr <= target_fpr) best = std::max(best, p.tpr);
  }
  return best;
}

SplitIndices stratified_split(const LabeledDataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(Errc::ConfigError, "split fraction must be in (0, 1)");
  Rng rng(seed);
  SplitIndices out;
  for (auto label : kClassOrder) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].label == label) members.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(members));
    const std::size_t n = members.size();
    std::size_t n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

void assert_disjoint(const LabeledDataset& train, const LabeledDataset& test) {
  for (const auto& s : test.samples()) {
    if (train.contains(s.id)) throw Error(Errc::ConfigError, "sample '" + s.id + "' is in both partitions");
  }
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd m;
  if (values.empty()) return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

ExperimentReport random_split_eval(const LabeledDataset& data, double fraction, std::size_t repeats,
                                   std::uint64_t seed, const EvalConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  for (auto c : data.class_counts()) {
    if (c < 2) throw Error(Errc::TooFewSamples, "every class needs at least two samples");
  }
  if (repeats == 0) throw Error(Errc::ConfigError, "repeats must be >= 1");

  ExperimentReport report;
  report.protocol = "random-split";
  report.meta = {{"seed", std::to_string(seed)},
                 {"tool_version", std::string(kToolVersion)},
                 {"reference_fingerprint", data.reference_fingerprint()},
                 {"fraction", std::to_string(fraction)},
                 {"repeats", std::to_string(repeats)},
                 {"roc_averaging", "per-repeat curves; mean curve by vertical averaging of step tpr on fpr_grid"}};
  report.fpr_grid = config.fpr_grid;

  std::map<std::string, std::vector<double>> per_metric;
  std::map<std::string, std::vector<double>> tpr_sums;
  for (std::size_t r = 0; r < repeats; ++r) {
    const std::uint64_t repeat_seed = mix64(seed ^ mix64(0x5eed0000ull + r));
    const auto split = stratified_split(data, fraction, repeat_seed);
    const auto train = data.subset(split.train);
    const auto test = data.subset(split.test);
    assert_disjoint(train, test);

    EvalConfig cfg = config;
    cfg.forest.seed = mix64(repeat_seed + 1);
    ForestParams params = cfg.forest;
    params.n_trees = choose_n_trees(train, cfg);
    const auto model = train_forest(train, params);

    std::map<std::string, double> metrics{{"n_trees", static_cast<double>(params.n_trees)},
                                          {"train_size", static_cast<double>(train.size())},
                                          {"test_size", static_cast<double>(test.size())}};
    for (auto [name, label] : {std::pair{"ransomware_vs_trusted", Label::Ransomware},
                               std::pair{"malware_vs_trusted", Label::GenericMalware}}) {
      auto curve = roc_one_vs_benign(model, test, label);
      metrics[std::string(name) + ".tpr_at_1pct_fpr"] = tpr_at_fpr(curve, 0.01);
      auto& sums = tpr_sums[name];
      sums.resize(config.fpr_grid.size(), 0.0);
      for (std::size_t g = 0; g < config.fpr_grid.size(); ++g) sums[g] += tpr_at_fpr(curve, config.fpr_grid[g]);
      report.curves.push_back({r, name, std::move(curve)});
    }
    for (const auto& [k, v] : metrics) per_metric[k].push_back(v);
    report.repeats.push_back(std::move(metrics));
  }
  for (const auto& [k, values] : per_metric) report.summary[k] = mean_std(values);
  for (auto& [name, sums] : tpr_sums) {
    for (auto& v : sums) v /= static_cast<double>(repeats);
    report.mean_tpr[name] = sums;
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

void validate(const TemporalSplitSpec& spec) {
  for (const auto& b : spec.bins) {
    if (!(b.start > spec.d_tr)) {
      throw Error(Errc::ConfigError, "bin '" + b.label + "' starts on or before the training cutoff " +
                                         spec.d_tr.iso());
    }
    if (b.end < b.start) throw Error(Errc::ConfigError, "bin '" + b.label + "' ends before it starts");
  }
}

TemporalResult temporal_eval(const LabeledDataset& data, const TemporalSplitSpec& spec,
                             std::uint64_t seed, const EvalConfig& config) {
  validate(spec);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    if (s.label != Label::Ransomware || s.first_seen <= spec.d_tr) {
      train_idx.push_back(i);
    } else {
      test_idx.push_back(i);
    }
  }
  return temporal_eval(data.subset(train_idx), data.subset(test_idx), spec, seed, config);
}

TemporalResult temporal_eval(const LabeledDataset& train, const LabeledDataset& test,
                             const TemporalSplitSpec& spec, std::uint64_t seed,
                             const EvalConfig& config) {
  validate(spec);
  assert_disjoint(train, test);
  if (train.reference_fingerprint() != test.reference_fingerprint()) {
    throw Error(Errc::FingerprintMismatch, "train and test use different reference lists");
  }
  for (const auto& s : train.samples()) {
    if (s.label == Label::Ransomware && s.first_seen > spec.d_tr) {
      throw Error(Errc::ConfigError, "training ransomware '" + s.id + "' is newer than the cutoff");
    }
  }

  // 80/20 stratified hold-out fixes the operating point without touching test data.
  const std::uint64_t split_seed = mix64(seed ^ 0x7e3a11ull);
  const auto split = stratified_split(train, 0.8, split_seed);
  const auto fit = train.subset(split.train);
  const auto holdout = train.subset(split.test);

  EvalConfig cfg = config;
  cfg.forest.seed = mix64(seed + 1);
  ForestParams params = cfg.forest;
  params.n_trees = choose_n_trees(fit, cfg);
  const auto model = train_forest(fit, params);

  TemporalResult result;
  result.models_trained = 1;
  result.n_trees = params.n_trees;
  result.train_size = fit.size();
  const auto curve = roc_one_vs_benign(model, holdout, Label::Ransomware);
  result.threshold = operating_point(curve, 0.01);
  for (const auto& p : curve.points) {
    if (p.threshold == result.threshold) {
      result.holdout_fpr = p.fpr;
      result.holdout_tpr = p.tpr;
    }
  }

  for (const auto& bin : spec.bins) {
    BinResult br{bin.label, 0, 0, std::nullopt};
    for (const auto& s : test.samples()) {
      if (s.label != Label::Ransomware || s.first_seen < bin.start || s.first_seen > bin.end) continue;
      ++br.samples;
      const double score =
          predict_proba(model, std::span<const std::uint32_t>(s.counts))[class_index(Label::Ransomware)];
      if (score >= result.threshold) ++br.detected;
    }
    if (br.samples > 0) {
      br.detection_rate = static_cast<double>(br.detected) / static_cast<double>(br.samples);
    }
    result.bins.push_back(std::move(br));
  }
  return result;
}

ObfuscationResult obfuscation_eval(std::span<const InvokeSample> corpus, const ApiReferenceList& list,
                                   const ObfuscationTransform& t, bool plus_one, std::uint64_t seed,
                                   const EvalConfig& config) {
  std::vector<const InvokeSample*> ransomware;
  for (const auto& s : corpus) {
    if (s.label == Label::Ransomware) ransomware.push_back(&s);
  }
  if (ransomware.empty()) throw Error(Errc::EmptyBin, "no ransomware samples to transform");

  LabeledDataset train = to_dataset(corpus, list);
  const std::string suffix = "#" + std::string(obfuscation_name(t.kind));

  ObfuscationResult result;
  result.kind = t.kind;
  result.plus_one = plus_one;
  std::size_t injected = ransomware.size();
  if (plus_one) {
    Rng rng(mix64(seed ^ 0x1a1ull));
    injected = static_cast<std::size_t>(rng.below(ransomware.size()));
    const auto* src = ransomware[injected];
    result.injected_id = src->id + suffix;
    train.add(result.injected_id, extract_features(transform(src->invokes, t), list), src->label,
              src->first_seen, src->family);
  }

  LabeledDataset test(list.fingerprint(), list.size());
  for (std::size_t i = 0; i < ransomware.size(); ++i) {
    if (i == injected) continue;
    const auto* src = ransomware[i];
    test.add(src->id + suffix, extract_features(transform(src->invokes, t), list), src->label,
             src->first_seen, src->family);
  }
  if (test.empty()) throw Error(Errc::EmptyBin, "no transformed samples left to test");
  assert_disjoint(train, test);

  EvalConfig cfg = config;
  cfg.forest.seed = mix64(seed + 1);
  ForestParams params = cfg.forest;
  params.n_trees = choose_n_trees(train, cfg);
  const auto model = train_forest(train, params);

  result.samples = test.size();
  for (const auto& s : test.samples()) {
    const auto p = predict_proba(model, std::span<const std::uint32_t>(s.counts));
    result.detected += argmax_label(p) == Label::Ransomware;
  }
  result.detection_rate = static_cast<double>(result.detected) / static_cast<double>(result.samples);
  return result;
}

ExperimentReport temporal_report(const TemporalResult& result, const TemporalSplitSpec& spec) {
  ExperimentReport report;
  report.protocol = "temporal";
  report.meta = {{"tool_version", std::string(kToolVersion)},
                 {"d_tr", spec.d_tr.iso()},
                 {"operating_point", "1% FPR on a 20% stratified hold-out of the training partition"}};
  std::map<std::string, double> m{{"threshold", result.threshold},
                                  {"holdout_fpr", result.holdout_fpr},
                                  {"holdout_tpr", result.holdout_tpr},
                                  {"n_trees", static_cast<double>(result.n_trees)},
                                  {"train_size", static_cast<double>(result.train_size)}};
  for (const auto& b : result.bins) {
    m["bin." + b.label + ".samples"] = static_cast<double>(b.samples);
    m["bin." + b.label + ".detected"] = static_cast<double>(b.detected);
    if (b.detection_rate) {
      m["bin." + b.label + ".detection_rate"] = *b.detection_rate;
    } else {
      report.meta["bin." + b.label] = "EmptyBin";
    }
  }
  for (const auto& [k, v] : m) report.summary[k] = MeanStd{v, std::nullopt};
  report.repeats.push_back(std::move(m));
  return report;
}

ExperimentReport obfuscation_report(std::span<const ObfuscationResult> results) {
  ExperimentReport report;
  report.protocol = "obfuscation";
  report.meta = {{"tool_version", std::string(kToolVersion)}};
  for (const auto& r : results) {
    const std::string key = std::string(obfuscation_name(r.kind)) + (r.plus_one ? "+1" : "");
    std::map<std::string, double> m{{key + ".samples", static_cast<double>(r.samples)},
                                    {key + ".detected", static_cast<double>(r.detected)},
                                    {key + ".detection_rate", r.detection_rate}};
    for (const auto& [k, v] : m) report.summary[k] = MeanStd{v, std::nullopt};
    if (!r.injected_id.empty()) report.meta[key + ".injected"] = r.injected_id;
    report.repeats.push_back(std::move(m));
  }
  return report;
}

}  // namespace apiscan
