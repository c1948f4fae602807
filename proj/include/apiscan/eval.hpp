#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apiscan/dataset.hpp"
#include "apiscan/forest.hpp"
#include "apiscan/obfuscation.hpp"
#include "apiscan/reference.hpp"

namespace apiscan {

// ---------------------------------------------------------------- ROC

struct RocPoint {
  double threshold;  // predict positive iff score >= threshold
  double fpr;
  double tpr;
  bool operator==(const RocPoint&) const = default;
};

// Descending thresholds. The first point has threshold +inf (nothing flagged),
// the last is the lowest score (everything flagged, fpr = tpr = 1).
struct RocCurve {
  std::vector<RocPoint> points;
  bool operator==(const RocCurve&) const = default;
};

// MissingClass when there is no positive or no negative sample.
RocCurve roc_from_scores(std::span<const double> scores, std::span<const bool> positive);

// Scores are the model's probability for `positive_class`; the population is
// that class plus Trusted, so the third class never enters the sweep.
RocCurve roc_one_vs_benign(const RandomForestModel& model, const LabeledDataset& test,
                           Label positive_class);

// Lowest threshold whose fpr <= target (the highest-tpr admissible point);
// the highest threshold when no point qualifies.
double operating_point(const RocCurve& curve, double target_fpr = 0.01);

// Largest tpr among points with fpr <= target, 0 if none.
double tpr_at_fpr(const RocCurve& curve, double target_fpr);

// --------------------------------------------------------------- splits

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per class, round(n * fraction) samples go to train, clamped so both sides
// keep at least one sample of every class that has two or more.
SplitIndices stratified_split(const LabeledDataset& data, double fraction, std::uint64_t seed);

// ConfigError when the id sets of the two partitions intersect.
void assert_disjoint(const LabeledDataset& train, const LabeledDataset& test);

// -------------------------------------------------------------- reports

struct MeanStd {
  double mean = 0.0;
  std::optional<double> stddev;  // sample std-dev, present when n > 1
  bool operator==(const MeanStd&) const = default;
};

MeanStd mean_std(std::span<const double> values);

struct NamedCurve {
  std::size_t repeat = 0;
  std::string name;
  RocCurve curve;
  bool operator==(const NamedCurve&) const = default;
};

struct ExperimentReport {
  std::string protocol;
  std::map<std::string, std::string> meta;                // seed, version, fingerprint, notes
  std::vector<std::map<std::string, double>> repeats;     // per-repeat metrics
  std::map<std::string, MeanStd> summary;
  std::vector<NamedCurve> curves;
  std::vector<double> fpr_grid;                           // vertical ROC averaging grid
  std::map<std::string, std::vector<double>> mean_tpr;    // curve name -> mean tpr on grid
  double runtime_seconds = 0.0;

  bool operator==(const ExperimentReport&) const = default;
};

enum class ReportFormat { Csv, Text };
// UsageError for anything but "csv" or "text".
ReportFormat parse_report_format(std::string_view token);

// Csv writes one row per ROC point to `path` and the metric tables to the
// sibling "<stem>.metrics.csv". Text writes one structured document.
void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path);
std::string report_to_text(const ExperimentReport& report);
ExperimentReport report_from_text(std::string_view text);
std::string roc_points_csv(const ExperimentReport& report);

// ------------------------------------------------------------ protocols

struct EvalConfig {
  ForestParams forest;
  std::vector<std::size_t> n_trees_grid{10, 50, 100};  // one value skips cross-validation
  std::size_t cv_folds = 10;
  std::vector<double> fpr_grid{0.0, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
};

// Repeated stratified splits; per repeat n_trees is chosen by CV on the
// training part and two curves are recorded: ransomware-vs-trusted and
// malware-vs-trusted. TooFewSamples unless every class has >= 2 samples.
ExperimentReport random_split_eval(const LabeledDataset& data, double fraction, std::size_t repeats,
                                   std::uint64_t seed, const EvalConfig& config = {});

struct TemporalBin {
  std::string label;
  Date start;
  Date end;  // inclusive
};

struct TemporalSplitSpec {
  Date d_tr;
  std::vector<TemporalBin> bins;
};

// ConfigError unless every bin starts after d_tr and start <= end.
void validate(const TemporalSplitSpec& spec);

struct BinResult {
  std::string label;
  std::size_t samples = 0;
  std::size_t detected = 0;
  std::optional<double> detection_rate;  // empty bin -> nullopt
};

struct TemporalResult {
  double threshold = 0.0;      // ransomware score at the 1%-FPR point of the hold-out curve
  double holdout_fpr = 0.0;
  double holdout_tpr = 0.0;
  std::size_t n_trees = 0;
  std::size_t train_size = 0;
  std::size_t models_trained = 0;
  std::vector<BinResult> bins;
};

// Training = all trusted and malware plus ransomware first seen <= d_tr;
// test = ransomware first seen after d_tr, binned by date.
TemporalResult temporal_eval(const LabeledDataset& data, const TemporalSplitSpec& spec,
                             std::uint64_t seed, const EvalConfig& config = {});
// Explicit partitions; ConfigError when a test id also appears in training.
TemporalResult temporal_eval(const LabeledDataset& train, const LabeledDataset& test,
                             const TemporalSplitSpec& spec, std::uint64_t seed,
                             const EvalConfig& config = {});

struct ObfuscationResult {
  ObfuscationKind kind = ObfuscationKind::Identity;
  bool plus_one = false;
  std::size_t samples = 0;
  std::size_t detected = 0;
  double detection_rate = 0.0;
  std::string injected_id;  // the transformed sample added to training, if any
};

// Trains on the original corpus (plus one transformed ransomware sample when
// `plus_one`) and reports the share of transformed ransomware labelled
// Ransomware. EmptyBin when there is no ransomware to transform.
ObfuscationResult obfuscation_eval(std::span<const InvokeSample> corpus, const ApiReferenceList& list,
                                   const ObfuscationTransform& transform, bool plus_one,
                                   std::uint64_t seed, const EvalConfig& config = {});

ExperimentReport temporal_report(const TemporalResult& result, const TemporalSplitSpec& spec);
ExperimentReport obfuscation_report(std::span<const ObfuscationResult> results);

}  // namespace apiscan
