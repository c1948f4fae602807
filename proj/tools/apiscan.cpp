// apiscan: System-API occurrence classifier command line.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "apiscan/dataset.hpp"
#include "apiscan/error.hpp"
#include "apiscan/eval.hpp"
#include "apiscan/features.hpp"
#include "apiscan/forest.hpp"
#include "apiscan/obfuscation.hpp"
#include "apiscan/reference.hpp"
#include "apiscan/version.hpp"

namespace fs = std::filesystem;
using namespace apiscan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;
constexpr int kExitFingerprint = 4;
constexpr int kExitMalware = 10;
constexpr int kExitRansomware = 11;

int exit_code_for(Errc c) {
  switch (c) {
    case Errc::FingerprintMismatch: return kExitFingerprint;
    case Errc::UsageError:
    case Errc::ConfigError:
    case Errc::SingleClassData:
    case Errc::InvalidHyperparams:
    case Errc::TooFewSamples:
    case Errc::EmptyBin:
    case Errc::MissingClass:
    case Errc::InvalidProjection:
      return kExitUsage;
    case Errc::IoFailure:
    case Errc::NotAZipArchive:
    case Errc::NoDexFound:
    case Errc::MalformedLine:
    case Errc::TruncatedEncoding:
    case Errc::Overlong:
    case Errc::InvalidSequence:
    case Errc::BadMagic:
    case Errc::UnsupportedVersion:
    case Errc::ChecksumMismatch:
    case Errc::StructuralError:
    case Errc::GranularityMismatch:
    case Errc::MalformedKey:
    case Errc::CorruptModel:
    case Errc::VersionMismatch:
    case Errc::DuplicateId:
      return kExitParse;
    default:
      return kExitFailure;
  }
}

void log(const std::string& msg) { std::cerr << "apiscan: " << msg << '\n'; }

struct Common {
  std::string granularity;
  std::string reference;
  std::string model;
  std::string manifest;
  std::uint64_t seed = 1;
  std::string format = "text";
  std::string out;
  bool strict_dex = false;
};

fs::path data_dir() {
  if (const char* env = std::getenv("APISCAN_DATA_DIR"); env && *env) return env;
  return APISCAN_DATA_DIR;
}

std::optional<Granularity> header_granularity(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const std::string tag = "# granularity:";
    if (line.rfind(tag, 0) == 0) {
      auto value = line.substr(tag.size());
      value.erase(0, value.find_first_not_of(' '));
      value.erase(value.find_last_not_of(" \r") + 1);
      return parse_granularity(value);
    }
    if (!line.empty() && line[0] != '#') break;
  }
  return std::nullopt;
}

// --reference wins; otherwise <APISCAN_REFERENCE_DIR or data/reference>/<granularity>.txt.
ApiReferenceList resolve_reference(const Common& c) {
  std::optional<Granularity> g;
  if (!c.granularity.empty()) {
    g = parse_granularity(c.granularity);
    if (!g) throw Error(Errc::UsageError, "unknown granularity '" + c.granularity + "'");
  }
  fs::path path;
  if (!c.reference.empty()) {
    path = c.reference;
    if (!g) g = header_granularity(path);
    if (!g) throw Error(Errc::GranularityMismatch, path.string() + " has no granularity header");
  } else {
    if (!g) g = Granularity::Method;
    fs::path dir = data_dir() / "reference";
    if (const char* env = std::getenv("APISCAN_REFERENCE_DIR"); env && *env) dir = env;
    path = dir / (std::string(granularity_name(*g)) + ".txt");
  }
  return load_reference(path, *g);
}

DexOptions dex_options(const Common& c) { return DexOptions{c.strict_dex}; }

LabeledDataset load_manifest_dataset(const Common& c, const ApiReferenceList& list,
                                     std::vector<InvokeSample>* keep = nullptr) {
  if (c.manifest.empty()) throw Error(Errc::UsageError, "--manifest is required");
  const auto rows = load_manifest(c.manifest);
  auto corpus = load_corpus(rows, dex_options(c));
  for (const auto& f : corpus.failures) log("skipped " + f.path.string() + ": " + f.message);
  if (!corpus.failures.empty()) {
    log(std::to_string(corpus.failures.size()) + " of " + std::to_string(rows.size()) + " samples skipped");
  }
  if (corpus.samples.empty()) throw Error(Errc::IoFailure, "no sample in the manifest could be read");
  auto data = to_dataset(corpus.samples, list);
  if (keep) *keep = std::move(corpus.samples);
  return data;
}

std::vector<std::size_t> parse_grid(const std::string& text) {
  std::vector<std::size_t> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size() || v == 0) throw std::invalid_argument(item);
      grid.push_back(v);
    } catch (const std::logic_error&) {
      throw Error(Errc::UsageError, "bad --grid value '" + item + "'");
    }
  }
  if (grid.empty()) throw Error(Errc::UsageError, "--grid is empty");
  return grid;
}

fs::path output_file(const Common& c, const std::string& stem, ReportFormat f) {
  const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
  fs::create_directories(dir);
  return dir / (stem + (f == ReportFormat::Csv ? ".csv" : ".txt"));
}

void stamp(ExperimentReport& r, const Common& c, const ApiReferenceList& list) {
  r.meta["seed"] = std::to_string(c.seed);
  r.meta["tool_version"] = std::string(kToolVersion);
  r.meta["reference_fingerprint"] = list.fingerprint();
  r.meta["granularity"] = std::string(granularity_name(list.granularity()));
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ------------------------------------------------------------------ scan

struct ScanResult {
  std::string path;
  std::optional<Proba> proba;
  std::vector<std::pair<std::string, std::uint32_t>> evidence;
  std::string error;
  int error_exit = 0;
};

ScanResult scan_one(const std::string& path, const RandomForestModel& model, const ApiReferenceList& list,
                    const DexOptions& opts, std::size_t top) {
  ScanResult r{path, std::nullopt, {}, {}, 0};
  try {
    const auto fv = extract_features(load_sample_invokes(path, opts), list);
    r.proba = predict_proba(model, fv);
    std::vector<std::size_t> order;
    for (const auto& rf : model.feature_ranking) order.push_back(rf.index);
    if (order.empty()) {
      for (std::size_t i = 0; i < fv.counts.size(); ++i) order.push_back(i);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv.counts[a] > fv.counts[b]; });
    }
    for (auto i : order) {
      if (r.evidence.size() >= top) break;
      if (i < fv.counts.size() && fv.counts[i] > 0) r.evidence.emplace_back(list.entries()[i], fv.counts[i]);
    }
  } catch (const Error& e) {
    r.error = e.what();
    r.error_exit = exit_code_for(e.code());
  }
  return r;
}

int cmd_scan(const Common& c, const std::vector<std::string>& apks, std::size_t top) {
  if (c.model.empty()) throw Error(Errc::UsageError, "--model is required");
  if (apks.empty()) throw Error(Errc::UsageError, "no input files");
  const auto format = parse_report_format(c.format);
  const auto model = load_model(c.model);
  const auto list = resolve_reference(c);
  if (model.reference_fingerprint != list.fingerprint()) {
    throw Error(Errc::FingerprintMismatch, "model was trained with reference " + model.reference_fingerprint +
                                               ", the loaded list is " + list.fingerprint());
  }
  const auto opts = dex_options(c);

  // Fan out per file, report in input order.
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<ScanResult> results(apks.size());
  for (std::size_t first = 0; first < apks.size(); first += workers) {
    std::vector<std::future<ScanResult>> batch;
    for (std::size_t i = first; i < std::min(apks.size(), first + workers); ++i) {
      batch.push_back(std::async(std::launch::async, scan_one, apks[i], std::cref(model), std::cref(list),
                                 std::cref(opts), top));
    }
    for (std::size_t k = 0; k < batch.size(); ++k) results[first + k] = batch[k].get();
  }

  int worst = kExitOk, failure = 0;
  if (format == ReportFormat::Csv) std::cout << "path,label,trusted,malware,ransomware,evidence\n";
  for (const auto& r : results) {
    if (!r.proba) {
      log(r.path + ": " + r.error);
      failure = std::max(failure, r.error_exit);
      continue;
    }
    const Label label = argmax_label(*r.proba);
    worst = std::max(worst, label == Label::Ransomware       ? kExitRansomware
                            : label == Label::GenericMalware ? kExitMalware
                                                             : kExitOk);
    const auto& p = *r.proba;
    if (format == ReportFormat::Csv) {
      std::string ev;
      for (const auto& [k, n] : r.evidence) ev += (ev.empty() ? "" : ";") + k + "=" + std::to_string(n);
      std::cout << r.path << ',' << label_name(label) << ',' << fixed(p[0]) << ',' << fixed(p[1]) << ','
                << fixed(p[2]) << ",\"" << ev << "\"\n";
    } else {
      std::cout << r.path << '\t' << label_name(label) << "\ttrusted=" << fixed(p[0]) << " malware=" << fixed(p[1])
                << " ransomware=" << fixed(p[2]) << '\n';
      for (const auto& [k, n] : r.evidence) std::cout << "  " << k << '\t' << n << '\n';
    }
  }
  return failure ? failure : worst;
}

// --------------------------------------------------------------- extract

int cmd_extract(const Common& c, const std::vector<std::string>& inputs) {
  const auto list = resolve_reference(c);
  std::vector<FeatureRow> rows;
  int status = kExitOk;
  if (!c.manifest.empty()) {
    std::vector<InvokeSample> samples;
    const auto data = load_manifest_dataset(c, list, &samples);
    for (std::size_t i = 0; i < data.size(); ++i) rows.push_back({data[i].id, data[i].label, data.features_of(i)});
  }
  for (const auto& path : inputs) {
    try {
      rows.push_back({path, Label::Trusted, extract_features(load_sample_invokes(path, dex_options(c)), list)});
    } catch (const Error& e) {
      log(path + ": " + e.what());
      status = exit_code_for(e.code());
    }
  }
  if (rows.empty() && inputs.empty() && c.manifest.empty()) throw Error(Errc::UsageError, "no inputs");
  if (c.out.empty()) {
    write_feature_csv(std::cout, list, rows);
  } else {
    fs::create_directories(c.out);
    std::ofstream out(fs::path(c.out) / "features.csv");
    write_feature_csv(out, list, rows);
    log("wrote " + (fs::path(c.out) / "features.csv").string());
  }
  return status;
}

// ----------------------------------------------------------------- train

int cmd_train(const Common& c, const std::string& grid_text, std::size_t folds) {
  const auto list = resolve_reference(c);
  const auto data = load_manifest_dataset(c, list);
  const auto grid = parse_grid(grid_text);
  ForestParams base;
  base.seed = c.seed;
  std::size_t chosen = grid.front();
  if (grid.size() > 1) {
    const auto table = cross_validate_n_trees(data, grid, base, folds);
    chosen = table.chosen;
    std::cout << "n_trees,mean_accuracy\n";
    for (const auto& [n, acc] : table.mean_accuracy) std::cout << n << ',' << fixed(acc) << '\n';
  }
  ForestParams params = base;
  params.n_trees = chosen;
  auto model = train_forest(data, params);
  const std::vector<LabeledDataset> sets{data};
  model.feature_ranking = rank_features(sets);
  const fs::path path = !c.model.empty() ? fs::path(c.model)
                                         : (c.out.empty() ? fs::path(".") : fs::path(c.out)) / "model.json";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_model(model, path);
  std::cout << "chosen n_trees: " << chosen << '\n';
  log("trained on " + std::to_string(data.size()) + " samples, model written to " + path.string());
  return kExitOk;
}

// ------------------------------------------------------------------ eval

int cmd_eval_random(const Common& c, const std::string& grid_text, std::size_t repeats, double fraction) {
  const auto format = parse_report_format(c.format);
  const auto list = resolve_reference(c);
  const auto data = load_manifest_dataset(c, list);
  EvalConfig cfg;
  cfg.n_trees_grid = parse_grid(grid_text);
  auto report = random_split_eval(data, fraction, repeats, c.seed, cfg);
  stamp(report, c, list);
  const auto path = output_file(c, "random-split", format);
  emit_report(report, format, path);
  for (const auto& [k, v] : report.summary) {
    std::cout << k << '\t' << fixed(v.mean) << (v.stddev ? " +- " + fixed(*v.stddev) : "") << '\n';
  }
  log("report written to " + path.string());
  return kExitOk;
}

TemporalBin parse_bin(const std::string& text) {
  // label:YYYY-MM-DD:YYYY-MM-DD
  const auto a = text.find(':');
  const auto b = text.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) {
    throw Error(Errc::UsageError, "--bin expects label:start:end, got '" + text + "'");
  }
  const auto start = Date::parse(text.substr(a + 1, b - a - 1));
  const auto end = Date::parse(text.substr(b + 1));
  if (!start || !end) throw Error(Errc::UsageError, "bad date in --bin '" + text + "'");
  return {text.substr(0, a), *start, *end};
}

int cmd_eval_temporal(const Common& c, const std::string& d_tr, const std::vector<std::string>& bins,
                      const std::string& grid_text) {
  const auto format = parse_report_format(c.format);
  TemporalSplitSpec spec;
  const auto cutoff = Date::parse(d_tr);
  if (!cutoff) throw Error(Errc::UsageError, "bad --d-tr date '" + d_tr + "'");
  spec.d_tr = *cutoff;
  if (bins.empty()) throw Error(Errc::UsageError, "at least one --bin is required");
  for (const auto& b : bins) spec.bins.push_back(parse_bin(b));
  try {
    validate(spec);
  } catch (const Error& e) {
    throw Error(Errc::UsageError, e.what());
  }
  const auto list = resolve_reference(c);
  const auto data = load_manifest_dataset(c, list);
  EvalConfig cfg;
  cfg.n_trees_grid = parse_grid(grid_text);
  const auto result = temporal_eval(data, spec, c.seed, cfg);
  auto report = temporal_report(result, spec);
  stamp(report, c, list);
  const auto path = output_file(c, "temporal", format);
  emit_report(report, format, path);
  std::cout << "threshold\t" << fixed(result.threshold) << "\tholdout_fpr " << fixed(result.holdout_fpr)
            << "\tholdout_tpr " << fixed(result.holdout_tpr) << '\n';
  for (const auto& b : result.bins) {
    std::cout << b.label << '\t' << b.detected << '/' << b.samples << '\t'
              << (b.detection_rate ? fixed(*b.detection_rate) : std::string("EmptyBin")) << '\n';
  }
  log("report written to " + path.string());
  return kExitOk;
}

int cmd_eval_obfuscation(const Common& c, const std::vector<std::string>& kinds, bool plus_one,
                         const std::string& stub_dir, const std::string& grid_text) {
  const auto format = parse_report_format(c.format);
  const auto list = resolve_reference(c);
  std::vector<InvokeSample> corpus;
  load_manifest_dataset(c, list, &corpus);
  EvalConfig cfg;
  cfg.n_trees_grid = parse_grid(grid_text);
  const fs::path stubs = stub_dir.empty() ? data_dir() / "stubs" : fs::path(stub_dir);
  std::vector<ObfuscationResult> results;
  for (const auto& name : kinds) {
    const auto kind = parse_obfuscation(name);
    if (!kind) throw Error(Errc::UsageError, "unknown transform '" + name + "'");
    const auto t = load_transform(*kind, stubs, c.seed);
    results.push_back(obfuscation_eval(corpus, list, t, false, c.seed, cfg));
    if (plus_one) results.push_back(obfuscation_eval(corpus, list, t, true, c.seed, cfg));
  }
  auto report = obfuscation_report(results);
  stamp(report, c, list);
  const auto path = output_file(c, "obfuscation", format);
  emit_report(report, format, path);
  for (const auto& r : results) {
    std::cout << obfuscation_name(r.kind) << (r.plus_one ? "\t+1  " : "\tbase") << '\t' << r.detected << '/'
              << r.samples << '\t' << fixed(r.detection_rate) << '\n';
  }
  log("report written to " + path.string());
  return kExitOk;
}

// ------------------------------------------------------------------ rank

int cmd_rank(const Common& c, std::size_t top) {
  const auto list = resolve_reference(c);
  const std::vector<LabeledDataset> sets{load_manifest_dataset(c, list)};
  const auto ranking = rank_features(sets);
  std::cout << "rank,key,mean_gain\n";
  for (std::size_t i = 0; i < ranking.size() && i < top; ++i) {
    std::cout << i + 1 << ',' << list.entries()[ranking[i].index] << ',' << fixed(ranking[i].mean_gain, 6) << '\n';
  }
  return kExitOk;
}

int cmd_model_info(const Common& c) {
  if (c.model.empty()) throw Error(Errc::UsageError, "--model is required");
  const auto m = load_model(c.model);
  std::size_t nodes = 0, deepest = 0;
  for (const auto& t : m.trees) {
    nodes += t.nodes.size();
    deepest = std::max(deepest, t.depth());
  }
  std::cout << "format_version\t" << kModelFormatVersion << '\n'
            << "reference_fingerprint\t" << m.reference_fingerprint << '\n'
            << "feature_dimension\t" << m.dimension << '\n'
            << "n_trees\t" << m.trees.size() << '\n'
            << "features_per_split\t" << m.params.features_per_split << '\n'
            << "max_depth\t" << (m.params.max_depth ? std::to_string(*m.params.max_depth) : "unlimited") << '\n'
            << "min_samples_leaf\t" << m.params.min_samples_leaf << '\n'
            << "seed\t" << m.params.seed << '\n'
            << "total_nodes\t" << nodes << '\n'
            << "deepest_tree\t" << deepest << '\n'
            << "ranked_features\t" << m.feature_ranking.size() << '\n';
  return kExitOk;
}

void add_common(CLI::App* sub, Common& c, bool model, bool manifest) {
  sub->add_option("--granularity", c.granularity, "package | class | method");
  sub->add_option("--reference", c.reference, "reference list file (overrides --granularity default)");
  if (model) sub->add_option("--model", c.model, "model file");
  if (manifest) sub->add_option("--manifest", c.manifest, "CSV manifest: path,label,first_seen[,family]");
  sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
  sub->add_option("--format", c.format, "csv | text")->capture_default_str();
  sub->add_option("--out", c.out, "output directory");
  sub->add_flag("--strict-dex", c.strict_dex, "verify DEX checksums");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"System-API occurrence classifier for Android packages"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  Common c;
  std::vector<std::string> inputs, bins, transforms{"string-encryption", "class-encryption"};
  std::string grid = "10,50,100", d_tr = "2016-12-31", stub_dir;
  std::size_t top = 10, repeats = 5, folds = 10;
  double fraction = 0.5;
  bool plus_one = false;

  auto* scan = app.add_subcommand("scan", "classify application packages");
  add_common(scan, c, true, false);
  scan->add_option("apks", inputs, "apk, dex or invoke-list files")->required();
  scan->add_option("--top", top, "evidence lines per file")->capture_default_str();

  auto* extract = app.add_subcommand("extract", "write feature vectors as CSV");
  add_common(extract, c, false, true);
  extract->add_option("inputs", inputs, "sample files");

  auto* train = app.add_subcommand("train", "cross-validate n_trees and train a model");
  add_common(train, c, true, true);
  train->add_option("--grid", grid, "comma-separated n_trees candidates")->capture_default_str();
  train->add_option("--folds", folds, "cross-validation folds")->capture_default_str();

  auto* eval_random = app.add_subcommand("eval-random", "repeated stratified split evaluation");
  add_common(eval_random, c, false, true);
  eval_random->add_option("--grid", grid, "comma-separated n_trees candidates")->capture_default_str();
  eval_random->add_option("--repeats", repeats, "number of splits")->capture_default_str();
  eval_random->add_option("--fraction", fraction, "training share per class")->capture_default_str();

  auto* eval_temporal = app.add_subcommand("eval-temporal", "train before a cutoff, test on later bins");
  add_common(eval_temporal, c, false, true);
  eval_temporal->add_option("--d-tr", d_tr, "training cutoff date")->capture_default_str();
  eval_temporal->add_option("--bin", bins, "test bin label:start:end (repeatable)");
  eval_temporal->add_option("--grid", grid, "comma-separated n_trees candidates")->capture_default_str();

  auto* eval_obf = app.add_subcommand("eval-obfuscation", "detection of transformed ransomware");
  add_common(eval_obf, c, false, true);
  eval_obf->add_option("--transform", transforms, "string-encryption | resource-encryption | class-encryption")
      ->capture_default_str();
  eval_obf->add_flag("--plus-one", plus_one, "also train with one transformed sample");
  eval_obf->add_option("--stub-dir", stub_dir, "directory of <transform>.invokes stubs");
  eval_obf->add_option("--grid", grid, "comma-separated n_trees candidates")->capture_default_str();

  auto* rank = app.add_subcommand("rank", "rank features by information gain");
  add_common(rank, c, false, true);
  rank->add_option("--top", top, "rows to print")->capture_default_str();

  auto* info = app.add_subcommand("model-info", "describe a model file");
  add_common(info, c, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*scan) return cmd_scan(c, inputs, top);
    if (*extract) return cmd_extract(c, inputs);
    if (*train) return cmd_train(c, grid, folds);
    if (*eval_random) return cmd_eval_random(c, grid, repeats, fraction);
    if (*eval_temporal) return cmd_eval_temporal(c, d_tr, bins, grid);
    if (*eval_obf) return cmd_eval_obfuscation(c, transforms, plus_one, stub_dir, grid);
    if (*rank) return cmd_rank(c, top);
    if (*info) return cmd_model_info(c);
  } catch (const Error& e) {
    log(e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    log(e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
