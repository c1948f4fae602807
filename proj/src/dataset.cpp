#include "apiscan/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

#include "apiscan/error.hpp"

namespace apiscan {

namespace {

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && leap(y) ? 29 : days[m - 1];
}

// Splits one CSV record; double quotes escape commas and quotes.
std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

}  // namespace

std::optional<Date> Date::parse(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  auto num = [&](std::size_t at, std::size_t len, int& out) {
    const auto [p, ec] = std::from_chars(iso.data() + at, iso.data() + at + len, out);
    return ec == std::errc{} && p == iso.data() + at + len;
  };
  Date d;
  if (!num(0, 4, d.year) || !num(5, 2, d.month) || !num(8, 2, d.day)) return std::nullopt;
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
    return std::nullopt;
  }
  return d;
}

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

void LabeledDataset::add(std::string id, const FeatureVector& features, Label label,
                         Date first_seen, std::string family) {
  if (features.reference_fingerprint != fingerprint_) {
    throw Error(Errc::FingerprintMismatch, "sample '" + id + "' uses a different reference list");
  }
  add(Sample{std::move(id), features.counts, label, first_seen, std::move(family)});
}

void LabeledDataset::add(Sample sample) {
  if (sample.counts.size() != dimension_) {
    throw Error(Errc::FingerprintMismatch, "sample '" + sample.id + "' has dimension " +
                                               std::to_string(sample.counts.size()));
  }
  if (!ids_.insert(sample.id).second) throw Error(Errc::DuplicateId, "duplicate id '" + sample.id + "'");
  samples_.push_back(std::move(sample));
}

std::array<std::size_t, kNumClasses> LabeledDataset::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& s : samples_) ++counts[class_index(s.label)];
  return counts;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out(fingerprint_, dimension_);
  out.samples_.reserve(indices.size());
  for (auto i : indices) out.add(samples_.at(i));
  return out;
}

LabeledDataset to_dataset(std::span<const InvokeSample> corpus, const ApiReferenceList& list) {
  LabeledDataset data(list.fingerprint(), list.size());
  for (const auto& s : corpus) {
    data.add(s.id, extract_features(s.invokes, list), s.label, s.first_seen, s.family);
  }
  return data;
}

std::vector<ManifestRow> load_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + manifest.string());
  const auto base = manifest.parent_path();
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_csv(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() < 3 || fields[0] != "path" || fields[1] != "label" ||
          fields[2] != "first_seen") {
        throw Error(Errc::MalformedLine, "manifest header must be path,label,first_seen[,family]",
                    line_no);
      }
      continue;
    }
    auto bad = [&](const std::string& why) {
      return Error(Errc::MalformedLine, "manifest line " + std::to_string(line_no) + ": " + why,
                   line_no);
    };
    if (fields.size() < 3 || fields.size() > 4) throw bad("expected 3 or 4 fields");
    ManifestRow row;
    row.line = line_no;
    row.id = fields[0];
    if (row.id.empty()) throw bad("empty path");
    std::filesystem::path p(fields[0]);
    row.path = p.is_absolute() ? p : base / p;
    const auto label = parse_label(fields[1]);
    if (!label) throw bad("unknown label '" + fields[1] + "'");
    row.label = *label;
    const auto date = Date::parse(fields[2]);
    if (!date) throw bad("bad date '" + fields[2] + "'");
    row.first_seen = *date;
    if (fields.size() == 4) row.family = fields[3];
    rows.push_back(std::move(row));
  }
  return rows;
}

LoadedCorpus load_corpus(std::span<const ManifestRow> rows, const DexOptions& options) {
  LoadedCorpus corpus;
  for (const auto& row : rows) {
    try {
      corpus.samples.push_back(InvokeSample{row.id, row.label, row.first_seen, row.family,
                                            load_sample_invokes(row.path, options)});
    } catch (const Error& e) {
      corpus.failures.push_back({row.path, e.what()});
    }
  }
  return corpus;
}

}  // namespace apiscan
