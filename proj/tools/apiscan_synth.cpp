// apiscan-synth: writes the shipped reference lists and synthetic demo corpora.

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "apiscan/invoke.hpp"
#include "apiscan/reference.hpp"
#include "corpus.hpp"
#include "dex_builder.hpp"
#include "zip_writer.hpp"

namespace fs = std::filesystem;
using namespace apiscan;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_corpus(const fs::path& dir, const std::vector<InvokeSample>& samples, bool apk) {
  fs::create_directories(dir / "samples");
  std::ofstream manifest(dir / "manifest.csv");
  manifest << "path,label,first_seen,family\n";
  std::uint64_t n = 0;
  for (const auto& s : samples) {
    const std::string name = "samples/" + s.id + (apk ? ".apk" : ".invokes");
    if (apk) {
      const std::vector<std::vector<std::uint8_t>> dex{testkit::dex_from_invokes(s.invokes, ++n)};
      write_file(dir / name, testkit::make_apk(dex));
    } else {
      write_file(dir / name, format_invoke_list(s.invokes));
    }
    manifest << name << ',' << label_name(s.label) << ',' << s.first_seen.iso() << ',' << s.family << '\n';
  }
  std::cerr << "apiscan-synth: wrote " << samples.size() << " samples to " << dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic corpora and reference lists"};
  app.require_subcommand(1);
  std::string out;
  std::size_t per_class = 100;
  std::uint64_t seed = 1;
  bool temporal = false, invokes = false;

  auto* ref = app.add_subcommand("reference", "write <out>/{package,class,method}.txt");
  ref->add_option("--out", out, "output directory")->required();

  auto* corpus = app.add_subcommand("corpus", "write a labeled corpus with manifest.csv");
  corpus->add_option("--out", out, "output directory")->required();
  corpus->add_option("--per-class", per_class, "samples per class")->capture_default_str();
  corpus->add_option("--seed", seed, "generator seed")->capture_default_str();
  corpus->add_flag("--temporal", temporal, "dated corpus with drifting ransomware (2017 quarters)");
  corpus->add_flag("--invokes", invokes, "write invoke lists instead of APKs");

  CLI11_PARSE(app, argc, argv);

  if (*ref) {
    fs::create_directories(out);
    for (auto g : {Granularity::Package, Granularity::Class, Granularity::Method}) {
      write_file(fs::path(out) / (std::string(granularity_name(g)) + ".txt"),
                 format_reference(testkit::universe_reference(g)));
    }
    return 0;
  }
  if (temporal) {
    testkit::TemporalCorpusOptions o;
    o.per_class_train = per_class;
    o.per_bin = std::max<std::size_t>(1, per_class / 4);
    o.seed = seed;
    write_corpus(out, testkit::temporal_corpus(o).samples, !invokes);
  } else {
    write_corpus(out, testkit::experiment_corpus({per_class, seed}), !invokes);
  }
  return 0;
}
