#include <gtest/gtest.h>

#include <sstream>

#include "apiscan/error.hpp"
#include "apiscan/features.hpp"
#include "corpus.hpp"
#include "dex_builder.hpp"
#include "zip_writer.hpp"

using namespace apiscan;

namespace {

std::vector<InvokeSite> random_sites(Rng& rng, std::size_t n) {
  const auto& universe = testkit::api_universe();
  std::vector<InvokeSite> sites;
  for (std::size_t i = 0; i < n; ++i) {
    InvokeSite s;
    s.kind = static_cast<InvokeKind>(rng.below(10));
    s.caller_class = rng.below(2) ? "com/app/Main" : "androidx/core/Util";
    if (rng.below(6) == 0) {
      s.target = {"com/app/Helper", "go", "()V"};
    } else {
      s.target = universe[rng.below(universe.size())];
    }
    sites.push_back(s);
  }
  return sites;
}

}  // namespace

TEST(Features, CountsTheListingExample) {
  const ApiReferenceList list(Granularity::Method, {"android/app/admin/DevicePolicyManager;->lockNow",
                                                    "android/app/admin/DevicePolicyManager;->resetPassword",
                                                    "java/io/File;->delete"});
  const std::vector<InvokeSite> sites = {
      {InvokeKind::Virtual, "com/locker/W", {"android/app/admin/DevicePolicyManager", "lockNow", "()V"}},
      {InvokeKind::Virtual, "com/locker/W", {"android/app/admin/DevicePolicyManager", "lockNow", "()V"}},
      {InvokeKind::Virtual, "", {"android/app/admin/DevicePolicyManager", "resetPassword", "(Ljava/lang/String;I)Z"}},
      {InvokeKind::Static, "com/locker/W", {"com/locker/Util", "x", "()V"}},
  };
  const auto fv = extract_features(sites, list);
  EXPECT_EQ(fv.counts, (std::vector<std::uint32_t>{2, 1, 0}));
  EXPECT_EQ(fv.reference_fingerprint, list.fingerprint());
}

TEST(Features, EmptyInputGivesZeroVector) {
  const auto list = testkit::universe_reference(Granularity::Class);
  const auto fv = extract_features(std::span<const InvokeSite>{}, list);
  EXPECT_EQ(fv.counts, std::vector<std::uint32_t>(list.size(), 0));
}

TEST(Features, AdditiveAndOrderFree) {
  Rng rng(17);
  for (auto g : {Granularity::Package, Granularity::Class, Granularity::Method}) {
    const auto list = testkit::universe_reference(g);
    for (int round = 0; round < 100; ++round) {
      auto a = random_sites(rng, rng.below(60));
      const auto b = random_sites(rng, rng.below(60));
      auto joined = a;
      joined.insert(joined.end(), b.begin(), b.end());
      const auto fa = extract_features(a, list), fb = extract_features(b, list);
      auto fj = extract_features(joined, list);
      for (std::size_t i = 0; i < list.size(); ++i) ASSERT_EQ(fj.counts[i], fa.counts[i] + fb.counts[i]);
      rng.shuffle(std::span<InvokeSite>(joined));
      ASSERT_EQ(extract_features(joined, list), fj);
    }
  }
}

TEST(Features, CoarserCountsDominate) {
  Rng rng(23);
  const auto method = testkit::universe_reference(Granularity::Method);
  const auto pkg = project(method, Granularity::Package);
  for (int round = 0; round < 50; ++round) {
    const auto sites = random_sites(rng, 80);
    const auto fm = extract_features(sites, method);
    const auto fp = extract_features(sites, pkg);
    std::vector<std::uint32_t> rolled(pkg.size(), 0);
    for (std::size_t i = 0; i < method.size(); ++i) {
      const auto& k = method.entries()[i];
      const auto c = k.substr(0, k.find(";->"));
      rolled[*pkg.index_of(c.substr(0, c.rfind('/')))] += fm.counts[i];
    }
    // Every generated target is in the universe or outside every framework package.
    ASSERT_EQ(rolled, fp.counts);
  }
}

TEST(Features, DescriptorModeSeparatesOverloads) {
  const ApiReferenceList list(Granularity::Method,
                              {"java/io/FileOutputStream;->write([B)V", "java/io/FileOutputStream;->write(I)V"}, 25,
                              true);
  const std::vector<InvokeSite> sites = {{InvokeKind::Virtual, "", {"java/io/FileOutputStream", "write", "([B)V"}},
                                         {InvokeKind::Virtual, "", {"java/io/FileOutputStream", "write", "([B)V"}},
                                         {InvokeKind::Virtual, "", {"java/io/FileOutputStream", "write", "([BII)V"}}};
  // Sorted entries: "write(I)V" comes before "write([B)V".
  EXPECT_EQ(extract_features(sites, list).counts, (std::vector<std::uint32_t>{0, 2}));
}

TEST(Features, AccumulateRejectsForeignVector) {
  const auto list = testkit::universe_reference(Granularity::Class);
  const auto dex = parse_dex(testkit::random_dex(4).bytes);
  FeatureVector fv{std::vector<std::uint32_t>(list.size(), 0), "0000000000000000"};
  try {
    accumulate_features(dex, list, fv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::FingerprintMismatch);
  }
}

TEST(Features, AccumulateSaturates) {
  const ApiReferenceList list(Granularity::Class, {"java/io/File"});
  const std::vector<InvokeSite> sites = {{InvokeKind::Virtual, "com/a/B", {"java/io/File", "delete", "()Z"}}};
  const auto dex = parse_dex(testkit::dex_from_invokes(sites));
  FeatureVector fv{{kCountCeiling - 1}, list.fingerprint()};
  accumulate_features(dex, list, fv);
  EXPECT_EQ(fv.counts[0], kCountCeiling);
  accumulate_features(dex, list, fv);
  EXPECT_EQ(fv.counts[0], kCountCeiling);
}

TEST(Features, ApkSumsAcrossDexFiles) {
  Rng rng(31);
  const auto list = testkit::universe_reference(Granularity::Method);
  const auto a = random_sites(rng, 40), b = random_sites(rng, 25);
  const std::vector<std::vector<std::uint8_t>> files{testkit::dex_from_invokes(a, 1), testkit::dex_from_invokes(b, 2)};
  const auto apk = open_apk(MemorySource(testkit::make_apk(files)));
  auto all = a;
  all.insert(all.end(), b.begin(), b.end());
  EXPECT_EQ(extract_features(apk, list), extract_features(all, list));
  EXPECT_EQ(invokes_from_apk(apk).size(), all.size());
}

TEST(Features, CsvLayout) {
  const ApiReferenceList list(Granularity::Package, {"java/io", "android/os"});
  const std::vector<FeatureRow> rows = {{"app one", Label::Ransomware, {{3, 0}, list.fingerprint()}}};
  std::ostringstream out;
  write_feature_csv(out, list, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "id,label,android/os,java/io");
  EXPECT_NE(out.str().find("ransomware,3,0"), std::string::npos);
}
