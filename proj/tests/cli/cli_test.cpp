#include <gtest/gtest.h>
#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "apiscan/invoke.hpp"
#include "dex_builder.hpp"
#include "fixtures.hpp"
#include "zip_writer.hpp"

namespace fs = std::filesystem;
using namespace apiscan;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() { return fs::temp_directory_path() / "apiscan_cli_test"; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Run run(const std::string& args) {
  const auto out = work_dir() / "stdout.txt", err = work_dir() / "stderr.txt";
  const std::string cmd = "cd '" + work_dir().string() + "' && '" APISCAN_CLI "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
}

InvokeSite call(const std::string& cls, const std::string& name, const std::string& proto) {
  return {InvokeKind::Virtual, "com/app/Main", {cls, name, proto}};
}

// Thirty-sample toy corpus: each class leans on its own handful of calls.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(work_dir());
    fs::create_directories(work_dir() / "apps");
    std::ofstream m(work_dir() / "toy.csv");
    m << "path,label,first_seen,family\n";
    for (int i = 0; i < 10; ++i) {
      const auto n = static_cast<std::size_t>(i + 1);
      std::vector<InvokeSite> trusted(n + 2, call("android/view/View", "setVisibility", "(I)V"));
      trusted.push_back(call("android/widget/Toast", "makeText", "(Landroid/content/Context;II)Landroid/widget/Toast;"));
      std::vector<InvokeSite> malware(n + 1, call("android/telephony/SmsManager", "sendTextMessage",
                                                  "(Ljava/lang/String;Ljava/lang/String;Ljava/lang/String;Landroid/app/PendingIntent;Landroid/app/PendingIntent;)V"));
      malware.push_back(call("android/view/View", "setVisibility", "(I)V"));
      std::vector<InvokeSite> ransom(1 + i % 2, call("android/app/admin/DevicePolicyManager", "lockNow", "()V"));
      ransom.push_back(call("android/app/admin/DevicePolicyManager", "resetPassword", "(Ljava/lang/String;I)Z"));
      if (i % 3 == 0) ransom.push_back(call("android/view/View", "setVisibility", "(I)V"));
      const std::string id = std::to_string(i);
      write_bytes(work_dir() / "apps" / ("trusted" + id + ".apk"),
                  testkit::make_apk(std::vector<std::vector<std::uint8_t>>{testkit::dex_from_invokes(trusted, n)}));
      save_invoke_list_text(work_dir() / "apps" / ("malware" + id + ".invokes"), malware);
      save_invoke_list_text(work_dir() / "apps" / ("ransom" + id + ".invokes"), ransom);
      m << "apps/trusted" << id << ".apk,trusted,2016-0" << 1 + i % 9 << "-01\n"
        << "apps/malware" << id << ".invokes,malware,2016-05-01\n"
        << "apps/ransom" << id << ".invokes,ransomware," << (i < 7 ? "2016-06-01" : "2017-02-01") << ",lock\n";
    }
    m.close();
    std::ofstream(work_dir() / "single.csv") << "path,label,first_seen\napps/malware0.invokes,malware,2016-01-01\n"
                                                "apps/malware1.invokes,malware,2016-01-01\n";
    std::ofstream(work_dir() / "toy-ref.txt") << "# granularity: method\n"
                                                 "android/app/admin/DevicePolicyManager;->lockNow\n"
                                                 "android/app/admin/DevicePolicyManager;->resetPassword\n"
                                                 "android/telephony/SmsManager;->sendTextMessage\n"
                                                 "android/view/View;->setVisibility\n"
                                                 "android/widget/Toast;->makeText\n"
                                                 "java/io/File;->delete\n";
    std::ofstream(work_dir() / "corrupt.apk") << "this is not an archive at all";
    const auto r = run("train --manifest toy.csv --reference toy-ref.txt --grid 5,25 --seed 3 --model toy.json");
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(work_dir()); }
};

}  // namespace

TEST_F(Cli, TrainEchoesChoiceAndIsDeterministic) {
  const auto r = run("train --manifest toy.csv --reference toy-ref.txt --grid 5,25 --seed 3 --model again.json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("chosen n_trees:"), std::string::npos);
  EXPECT_NE(r.out.find("n_trees,mean_accuracy"), std::string::npos);
  EXPECT_EQ(slurp(work_dir() / "again.json"), slurp(work_dir() / "toy.json"));
}

TEST_F(Cli, BenignScanExitsZero) {
  const auto r = run("scan --model toy.json --reference toy-ref.txt apps/trusted4.apk");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("trusted"), std::string::npos);
  EXPECT_NE(r.out.find("android/view/View;->setVisibility"), std::string::npos);
}

TEST_F(Cli, LockerListingIsRansomware) {
  const auto r = run("scan --model toy.json --reference toy-ref.txt '" + testkit::fixture_path("listing1.invokes").string() + "'");
  EXPECT_EQ(r.code, 11) << r.err;
  EXPECT_NE(r.out.find("ransomware"), std::string::npos);
  EXPECT_NE(r.out.find("DevicePolicyManager;->lockNow"), std::string::npos);
}

TEST_F(Cli, MalwareScanExitsTen) {
  const auto r = run("scan --model toy.json --reference toy-ref.txt --format csv apps/malware2.invokes");
  EXPECT_EQ(r.code, 10) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "path,label,trusted,malware,ransomware,evidence");
}

TEST_F(Cli, MultiFileOutputFollowsInputOrder) {
  const auto r = run("scan --model toy.json --reference toy-ref.txt apps/ransom1.invokes apps/trusted2.apk apps/malware3.invokes");
  EXPECT_EQ(r.code, 11);
  const auto a = r.out.find("apps/ransom1"), b = r.out.find("apps/trusted2"), c = r.out.find("apps/malware3");
  ASSERT_NE(c, std::string::npos);
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
}

TEST_F(Cli, CorruptApkIsParseFailure) {
  const auto r = run("scan --model toy.json --reference toy-ref.txt corrupt.apk");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("NotAZipArchive"), std::string::npos);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(Cli, ForeignReferenceIsFingerprintMismatch) {
  const auto r = run("scan --model toy.json --granularity class apps/trusted1.apk");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("FingerprintMismatch"), std::string::npos);
}

TEST_F(Cli, ReferenceEnvironmentDirectory) {
  fs::create_directories(work_dir() / "refs");
  fs::copy_file(work_dir() / "toy-ref.txt", work_dir() / "refs" / "method.txt", fs::copy_options::overwrite_existing);
  // The shipped method list is not the one the toy model was trained with.
  EXPECT_EQ(run("scan --model toy.json apps/trusted1.apk").code, 4);
  const auto r = run("scan --model toy.json apps/trusted1.apk; APISCAN_REFERENCE_DIR=refs '" APISCAN_CLI
                     "' scan --model toy.json --granularity method apps/trusted1.apk");
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(Cli, SingleClassManifestIsUsageError) {
  const auto r = run("train --manifest single.csv --grid 5");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("SingleClassData"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("scan").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("scan --model toy.json --granularity module apps/trusted1.apk").code, 2);
  EXPECT_EQ(run("eval-random --manifest toy.csv --format xml").code, 2);
  EXPECT_EQ(run("train --manifest toy.csv --grid 5,x").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, BinBeforeCutoffIsUsageError) {
  const auto r = run("eval-temporal --manifest toy.csv --d-tr 2016-12-31 --bin early:2016-10-01:2017-03-31");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("cutoff"), std::string::npos);
}

TEST_F(Cli, TemporalReport) {
  const auto r = run("eval-temporal --manifest toy.csv --reference toy-ref.txt --grid 10 --d-tr 2016-12-31 "
                     "--bin q1:2017-01-01:2017-03-31 --bin q2:2017-04-01:2017-06-30 --out temporal");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("q1\t"), std::string::npos);
  EXPECT_NE(r.out.find("EmptyBin"), std::string::npos);
  EXPECT_TRUE(fs::exists(work_dir() / "temporal" / "temporal.txt"));
}

TEST_F(Cli, PlusOneGivesTwoRates) {
  const auto r = run("eval-obfuscation --manifest toy.csv --reference toy-ref.txt --grid 10 --transform class-encryption "
                     "--plus-one --out obf");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 2u) << r.out;
  EXPECT_NE(rows[0].find("base"), std::string::npos);
  EXPECT_NE(rows[1].find("+1"), std::string::npos);
  const auto report = slurp(work_dir() / "obf" / "obfuscation.txt");
  EXPECT_NE(report.find("tool_version"), std::string::npos);
  EXPECT_NE(report.find("reference_fingerprint"), std::string::npos);
}

TEST_F(Cli, RandomSplitReportEmbedsProvenance) {
  const auto r = run("eval-random --manifest toy.csv --granularity class --grid 5 --seed 12 --format csv --out rnd");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("+-"), std::string::npos);
  const auto metrics = slurp(work_dir() / "rnd" / "random-split.metrics.csv");
  EXPECT_NE(metrics.find("meta,seed,12"), std::string::npos);
  EXPECT_NE(metrics.find("meta,repeats,5"), std::string::npos);
  EXPECT_NE(metrics.find("meta,tool_version"), std::string::npos);
  EXPECT_NE(metrics.find("meta,reference_fingerprint"), std::string::npos);
  EXPECT_TRUE(fs::exists(work_dir() / "rnd" / "random-split.csv"));
}

TEST_F(Cli, ExtractAndRank) {
  const auto e = run("extract --granularity package apps/malware0.invokes");
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(e.out.substr(0, 14), "id,label,andro");
  const auto r = run("rank --manifest toy.csv --reference toy-ref.txt --top 2");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("1,"), std::string::npos);
}
