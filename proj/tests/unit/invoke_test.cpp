#include <gtest/gtest.h>

#include <sstream>

#include "apiscan/error.hpp"
#include "apiscan/invoke.hpp"
#include "apiscan/random.hpp"
#include "fixtures.hpp"

using namespace apiscan;

namespace {

std::vector<InvokeSite> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_invoke_list(in);
}

std::size_t malformed_line(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MalformedLine);
    return e.line();
  }
  ADD_FAILURE() << "accepted: " << text;
  return 0;
}

}  // namespace

TEST(InvokeKind, OpcodesMapBothWays) {
  for (std::uint8_t op = 0x6e; op <= 0x78; ++op) {
    const auto k = invoke_kind_from_opcode(op);
    if (op == 0x73) {
      EXPECT_FALSE(k);
      continue;
    }
    ASSERT_TRUE(k) << int(op);
    EXPECT_EQ(opcode_of(*k), op);
    EXPECT_EQ(parse_kind_token(kind_token(*k)), k);
  }
  for (int op : {0xfa, 0xfb, 0xfc, 0xfd, 0x00, 0x6d, 0x79}) EXPECT_FALSE(invoke_kind_from_opcode(op));
}

TEST(ClassDescriptor, Normalization) {
  EXPECT_EQ(normalize_class_descriptor("Ljava/io/File;"), "java/io/File");
  EXPECT_EQ(normalize_class_descriptor("[Ljava/lang/String;"), "java/lang/String");
  EXPECT_EQ(normalize_class_descriptor("[[Ljava/lang/Object;"), "java/lang/Object");
  EXPECT_FALSE(normalize_class_descriptor("[I"));
  EXPECT_FALSE(normalize_class_descriptor("I"));
  EXPECT_FALSE(normalize_class_descriptor("Ljava/io/File"));
  EXPECT_FALSE(normalize_class_descriptor(""));
}

TEST(MethodSignature, ParseAndFormat) {
  const auto ref = parse_method_signature("Landroid/app/admin/DevicePolicyManager;->lockNow()V");
  ASSERT_TRUE(ref);
  EXPECT_EQ(ref->class_path, "android/app/admin/DevicePolicyManager");
  EXPECT_EQ(ref->name, "lockNow");
  EXPECT_EQ(ref->descriptor, "()V");
  EXPECT_EQ(ref->package(), "android/app/admin");
  EXPECT_EQ(format_method_signature(*ref), "Landroid/app/admin/DevicePolicyManager;->lockNow()V");
  EXPECT_FALSE(parse_method_signature("Ljava/io/File;->delete"));
  EXPECT_FALSE(parse_method_signature("Ljava/io/File;->()Z"));
  EXPECT_FALSE(parse_method_signature("java/io/File;->delete()Z"));
  EXPECT_FALSE(parse_method_signature("Ljava/io/File;->delete()"));
  EXPECT_EQ((MethodRef{"Default", "m", "()V"}.package()), "");
}

TEST(InvokeList, ReadsListingFixtures) {
  const auto one = load_invoke_list_text(testkit::fixture_path("listing1.invokes"));
  ASSERT_EQ(one.size(), 2u);
  EXPECT_EQ(one[0].caller_class, "com/locker/PasswordWatcher");
  EXPECT_EQ(one[1].target.name, "resetPassword");
  EXPECT_EQ(one[1].target.descriptor, "(Ljava/lang/String;I)Z");
  const auto two = load_invoke_list_text(testkit::fixture_path("listing2.invokes"));
  EXPECT_EQ(two.size(), 4u);
}

TEST(InvokeList, SkipsCommentsBlanksAndCrlf) {
  const auto sites = parse("# c\n\n   \ninvoke-static - Ljava/lang/System;->exit(I)V\r\n");
  ASSERT_EQ(sites.size(), 1u);
  EXPECT_EQ(sites[0].kind, InvokeKind::Static);
  EXPECT_TRUE(sites[0].caller_class.empty());
}

TEST(InvokeList, MalformedLinesReportTheirNumber) {
  EXPECT_EQ(malformed_line("# ok\ninvoke-virtual Lx/A; Ljava/io/File;->delete()Z extra\n"), 2u);
  EXPECT_EQ(malformed_line("invoke-magic - Ljava/io/File;->delete()Z\n"), 1u);
  EXPECT_EQ(malformed_line("\n\ninvoke-virtual x/A Ljava/io/File;->delete()Z\n"), 3u);
  EXPECT_EQ(malformed_line("invoke-virtual - Ljava/io/File;delete()Z\n"), 1u);
  EXPECT_EQ(malformed_line("invoke-virtual -\n"), 1u);
}

TEST(InvokeList, RandomRoundTrip) {
  Rng rng(5);
  const std::vector<std::string> classes = {"java/io/File", "android/os/Handler", "Default", "com/x/y/Z$1"};
  const std::vector<std::string> names = {"<init>", "read", "access$000", "run"};
  const std::vector<std::string> protos = {"()V", "([BII)I", "(Ljava/lang/String;)Z", "([[Ljava/lang/Object;)J"};
  for (int round = 0; round < 200; ++round) {
    std::vector<InvokeSite> sites;
    for (auto n = rng.below(30); n > 0; --n) {
      InvokeSite s;
      s.kind = static_cast<InvokeKind>(rng.below(10));
      if (rng.below(4)) s.caller_class = classes[rng.below(classes.size())];
      s.target = {classes[rng.below(classes.size())], names[rng.below(names.size())], protos[rng.below(protos.size())]};
      sites.push_back(s);
    }
    ASSERT_EQ(parse(format_invoke_list(sites)), sites);
  }
}

TEST(InvokeList, MissingFileIsIoFailure) {
  try {
    load_invoke_list_text("/nonexistent/x.invokes");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IoFailure);
  }
}
