#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "apiscan/dex.hpp"
#include "apiscan/error.hpp"
#include "apiscan/features.hpp"
#include "apiscan/opcodes.hpp"
#include "apiscan/reference.hpp"
#include "dex_builder.hpp"
#include "fixtures.hpp"

using namespace apiscan;

namespace {

Errc parse_error(std::span<const std::uint8_t> bytes, bool strict = false) {
  try {
    parse_dex(bytes, DexOptions{strict});
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "dex accepted";
  return Errc::UsageError;
}

std::vector<InvokeSite> sorted(std::vector<InvokeSite> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(OpcodeWidths, MatchFormatOracle) {
  for (int op = 0; op < 256; ++op) {
    EXPECT_EQ(dalvik::kOpcodeWidths[op], testkit::format_width(static_cast<std::uint8_t>(op))) << std::hex << op;
  }
}

TEST(OpcodeWidths, Payloads) {
  const std::vector<std::uint16_t> packed{0x0100, 3, 0, 0, 1, 1, 2, 2, 3, 3};
  EXPECT_EQ(instruction_width(packed), 10u);
  const std::vector<std::uint16_t> sparse{0x0200, 2, 0, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(instruction_width(sparse), 10u);
  // 3 elements of 1 byte: ceil(3/2) data units.
  const std::vector<std::uint16_t> fill{0x0300, 1, 3, 0, 0, 0};
  EXPECT_EQ(instruction_width(fill), 6u);
  const std::vector<std::uint16_t> stray_nop{0x7700};
  EXPECT_EQ(instruction_width(stray_nop), 1u);
  const std::vector<std::uint16_t> short_header{0x0300, 1};
  EXPECT_THROW(instruction_width(short_header), Error);
}

TEST(InstructionWalk, CoversRandomStreamsExactly) {
  Rng rng(404);
  std::vector<std::uint32_t> callable(50);
  for (std::uint32_t i = 0; i < callable.size(); ++i) callable[i] = i;
  for (int round = 0; round < 500; ++round) {
    testkit::CodeGenOptions opts;
    opts.instructions = 1 + rng.below(120);
    opts.payload_share = 0.1;
    const auto code = testkit::random_code(rng, callable, opts);
    std::size_t expected_pc = 0, invokes = 0;
    walk_instructions(code.insns, [&](std::size_t pc, std::size_t width) {
      ASSERT_EQ(pc, expected_pc);
      ASSERT_GE(width, 1u);
      if (invoke_kind_from_opcode(code.insns[pc] & 0xff)) ++invokes;
      expected_pc += width;
    });
    ASSERT_EQ(expected_pc, code.insns.size());
    ASSERT_EQ(invokes, code.invokes.size());
  }
}

TEST(InstructionWalk, OverrunIsStructural) {
  const std::vector<std::uint16_t> cut{0x0000, 0x006e, 0x0001};  // invoke-virtual missing a unit
  try {
    walk_instructions(cut, [](std::size_t, std::size_t) {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StructuralError);
  }
}

TEST(Dex, RandomFilesMatchGroundTruth) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    testkit::RandomDexOptions opts;
    opts.version = 35 + static_cast<int>(seed % 5);
    const auto rd = testkit::random_dex(seed, opts);
    const auto dex = parse_dex(rd.bytes, DexOptions{true});
    EXPECT_EQ(dex.version, opts.version);
    ASSERT_EQ(sorted(extract_invokes(dex)), sorted(rd.expected)) << "seed " << seed;

    const auto counts = invoke_counts(dex);
    std::size_t total = 0;
    for (std::uint32_t m = 0; m < counts.size(); ++m) {
      if (resolve_method(dex, m)) total += counts[m];
    }
    EXPECT_EQ(total, rd.expected.size()) << "seed " << seed;
  }
}

TEST(Dex, ResolveMethod) {
  testkit::DexBuilder b;
  const auto idx = b.method_id("[Ljava/lang/String;", "clone", "()Ljava/lang/Object;");
  const auto idx2 = b.method_id("Landroid/os/Handler;", "post", "(Ljava/lang/Runnable;)Z");
  const auto prim = b.method_id("[I", "clone", "()Ljava/lang/Object;");
  b.type_id("Lcom/x/A;");
  b.add_class({"Lcom/x/A;", "Ljava/lang/Object;", {}, {}, false});
  const auto dex = parse_dex(b.build());
  EXPECT_EQ(resolve_method(dex, idx)->class_path, "java/lang/String");
  const auto h = resolve_method(dex, idx2);
  ASSERT_TRUE(h);
  EXPECT_EQ(h->descriptor, "(Ljava/lang/Runnable;)Z");
  EXPECT_FALSE(resolve_method(dex, prim));
  try {
    resolve_method(dex, 99);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StructuralError);
  }
}

TEST(Dex, HeaderErrors) {
  const auto good = testkit::random_dex(3).bytes;
  EXPECT_NO_THROW(parse_dex(std::span<const std::uint8_t>(good), DexOptions{true}));

  auto magic = good;
  magic[0] = 'x';
  EXPECT_EQ(parse_error(magic), Errc::BadMagic);

  auto version = good;
  version[6] = '4';  // "034"
  EXPECT_EQ(parse_error(version), Errc::UnsupportedVersion);

  auto flipped = good;
  flipped[flipped.size() - 3] ^= 0x5a;
  EXPECT_EQ(parse_error(flipped, true), Errc::ChecksumMismatch);

  EXPECT_EQ(parse_error(std::span<const std::uint8_t>(good.data(), 40)), Errc::StructuralError);
  EXPECT_EQ(parse_error(std::span<const std::uint8_t>(good.data(), 4)), Errc::BadMagic);
}

TEST(Dex, TruncationNeverCrashes) {
  const auto good = testkit::random_dex(8).bytes;
  for (std::size_t len = 0; len < good.size(); len += 1 + len / 16) {
    const std::span<const std::uint8_t> cut(good.data(), len);
    try {
      extract_invokes(parse_dex(cut));
    } catch (const Error&) {
    }
  }
  SUCCEED();
}

TEST(Dex, RandomByteFlipsNeverCrash) {
  const auto good = testkit::random_dex(9).bytes;
  Rng rng(99);
  for (int round = 0; round < 400; ++round) {
    auto bytes = good;
    for (int k = 0; k < 4; ++k) bytes[0x70 + rng.below(bytes.size() - 0x70)] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    try {
      extract_invokes(parse_dex(bytes));
    } catch (const Error&) {
    }
  }
  SUCCEED();
}

TEST(Dex, SnippetsDecode) {
  const auto locker = extract_invokes(parse_dex(testkit::locker_snippet_dex()));
  ASSERT_EQ(locker.size(), 2u);
  EXPECT_EQ(locker[0].target.name, "lockNow");
  const auto crypto = extract_invokes(parse_dex(testkit::crypto_snippet_dex()));
  EXPECT_EQ(crypto.size(), 4u);
}

TEST(DexFeatures, DirectPathEqualsInvokeListPath) {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const auto rd = testkit::random_dex(seed);
    const auto dex = parse_dex(rd.bytes);
    for (auto g : {Granularity::Package, Granularity::Class, Granularity::Method}) {
      std::set<std::string> keys;
      std::size_t i = 0;
      for (const auto& s : rd.expected) {
        const auto k = key_of(s.target, g);
        if (k && is_valid_key(*k, g) && (i++ % 3 != 0)) keys.insert(*k);
      }
      if (keys.empty()) continue;
      const ApiReferenceList list(g, {keys.begin(), keys.end()});
      ASSERT_EQ(extract_features(dex, list), extract_features(extract_invokes(dex), list))
          << "seed " << seed << " " << granularity_name(g);
    }
  }
}
