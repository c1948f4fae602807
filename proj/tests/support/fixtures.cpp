#include "fixtures.hpp"

#include "dex_builder.hpp"

namespace apiscan::testkit {

std::filesystem::path source_dir() { return APISCAN_SOURCE_DIR; }

std::filesystem::path fixture_path(const std::string& name) { return source_dir() / "tests" / "fixtures" / name; }

std::vector<std::uint8_t> locker_snippet_dex() {
  DexBuilder b;
  const std::string cls = "Lcom/locker/PasswordWatcher;";
  b.type_id(cls);
  b.type_id("Ljava/lang/Object;");
  const auto self = b.method_id(cls, "onPasswordChanged", "(Landroid/content/Context;Landroid/content/Intent;)V");
  const auto lock = b.method_id("Landroid/app/admin/DevicePolicyManager;", "lockNow", "()V");
  const auto reset = b.method_id("Landroid/app/admin/DevicePolicyManager;", "resetPassword", "(Ljava/lang/String;I)Z");
  const std::vector<std::uint16_t> insns = {
      0x106e, static_cast<std::uint16_t>(lock), 0x0009,   // invoke-virtual {v9}
      0x0907,                                             // move-object v9, v0
      0x1a07,                                             // move-object v10, v1
      0x090c,                                             // move-result-object v9
      0x7a07,                                             // move-object v10, v7
      0x0b12,                                             // const/4 v11, 0x0
      0x306e, static_cast<std::uint16_t>(reset), 0x0ba9,  // invoke-virtual {v9, v10, v11}
      0x000e,                                             // return-void
  };
  b.add_class({cls, "Ljava/lang/Object;", {}, {{self, 0x1, insns, 12}}, true});
  return b.build();
}

std::vector<std::uint8_t> crypto_snippet_dex() {
  DexBuilder b;
  const std::string cls = "Lcom/crypt/Encryptor;";
  b.type_id(cls);
  b.type_id("Ljava/lang/Object;");
  const auto self = b.method_id(cls, "encrypt", "()V");
  const auto read = b.method_id("Ljava/io/FileInputStream;", "read", "([B)I");
  const auto flush = b.method_id("Ljavax/crypto/CipherOutputStream;", "flush", "()V");
  const auto close = b.method_id("Ljavax/crypto/CipherOutputStream;", "close", "()V");
  const auto in_close = b.method_id("Ljava/io/FileInputStream;", "close", "()V");
  const std::vector<std::uint16_t> insns = {
      0x206e, static_cast<std::uint16_t>(read), 0x0043,      // invoke-virtual {v3, v4}
      0x000a,                                                // move-result v0
      0xf512,                                                // const/4 v5, -0x1
      0x5033, 0x0003,                                        // if-ne v0, v5, +3
      0x106e, static_cast<std::uint16_t>(flush), 0x0001,     // invoke-virtual {v1}
      0x106e, static_cast<std::uint16_t>(close), 0x0001,     // invoke-virtual {v1}
      0x106e, static_cast<std::uint16_t>(in_close), 0x0003,  // invoke-virtual {v3}
      0x000e,                                                // return-void
  };
  b.add_class({cls, "Ljava/lang/Object;", {}, {{self, 0x1, insns, 6}}, true});
  return b.build();
}

std::vector<std::string> snippet_reference_keys(Granularity g) {
  switch (g) {
    case Granularity::Package: return {"java/io", "javax/crypto", "java/lang"};
    case Granularity::Class: return {"java/io/FileInputStream", "javax/crypto/CipherOutputStream"};
    case Granularity::Method:
      return {"java/io/FileInputStream;->read", "javax/crypto/CipherOutputStream;->flush",
              "javax/crypto/CipherOutputStream;->close", "java/io/FileInputStream;->close"};
  }
  return {};
}

}  // namespace apiscan::testkit
