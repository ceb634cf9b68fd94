/* Copyright 2026 The kvvm Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "cli.h"

#include <gtest/gtest.h>
#include <stdlib.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace kvvm::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kvvm_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run_args(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run(args, out_, err_);
  }

  std::string path(const std::string& name) const {
    return (dir_ / name).string();
  }

  void write_file(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
  }

  static std::string read_file(const std::string& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

const char kSmallTrace[] =
    "{\"id\":1,\"arrival_step\":0,\"prompt_len\":300,\"output_len\":20}\n"
    "{\"id\":2,\"arrival_step\":2,\"conversation\":3,\"prompt_len\":100,"
    "\"output_len\":10}\n"
    "{\"id\":3,\"arrival_step\":40,\"conversation\":3,\"prompt_len\":150,"
    "\"output_len\":10}\n";

TEST_F(CliTest, GenTraceThenReplayAll) {
  ASSERT_EQ(run_args({"gen-trace", "--scenario", "single_gen", "--count", "3",
                      "--out", path("t.jsonl")}),
            kExitOk)
      << err_.str();
  ASSERT_EQ(run_args({"replay", "--trace", path("t.jsonl"), "--allocator",
                      "all", "--max-seq", "16384", "--out", path("r")}),
            kExitOk)
      << err_.str();
  for (const char* f : {"native.csv", "paged.csv", "vtensor.csv",
                        "native.json", "paged.json", "vtensor.json",
                        "comparison.txt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "r" / f)) << f;
  }
  const std::string csv = read_file(path("r/vtensor.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "step,created_bytes,mapped_bytes,used_bytes,"
            "reserved_virtual_bytes,free_bytes,active_requests,stalls,"
            "preemptions");
  EXPECT_NE(out_.str().find("vtensor"), std::string::npos);
}

TEST_F(CliTest, GenTraceToStdout) {
  ASSERT_EQ(run_args({"gen-trace", "--scenario", "multi_turn", "--count",
                      "1", "--turns", "2"}),
            kExitOk);
  const std::string text = out_.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST_F(CliTest, BadTraceNamesTheLine) {
  write_file("bad.jsonl", std::string(kSmallTrace) + "{\"id\":4}\n");
  EXPECT_EQ(run_args({"replay", "--trace", path("bad.jsonl"), "--out",
                      path("r")}),
            kExitBadInput);
  EXPECT_NE(err_.str().find("bad.jsonl:4:"), std::string::npos) << err_.str();
}

TEST_F(CliTest, BadFlagValues) {
  write_file("t.jsonl", kSmallTrace);
  EXPECT_EQ(run_args({"replay", "--trace", path("t.jsonl"), "--allocator",
                      "slab"}),
            kExitBadInput);
  EXPECT_EQ(run_args({"replay", "--trace", path("t.jsonl"), "--chunk",
                      "3MiB"}),
            kExitBadInput);
  EXPECT_EQ(run_args({"gen-trace", "--scenario", "nope"}), kExitBadInput);
  EXPECT_EQ(run_args({}), kExitBadInput);
  EXPECT_EQ(run_args({"replay", "--trace", path("missing.jsonl")}),
            kExitBadInput);
}

TEST_F(CliTest, InfeasibleTraceExitCode) {
  write_file("t.jsonl",
             "{\"id\":1,\"arrival_step\":0,\"prompt_len\":4000,"
             "\"output_len\":200}\n");
  EXPECT_EQ(run_args({"replay", "--trace", path("t.jsonl"), "--out",
                      path("r")}),
            kExitInfeasible);
}

TEST_F(CliTest, FuzzCheckPasses) {
  EXPECT_EQ(run_args({"check", "--fuzz", "--seed", "3", "--ops", "300"}),
            kExitOk)
      << err_.str();
  EXPECT_NE(out_.str().find("ok:"), std::string::npos);
}

TEST_F(CliTest, OpLogChecksAndDoubleMapIsCaught) {
  write_file("t.jsonl", kSmallTrace);
  ASSERT_EQ(run_args({"replay", "--trace", path("t.jsonl"), "--out",
                      path("r"), "--op-log", path("ops.jsonl")}),
            kExitOk)
      << err_.str();
  ASSERT_EQ(run_args({"check", "--log", path("ops.jsonl")}), kExitOk)
      << err_.str();

  // Repeat the first map record: the page is already mapped.
  std::istringstream in(read_file(path("ops.jsonl")));
  std::ostringstream bad;
  std::string line;
  bool injected = false;
  while (std::getline(in, line)) {
    bad << line << '\n';
    if (!injected && line.find("\"op\":\"map\"") != std::string::npos) {
      bad << line << '\n';
      injected = true;
    }
  }
  ASSERT_TRUE(injected);
  write_file("bad_ops.jsonl", bad.str());
  EXPECT_EQ(run_args({"check", "--log", path("bad_ops.jsonl")}),
            kExitViolation);
  EXPECT_NE(err_.str().find("violation at record"), std::string::npos);
}

TEST_F(CliTest, HelpExitsZero) {
  EXPECT_EQ(run_args({"--help"}), kExitOk);
  EXPECT_NE(out_.str().find("replay"), std::string::npos);
}

TEST_F(CliTest, CheckNeedsAnInput) {
  EXPECT_EQ(run_args({"check"}), kExitBadInput);
}

TEST_F(CliTest, EnvironmentOverride) {
  write_file("t.jsonl",
             "{\"id\":1,\"arrival_step\":0,\"prompt_len\":4000,"
             "\"output_len\":200}\n");
  ::setenv("KVVM_MAX_SEQ", "8192", 1);
  const int code = run_args({"replay", "--trace", path("t.jsonl"), "--out",
                             path("r")});
  ::unsetenv("KVVM_MAX_SEQ");
  EXPECT_EQ(code, kExitOk) << err_.str();
}

TEST_F(CliTest, ConfigFile) {
  write_file("t.jsonl",
             "{\"id\":1,\"arrival_step\":0,\"prompt_len\":4000,"
             "\"output_len\":200}\n");
  write_file("kvvm.toml", "[replay]\nmax-seq = 8192\ncapacity = \"40GiB\"\n");
  EXPECT_EQ(run_args({"--config", path("kvvm.toml"), "replay", "--trace",
                      path("t.jsonl"), "--out", path("r")}),
            kExitOk)
      << err_.str();
  const std::string json = read_file(path("r/vtensor.json"));
  EXPECT_NE(json.find("42949672960"), std::string::npos) << json;
}

}  // namespace
}  // namespace kvvm::cli
