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

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "kvvm/backend.h"
#include "kvvm/check.h"
#include "kvvm/engine.h"
#include "kvvm/oplog.h"
#include "kvvm/report.h"
#include "kvvm/trace.h"

namespace kvvm::cli {

namespace {

struct ReplayArgs {
  std::string trace;
  std::string allocator = "vtensor";
  std::string out_dir = ".";
  std::string op_log;
  SimConfig sim;
};

struct GenArgs {
  std::string scenario = "single_gen";
  std::string out;
  GenOptions gen;
};

struct CheckArgs {
  std::string log;
  bool fuzz = false;
  FuzzOptions fuzz_options;
};

void add_env_names(CLI::App* app) {
  for (CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames()[0] == "help") continue;
    std::string env = "KVVM_" + opt->get_lnames()[0];
    std::transform(env.begin(), env.end(), env.begin(), [](unsigned char c) {
      return c == '-' ? '_' : static_cast<char>(std::toupper(c));
    });
    opt->envname(env);
  }
}

void add_replay_options(CLI::App* app, ReplayArgs& a) {
  SimConfig& s = a.sim;
  app->add_option("--trace", a.trace, "Trace file (JSONL)")->required();
  app->add_option("--allocator", a.allocator, "native|paged|vtensor|all")
      ->check(CLI::IsMember({"native", "paged", "vtensor", "all"}))
      ->capture_default_str();
  app->add_option("--out", a.out_dir, "Directory for CSV and JSON reports")
      ->capture_default_str();
  app->add_option("--op-log", a.op_log,
                  "Write the vtensor device/tree op log (JSONL) here");
  const auto size = CLI::AsSizeValue(false);
  app->add_option("--capacity", s.device.capacity_bytes, "Device bytes")
      ->transform(size)
      ->capture_default_str();
  app->add_option("--chunk", s.device.chunk_size_bytes, "Chunk bytes")
      ->transform(size)
      ->capture_default_str();
  app->add_option("--weights", s.device.weights_bytes, "Model weight bytes")
      ->transform(size)
      ->capture_default_str();
  app->add_option("--activation", s.device.activation_bytes_per_request,
                  "Activation bytes per running request")
      ->transform(size)
      ->capture_default_str();
  app->add_option("--max-seq", s.max_seq_len)->capture_default_str();
  app->add_option("--initial-alloc", s.initial_alloc_tokens)
      ->capture_default_str();
  app->add_option("--lookahead", s.lookahead_chunks)->capture_default_str();
  app->add_option("--block-size", s.block_size_tokens)->capture_default_str();
  app->add_option("--max-batch", s.max_batch)->capture_default_str();
  app->add_option("--prefix-cache-max-chunks", s.prefix_cache_max_chunks)
      ->capture_default_str();
  app->add_flag("--evict-prefix", s.evict_prefix,
                "Drop prefix records when emptying memory at the end");
  app->add_option("--layers", s.geometry.layers)->capture_default_str();
  app->add_option("--kv-heads", s.geometry.kv_heads)->capture_default_str();
  app->add_option("--head-dim", s.geometry.head_dim)->capture_default_str();
  app->add_option("--elem-bytes", s.geometry.elem_bytes)
      ->capture_default_str();
  app->add_option("--prefill-cost", s.cost.prefill_cost_per_token)
      ->capture_default_str();
  app->add_option("--decode-cost", s.cost.decode_cost_per_request)
      ->capture_default_str();
  app->add_option("--mem-op-cost", s.cost.mem_op_cost)->capture_default_str();
  app->add_option("--seed", s.seed, "Seed for synthetic prompt tokens")
      ->capture_default_str();
  add_env_names(app);
}

SimulationReport replay_one(const std::vector<TraceRecord>& trace,
                            const SimConfig& config,
                            const std::string& op_log_path) {
  Engine engine(config, materialize(trace, config.seed));
  OpLog log;
  const bool logging = !op_log_path.empty() &&
                       config.allocator == AllocatorKind::kVTensor;
  if (logging) {
    auto& backend = dynamic_cast<VTensorBackend&>(engine.backend());
    backend.manager().attach_log(&log);
  }
  while (!engine.done()) engine.step();
  SimulationReport report = engine.finish();
  if (logging) {
    std::ofstream f(op_log_path);
    log.write_jsonl(f);
  }
  return report;
}

int cmd_replay(const ReplayArgs& a, std::ostream& out) {
  const std::vector<TraceRecord> trace = load_trace(a.trace);
  std::vector<AllocatorKind> kinds;
  if (a.allocator == "all") {
    kinds = {AllocatorKind::kNative, AllocatorKind::kPaged,
             AllocatorKind::kVTensor};
  } else {
    kinds = {*parse_allocator(a.allocator)};
  }
  std::filesystem::create_directories(a.out_dir);
  std::vector<SimulationReport> reports;
  for (AllocatorKind kind : kinds) {
    SimConfig config = a.sim;
    config.allocator = kind;
    const std::string name(allocator_name(kind));
    reports.push_back(replay_one(trace, config, a.op_log));
    const std::filesystem::path base(a.out_dir);
    std::ofstream csv(base / (name + ".csv"));
    write_csv(csv, reports.back());
    std::ofstream json(base / (name + ".json"));
    write_summary_json(json, reports.back(), config);
    out << "wrote " << (base / (name + ".csv")).string() << " and "
        << (base / (name + ".json")).string() << '\n';
  }
  write_comparison(out, reports);
  if (reports.size() > 1) {
    std::ofstream table(std::filesystem::path(a.out_dir) / "comparison.txt");
    write_comparison(table, reports);
  }
  return kExitOk;
}

int cmd_gen_trace(GenArgs& a, std::ostream& out) {
  a.gen.scenario = *parse_scenario(a.scenario);
  const std::vector<TraceRecord> trace = generate_trace(a.gen);
  if (a.out.empty()) {
    write_trace(out, trace);
  } else {
    std::ofstream f(a.out);
    if (!f) throw Error(ErrorCode::kInvalidArgument, "cannot write " + a.out);
    write_trace(f, trace);
  }
  return kExitOk;
}

int cmd_check(const CheckArgs& a, std::ostream& out, std::ostream& err) {
  CheckReport report;
  if (a.fuzz) {
    report = fuzz_check(a.fuzz_options);
  } else {
    if (a.log.empty()) {
      err << "check: pass --log FILE or --fuzz\n";
      return kExitBadInput;
    }
    std::ifstream f(a.log);
    if (!f) {
      err << "check: cannot open " << a.log << '\n';
      return kExitBadInput;
    }
    report = check_log(OpLog::read_jsonl(f));
  }
  if (!report.ok) {
    err << "violation";
    if (report.failed_record) err << " at record " << *report.failed_record;
    err << ": " << report.violation << '\n';
    return kExitViolation;
  }
  out << "ok: " << report.records_checked << " records checked\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"KV-cache memory manager simulator"};
  app.set_config("--config", "", "TOML/INI file with option defaults");
  app.require_subcommand(1);

  ReplayArgs replay;
  CLI::App* replay_cmd =
      app.add_subcommand("replay", "Run a trace through one or all allocators");
  add_replay_options(replay_cmd, replay);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-trace", "Write a synthetic trace");
  gen_cmd->add_option("--scenario", gen.scenario)
      ->check(CLI::IsMember({"single_gen", "multi_turn", "prefix_share"}))
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.gen.seed)->capture_default_str();
  gen_cmd->add_option("--count", gen.gen.count,
                      "Requests, or conversations for multi_turn");
  gen_cmd->add_option("--turns", gen.gen.turns)->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output file (default stdout)");
  add_env_names(gen_cmd);

  CheckArgs check;
  CLI::App* check_cmd =
      app.add_subcommand("check", "Verify an op log or fuzz the manager");
  check_cmd->add_option("--log", check.log, "Op log (JSONL)");
  check_cmd->add_flag("--fuzz", check.fuzz);
  check_cmd->add_option("--seed", check.fuzz_options.seed)
      ->capture_default_str();
  check_cmd->add_option("--ops", check.fuzz_options.ops)
      ->capture_default_str();
  add_env_names(check_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // --help and friends exit 0; every other parse failure is bad input.
    return app.exit(e, out, err) == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (*replay_cmd) return cmd_replay(replay, out);
    if (*gen_cmd) return cmd_gen_trace(gen, out);
    return cmd_check(check, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kTraceInfeasible ? kExitInfeasible
                                                   : kExitBadInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadInput;
  }
}

}  // namespace kvvm::cli
