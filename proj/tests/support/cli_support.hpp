// Copyright (c) 2026 The ocrfix Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ocrfix/cli.hpp"
#include "ocrfix/corpus.hpp"

namespace ocrfix::testing {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

inline CliResult run_cli(std::vector<std::string> args, const std::string& input = {}) {
  args.insert(args.begin(), "ocrfix");
  std::istringstream in(input);
  std::ostringstream out, err;
  CliResult r;
  r.code = cli::run(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& content) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << content;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(std::filesystem::temp_directory_path() / ("ocrfix_" + tag)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Relative path -> contents for every regular file under root.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[std::filesystem::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

// Runs every subcommand once with small settings, writing all outputs and
// captured stdout into dir. Returns the first failing command line, or empty.
inline std::string run_pipeline(const std::filesystem::path& dir, const std::string& seed) {
  const auto p = [&](const std::string& n) { return (dir / n).string(); };
  spit(p("tiny.ini"),
       "seed = " + seed +
           "\n[tokenizer]\nbpe_vocab = 120\n[model]\nd_token = 12\nd_conf = 4\nheads = 2\nenc_layers = 1\n"
           "dec_layers = 1\nd_ff = 16\n[train]\nmax_steps = 12\neval_every = 4\nwarmup = 4\n");
  const std::vector<std::vector<std::string>> steps = {
      {"synth", "--count", "60", "--output", p("clean.txt"), "--seed", seed},
      {"noise", "--input", p("clean.txt"), "--output", p("pairs.jsonl"), "--seed", seed, "--jobs", "1"},
      {"split", "--input", p("pairs.jsonl"), "--train", p("train.jsonl"), "--dev", p("dev.jsonl"), "--test",
       p("test.jsonl"), "--seed", seed},
      {"bpe-train", "--input", p("train.jsonl"), "--output", p("vocab.txt"), "--seed", seed, "--bpe-vocab", "120"},
      {"train", "--train", p("train.jsonl"), "--dev", p("dev.jsonl"), "--output-dir", p("run"), "--vocab",
       p("vocab.txt"), "--config", p("tiny.ini")},
      {"correct", "--model", p("run/model.ckpt"), "--vocab", p("run/vocab.txt"), "--input", p("test.jsonl"),
       "--output", p("hyp.txt"), "--seed", seed},
      {"eval", "--hyp", p("hyp.txt"), "--ref", p("ref.txt"), "--seed", seed, "--jobs", "1"},
      {"report", "--pairs", p("test.jsonl"), "--hyp", p("hyp.txt"), "--vocab", p("run/vocab.txt"), "--output",
       p("report.csv"), "--seed", seed},
      {"attn", "--model", p("run/model.ckpt"), "--vocab", p("run/vocab.txt"), "--input", p("test.jsonl"),
       "--layer", "1", "--output-dir", p("heat"), "--pgm", "--seed", seed},
      {"sweep", "--axis", "conf", "--values", "101,2", "--train", p("train.jsonl"), "--dev", p("dev.jsonl"),
       "--output", p("sweep.csv"), "--config", p("tiny.ini"), "--jobs", "1"},
      {"compare", "--train", p("train.jsonl"), "--dev", p("dev.jsonl"), "--output", p("compare.csv"), "--config",
       p("tiny.ini"), "--bpe-vocab", "120", "--jobs", "1"},
  };
  int index = 0;
  for (const auto& args : steps) {
    if (args.front() == "eval") {
      std::string refs;
      for (const auto& pair : load_pairs(dir / "test.jsonl", true).pairs) refs += pair.clean + "\n";
      spit(dir / "ref.txt", refs);
    }
    const CliResult r = run_cli(args);
    spit(dir / ("stdout-" + std::to_string(index++) + "-" + args.front() + ".txt"), r.out);
    if (r.code != 0) {
      std::string line;
      for (const auto& a : args) line += a + " ";
      return line + "-> exit " + std::to_string(r.code) + ": " + r.err;
    }
  }
  return {};
}

}  // namespace ocrfix::testing
