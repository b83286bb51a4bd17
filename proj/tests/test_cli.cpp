#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hsicx/image_io.hpp"
#include "hsicx/serialize.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kDir = fs::path(HSICX_TEST_TMP) / "cli";

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::string& args) {
  fs::create_directories(kDir);
  const auto out = kDir / "stdout.txt", err = kDir / "stderr.txt";
  const std::string cmd = std::string(HSICX_CLI) + " " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, oracle::slurp(out), oracle::slurp(err)};
}

fs::path path(const std::string& name) { return kDir / name; }
std::string quoted(const std::string& name) { return "'" + path(name).string() + "'"; }

json read(const std::string& name) { return json::parse(oracle::slurp(path(name))); }

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

// stderr must be a single JSON line naming the failure kind.
void expect_diagnostic(const Run& run, int code, const std::string& kind, const std::string& needle = "") {
  CHECK(run.code == code);
  CHECK(count_lines(run.err) == 1);
  const auto doc = json::parse(run.err, nullptr, false);
  REQUIRE_FALSE(doc.is_discarded());
  CHECK(doc["exit"] == code);
  CHECK(doc["error"] == kind);
  if (!needle.empty()) CHECK_MESSAGE(doc["message"].get<std::string>().find(needle) != std::string::npos, run.err);
}

}  // namespace

TEST_CASE("explain ranks a linear model") {
  const auto run = cli("explain --model 'builtin:patch-sum?w=1,2,3' --grid 3x1 --samples 256 --seed 7 --out-scores " +
                         quoted("lin.json") + " --out-csv " + quoted("lin.csv") + " --out-heatmap " + quoted("lin.png"));
  REQUIRE(run.code == 0);
  const auto doc = read("lin.json");
  CHECK(doc["grid"] == json::array({3, 1}));
  const auto s = doc["scores"].get<std::vector<double>>();
  CHECK(s[2] > s[1]);
  CHECK(s[1] > s[0]);
  CHECK(doc["config"]["seed"] == 7);
  CHECK(doc["config"]["samples"] == 256);
  CHECK_FALSE(doc["config"].contains("workers"));
  const auto csv = oracle::slurp(path("lin.csv"));
  CHECK(csv.rfind("cell,x,y,score\n", 0) == 0);
  CHECK(count_lines(csv) == 4);
  const auto png = hsicx::read_png(path("lin.png"));
  CHECK(png.width == 96);
  CHECK(png.height == 32);
}

TEST_CASE("explain writes to stdout without --out-scores") {
  const auto run = cli("explain --model builtin:xor --grid 2x1 --exhaustive");
  REQUIRE(run.code == 0);
  const auto doc = json::parse(run.out);
  CHECK(doc["config"]["samples"] == 4);
  CHECK(doc["config"]["sampler"] == "exhaustive");
}

TEST_CASE("explain on an image input") {
  fs::create_directories(kDir);
  hsicx::InputTensor img(16, 16, 3, 0.0);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = x < 8 ? 1.0 : 0.2;
  hsicx::write_png(path("in.png"), img);
  const auto run = cli("explain --model builtin:patch-image-mean --grid 2x2 --samples 128 --input " + quoted("in.png") +
                         " --upsampling bilinear --out-scores " + quoted("img.json") + " --out-heatmap " +
                         quoted("img.png"));
  REQUIRE(run.code == 0);
  const auto s = read("img.json")["scores"].get<std::vector<double>>();
  CHECK(s[0] > s[1]);
  CHECK(s[2] > s[3]);
  CHECK(hsicx::read_png(path("img.png")).width == 16);
}

TEST_CASE("invalid configurations exit 1") {
  expect_diagnostic(cli("explain --model builtin:constant --samples 1"), 1, "invalid-config", "p >= 2 required");
  expect_diagnostic(cli("explain --model builtin:nope"), 1, "invalid-config", "unknown builtin");
  expect_diagnostic(cli("explain --model builtin:constant --grid 0x3"), 1, "invalid-config");
  expect_diagnostic(cli("explain --model builtin:constant --output-kernel rbf:-1"), 1, "invalid-config");
  expect_diagnostic(cli("explain --model builtin:constant --sampler sobol"), 1, "invalid-config");
  expect_diagnostic(cli("explain --model builtin:constant --no-such-flag"), 1, "invalid-config");
  expect_diagnostic(cli("explain --grid 2x2"), 1, "invalid-config", "--model");
  expect_diagnostic(cli("baseline --model builtin:constant --method lime"), 1, "invalid-config", "rise or occlusion");
}

TEST_CASE("transport failures exit 2, I/O failures exit 3") {
  expect_diagnostic(cli(std::string("explain --grid 2x1 --samples 8 --model 'cmd:") + HSICX_ECHO + " --mode malformed'"),
                    2, "transport", "malformed");
  expect_diagnostic(cli("explain --grid 2x1 --samples 8 --model http://127.0.0.1:1/predict"), 2, "transport");
  expect_diagnostic(cli("explain --model builtin:mean --input " + quoted("missing.png")), 3, "io");
  expect_diagnostic(cli("explain --model 'builtin:patch-sum?w=1,2' --grid 2x1 --samples 8 --out-scores /nonexistent/dir/s.json"), 3,
                    "io");
  expect_diagnostic(cli("fidelity --model builtin:constant --scores " + quoted("missing.json")), 3, "io");
}

TEST_CASE("scores JSON is byte-identical across runs, worker counts and saved configs") {
  const std::string base = "explain --model 'builtin:patch-sum?w=4,1,3,2,5,1,2,3,9' --grid 3x3 --samples 700 --seed 11";
  REQUIRE(cli(base + " --workers 1 --out-scores " + quoted("r1.json")).code == 0);
  REQUIRE(cli(base + " --workers 1 --out-scores " + quoted("r2.json")).code == 0);
  REQUIRE(cli(base + " --workers 8 --batch-limit 7 --out-scores " + quoted("r8.json") + " --save-config " +
                quoted("cfg.json")).code == 0);
  const auto a = oracle::slurp(path("r1.json"));
  CHECK(a == oracle::slurp(path("r2.json")));
  CHECK(a == oracle::slurp(path("r8.json")));

  // the saved config carries the output path; rerun it with a different one
  REQUIRE(cli("explain --config " + quoted("cfg.json") + " --out-scores " + quoted("r9.json")).code == 0);
  CHECK(a == oracle::slurp(path("r9.json")));
  const auto cfg = read("cfg.json");
  CHECK(cfg["seed"] == 11);
  CHECK(cfg["workers"] == 8);

  json bad = cfg;
  bad["colour"] = "red";
  hsicx::write_text(path("bad.json"), bad.dump());
  expect_diagnostic(cli("explain --config " + quoted("bad.json")), 1, "invalid-config", "colour");
}

TEST_CASE("saved designs reproduce the run") {
  REQUIRE(cli("explain --model 'builtin:patch-sum?w=1,2,3,4' --grid 2x2 --samples 64 --sampler bernoulli --prob 0.5 "
                "--seed 3 --save-design " + quoted("d.hsxd") + " --out-scores " + quoted("d1.json")).code == 0);
  REQUIRE(cli("explain --model 'builtin:patch-sum?w=1,2,3,4' --grid 2x2 --samples 999 --seed 99 --load-design " +
                quoted("d.hsxd") + " --out-scores " + quoted("d2.json")).code == 0);
  CHECK(read("d1.json")["scores"] == read("d2.json")["scores"]);
  REQUIRE(cli("explain --model 'builtin:patch-sum?w=1,2,3,4' --grid 2x2 --samples 64 --save-design " +
                quoted("d.json") + " --out-scores " + quoted("d3.json")).code == 0);
  CHECK(read("d.json")["rows"].size() == 64);
  expect_diagnostic(cli("explain --model 'builtin:patch-sum?w=1,2,3' --grid 3x1 --load-design " + quoted("d.json")), 1,
                    "invalid-config");
}

TEST_CASE("interactions") {
  REQUIRE(cli("interactions --model builtin:xor --grid 2x1 --exhaustive --out-scores " + quoted("x.json")).code == 0);
  const auto doc = read("x.json");
  REQUIRE(doc["top"].size() == 1);
  CHECK(doc["top"][0]["i"] == 0);
  CHECK(doc["top"][0]["j"] == 1);
  CHECK(doc["top"][0]["value"].get<double>() > 0.0);

  REQUIRE(cli("interactions --model builtin:constant --grid 3x3 --samples 32 --out-scores " + quoted("c.json")).code == 0);
  CHECK(read("c.json")["top"].empty());

  REQUIRE(cli("interactions --model builtin:constant --grid 7x7 --samples 16 --top-k 0 --out-scores " + quoted("m.json") +
                " --out-csv " + quoted("m.csv")).code == 0);
  const auto csv = oracle::slurp(path("m.csv"));
  CHECK(csv.rfind("i,j,value\n", 0) == 0);
  CHECK(count_lines(csv) == 1 + 1176);
}

TEST_CASE("fidelity") {
  hsicx::write_text(path("w.json"), R"({"grid":[3,2],"scores":[5,1,4,2,6,3]})");
  hsicx::write_text(path("rev.json"), R"({"grid":[3,2],"scores":[-5,-1,-4,-2,-6,-3]})");
  const std::string model = "--model 'builtin:patch-sum?w=5,1,4,2,6,3'";
  REQUIRE(cli("fidelity " + model + " --scores " + quoted("w.json") + " --out-report " + quoted("fw.json") +
                " --out-csv " + quoted("fw.csv") + " --out-plot " + quoted("fw.png")).code == 0);
  REQUIRE(cli("fidelity " + model + " --scores " + quoted("rev.json") + " --out-report " + quoted("frev.json")).code == 0);
  const auto fw = read("fw.json"), frev = read("frev.json");
  CHECK(std::abs(fw["muFidelity"].get<double>() - 1.0) <= 1e-6);
  CHECK(fw["deletion"]["auc"].get<double>() < frev["deletion"]["auc"].get<double>());
  CHECK(fw["insertion"]["auc"].get<double>() > frev["insertion"]["auc"].get<double>());
  CHECK(fs::exists(path("fw.png")));
  CHECK(count_lines(oracle::slurp(path("fw.csv"))) == 1 + 2 * 7);

  const auto constant = cli("fidelity --model builtin:constant --scores " + quoted("w.json"));
  CHECK(constant.code == 0);
  const auto doc = json::parse(constant.out);
  CHECK(doc["muFidelity"].is_null());
  CHECK(doc.contains("muFidelityError"));
  CHECK(constant.err.find("warning") != std::string::npos);

  REQUIRE(cli("fidelity " + model + " --metrics deletion --scores " + quoted("w.json") + " --out-report " +
                quoted("fd.json")).code == 0);
  CHECK(read("fd.json")["insertion"].is_null());

  expect_diagnostic(cli("fidelity " + model + " --grid 2x3 --scores " + quoted("w.json")), 1, "invalid-config",
                    "grid mismatch");
  expect_diagnostic(cli("fidelity " + model + " --metrics auc --scores " + quoted("w.json")), 1, "invalid-config");
}

TEST_CASE("converge") {
  const auto self = cli("converge --model 'builtin:patch-sum?w=1,2,3,4' --grid 2x2 --schedule 256 --reference 256");
  REQUIRE(self.code == 0);
  CHECK(self.out == "p,median,q1,q3\n256,1,1,1\n");

  REQUIRE(cli("converge --model builtin:patch-image-mean --grid 3x3 --schedule 64,128 --reference 512 --seeds 3 "
                "--out-csv " + quoted("cv.csv") + " --out-plot " + quoted("cv.png")).code == 0);
  CHECK(count_lines(oracle::slurp(path("cv.csv"))) == 3);
  CHECK(fs::exists(path("cv.png")));

  expect_diagnostic(cli("converge --model builtin:mean --schedule 128,64 --reference 512"), 1, "invalid-config");
  expect_diagnostic(cli("converge --model builtin:mean --schedule 64,x --reference 512"), 1, "invalid-config");
}

TEST_CASE("baseline") {
  REQUIRE(cli("baseline --method occlusion --model 'builtin:patch-sum?w=1.5,2,3' --grid 3x1 --out-scores " +
                quoted("occ.json")).code == 0);
  CHECK(read("occ.json")["scores"] == json::array({1.5, 2.0, 3.0}));
  REQUIRE(cli("baseline --method rise --model 'builtin:patch-sum?w=1,5,3' --grid 3x1 --samples 512 --out-scores " +
                quoted("rise.json") + " --out-heatmap " + quoted("rise.png") + " --gray").code == 0);
  const auto s = read("rise.json")["scores"].get<std::vector<double>>();
  CHECK(s[1] > s[2]);
  CHECK(s[2] > s[0]);
  CHECK(hsicx::read_png(path("rise.png")).channels == 1);
}

TEST_CASE("models lists the builtins") {
  const auto run = cli("models");
  CHECK(run.code == 0);
  CHECK(run.out.find("builtin:patch-sum") != std::string::npos);
  CHECK(cli("--help").code == 0);
}
