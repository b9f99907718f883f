#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "knitwork/cli.hpp"
#include "knitwork/imageio.hpp"
#include "tiny.hpp"

using namespace knitwork;
using knitwork::testing::read_file;

namespace {

const std::vector<std::string> kTiny = {"--trunk-width", "16", "--trunk-layers", "2", "--frequencies", "8",
                                        "--recon-hidden", "16", "--disc-hidden", "16", "--batch-size", "16",
                                        "--iters", "3", "--quiet"};

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args, bool tiny = true) {
  args.insert(args.begin(), "knitwork");
  if (tiny && args.size() > 1 && args[1] != "eval") args.insert(args.end(), kTiny.begin(), kTiny.end());
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t csv_rows(const std::string& path) {
  const std::string text = read_file(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 1;
}

}  // namespace

TEST_CASE("fit twice with one seed gives identical artifacts") {
  testing::TempDir dir("cli_fit");
  save_png(testing::test_image(8, 8, 3), dir / "in.png");
  Outcome a = cli({"fit", dir / "in.png", "--seed", "7", "--out-dir", dir / "a"});
  Outcome b = cli({"fit", dir / "in.png", "--seed", "7", "--out-dir", dir / "b"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  for (const char* f : {"manifest.txt", "loss.csv", "output.png", "checkpoint_final.nkwk", "metrics.txt"}) {
    CHECK(std::filesystem::exists(dir / ("a/" + std::string(f))));
  }
  CHECK(read_file(dir / "a/output.png") == read_file(dir / "b/output.png"));
  CHECK(read_file(dir / "a/loss.csv") == read_file(dir / "b/loss.csv"));
  CHECK(a.out.find("whole psnr_db=") != std::string::npos);

  // The manifest is itself a config that reproduces the run.
  Outcome c = cli({"fit", dir / "in.png", "--config", dir / "a/manifest.txt", "--out-dir", dir / "c"}, false);
  REQUIRE(c.code == 0);
  CHECK(read_file(dir / "a/output.png") == read_file(dir / "c/output.png"));
}

TEST_CASE("flags override the config file") {
  testing::TempDir dir("cli_cfg");
  save_png(testing::test_image(8, 8, 1), dir / "in.png");
  std::ofstream(dir / "run.cfg") << "# test config\niters = 5\nseed = 11\nalpha = 3\n";
  std::vector<std::string> args = {"fit", dir / "in.png", "--config", dir / "run.cfg", "--out-dir", dir / "r"};
  for (const auto& a : kTiny) args.push_back(a);  // includes --iters 3
  REQUIRE(cli(args, false).code == 0);
  CHECK(csv_rows(dir / "r/loss.csv") == 3);
  const std::string manifest = read_file(dir / "r/manifest.txt");
  CHECK(manifest.find("\niters = 3\n") != std::string::npos);
  CHECK(manifest.find("\nseed = 11\n") != std::string::npos);
  CHECK(manifest.find("\nalpha = 3\n") != std::string::npos);
  CHECK(manifest.find("fnv1a64=") != std::string::npos);
}

TEST_CASE("ablate mlp equals the baseline path") {
  testing::TempDir dir("cli_ablate");
  save_png(testing::test_image(8, 8, 3), dir / "in.png");
  REQUIRE(cli({"ablate", dir / "in.png", "--stage", "mlp", "--hole", "2,2,2,2", "--out-dir", dir / "a"}).code == 0);
  REQUIRE(cli({"inpaint", dir / "in.png", "--baseline", "--hole", "2,2,2,2", "--out-dir", dir / "b"}).code == 0);
  CHECK(read_file(dir / "a/output.png") == read_file(dir / "b/output.png"));
  CHECK(read_file(dir / "a/metrics.txt").find("region psnr_db=") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "a/input_masked.png"));
}

TEST_CASE("superres and denoise runs write their artifacts") {
  testing::TempDir dir("cli_tasks");
  save_png(testing::test_image(4, 4, 3), dir / "lr.png");
  REQUIRE(cli({"superres", dir / "lr.png", "--factor", "2", "--kernel", "learned", "--kernel-sizes", "3,1",
               "--kernel-channels", "2", "--out-dir", dir / "sr"})
              .code == 0);
  CHECK(load_png(dir / "sr/output.png").height == 8);
  CHECK(std::filesystem::exists(dir / "sr/kernel.csv"));
  CHECK(std::filesystem::exists(dir / "sr/kernel.png"));
  REQUIRE(cli({"superres", dir / "lr.png", "--factor", "2", "--kernel", "round-gauss", "--baseline", "--out-dir",
               dir / "srb"})
              .code == 0);
  save_png(testing::test_image(8, 8, 3), dir / "clean.png");
  Outcome d = cli({"denoise", dir / "clean.png", "--sigma", "20", "--out-dir", dir / "dn"});
  REQUIRE(d.code == 0);
  CHECK(d.out.find("noisy psnr_db=") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "dn/input_noisy.png"));
}

TEST_CASE("eval of an image against itself") {
  testing::TempDir dir("cli_eval");
  save_png(testing::test_image(16, 16, 3), dir / "a.png");
  Outcome e = cli({"eval", "--ref", dir / "a.png", "--out", dir / "a.png"});
  CHECK(e.code == 0);
  CHECK(e.out.find("psnr_db=inf ssim=1.0000") != std::string::npos);
}

TEST_CASE("exit codes") {
  testing::TempDir dir("cli_codes");
  save_png(testing::test_image(8, 8, 3), dir / "in.png");
  const std::string in = dir / "in.png";
  CHECK(cli({"fit", in, "--no-such-flag", "1"}).code == kExitConfig);
  CHECK(cli({}, false).code == kExitConfig);
  CHECK(cli({"fit", in, "--alpha", "-1"}).code == kExitConfig);
  CHECK(cli({"fit", in, "--patch-output", "off"}).code == kExitConfig);
  CHECK(cli({"inpaint", in, "--out-dir", dir / "x"}).code == kExitConfig);
  CHECK(cli({"inpaint", in, "--hole", "0,0,9,9", "--out-dir", dir / "x"}).code == kExitConfig);
  CHECK(cli({"superres", in, "--factor", "1", "--out-dir", dir / "x"}).code == kExitConfig);
  CHECK(cli({"ablate", in, "--stage", "gan", "--out-dir", dir / "x"}).code == kExitConfig);
  CHECK(cli({"fit", in, "--batch-size", "65", "--out-dir", dir / "x"}, false).code == kExitConfig);
  std::ofstream(dir / "fake.png") << "not a png";
  CHECK(cli({"fit", dir / "fake.png", "--out-dir", dir / "x"}).code == kExitRuntime);
  CHECK(cli({"--help"}, false).code == kExitOk);
}
