#include "predpca/dataio.hpp"

#include "doctest.h"

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

#ifndef PREDPCA_CLI_PATH
#error "PREDPCA_CLI_PATH must be defined by the build"
#endif

const std::string kCli = PREDPCA_CLI_PATH;

fs::path work_dir() {
  const auto dir = fs::temp_directory_path() / "predpca_cli_tests";
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string command = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void append_u32_be(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

}  // namespace

TEST_CASE("cli gen writes the artifact set deterministically") {
  const fs::path dir = work_dir();
  const std::string flags =
      "gen --linear --nx 3 --ns 8 --T 500 --seed 11 --noise-ratio 0.5 --out ";
  REQUIRE(run(flags + (dir / "g_a").string()) == 0);
  REQUIRE(run(flags + (dir / "g_b").string()) == 0);

  for (const char* name : {"observations.pmat", "states.pmat", "config.json"})
    CHECK(fs::exists(dir / "g_a" / name));
  CHECK(fs::exists(dir / "g_a" / "truth" / "manifest.txt"));
  CHECK(slurp(dir / "g_a" / "observations.pmat") ==
        slurp(dir / "g_b" / "observations.pmat"));
  CHECK(slurp(dir / "g_a" / "truth" / "B.pmat") == slurp(dir / "g_b" / "truth" / "B.pmat"));

  SUBCASE("invalid dimensions exit with the usage code") {
    CHECK(run("gen --linear --nx 9 --ns 3 --T 100 --out " + (dir / "g_bad").string()) == 2);
  }
}

TEST_CASE("cli select emits one row per candidate with a single chosen flag") {
  const fs::path dir = work_dir();
  REQUIRE(run("gen --linear --nx 3 --ns 8 --T 2000 --seed 3 --out " +
              (dir / "sel_gen").string()) == 0);
  REQUIRE(run("select --input " + (dir / "sel_gen" / "observations.pmat").string() +
              " --nu 1..8 --kp 2 --out " + (dir / "sel").string()) == 0);
  const std::string csv = slurp(dir / "sel" / "selection.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);  // header + 8 rows
  int chosen = 0;
  std::size_t pos = 0;
  while ((pos = csv.find(",1\n", pos)) != std::string::npos) {
    ++chosen;
    pos += 3;
  }
  CHECK(chosen == 1);
}

TEST_CASE("cli fit writes model and metrics; online agrees with batch") {
  const fs::path dir = work_dir();
  REQUIRE(run("gen --linear --nx 3 --ns 8 --T 4000 --seed 5 --out " +
              (dir / "fit_gen").string()) == 0);
  const std::string input = (dir / "fit_gen" / "observations.pmat").string();
  REQUIRE(run("fit --input " + input + " --kp 2 --nu 3 --out " + (dir / "fit_b").string()) ==
          0);
  REQUIRE(run("fit --input " + input + " --kp 2 --nu 3 --online --out " +
              (dir / "fit_o").string()) == 0);
  CHECK(fs::exists(dir / "fit_b" / "model" / "manifest.txt"));
  const std::string batch_metrics = slurp(dir / "fit_b" / "metrics.csv");
  const std::string online_metrics = slurp(dir / "fit_o" / "metrics.csv");
  CHECK(batch_metrics.find("test_error_k1") != std::string::npos);

  // The two routes land on the same projector, so the errors agree closely.
  const auto parse_metric = [](const std::string& text, const std::string& key) {
    const auto at = text.find(key + ",");
    REQUIRE(at != std::string::npos);
    return std::stod(text.substr(at + key.size() + 1));
  };
  CHECK(parse_metric(batch_metrics, "test_error_k1") ==
        doctest::Approx(parse_metric(online_metrics, "test_error_k1")).epsilon(1e-4));

  SUBCASE("missing required flag exits with the usage code") {
    CHECK(run("fit --kp 2") == 2);
  }
  SUBCASE("nonexistent input exits with the data code") {
    CHECK(run("fit --input /nonexistent.pmat --out " + (dir / "fit_x").string()) == 3);
  }
}

TEST_CASE("cli identify emits estimate and report") {
  const fs::path dir = work_dir();
  REQUIRE(run("gen --linear --nx 3 --ns 10 --T 8000 --seed 7 --out " +
              (dir / "id_gen").string()) == 0);
  REQUIRE(run("identify --input " + (dir / "id_gen" / "observations.pmat").string() +
              " --kp 3 --nu 3 --truth " + (dir / "id_gen" / "truth").string() +
              " --out " + (dir / "id").string()) == 0);
  const std::string report = slurp(dir / "id" / "report.csv");
  CHECK(report.find("A_subspace_angle") != std::string::npos);
  CHECK(report.find("sigma_z_spectrum_distance") != std::string::npos);
  CHECK(fs::exists(dir / "id" / "estimate" / "model" / "W.pmat"));
}

TEST_CASE("cli benchmark covers the full grid deterministically") {
  const fs::path dir = work_dir();
  const std::string flags =
      "benchmark --methods ar,pca --T 400,800 --seeds 2 --nx 3 --ns 8 --kp 2 "
      "--t-test 1000 --out ";
  REQUIRE(run(flags + (dir / "bench_a").string()) == 0);
  REQUIRE(run(flags + (dir / "bench_b").string()) == 0);
  const std::string csv = slurp(dir / "bench_a" / "benchmark.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);  // header + 2*2*2 rows
  CHECK(csv == slurp(dir / "bench_b" / "benchmark.csv"));

  SUBCASE("parallel execution merges to the same bytes") {
    REQUIRE(run(flags + (dir / "bench_p").string() + " --jobs 3") == 0);
    CHECK(csv == slurp(dir / "bench_p" / "benchmark.csv"));
  }
}

TEST_CASE("cli rollout") {
  const fs::path dir = work_dir();

  SUBCASE("synthetic stream emits the requested horizon") {
    REQUIRE(run("rollout --synthetic --T 1500 --horizon 37 --seed 4 --out " +
                (dir / "roll").string()) == 0);
    const std::string csv = slurp(dir / "roll" / "rollout.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 38);
  }
  SUBCASE("zero horizon leaves a header-only file") {
    REQUIRE(run("rollout --synthetic --T 1500 --horizon 0 --seed 4 --out " +
                (dir / "roll0").string()) == 0);
    CHECK(slurp(dir / "roll0" / "rollout.csv") == "step,component,label\n");
  }
  SUBCASE("missing inputs exit with the usage code") {
    CHECK(run("rollout --horizon 5 --out " + (dir / "rollx").string()) == 2);
  }
  SUBCASE("second-order transition handles the cyclic stream too") {
    REQUIRE(run("rollout --synthetic --second-order --T 1500 --horizon 23 --seed 4 "
                "--out " + (dir / "roll2").string()) == 0);
    const std::string csv = slurp(dir / "roll2" / "rollout.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 24);
  }
}

TEST_CASE("cli mnist-prep consumes IDX containers") {
  const fs::path dir = work_dir();
  // Tiny synthetic IDX pair: 40 images of 4x4 pixels, labels cycling 0..9.
  std::string images;
  append_u32_be(images, 0x00000803u);
  append_u32_be(images, 40);
  append_u32_be(images, 4);
  append_u32_be(images, 4);
  std::string labels;
  append_u32_be(labels, 0x00000801u);
  append_u32_be(labels, 40);
  for (int i = 0; i < 40; ++i) {
    const int digit = i % 10;
    labels.push_back(static_cast<char>(digit));
    for (int p = 0; p < 16; ++p)
      images.push_back(static_cast<char>((digit * 16 + p * 3) % 256));
  }
  {
    std::ofstream img(dir / "imgs.idx", std::ios::binary | std::ios::trunc);
    img.write(images.data(), static_cast<std::streamsize>(images.size()));
    std::ofstream lab(dir / "labs.idx", std::ios::binary | std::ios::trunc);
    lab.write(labels.data(), static_cast<std::streamsize>(labels.size()));
  }
  REQUIRE(run("mnist-prep --images " + (dir / "imgs.idx").string() + " --labels " +
              (dir / "labs.idx").string() + " --dims 5 --sequence ascending --T 100 " +
              "--seed 2 --out " + (dir / "mn").string()) == 0);
  const predpca::TimeSeries compressed =
      predpca::load_matrix(dir / "mn" / "compressed.pmat");
  CHECK(compressed.rows() == 40);
  CHECK(compressed.cols() == 5);
  const predpca::TimeSeries sequence = predpca::load_matrix(dir / "mn" / "sequence.pmat");
  CHECK(sequence.rows() == 100);

  SUBCASE("absent files exit with the data code") {
    CHECK(run("mnist-prep --images /no.idx --labels /no2.idx --out " +
              (dir / "mnx").string()) == 3);
  }
}
