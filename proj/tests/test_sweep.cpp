#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "relucraft/error.hpp"
#include "relucraft/sweep.hpp"

using namespace relucraft::sweep;
using nlohmann::json;

namespace {

json small_manifest() {
  return json::parse(R"({
    "name": "t", "seed": 3, "trials": 2,
    "data": {"generator": "radial_noisy", "params": {"sigma2": 0.1}, "train_size": 120, "test_size": 40},
    "train": {"iterations": 60, "batch_size": 32, "history_every": 20},
    "select_by": "clean_mse",
    "configs": [{"hidden": [6], "r0": 0.01}],
    "grid": {"depths": [2, 3], "widths": [4]}
  })");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("manifest parsing") {
  const auto m = manifest_from_json(small_manifest());
  REQUIRE(m.configs.size() == 3);
  CHECK(m.configs[0].shape == std::vector<int>{2, 6, 1});
  CHECK(m.configs[0].r0 == 0.01);
  CHECK(m.configs[2].shape == std::vector<int>{2, 4, 4, 4, 1});
  CHECK(m.configs[2].r0 == 1e-3);
  CHECK(m.configs[1].iterations == 60);
  CHECK(m.hash_hex().size() == 16);
  CHECK(m.hash == manifest_from_json(small_manifest()).hash);
  auto other = small_manifest();
  other["seed"] = 4;
  CHECK(manifest_from_json(other).hash != m.hash);
  CHECK(train_seed(m, 0, 0) != train_seed(m, 0, 1));
  CHECK(train_seed(m, 0, 0) != train_seed(m, 1, 0));
  CHECK(data_seed(m, 0, false) != data_seed(m, 0, true));
}

TEST_CASE("malformed manifests are rejected") {
  auto j = small_manifest();
  j.erase("configs");
  j.erase("grid");
  CHECK_THROWS_AS(manifest_from_json(j), relucraft::InvalidInput);
  j = small_manifest();
  j["configs"] = json::array();
  j["grid"]["depths"] = json::array();
  CHECK_THROWS_AS(manifest_from_json(j), relucraft::InvalidInput);
  j = small_manifest();
  j["trials"] = 0;
  CHECK_THROWS_AS(manifest_from_json(j), relucraft::InvalidInput);
  j = small_manifest();
  j["data"]["generator"] = "nope";
  CHECK_THROWS_AS(manifest_from_json(j), relucraft::InvalidInput);
  j = small_manifest();
  j["train"]["r0"] = -1;
  CHECK_THROWS_AS(manifest_from_json(j), relucraft::InvalidInput);
  j = small_manifest();
  j.erase("data");
  CHECK_THROWS_AS(manifest_from_json(j), relucraft::InvalidInput);
}

TEST_CASE("sweep aggregates and replays byte for byte") {
  const auto m = manifest_from_json(small_manifest());
  const auto a = run_sweep(m, 1);
  REQUIRE(a.trials.size() == 6);
  CHECK(a.trials[3].config == 1);
  CHECK(a.trials[3].trial == 1);
  CHECK(a.trials[3].seed == train_seed(m, 1, 1));
  CHECK_FALSE(a.divergence_only());
  REQUIRE(a.configs.size() == 3);
  const double c0 = a.trials[0].report->test_clean->mse, c1 = a.trials[1].report->test_clean->mse;
  CHECK(a.configs[0].select_median == std::min(c0, c1));
  CHECK(a.configs[0].test.mean.mse == doctest::Approx((a.trials[0].report->test.mse + a.trials[1].report->test.mse) / 2));
  REQUIRE(a.depths.size() == 3);
  CHECK(a.depths[0].depth == 1);
  CHECK(a.depths[0].best_config == 0);

  const auto root = std::filesystem::temp_directory_path() / "relucraft_sweep_test";
  std::filesystem::remove_all(root);
  write_outputs(root / "a", m, a);
  write_outputs(root / "b", m, run_sweep(m, 3));
  for (const char* f : {"runs.jsonl", "summary.csv", "by_depth.csv", "manifest.json"}) {
    const std::string x = slurp(root / "a" / f);
    CHECK_FALSE(x.empty());
    CHECK(x == slurp(root / "b" / f));
  }
  std::istringstream runs(slurp(root / "a" / "runs.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(runs, line)) {
    const auto j = json::parse(line);
    CHECK(j["manifest_hash"] == m.hash_hex());
    CHECK(j["manifest_seed"] == 3);
    CHECK_FALSE(j["report"].contains("wall_time"));
    ++lines;
  }
  CHECK(lines == 6);
  const std::string summary = slurp(root / "a" / "summary.csv");
  CHECK(summary.find("clean_mse_median") != std::string::npos);
  CHECK(summary.find("\n" + m.hash_hex() + ",3,") != std::string::npos);
  std::filesystem::remove_all(root);
}
