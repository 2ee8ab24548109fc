#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mtd/experiment.hpp"

using namespace mtd;
namespace fs = std::filesystem;

TEST_CASE("config parsing: round trip, defaults, comments") {
  const std::string text = R"(
# desk-scale mtta run
schema_version = 1
dataset = mnist
data_root = data/digits28
arch = small_cnn
epochs = 12
attack = mtta
target_ratio = 0.7
trigger_size = 4
delta = 0.1
seed_train = 42   # inline comment
out_dir = /tmp/mtd_run
)";
  const ExperimentConfig c = parse_experiment_config(text);
  CHECK(c.dataset == "mnist");
  CHECK(c.train.epochs == 12);
  CHECK(c.seed_train == 42);
  CHECK(c.out_dir == fs::path("/tmp/mtd_run"));
  CHECK(c.train.lr == 0.1);  // untouched default

  // resolved text parses back to the same digest
  const ExperimentConfig again = parse_experiment_config(c.resolved_text());
  CHECK(again.digest() == c.digest());
}

TEST_CASE("config parsing rejects bad input") {
  CHECK_THROWS(parse_experiment_config("dataset = mnist\n"));  // no schema_version
  CHECK_THROWS(parse_experiment_config("schema_version = 2\n"));
  CHECK_THROWS(parse_experiment_config("schema_version = 1\nnot_a_key = 3\n"));
  CHECK_THROWS(parse_experiment_config("schema_version = 1\nepochs ten\n"));
  CHECK_THROWS(parse_experiment_config("schema_version = 1\nepochs = ten\n"));
  CHECK_THROWS(parse_experiment_config("schema_version = 1\nattack = gan\n"));
}

TEST_CASE("report on an empty run dir lists expected artifacts") {
  const fs::path dir = fs::temp_directory_path() / "mtd_test_empty_run";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CHECK_THROWS_WITH_AS(cmd_report(dir), doctest::Contains("no artifacts"),
                       std::runtime_error);
}

TEST_CASE("report consolidates whatever exists and lists the rest") {
  const fs::path dir = fs::temp_directory_path() / "mtd_test_partial_run";
  fs::remove_all(dir);
  const RunPaths paths = RunPaths::at(dir, true);
  {
    std::ofstream log(paths.logs / "training_log.csv");
    log << "epoch,loss,pure_acc,trojan_acc\n0,2.3,0.1,\n";
  }
  const std::string md = cmd_report(dir);
  CHECK(md.find("## Training") != std::string::npos);
  CHECK(md.find("Missing artifacts") != std::string::npos);
  CHECK(fs::exists(paths.reports / "summary.md"));
}

TEST_CASE("commands require an out_dir") {
  ExperimentConfig c;
  CHECK_THROWS(cmd_poison_train(c));
}
