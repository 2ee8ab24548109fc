#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mtd/experiment.hpp"
#include "mtd/io_util.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string data_root;
  int workers = 0;
};

mtd::ExperimentConfig resolve_config(const CommonArgs& args) {
  mtd::ExperimentConfig config = mtd::load_experiment_config(args.config_path);
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  if (!args.data_root.empty()) config.data_root = args.data_root;
  if (args.workers > 0) config.workers = args.workers;
  if (config.out_dir.empty()) {
    const char* root = std::getenv("MTD_LAB_OUT_ROOT");
    const std::string stem = fs::path(args.config_path).stem().string();
    config.out_dir = fs::path(root ? root : "runs") / stem;
  }
  return config;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  cmd->add_option("-c,--config", args.config_path, "experiment config file")
      ->required(config_required);
  cmd->add_option("-o,--out-dir", args.out_dir, "run directory (overrides config)");
  cmd->add_option("--data-root", args.data_root, "dataset root (overrides config)");
  cmd->add_option("-w,--workers", args.workers, "parallel worker count");
}

void write_error_record(const fs::path& out_dir, const std::string& command,
                        const std::string& message) {
  try {
    if (out_dir.empty()) return;
    fs::create_directories(out_dir / "reports");
    nlohmann::json record{{"command", command}, {"error", message}};
    mtd::write_text_file(out_dir / "reports" / "error.json", record.dump(2) + "\n");
  } catch (...) {
    // error reporting must never mask the original failure
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MTTA attack construction and MTD backdoor audit toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string checkpoint;
  std::string report_dir;

  CLI::App* train = app.add_subcommand("train", "poison (optionally) and train a classifier");
  add_common(train, args);

  CLI::App* detect = app.add_subcommand("detect", "run the MTD audit on a checkpoint");
  add_common(detect, args);
  detect->add_option("--checkpoint", checkpoint, "checkpoint path (default: run dir)");

  CLI::App* strip = app.add_subcommand("strip", "STRIP input-filtering baseline");
  add_common(strip, args);

  CLI::App* fineprune = app.add_subcommand("fineprune", "fine-pruning baseline curve");
  add_common(fineprune, args);

  CLI::App* robustness =
      app.add_subcommand("robustness", "image/trigger translation robustness study");
  add_common(robustness, args);

  CLI::App* sweep = app.add_subcommand("sweep-delta", "class F1 across the delta grid");
  add_common(sweep, args);

  CLI::App* report = app.add_subcommand("report", "consolidate run artifacts");
  report->add_option("run_dir", report_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  fs::path out_dir_for_errors;
  try {
    if (report->parsed()) {
      out_dir_for_errors = report_dir;
      std::cout << mtd::cmd_report(report_dir);
      return 0;
    }

    const mtd::ExperimentConfig config = resolve_config(args);
    out_dir_for_errors = config.out_dir;

    if (train->parsed()) {
      const mtd::TrainOutcome out = mtd::cmd_poison_train(config);
      std::cout << "checkpoint: " << out.checkpoint.string() << "\n"
                << "pure accuracy: " << out.pure_acc << "\n";
      if (out.trojan_acc >= 0.0) std::cout << "trojan accuracy: " << out.trojan_acc << "\n";
    } else if (detect->parsed()) {
      std::optional<fs::path> ckpt;
      if (!checkpoint.empty()) ckpt = checkpoint;
      const mtd::DetectOutcome out = mtd::cmd_detect(config, ckpt);
      std::cout << "threshold: " << out.result.threshold_bits << " bits\n"
                << "verdict: " << (out.result.trojan_model ? "TROJAN" : "pure") << "\n"
                << "flagged classes:";
      for (int c : out.result.target_classes) std::cout << " " << c;
      std::cout << "\nclass F1 vs ground truth: " << out.class_f1 << "\n";
    } else if (strip->parsed()) {
      const mtd::StripOutcome out = mtd::cmd_strip(config);
      std::cout << "strip threshold: " << out.threshold << " bits\n"
                << "FPR: " << out.fpr << "\nFNR: " << out.fnr << "\n";
    } else if (fineprune->parsed()) {
      const auto curve = mtd::cmd_fineprune(config);
      std::cout << "pruned,pure_acc,trojan_acc\n";
      for (const mtd::PrunePoint& p : curve)
        std::cout << p.pruned_count << "," << p.pure_acc << "," << p.trojan_acc << "\n";
    } else if (robustness->parsed()) {
      const auto rows = mtd::cmd_robustness(config);
      std::cout << "rows written: " << rows.size() << " (reports/robustness.csv)\n";
    } else if (sweep->parsed()) {
      const auto rows = mtd::cmd_sweep_delta(config);
      std::cout << "delta,threshold_bits,class_f1\n";
      for (const mtd::DeltaSweepRow& r : rows)
        std::cout << r.delta << "," << r.threshold_bits << "," << r.class_f1 << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    write_error_record(out_dir_for_errors, command, e.what());
    return 1;
  }
  return 0;
}
