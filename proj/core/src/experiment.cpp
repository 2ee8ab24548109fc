#include "mtd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtd/io_util.hpp"
#include "mtd/svg_plot.hpp"

namespace fs = std::filesystem;

namespace mtd {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(trim(item)));
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) ss << ",";
    ss << xs[i];
  }
  return ss.str();
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("not a boolean: " + s);
}

Placement anchor_placement(const std::string& anchor, int height, int width, int s) {
  if (anchor == "top_left") return {0, 0};
  if (anchor == "top_right") return {0, width - s};
  if (anchor == "bottom_left") return {height - s, 0};
  if (anchor == "bottom_right") return {height - s, width - s};
  if (anchor == "center") return {(height - s) / 2, (width - s) / 2};
  throw std::invalid_argument("unknown badnet anchor: " + anchor);
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig c;
  bool saw_schema = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    try {
      if (key == "schema_version") {
        c.schema_version = std::stoi(value);
        saw_schema = true;
        if (c.schema_version != 1)
          throw std::runtime_error("unsupported schema_version " + value);
      } else if (key == "dataset") c.dataset = value;
      else if (key == "data_root") c.data_root = value;
      else if (key == "arch") c.arch = value;
      else if (key == "epochs") c.train.epochs = std::stoi(value);
      else if (key == "batch_size") c.train.batch_size = std::stoi(value);
      else if (key == "lr") c.train.lr = std::stod(value);
      else if (key == "momentum") c.train.momentum = std::stod(value);
      else if (key == "weight_decay") c.train.weight_decay = std::stod(value);
      else if (key == "lr_milestones") c.train.milestone_fracs = parse_double_list(value);
      else if (key == "lr_decay") c.train.lr_decay = std::stod(value);
      else if (key == "eval_every") c.eval_every = std::stoi(value);
      else if (key == "attack") c.attack = value;
      else if (key == "target_ratio") c.target_ratio = std::stod(value);
      else if (key == "trigger_size") c.trigger_size = std::stoi(value);
      else if (key == "trigger_alpha") c.trigger_alpha = std::stod(value);
      else if (key == "poison_fraction") c.poison_fraction = std::stod(value);
      else if (key == "badnet_target") c.badnet_target = std::stoi(value);
      else if (key == "badnet_anchor") c.badnet_anchor = value;
      else if (key == "badnet_checkerboard") c.badnet_checkerboard = parse_bool(value);
      else if (key == "delta") c.delta = std::stod(value);
      else if (key == "n_trigger") c.n_trigger = std::stoi(value);
      else if (key == "n_transfer") c.n_transfer = std::stoi(value);
      else if (key == "stratified_split") c.stratified_split = parse_bool(value);
      else if (key == "apply_mode") c.apply_mode = value;
      else if (key == "mask_positions") c.mask_positions = value;
      else if (key == "reveng_lr") c.reveng.lr = std::stod(value);
      else if (key == "reveng_max_steps") c.reveng.max_steps = std::stoi(value);
      else if (key == "reveng_success_prob") c.reveng.success_prob = std::stod(value);
      else if (key == "reveng_stable_steps") c.reveng.stable_steps = std::stoi(value);
      else if (key == "strip_blends") c.strip_blends = std::stoi(value);
      else if (key == "strip_percentile") c.strip_percentile = std::stod(value);
      else if (key == "strip_max_inputs") c.strip_max_inputs = std::stoi(value);
      else if (key == "prune_stride") c.prune_stride = std::stoi(value);
      else if (key == "robustness_max_rows") c.robustness_max_rows = std::stoi(value);
      else if (key == "delta_grid") c.delta_grid = parse_double_list(value);
      else if (key == "seed_split") c.seed_split = std::stoull(value);
      else if (key == "seed_trigger") c.seed_trigger = std::stoull(value);
      else if (key == "seed_train") c.seed_train = std::stoull(value);
      else if (key == "seed_reveng") c.seed_reveng = std::stoull(value);
      else if (key == "seed_eval") c.seed_eval = std::stoull(value);
      else if (key == "out_dir") c.out_dir = value;
      else if (key == "workers") c.workers = std::stoi(value);
      else if (key == "full_scale") c.full_scale = parse_bool(value);
      else throw std::runtime_error("unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": bad value for " + key);
    }
  }
  if (!saw_schema) throw std::runtime_error("config is missing schema_version");
  if (c.attack != "pure" && c.attack != "mtta" && c.attack != "badnet")
    throw std::runtime_error("attack must be pure, mtta or badnet");
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  return parse_experiment_config(read_text_file(path));
}

std::string ExperimentConfig::resolved_text() const {
  std::ostringstream out;
  out << "schema_version = " << schema_version << "\n"
      << "dataset = " << dataset << "\n"
      << "data_root = " << data_root << "\n"
      << "arch = " << arch << "\n"
      << "epochs = " << train.epochs << "\n"
      << "batch_size = " << train.batch_size << "\n"
      << "lr = " << train.lr << "\n"
      << "momentum = " << train.momentum << "\n"
      << "weight_decay = " << train.weight_decay << "\n"
      << "lr_milestones = " << join(train.milestone_fracs) << "\n"
      << "lr_decay = " << train.lr_decay << "\n"
      << "eval_every = " << eval_every << "\n"
      << "attack = " << attack << "\n"
      << "target_ratio = " << target_ratio << "\n"
      << "trigger_size = " << trigger_size << "\n"
      << "trigger_alpha = " << trigger_alpha << "\n"
      << "poison_fraction = " << poison_fraction << "\n"
      << "badnet_target = " << badnet_target << "\n"
      << "badnet_anchor = " << badnet_anchor << "\n"
      << "badnet_checkerboard = " << (badnet_checkerboard ? "true" : "false") << "\n"
      << "delta = " << delta << "\n"
      << "n_trigger = " << n_trigger << "\n"
      << "n_transfer = " << n_transfer << "\n"
      << "stratified_split = " << (stratified_split ? "true" : "false") << "\n"
      << "apply_mode = " << apply_mode << "\n"
      << "mask_positions = " << mask_positions << "\n"
      << "reveng_lr = " << reveng.lr << "\n"
      << "reveng_max_steps = " << reveng.max_steps << "\n"
      << "reveng_success_prob = " << reveng.success_prob << "\n"
      << "reveng_stable_steps = " << reveng.stable_steps << "\n"
      << "strip_blends = " << strip_blends << "\n"
      << "strip_percentile = " << strip_percentile << "\n"
      << "strip_max_inputs = " << strip_max_inputs << "\n"
      << "prune_stride = " << prune_stride << "\n"
      << "robustness_max_rows = " << robustness_max_rows << "\n"
      << "delta_grid = " << join(delta_grid) << "\n"
      << "seed_split = " << seed_split << "\n"
      << "seed_trigger = " << seed_trigger << "\n"
      << "seed_train = " << seed_train << "\n"
      << "seed_reveng = " << seed_reveng << "\n"
      << "seed_eval = " << seed_eval << "\n"
      << "out_dir = " << out_dir.string() << "\n"
      << "workers = " << workers << "\n"
      << "full_scale = " << (full_scale ? "true" : "false") << "\n";
  return out.str();
}

std::string ExperimentConfig::digest() const { return fnv1a_hex(resolved_text()); }

RunPaths RunPaths::at(const fs::path& root, bool create) {
  RunPaths p;
  p.root = root;
  p.config = root / "config";
  p.checkpoints = root / "checkpoints";
  p.poison = root / "poison";
  p.logs = root / "logs";
  p.reveng = root / "reveng";
  p.detection = root / "detection";
  p.reports = root / "reports";
  if (create)
    for (const fs::path* dir : {&p.root, &p.config, &p.checkpoints, &p.poison, &p.logs,
                                &p.reveng, &p.detection, &p.reports})
      fs::create_directories(*dir);
  return p;
}

namespace {

struct LoadedRun {
  Dataset data;
  ClassifierModel model;
  PoisonSpec spec;
  RunPaths paths;
};

PoisonSpec spec_from_config(const ExperimentConfig& config, const Dataset& ds) {
  PoisonSpec spec;
  if (config.attack == "mtta") {
    spec = build_poison_spec(ds.class_count, config.target_ratio, config.trigger_size,
                             ds.channels, static_cast<float>(config.trigger_alpha),
                             config.seed_trigger);
  } else if (config.attack == "badnet") {
    spec = build_badnet_spec(ds.class_count, config.badnet_target, config.trigger_size,
                             ds.channels, static_cast<float>(config.trigger_alpha),
                             anchor_placement(config.badnet_anchor, ds.height, ds.width,
                                              config.trigger_size),
                             config.badnet_checkerboard, config.seed_trigger);
  }
  spec.poison_fraction = config.poison_fraction;
  return spec;
}

LoadedRun load_run(const ExperimentConfig& config,
                   const std::optional<fs::path>& checkpoint = {}) {
  if (config.out_dir.empty()) throw std::runtime_error("config has no out_dir");
  LoadedRun run;
  run.paths = RunPaths::at(config.out_dir, true);
  run.data = load_dataset(config.dataset, config.data_root);
  const fs::path ckpt = checkpoint.value_or(run.paths.checkpoints / "model.ckpt");
  run.model = ClassifierModel::load(ckpt);
  run.spec = load_poison_spec(run.paths.poison);
  return run;
}

std::vector<MaskRegion> masks_from_config(const ExperimentConfig& config, int height,
                                          int width) {
  if (config.mask_positions == "center") return {make_mask(height, width, "center")};
  if (config.mask_positions == "grid9") return nine_position_masks(height, width);
  throw std::runtime_error("mask_positions must be center or grid9");
}

GroundTruth truth_from_spec(const PoisonSpec& spec) {
  GroundTruth truth;
  truth.is_trojan_model = !spec.empty();
  truth.target_classes.insert(spec.target_classes.begin(), spec.target_classes.end());
  return truth;
}

}  // namespace

TrainOutcome cmd_poison_train(const ExperimentConfig& config) {
  if (config.out_dir.empty()) throw std::runtime_error("config has no out_dir");
  const RunPaths paths = RunPaths::at(config.out_dir, true);
  write_text_file(paths.config / "resolved.cfg", config.resolved_text());

  const Dataset ds = load_dataset(config.dataset, config.data_root);
  const PoisonSpec spec = spec_from_config(config, ds);
  save_poison_spec(spec, paths.poison);

  ClassifierModel model =
      ClassifierModel::make(config.arch, ds.class_count,
                            {ds.channels, ds.height, ds.width}, config.seed_train);

  TrainConfig tc = config.train;
  tc.seed = config.seed_train;
  TrainEval eval;
  eval.test = &ds.test;
  eval.spec = spec.empty() ? nullptr : &spec;
  eval.seed = config.seed_eval;
  eval.every = config.eval_every;
  const TrainResult trained = train_classifier(model, ds.train, tc,
                                               spec.empty() ? nullptr : &spec, &eval);
  write_training_log(paths.logs / "training_log.csv", trained.log);

  TrainOutcome out;
  out.checkpoint = paths.checkpoints / "model.ckpt";
  model.save(out.checkpoint, config.digest());
  out.pure_acc = evaluate_pure_accuracy(model, ds.test);
  if (!spec.empty())
    out.trojan_acc =
        evaluate_trojan_accuracy(model, ds.test, spec, -1, config.seed_eval).mean;
  return out;
}

DetectOutcome cmd_detect(const ExperimentConfig& config,
                         const std::optional<fs::path>& checkpoint) {
  LoadedRun run = load_run(config, checkpoint);
  const DetectionSplit split =
      split_detection_sets(run.data.test, config.n_trigger, config.n_transfer,
                           config.seed_split, config.stratified_split,
                           run.data.class_count);
  for (int c : split.transfer_missing_classes)
    std::cerr << "[detect] warning: class " << c << " absent from Data_Transfer\n";

  DetectionConfig dcfg;
  dcfg.delta = config.delta;
  dcfg.class_count = run.data.class_count;
  dcfg.mode = apply_mode_from_string(config.apply_mode);

  const auto masks = masks_from_config(config, run.data.height, run.data.width);
  DetectOutcome out;
  out.result = detect_model(run.model, split, dcfg, config.reveng, masks, config.workers,
                            run.paths.reveng);
  write_detection_report(out.result, run.paths.detection, run.data.class_count);

  const GroundTruth truth = truth_from_spec(run.spec);
  out.truth_is_trojan = truth.is_trojan_model;
  out.verdict_correct = out.result.trojan_model == truth.is_trojan_model;
  std::set<int> flagged(out.result.target_classes.begin(), out.result.target_classes.end());
  out.class_f1 = classwise_f1(flagged, truth.target_classes, run.data.class_count);

  nlohmann::json metrics{{"class_f1", out.class_f1},
                         {"truth_is_trojan", truth.is_trojan_model},
                         {"truth_target_classes",
                          std::vector<int>(truth.target_classes.begin(),
                                           truth.target_classes.end())},
                         {"verdict_trojan", out.result.trojan_model},
                         {"verdict_correct", out.verdict_correct},
                         {"threshold_bits", out.result.threshold_bits}};
  write_text_file(run.paths.detection / "metrics.json", metrics.dump(2) + "\n");
  return out;
}

StripOutcome cmd_strip(const ExperimentConfig& config) {
  LoadedRun run = load_run(config);
  if (run.spec.empty()) throw std::runtime_error("strip: run has no attack to evaluate");

  StripConfig scfg;
  scfg.n_blends = config.strip_blends;
  scfg.percentile = config.strip_percentile;
  scfg.seed = config.seed_eval;

  // Balanced pure/Trojan input sets, Trojan drawn across all targets.
  std::vector<LabeledImage> pure = run.data.test;
  Rng rng(Rng::derive(config.seed_eval, 0x5712));
  rng.shuffle(pure);
  if (static_cast<int>(pure.size()) > config.strip_max_inputs)
    pure.resize(static_cast<std::size_t>(config.strip_max_inputs));

  std::vector<LabeledImage> trojan;
  const int per_target = std::max(1, config.strip_max_inputs /
                                         std::max(1, run.spec.target_count()));
  for (int t : run.spec.target_classes) {
    auto set = build_trojan_testset(run.data.test, run.spec, t,
                                    Rng::derive(config.seed_eval, static_cast<std::uint64_t>(t)));
    rng.shuffle(set);
    for (int i = 0; i < per_target && i < static_cast<int>(set.size()); ++i)
      trojan.push_back(std::move(set[static_cast<std::size_t>(i)]));
  }

  const StripResult result = strip_evaluate(run.model, pure, trojan, scfg);

  std::ofstream csv(run.paths.reports / "strip.csv");
  csv << "kind,entropy_bits\n";
  for (double h : result.pure_entropies) csv << "pure," << h << "\n";
  for (double h : result.trojan_entropies) csv << "trojan," << h << "\n";
  nlohmann::json summary{{"threshold", result.threshold},
                         {"fpr", result.fpr},
                         {"fnr", result.fnr},
                         {"n_pure", result.pure_entropies.size()},
                         {"n_trojan", result.trojan_entropies.size()}};
  write_text_file(run.paths.reports / "strip.json", summary.dump(2) + "\n");

  Histogram plot;
  plot.title = "STRIP blend entropies";
  plot.values = result.pure_entropies;
  plot.overlay_values = result.trojan_entropies;
  plot.label = "pure";
  plot.overlay_label = "trojan";
  plot.bins = 30;
  double max_h = 1e-9;
  for (double h : result.pure_entropies) max_h = std::max(max_h, h);
  for (double h : result.trojan_entropies) max_h = std::max(max_h, h);
  plot.min_x = 0.0;
  plot.max_x = max_h * 1.05;
  plot.vline = result.threshold;
  write_histogram_svg(plot, run.paths.reports / "strip.svg");

  return {result.threshold, result.fpr, result.fnr};
}

std::vector<PrunePoint> cmd_fineprune(const ExperimentConfig& config) {
  LoadedRun run = load_run(config);
  if (run.spec.empty()) throw std::runtime_error("fineprune: run has no attack to evaluate");

  const auto curve = fine_prune_curve(run.model, run.data.test, "features", run.data.test,
                                      run.spec, config.seed_eval, config.prune_stride);

  std::ofstream csv(run.paths.reports / "fineprune.csv");
  csv << "pruned_count,pure_acc,trojan_acc\n";
  for (const PrunePoint& p : curve)
    csv << p.pruned_count << "," << p.pure_acc << "," << p.trojan_acc << "\n";

  LineChart chart;
  chart.title = "fine-pruning: accuracy vs pruned channels";
  chart.x_label = "pruned channels";
  LineSeries pure{"pure", {}, {}}, trojan{"trojan", {}, {}};
  for (const PrunePoint& p : curve) {
    pure.xs.push_back(p.pruned_count);
    pure.ys.push_back(p.pure_acc);
    trojan.xs.push_back(p.pruned_count);
    trojan.ys.push_back(p.trojan_acc);
  }
  chart.series = {pure, trojan};
  write_line_chart_svg(chart, run.paths.reports / "fineprune.svg");
  return curve;
}

std::vector<RobustnessRow> cmd_robustness(const ExperimentConfig& config) {
  LoadedRun run = load_run(config);
  if (run.spec.empty()) throw std::runtime_error("robustness: run has no attack to evaluate");

  RobustnessGrid grid;
  const int max_rows =
      config.robustness_max_rows > 0 ? config.robustness_max_rows : config.trigger_size;
  for (int r = 0; r <= max_rows; ++r) grid.row_counts.push_back(r);

  const auto rows = robustness_curves(run.model, run.data.test, grid, run.spec,
                                      config.seed_eval);
  write_robustness_csv(rows, run.paths.reports / "robustness.csv");

  for (Subject subject : grid.subjects) {
    for (Direction direction : grid.directions) {
      LineChart chart;
      chart.title = to_string(subject) + " translate " + to_string(direction);
      chart.x_label = "rows shifted";
      LineSeries pure{"pure", {}, {}}, trojan{"trojan", {}, {}};
      for (const RobustnessRow& r : rows) {
        if (r.subject != subject || r.direction != direction) continue;
        pure.xs.push_back(r.rows);
        pure.ys.push_back(r.pure_acc);
        trojan.xs.push_back(r.rows);
        trojan.ys.push_back(r.trojan_acc);
      }
      chart.series = {pure, trojan};
      write_line_chart_svg(chart, run.paths.reports / ("robustness_" + to_string(subject) +
                                                       "_" + to_string(direction) + ".svg"));
    }
  }
  return rows;
}

std::vector<DeltaSweepRow> cmd_sweep_delta(const ExperimentConfig& config) {
  LoadedRun run = load_run(config);
  DetectionResult detection;
  if (fs::exists(run.paths.detection / "report.json") &&
      fs::exists(run.paths.detection / "records.csv")) {
    detection = load_detection_report(run.paths.detection);
  } else {
    const DetectOutcome fresh = cmd_detect(config);
    detection = fresh.result;
  }

  const auto rows = delta_sweep(detection, truth_from_spec(run.spec),
                                run.data.class_count, config.delta_grid);

  std::ofstream csv(run.paths.reports / "delta_sweep.csv");
  csv << "delta,threshold_bits,class_f1,trojan_model,flagged\n";
  for (const DeltaSweepRow& r : rows) {
    csv << r.delta << "," << r.threshold_bits << "," << r.class_f1 << ","
        << (r.trojan_model ? 1 : 0) << ",";
    bool first = true;
    for (int c : r.flagged) {
      if (!first) csv << " ";
      csv << c;
      first = false;
    }
    csv << "\n";
  }
  if (!flagged_sets_nested(rows))
    std::cerr << "[sweep-delta] warning: flagged sets are not nested across deltas\n";
  return rows;
}

std::string cmd_report(const fs::path& run_dir) {
  const RunPaths paths = RunPaths::at(run_dir, false);
  std::ostringstream md;
  std::vector<std::string> missing;
  bool any = false;

  md << "# Run report: " << run_dir.filename().string() << "\n\n";

  if (fs::exists(paths.config / "resolved.cfg")) {
    any = true;
    md << "## Configuration\n\n```\n" << read_text_file(paths.config / "resolved.cfg")
       << "```\n\n";
  } else {
    missing.push_back("config/resolved.cfg");
  }

  if (fs::exists(paths.logs / "training_log.csv")) {
    any = true;
    const std::string log = read_text_file(paths.logs / "training_log.csv");
    md << "## Training\n\n```\n" << log << "```\n\n";
  } else {
    missing.push_back("logs/training_log.csv");
  }

  if (fs::exists(paths.detection / "report.json")) {
    any = true;
    const auto report = nlohmann::json::parse(read_text_file(paths.detection / "report.json"));
    md << "## Detection (MTD)\n\n"
       << "- threshold: " << report["threshold_bits"].get<double>() << " bits (delta="
       << report["delta"].get<double>() << ")\n"
       << "- verdict: " << (report["trojan_model"].get<bool>() ? "TROJAN" : "pure") << "\n"
       << "- flagged classes: ";
    for (int c : report["target_classes"].get<std::vector<int>>()) md << c << " ";
    md << "\n\n| class | min entropy (bits) | flagged |\n|---|---|---|\n";
    for (const auto& entry : report["classes"])
      md << "| " << entry["class"].get<int>() << " | "
         << entry["min_entropy_bits"].get<double>() << " | "
         << (entry["flagged"].get<bool>() ? "yes" : "no") << " |\n";
    md << "\n";
    if (fs::exists(paths.detection / "metrics.json")) {
      const auto metrics =
          nlohmann::json::parse(read_text_file(paths.detection / "metrics.json"));
      md << "- class F1 vs ground truth: " << metrics["class_f1"].get<double>() << "\n"
         << "- verdict correct: " << (metrics["verdict_correct"].get<bool>() ? "yes" : "no")
         << "\n\n";
    }
  } else {
    missing.push_back("detection/report.json");
  }

  if (fs::exists(paths.reports / "strip.json")) {
    any = true;
    const auto strip = nlohmann::json::parse(read_text_file(paths.reports / "strip.json"));
    md << "## STRIP baseline\n\n- threshold: " << strip["threshold"].get<double>()
       << " bits\n- FPR: " << strip["fpr"].get<double>()
       << "\n- FNR: " << strip["fnr"].get<double>() << "\n\n";
  } else {
    missing.push_back("reports/strip.json");
  }

  for (const char* name : {"fineprune.csv", "robustness.csv", "delta_sweep.csv"}) {
    if (fs::exists(paths.reports / name)) {
      any = true;
      md << "## " << name << "\n\n```\n" << read_text_file(paths.reports / name)
         << "```\n\n";
    } else {
      missing.push_back(std::string("reports/") + name);
    }
  }

  if (!any) {
    std::string msg = "no artifacts found under " + run_dir.string() + "; expected any of:";
    for (const std::string& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }
  if (!missing.empty()) {
    md << "## Missing artifacts\n\n";
    for (const std::string& m : missing) md << "- " << m << "\n";
  }

  fs::create_directories(paths.reports);
  const std::string text = md.str();
  write_text_file(paths.reports / "summary.md", text);
  return text;
}

}  // namespace mtd
