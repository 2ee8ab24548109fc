#include "mtd/training.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mtd/nn/optim.hpp"
#include "mtd/rng.hpp"

namespace mtd {

TrainResult train_classifier(ClassifierModel& model,
                             const std::vector<LabeledImage>& train,
                             const TrainConfig& config, const PoisonSpec* spec,
                             const TrainEval* eval) {
  if (train.empty()) throw std::invalid_argument("train_classifier: empty training data");
  if (config.epochs < 1) throw std::invalid_argument("train_classifier: epochs must be >= 1");
  if (!(config.lr > 0.0)) throw std::invalid_argument("train_classifier: lr must be > 0");

  std::vector<int> milestones;
  for (double f : config.milestone_fracs)
    milestones.push_back(static_cast<int>(std::lround(f * config.epochs)));

  nn::Sgd opt(model.params(), config.lr, config.momentum, config.weight_decay);
  Rng order_rng(Rng::derive(config.seed, 0x0a11));

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  std::uint64_t batch_counter = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double lr = config.lr;
    for (int m : milestones)
      if (epoch >= m) lr *= config.lr_decay;
    opt.set_lr(lr);

    order_rng.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < train.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(train.size(), begin + static_cast<std::size_t>(config.batch_size));

      std::vector<LabeledImage> batch;
      batch.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) batch.push_back(train[order[i]]);
      if (spec && !spec->empty())
        batch = poison_batch(batch, *spec, Rng::derive(config.seed, 0xb000 + batch_counter));
      ++batch_counter;

      Tensor inputs = stack_batch(batch, 0, batch.size());
      std::vector<int> labels(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = batch[i].label;

      const Tensor probs = nn::softmax_rows(model.forward(inputs, true));
      const double loss = nn::mean_cross_entropy(probs, labels);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_classifier: loss diverged (non-finite) at epoch " +
                                 std::to_string(epoch));
      loss_sum += loss;
      ++batches;

      model.zero_grad();
      model.backward(nn::cross_entropy_logit_grad(probs, labels));
      opt.step();
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / std::max(batches, 1);
    const bool eval_now =
        eval && eval->test && !eval->test->empty() &&
        (epoch == config.epochs - 1 || (std::max(eval->every, 1) > 0 &&
                                        epoch % std::max(eval->every, 1) == 0));
    if (eval_now) {
      entry.pure_acc = evaluate_pure_accuracy(model, *eval->test);
      if (eval->spec && !eval->spec->empty())
        entry.trojan_acc =
            evaluate_trojan_accuracy(model, *eval->test, *eval->spec, -1, eval->seed).mean;
    }
    result.log.push_back(entry);
  }
  return result;
}

TrojanAccuracy evaluate_trojan_accuracy(ClassifierModel& model,
                                        const std::vector<LabeledImage>& test,
                                        const PoisonSpec& spec, int target,
                                        std::uint64_t seed) {
  if (spec.empty())
    throw std::invalid_argument("evaluate_trojan_accuracy: spec has no targets");
  std::vector<int> targets;
  if (target >= 0)
    targets.push_back(target);
  else
    targets = spec.target_classes;

  TrojanAccuracy out;
  double sum = 0.0;
  for (int t : targets) {
    const auto trojan_set =
        build_trojan_testset(test, spec, t, Rng::derive(seed, static_cast<std::uint64_t>(t)));
    const std::vector<int> preds = model.predict(trojan_set);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < trojan_set.size(); ++i)
      if (preds[i] == t) ++hits;
    const double acc = static_cast<double>(hits) / static_cast<double>(trojan_set.size());
    out.per_target[t] = acc;
    sum += acc;
  }
  out.mean = sum / static_cast<double>(targets.size());
  return out;
}

void write_training_log(const std::filesystem::path& csv_path,
                        const std::vector<EpochLog>& log) {
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot write " + csv_path.string());
  out << "epoch,loss,pure_acc,trojan_acc\n";
  for (const EpochLog& e : log) {
    out << e.epoch << "," << e.loss << ",";
    if (e.pure_acc >= 0.0) out << e.pure_acc;
    out << ",";
    if (e.trojan_acc >= 0.0) out << e.trojan_acc;
    out << "\n";
  }
}

}  // namespace mtd
