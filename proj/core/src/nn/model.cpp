#include "mtd/nn/model.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mtd {

using nn::Layer;

ClassifierModel::ClassifierModel(const ClassifierModel& other)
    : arch_id_(other.arch_id_),
      class_count_(other.class_count_),
      input_shape_(other.input_shape_),
      prune_index_(other.prune_index_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

ClassifierModel& ClassifierModel::operator=(const ClassifierModel& other) {
  if (this == &other) return *this;
  ClassifierModel tmp(other);
  *this = std::move(tmp);
  return *this;
}

Tensor ClassifierModel::forward(const Tensor& batch, bool train) {
  Tensor x = batch;
  for (auto& layer : layers_) x = layer->forward(x, train);
  return x;
}

Tensor ClassifierModel::probabilities(const Tensor& batch) {
  return nn::softmax_rows(forward(batch, false));
}

Tensor ClassifierModel::probabilities_single(const Tensor& image) {
  Tensor batch({1, image.dim(0), image.dim(1), image.dim(2)});
  std::memcpy(batch.data(), image.data(), image.size() * sizeof(float));
  Tensor probs = probabilities(batch);
  return probs.reshaped({class_count_});
}

std::vector<int> ClassifierModel::predict(const std::vector<LabeledImage>& images,
                                          int batch_size) {
  std::vector<int> out(images.size());
  for (std::size_t begin = 0; begin < images.size();
       begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(images.size(), begin + static_cast<std::size_t>(batch_size));
    const Tensor probs = probabilities(stack_batch(images, begin, end));
    const int classes = probs.dim(1);
    for (std::size_t i = begin; i < end; ++i) {
      const float* row = probs.data() + (i - begin) * static_cast<std::size_t>(classes);
      int best = 0;
      for (int c = 1; c < classes; ++c)
        if (row[c] > row[best]) best = c;
      out[i] = best;
    }
  }
  return out;
}

Tensor ClassifierModel::backward(const Tensor& grad_logits) {
  Tensor g = grad_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void ClassifierModel::zero_grad() {
  for (nn::ParamTensor* p : params()) p->grad.fill(0.0f);
}

Tensor ClassifierModel::input_gradient(const Tensor& batch, const std::vector<int>& labels,
                                       double* loss_out) {
  const Tensor probs = nn::softmax_rows(forward(batch, false));
  if (loss_out) *loss_out = nn::mean_cross_entropy(probs, labels);
  zero_grad();
  return backward(nn::cross_entropy_logit_grad(probs, labels));
}

std::vector<nn::ParamTensor*> ClassifierModel::params() {
  std::vector<nn::ParamTensor*> out;
  for (auto& layer : layers_) {
    const auto p = layer->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<nn::NamedState> ClassifierModel::named_state() {
  std::vector<nn::NamedState> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (nn::NamedState s : layers_[i]->state()) {
      out.push_back({"L" + std::to_string(i) + "." + layers_[i]->kind() + "." + s.name,
                     s.tensor});
    }
  }
  return out;
}

nn::ChannelMask* ClassifierModel::prune_hook(const std::string& layer_id) {
  if (layer_id != "features" || prune_index_ < 0)
    throw std::invalid_argument("unknown prune layer: " + layer_id);
  return static_cast<nn::ChannelMask*>(layers_[static_cast<std::size_t>(prune_index_)].get());
}

// ----------------------------------------------------------- architectures

/// 2-conv/2-fc classifier for MNIST-scale 28x28 inputs.
ClassifierModel build_small_cnn(int class_count, std::array<int, 3> input_shape,
                                std::uint64_t seed) {
  Rng rng(seed);
  ClassifierModel m;
  m.arch_id_ = "small_cnn";
  m.class_count_ = class_count;
  m.input_shape_ = input_shape;
  const int channels = input_shape[0], height = input_shape[1], width = input_shape[2];
  m.layers_.push_back(std::make_unique<nn::Conv2d>(channels, 32, 5, 1, 2, rng));
  m.layers_.push_back(std::make_unique<nn::ReLU>());
  m.layers_.push_back(std::make_unique<nn::MaxPool2>());
  m.layers_.push_back(std::make_unique<nn::Conv2d>(32, 64, 3, 1, 1, rng));
  m.layers_.push_back(std::make_unique<nn::ReLU>());
  m.prune_index_ = static_cast<int>(m.layers_.size());
  m.layers_.push_back(std::make_unique<nn::ChannelMask>(64));
  m.layers_.push_back(std::make_unique<nn::MaxPool2>());
  m.layers_.push_back(std::make_unique<nn::MaxPool2>());
  m.layers_.push_back(std::make_unique<nn::Flatten>());
  const int feat = 64 * (height / 8) * (width / 8);
  m.layers_.push_back(std::make_unique<nn::Linear>(feat, 128, rng));
  m.layers_.push_back(std::make_unique<nn::ReLU>());
  m.layers_.push_back(std::make_unique<nn::Linear>(128, class_count, rng));
  return m;
}

/// Pre-activation ResNet-18 for CIFAR/GTSRB-scale 32x32 inputs.
ClassifierModel build_preact_resnet18(int class_count, std::array<int, 3> input_shape,
                                      std::uint64_t seed) {
  Rng rng(seed);
  ClassifierModel m;
  m.arch_id_ = "preact_resnet18";
  m.class_count_ = class_count;
  m.input_shape_ = input_shape;
  m.layers_.push_back(std::make_unique<nn::Conv2d>(input_shape[0], 64, 3, 1, 1, rng));
  const int widths[4] = {64, 128, 256, 512};
  int in_ch = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const int stride = stage == 0 ? 1 : 2;
    m.layers_.push_back(std::make_unique<nn::PreActBlock>(in_ch, widths[stage], stride, rng));
    m.layers_.push_back(std::make_unique<nn::PreActBlock>(widths[stage], widths[stage], 1, rng));
    in_ch = widths[stage];
  }
  m.layers_.push_back(std::make_unique<nn::BatchNorm2d>(512));
  m.layers_.push_back(std::make_unique<nn::ReLU>());
  m.prune_index_ = static_cast<int>(m.layers_.size());
  m.layers_.push_back(std::make_unique<nn::ChannelMask>(512));
  m.layers_.push_back(std::make_unique<nn::GlobalAvgPool>());
  m.layers_.push_back(std::make_unique<nn::Linear>(512, class_count, rng));
  return m;
}

ClassifierModel ClassifierModel::make(const std::string& arch_id, int class_count,
                                      std::array<int, 3> input_shape, std::uint64_t seed) {
  if (arch_id == "small_cnn") return build_small_cnn(class_count, input_shape, seed);
  if (arch_id == "preact_resnet18")
    return build_preact_resnet18(class_count, input_shape, seed);
  throw std::invalid_argument("unknown architecture id: " + arch_id);
}

std::vector<std::string> ClassifierModel::architectures() {
  return {"small_cnn", "preact_resnet18"};
}

// ------------------------------------------------------------- checkpoint

namespace {
constexpr char kMagic[8] = {'M', 'T', 'D', 'C', 'K', 'P', 'T', '1'};
}

void ClassifierModel::save(const std::filesystem::path& path,
                           const std::string& config_digest) const {
  auto& self = const_cast<ClassifierModel&>(*this);
  nlohmann::json header;
  header["arch"] = arch_id_;
  header["class_count"] = class_count_;
  header["input_shape"] = {input_shape_[0], input_shape_[1], input_shape_[2]};
  header["config_digest"] = config_digest;
  nlohmann::json tensors = nlohmann::json::array();
  for (nn::NamedState s : self.named_state())
    tensors.push_back({{"name", s.name}, {"shape", s.tensor->shape()}});
  header["tensors"] = tensors;
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t len = static_cast<std::uint32_t>(header_text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (nn::NamedState s : self.named_state())
    out.write(reinterpret_cast<const char*>(s.tensor->data()),
              static_cast<std::streamsize>(s.tensor->size() * sizeof(float)));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

ClassifierModel ClassifierModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error(path.string() + ": not a model checkpoint");
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string header_text(len, '\0');
  in.read(header_text.data(), len);
  if (!in) throw std::runtime_error(path.string() + ": truncated checkpoint header");
  const auto header = nlohmann::json::parse(header_text);

  const auto shape_list = header.at("input_shape").get<std::vector<int>>();
  ClassifierModel model = make(header.at("arch").get<std::string>(),
                               header.at("class_count").get<int>(),
                               {shape_list[0], shape_list[1], shape_list[2]},
                               /*seed=*/0);
  auto state = model.named_state();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != state.size())
    throw std::runtime_error(path.string() + ": checkpoint tensor list mismatch");
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (tensors[i].at("name").get<std::string>() != state[i].name)
      throw std::runtime_error(path.string() + ": unexpected tensor " + state[i].name);
    in.read(reinterpret_cast<char*>(state[i].tensor->data()),
            static_cast<std::streamsize>(state[i].tensor->size() * sizeof(float)));
    if (!in) throw std::runtime_error(path.string() + ": truncated checkpoint data");
  }
  return model;
}

// ------------------------------------------------------------- evaluation

Tensor stack_batch(const std::vector<LabeledImage>& images, std::size_t begin,
                   std::size_t end) {
  const Tensor& first = images[begin].pixels;
  Tensor batch({static_cast<int>(end - begin), first.dim(0), first.dim(1), first.dim(2)});
  for (std::size_t i = begin; i < end; ++i)
    std::memcpy(batch.data() + (i - begin) * first.size(), images[i].pixels.data(),
                first.size() * sizeof(float));
  return batch;
}

double evaluate_pure_accuracy(ClassifierModel& model,
                              const std::vector<LabeledImage>& test, int batch_size) {
  if (test.empty()) throw std::invalid_argument("evaluate_pure_accuracy: empty test set");
  const std::vector<int> preds = model.predict(test, batch_size);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (preds[i] == test[i].label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

}  // namespace mtd
