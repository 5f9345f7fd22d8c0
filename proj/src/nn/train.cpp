#include "desatscan/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "desatscan/common.hpp"
#include "desatscan/dstf.hpp"
#include "desatscan/metrics.hpp"
#include "desatscan/random.hpp"
#include "desatscan/tsv.hpp"

namespace desatscan::nn {

void TensorDataset::add(std::shared_ptr<const std::vector<float>> item, int label) {
  if (!item || item->size() != item_size())
    throw ConfigError("dataset: tensor size does not match " + std::to_string(channels) + "x" +
                      std::to_string(height) + "x" + std::to_string(width));
  if (label != 0 && label != 1) throw ConfigError("dataset: labels must be 0 or 1");
  items.push_back(std::move(item));
  labels.push_back(label);
}

double sigmoid_score(double z) {
  const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(s, 1e-7, 1.0 - 1e-7);
}

namespace {

void check_shape(const TensorDataset& d, const ModelConfig& cfg, const char* what) {
  if (d.channels != cfg.in_channels)
    throw ConfigError(std::string(what) + ": dataset has " + std::to_string(d.channels) +
                      " channels, model expects " + std::to_string(cfg.in_channels));
}

void check_classes(const TensorDataset& d, const char* what) {
  const auto pos = std::count(d.labels.begin(), d.labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(d.labels.size()))
    throw ConfigError(std::string(what) + " set must contain both classes");
}

template <class T>
void gather(const TensorDataset& d, std::span<const std::size_t> idx, std::vector<T>& out) {
  const std::size_t n = d.item_size();
  out.resize(idx.size() * n);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& src = *d.items[idx[b]];
    std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(b * n));
  }
}

template <class T>
std::vector<double> score_all(TinyResNet<T>& net, const TensorDataset& d, int batch,
                              Execution exec) {
  std::vector<double> scores;
  scores.reserve(d.size());
  std::vector<T> buf;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < d.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(d.size(), start + static_cast<std::size_t>(batch));
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    gather(d, idx, buf);
    BatchView<T> view{buf, static_cast<int>(idx.size()), d.channels, d.height, d.width};
    for (T z : net.forward(view, Mode::Eval, exec)) scores.push_back(sigmoid_score(z));
  }
  return scores;
}

}  // namespace

template <class T>
TrainResult<T> train(const TensorDataset& train_set, const TensorDataset& test_set,
                     const ModelConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  check_shape(train_set, cfg, "train");
  check_shape(test_set, cfg, "test");
  check_classes(train_set, "training");
  check_classes(test_set, "test");

  TinyResNet<T> net(cfg, derive_seed(cfg.seed, {0}));
  auto adam = make_adam_state(net.params());
  TrainResult<T> result;
  result.model.config = cfg;
  result.model.params = net.params();
  double best_ba = -1.0;

  std::vector<std::size_t> order(train_set.size());
  std::vector<T> buf;
  std::vector<int> labels;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      gather(train_set, idx, buf);
      labels.resize(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b) labels[b] = train_set.labels[idx[b]];
      BatchView<T> view{buf, static_cast<int>(idx.size()), train_set.channels, train_set.height,
                        train_set.width};
      const auto logits = net.forward(view, Mode::Train, options.exec);
      const auto loss = weighted_bce<T>(logits, labels, options.pos_weight);
      loss_sum += loss.loss * static_cast<double>(idx.size());
      const auto grads = net.backward(loss.grad, options.exec);
      adam_step(adam, net.params(), grads, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
    }

    const auto scores = score_all(net, test_set, cfg.batch_size, options.exec);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(order.size());
    log.test_ba = balanced_accuracy(scores, test_set.labels);
    log.test_auc = roc_auc(scores, test_set.labels);
    result.history.epochs.push_back(log);
    if (log.test_ba > best_ba) {
      best_ba = log.test_ba;
      result.history.best_epoch = epoch;
      result.model.params = net.params();
    }
    if (options.on_epoch) options.on_epoch(log);
  }
  return result;
}

template <class T>
std::vector<double> predict(const TrainedModel<T>& model, const TensorDataset& data, Execution exec) {
  if (data.size() == 0) return {};
  check_shape(data, model.config, "predict");
  TinyResNet<T> net(model.config, model.params);
  return score_all(net, data, model.config.batch_size, exec);
}

template TrainResult<float> train<float>(const TensorDataset&, const TensorDataset&,
                                         const ModelConfig&, const TrainOptions&);
template TrainResult<double> train<double>(const TensorDataset&, const TensorDataset&,
                                           const ModelConfig&, const TrainOptions&);
template std::vector<double> predict<float>(const TrainedModel<float>&, const TensorDataset&, Execution);
template std::vector<double> predict<double>(const TrainedModel<double>&, const TensorDataset&, Execution);

namespace {

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int to_int(std::string_view v, std::string_view key) {
  try {
    return static_cast<int>(parse_int(v, key));
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

double to_double(std::string_view v, std::string_view key) {
  try {
    return parse_double(v, key);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

std::string format_model_config(const ModelConfig& cfg) {
  std::string blocks;
  for (const auto& b : cfg.blocks) {
    if (!blocks.empty()) blocks += ",";
    blocks += std::to_string(b.out_channels) + "x" + std::to_string(b.stride);
  }
  std::string s;
  s += "in_channels=" + std::to_string(cfg.in_channels) + "\n";
  s += "stem_channels=" + std::to_string(cfg.stem_channels) + "\n";
  s += "blocks=" + blocks + "\n";
  s += "kernel=" + std::to_string(cfg.kernel) + "\n";
  s += "epochs=" + std::to_string(cfg.epochs) + "\n";
  s += "learning_rate=" + format_g(cfg.learning_rate) + "\n";
  s += "batch_size=" + std::to_string(cfg.batch_size) + "\n";
  s += "beta1=" + format_g(cfg.beta1) + "\n";
  s += "beta2=" + format_g(cfg.beta2) + "\n";
  s += "adam_eps=" + format_g(cfg.adam_eps) + "\n";
  s += "bn_momentum=" + format_g(cfg.bn_momentum) + "\n";
  s += "bn_eps=" + format_g(cfg.bn_eps) + "\n";
  s += "seed=" + std::to_string(cfg.seed) + "\n";
  return s;
}

bool set_model_option(ModelConfig& cfg, std::string_view key, std::string_view value) {
  const auto k = to_lower(trim(key));
  const auto v = trim(value);
  if (k == "in_channels") cfg.in_channels = to_int(v, k);
  else if (k == "stem_channels") cfg.stem_channels = to_int(v, k);
  else if (k == "kernel") cfg.kernel = to_int(v, k);
  else if (k == "epochs") cfg.epochs = to_int(v, k);
  else if (k == "learning_rate" || k == "lr") cfg.learning_rate = to_double(v, k);
  else if (k == "batch_size") cfg.batch_size = to_int(v, k);
  else if (k == "beta1") cfg.beta1 = to_double(v, k);
  else if (k == "beta2") cfg.beta2 = to_double(v, k);
  else if (k == "adam_eps") cfg.adam_eps = to_double(v, k);
  else if (k == "bn_momentum") cfg.bn_momentum = to_double(v, k);
  else if (k == "bn_eps") cfg.bn_eps = to_double(v, k);
  else if (k == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(std::string(v)));
  else if (k == "blocks") {
    // "16x1,32x2"; empty means no residual blocks.
    std::vector<BlockSpec> blocks;
    std::string_view rest = v;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = trim(rest.substr(0, comma));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      const auto x = item.find_first_of("xX");
      if (x == std::string_view::npos)
        throw ConfigError("model.blocks: expected <channels>x<stride>, got '" + std::string(item) + "'");
      blocks.push_back({to_int(item.substr(0, x), "blocks"), to_int(item.substr(x + 1), "blocks")});
    }
    cfg.blocks = std::move(blocks);
  } else {
    return false;
  }
  return true;
}

ModelConfig parse_model_config(std::string_view text) {
  ModelConfig cfg;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("model config: missing '=' in '" + std::string(line) + "'");
    if (!set_model_option(cfg, line.substr(0, eq), line.substr(eq + 1)))
      throw ConfigError("model config: unknown key '" + std::string(trim(line.substr(0, eq))) + "'");
  }
  return cfg;
}

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'S', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(std::vector<std::uint8_t>& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
  std::string where;

  void need(std::size_t n) const {
    if (bytes.size() - pos < n) throw ParseError(where + ": truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const TrainedModel<float>& model) {
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_bytes(out, format_model_config(model.config));
  put_u32(out, static_cast<std::uint32_t>(model.params.size()));
  for (const auto& p : model.params) {
    put_bytes(out, p.name);
    std::vector<std::uint32_t> dims(p.shape.begin(), p.shape.end());
    const auto blob = encode_dstf(dims, p.value);
    out.insert(out.end(), blob.begin(), blob.end());
  }
  write_file_bytes(path, out);
}

TrainedModel<float> read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  Reader r{bytes, 0, path.string()};
  r.need(4);
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw ParseError(r.where + ": not a checkpoint");
  r.pos = 4;
  if (r.u32() != kCheckpointVersion) throw ParseError(r.where + ": unsupported checkpoint version");
  TrainedModel<float> model;
  model.config = parse_model_config(r.str());
  // The layout comes from the config; stored tensors fill it by name.
  auto layout = TinyResNet<float>(model.config, std::uint64_t{0}).params();
  const auto count = r.u32();
  if (count != layout.size()) throw ParseError(r.where + ": tensor count does not match the config");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = r.str();
    std::size_t used = 0;
    auto t = decode_dstf(std::span(bytes).subspan(r.pos), &used);
    r.pos += used;
    auto it = std::find_if(layout.begin(), layout.end(), [&](const auto& p) { return p.name == name; });
    if (it == layout.end()) throw ParseError(r.where + ": unexpected tensor '" + name + "'");
    if (!std::equal(it->shape.begin(), it->shape.end(), t.dims.begin(), t.dims.end()))
      throw ParseError(r.where + ": shape mismatch for '" + name + "'");
    it->value = std::move(t.data);
  }
  model.params = std::move(layout);
  return model;
}

void write_train_log(const std::filesystem::path& path, const TrainHistory& history) {
  TsvTable t;
  t.header = {"epoch", "train_loss", "test_ba", "test_auc"};
  for (const auto& e : history.epochs)
    t.rows.push_back({std::to_string(e.epoch), format_fixed(e.train_loss), format_fixed(e.test_ba),
                      format_fixed(e.test_auc)});
  write_tsv(path, t);
}

}  // namespace desatscan::nn
