#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "desatscan/nn/kernels.hpp"
#include "desatscan/nn/model.hpp"
#include "desatscan/nn/train.hpp"
#include "desatscan/random.hpp"

using namespace desatscan;
using namespace desatscan::nn;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.in_channels = 2;
  c.stem_channels = 2;
  c.blocks = {{2, 1}};
  c.seed = 1;
  return c;
}

double model_loss(TinyResNet<double>& net, const std::vector<double>& x, int batch,
                  const std::vector<int>& y, double w) {
  BatchView<double> b{x, batch, net.config().in_channels, 8, 8};
  const auto z = net.forward(b, Mode::Train, Execution::Serial);
  return weighted_bce<double>(z, y, w).loss;
}

double worst_model_grad_error(ModelConfig cfg) {
  TinyResNet<double> net(cfg, 11);
  const int batch = 4;
  const auto x = randn(static_cast<std::size_t>(batch) * cfg.in_channels * 64, 5);
  const std::vector<int> y{1, 0, 0, 1};
  const double w = 2.5;
  BatchView<double> b{x, batch, cfg.in_channels, 8, 8};
  const auto z = net.forward(b, Mode::Train, Execution::Serial);
  const auto loss = weighted_bce<double>(z, y, w);
  const auto grads = net.backward(loss.grad, Execution::Serial);

  double worst = 0.0;
  const double h = 1e-5;
  auto& params = net.params();
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].trainable) continue;
    bool any = false;
    for (std::size_t i = 0; i < params[p].value.size(); ++i) {
      const double orig = params[p].value[i];
      params[p].value[i] = orig + h;
      const double lp = model_loss(net, x, batch, y, w);
      params[p].value[i] = orig - h;
      const double lm = model_loss(net, x, batch, y, w);
      params[p].value[i] = orig;
      worst = std::max(worst, rel_err(grads[p][i], (lp - lm) / (2 * h)));
      any = any || grads[p][i] != 0.0;
    }
    CHECK_MESSAGE(any, params[p].name);
  }
  return worst;
}

}  // namespace

TEST_CASE("conv2d: parallel kernel equals the reference") {
  for (int stride : {1, 2})
    for (int kernel : {1, 3}) {
      ConvGeometry g{3, 4, 9, 7, 5, kernel, stride, kernel / 2};
      const auto x = randn(g.in_size(), 1);
      const auto w = randn(g.weight_size(), 2);
      const auto dy = randn(g.out_size(), 3);
      std::vector<double> y1(g.out_size()), y2(g.out_size());
      reference::conv2d_forward(g, x.data(), w.data(), y1.data());
      parallel::conv2d_forward(g, x.data(), w.data(), y2.data());
      for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y2[i] == doctest::Approx(y1[i]).epsilon(1e-12));
      std::vector<double> dx1(g.in_size()), dx2(g.in_size()), dw1(g.weight_size()), dw2(g.weight_size());
      reference::conv2d_backward(g, x.data(), w.data(), dy.data(), dx1.data(), dw1.data());
      parallel::conv2d_backward(g, x.data(), w.data(), dy.data(), dx2.data(), dw2.data());
      for (std::size_t i = 0; i < dx1.size(); ++i) CHECK(dx2[i] == doctest::Approx(dx1[i]).epsilon(1e-12));
      for (std::size_t i = 0; i < dw1.size(); ++i) CHECK(dw2[i] == doctest::Approx(dw1[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d reference matches a hand computation") {
  // 1x1x3x3 input, 3x3 kernel, pad 1: the centre output is the full dot product.
  ConvGeometry g{1, 1, 3, 3, 1, 3, 1, 1};
  std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<double> w{0, 0, 0, 0, 1, 0, 0, 0, 0};
  std::vector<double> y(9);
  reference::conv2d_forward(g, x.data(), w.data(), y.data());
  CHECK(y == x);
  std::fill(w.begin(), w.end(), 1.0);
  reference::conv2d_forward(g, x.data(), w.data(), y.data());
  CHECK(y[4] == 45.0);
  CHECK(y[0] == 1 + 2 + 4 + 5);
  CHECK(y[8] == 5 + 6 + 8 + 9);
}

TEST_CASE("conv2d backward matches finite differences") {
  ConvGeometry g{2, 2, 5, 4, 3, 3, 2, 1};
  auto x = randn(g.in_size(), 7);
  auto w = randn(g.weight_size(), 8);
  const auto dy = randn(g.out_size(), 9);
  auto objective = [&] {
    std::vector<double> y(g.out_size());
    reference::conv2d_forward(g, x.data(), w.data(), y.data());
    return std::inner_product(y.begin(), y.end(), dy.begin(), 0.0);
  };
  std::vector<double> dx(g.in_size()), dw(g.weight_size());
  reference::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data());
  const double h = 1e-5;
  for (auto* pair : {&x, &w}) {
    auto& v = *pair;
    const auto& grad = (pair == &x) ? dx : dw;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double o = v[i];
      v[i] = o + h;
      const double p = objective();
      v[i] = o - h;
      const double m = objective();
      v[i] = o;
      CHECK(rel_err(grad[i], (p - m) / (2 * h)) < 1e-6);
    }
  }
}

TEST_CASE("batchnorm backward matches finite differences") {
  const int batch = 3, channels = 2, spatial = 5;
  const std::size_t n = batch * channels * spatial;
  auto x = randn(n, 21);
  auto gamma = randn(channels, 22);
  auto beta = randn(channels, 23);
  const auto dy = randn(n, 24);
  auto objective = [&] {
    std::vector<double> y(n), xh(n), is(channels), bm(channels), bv(channels);
    batchnorm_forward_train(x.data(), batch, channels, spatial, gamma.data(), beta.data(), 1e-5,
                            y.data(), xh.data(), is.data(), bm.data(), bv.data());
    return std::inner_product(y.begin(), y.end(), dy.begin(), 0.0);
  };
  std::vector<double> y(n), xh(n), is(channels), bm(channels), bv(channels);
  batchnorm_forward_train(x.data(), batch, channels, spatial, gamma.data(), beta.data(), 1e-5,
                          y.data(), xh.data(), is.data(), bm.data(), bv.data());
  // Batch statistics of channel 0 by direct summation.
  double mean = 0.0, var = 0.0;
  for (int b = 0; b < batch; ++b)
    for (int s = 0; s < spatial; ++s) mean += x[b * channels * spatial + s];
  mean /= batch * spatial;
  for (int b = 0; b < batch; ++b)
    for (int s = 0; s < spatial; ++s) var += std::pow(x[b * channels * spatial + s] - mean, 2);
  var /= batch * spatial;
  CHECK(bm[0] == doctest::Approx(mean).epsilon(1e-12));
  CHECK(bv[0] == doctest::Approx(var).epsilon(1e-12));

  std::vector<double> dx(n), dg(channels), db(channels);
  batchnorm_backward(dy.data(), xh.data(), is.data(), gamma.data(), batch, channels, spatial,
                     dx.data(), dg.data(), db.data());
  const double h = 1e-5;
  auto check = [&](std::vector<double>& v, const std::vector<double>& g) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double o = v[i];
      v[i] = o + h;
      const double p = objective();
      v[i] = o - h;
      const double m = objective();
      v[i] = o;
      CHECK(rel_err(g[i], (p - m) / (2 * h)) < 1e-6);
    }
  };
  check(x, dx);
  check(gamma, dg);
  check(beta, db);
}

TEST_CASE("weighted_bce examples and gradient") {
  const std::vector<double> z0{0.0};
  const std::vector<int> one{1};
  auto r = weighted_bce<double>(z0, one, 1.0);
  CHECK(r.loss == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(r.grad[0] == doctest::Approx(-0.5));
  r = weighted_bce<double>(z0, one, 5.0);
  CHECK(r.loss == doctest::Approx(3.465736).epsilon(1e-6));

  // Stable at extreme logits.
  const std::vector<double> big{800.0, -800.0};
  const std::vector<int> match{1, 0}, miss{0, 1};
  CHECK(weighted_bce<double>(big, match, 1.0).loss == doctest::Approx(0.0));
  CHECK(weighted_bce<double>(big, miss, 1.0).loss == doctest::Approx(800.0));
  CHECK(std::isfinite(weighted_bce<double>(big, miss, 1.0).grad[0]));

  const auto z = randn(6, 31, 2.0);
  const std::vector<int> y{1, 0, 1, 1, 0, 0};
  const auto base = weighted_bce<double>(z, y, 1.7);
  CHECK(base.loss > 0.0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto zp = z, zm = z;
    zp[i] += 1e-6;
    zm[i] -= 1e-6;
    const double fd = (weighted_bce<double>(zp, y, 1.7).loss - weighted_bce<double>(zm, y, 1.7).loss) / 2e-6;
    CHECK(rel_err(base.grad[i], fd) < 1e-6);
  }

  CHECK_THROWS_AS(weighted_bce<double>(z0, std::vector<int>{2}, 1.0), ConfigError);
  CHECK_THROWS_AS(weighted_bce<double>(z0, one, 0.0), ConfigError);
}

TEST_CASE("weighted_bce equals duplicating positives") {
  const auto z = randn(9, 41, 3.0);
  const std::vector<int> y{1, 0, 0, 1, 0, 1, 0, 0, 0};
  const int w = 3;
  std::vector<double> dz;
  std::vector<int> dy;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (int k = 0; k < (y[i] ? w : 1); ++k) {
      dz.push_back(z[i]);
      dy.push_back(y[i]);
    }
  const double weighted_sum = weighted_bce<double>(z, y, w).loss * static_cast<double>(z.size());
  const double dup_sum = weighted_bce<double>(dz, dy, 1.0).loss * static_cast<double>(dz.size());
  CHECK(std::abs(weighted_sum - dup_sum) < 1e-12);
}

TEST_CASE("adam_step fixed points") {
  ModelConfig cfg = tiny_config();
  TinyResNet<double> net(cfg, 3);
  auto params = net.params();
  const auto before = params;
  auto state = make_adam_state(params);
  adam_step(state, params, net.zero_gradients(), 1e-3);
  CHECK(state.step == 1);
  for (std::size_t p = 0; p < params.size(); ++p) CHECK(params[p].value == before[p].value);

  // Constant gradient: every step moves each coordinate by lr.
  auto grads = net.zero_gradients();
  for (std::size_t p = 0; p < grads.size(); ++p)
    if (params[p].trainable) std::fill(grads[p].begin(), grads[p].end(), 0.25);
  const double lr = 1e-3;
  for (int s = 0; s < 200; ++s) {
    const auto prev = params;
    adam_step(state, params, grads, lr);
    if (s == 199)
      for (std::size_t p = 0; p < params.size(); ++p)
        for (std::size_t i = 0; i < params[p].value.size(); ++i) {
          const double step = prev[p].value[i] - params[p].value[i];
          if (params[p].trainable) CHECK(step == doctest::Approx(lr).epsilon(1e-4));
          else CHECK(step == 0.0);
        }
  }
}

TEST_CASE("forward contracts") {
  ModelConfig cfg;
  cfg.stem_channels = 4;
  cfg.blocks = {{4, 1}, {8, 2}};
  TinyResNet<float> net(cfg, 9);
  const std::size_t item = 7 * 129 * 61;
  auto xd = randn(4 * item, 3);
  std::vector<float> x(xd.begin(), xd.end());
  BatchView<float> b{x, 4, 7, 129, 61};
  const auto z = net.forward(b, Mode::Eval);
  REQUIRE(z.size() == 4);
  for (float v : z) CHECK(std::isfinite(v));

  // Duplicate items and permutations in eval mode.
  std::vector<float> dup(x.begin(), x.begin() + item);
  dup.insert(dup.end(), x.begin(), x.begin() + item);
  const auto zd = net.forward({dup, 2, 7, 129, 61}, Mode::Eval);
  CHECK(zd[0] == zd[1]);
  CHECK(zd[0] == z[0]);
  std::vector<float> rev;
  for (int i = 3; i >= 0; --i) rev.insert(rev.end(), x.begin() + i * item, x.begin() + (i + 1) * item);
  const auto zr = net.forward({rev, 4, 7, 129, 61}, Mode::Eval);
  for (int i = 0; i < 4; ++i) CHECK(zr[i] == z[3 - i]);

  // Zero dense layer and zero input give exactly zero logits.
  for (auto& p : net.params())
    if (p.name.rfind("dense", 0) == 0) std::fill(p.value.begin(), p.value.end(), 0.0f);
  std::vector<float> zeros(2 * item, 0.0f);
  for (float v : net.forward({zeros, 2, 7, 129, 61}, Mode::Eval)) CHECK(v == 0.0f);

  CHECK_THROWS(net.forward({x, 4, 6, 129, 61}, Mode::Eval));
}

TEST_CASE("default model size") {
  TinyResNet<float> net(ModelConfig{}, 1);
  CHECK(net.parameter_count() > 15000);
  CHECK(net.parameter_count() < 30000);
}

TEST_CASE("composed tiny model gradient check") {
  CHECK(worst_model_grad_error(tiny_config()) < 1e-4);
  ModelConfig strided = tiny_config();
  strided.blocks = {{2, 1}, {3, 2}};
  CHECK(worst_model_grad_error(strided) < 1e-4);
}

TEST_CASE("duplicate items contribute equal gradients") {
  ModelConfig cfg = tiny_config();
  TinyResNet<double> net(cfg, 4);
  auto one = randn(2 * 64, 6);
  auto two = one;
  two.insert(two.end(), one.begin(), one.end());
  const std::vector<double> g1{1.0};
  net.forward({one, 1, 2, 8, 8}, Mode::Train, Execution::Serial);
  // With two identical items the batch statistics match the single-item case.
  const auto a = net.backward(g1, Execution::Serial);
  net.forward({two, 2, 2, 8, 8}, Mode::Train, Execution::Serial);
  const std::vector<double> g2{0.5, 0.5};
  const auto b = net.backward(g2, Execution::Serial);
  for (std::size_t p = 0; p < a.size(); ++p)
    for (std::size_t i = 0; i < a[p].size(); ++i) CHECK(b[p][i] == doctest::Approx(a[p][i]).epsilon(1e-10));
}

TEST_CASE("serial and parallel model passes agree") {
  ModelConfig cfg;
  cfg.stem_channels = 3;
  cfg.blocks = {{3, 1}, {4, 2}};
  cfg.in_channels = 2;
  TinyResNet<double> a(cfg, 5), b(cfg, 5);
  const auto x = randn(3 * 2 * 12 * 10, 8);
  const auto za = a.forward({x, 3, 2, 12, 10}, Mode::Train, Execution::Serial);
  const auto zb = b.forward({x, 3, 2, 12, 10}, Mode::Train, Execution::Parallel);
  for (int i = 0; i < 3; ++i) CHECK(za[i] == doctest::Approx(zb[i]).epsilon(1e-12));
  const std::vector<double> d{0.3, -0.2, 0.1};
  const auto ga = a.backward(d, Execution::Serial);
  const auto gb = b.backward(d, Execution::Parallel);
  for (std::size_t p = 0; p < ga.size(); ++p)
    for (std::size_t i = 0; i < ga[p].size(); ++i) CHECK(gb[p][i] == doctest::Approx(ga[p][i]).epsilon(1e-10));
}

namespace {

// Two classes of 2x8x8 images; class 1 carries a bright top band.
TensorDataset separable(int n, std::uint64_t seed) {
  TensorDataset d;
  d.channels = 2;
  d.height = 8;
  d.width = 8;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    auto v = std::make_shared<std::vector<float>>(128);
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < 8; ++r)
        for (int t = 0; t < 8; ++t)
          (*v)[(c * 8 + r) * 8 + t] = static_cast<float>(rng.normal() * 0.3 + (y && r < 2 ? 2.0 : 0.0));
    d.add(v, y);
  }
  return d;
}

ModelConfig smoke_config() {
  ModelConfig c;
  c.in_channels = 2;
  c.stem_channels = 4;
  c.blocks = {{4, 1}};
  c.epochs = 16;
  c.learning_rate = 1e-2;
  c.batch_size = 16;
  c.seed = 77;
  return c;
}

}  // namespace

TEST_CASE("train smoke: loss falls on separable data") {
  const auto tr = separable(64, 1), te = separable(32, 2);
  const auto r = train<float>(tr, te, smoke_config());
  REQUIRE(r.history.epochs.size() == 16);
  CHECK(r.history.epochs.back().train_loss < r.history.epochs.front().train_loss);
  CHECK(r.history.best_epoch >= 1);
  // The kept epoch is the earliest with the highest test BA.
  double best = -1;
  int first = 0;
  for (const auto& e : r.history.epochs)
    if (e.test_ba > best) {
      best = e.test_ba;
      first = e.epoch;
    }
  CHECK(r.history.best_epoch == first);
  const auto scores = predict(r.model, te);
  REQUIRE(scores.size() == 32);
  for (double s : scores) {
    CHECK(s >= 1e-7);
    CHECK(s <= 1 - 1e-7);
  }
}

TEST_CASE("train determinism and learning-rate zero") {
  const auto tr = separable(40, 3), te = separable(20, 4);
  auto cfg = smoke_config();
  cfg.epochs = 4;
  const auto a = train<float>(tr, te, cfg);
  const auto b = train<float>(tr, te, cfg);
  REQUIRE(a.history.epochs.size() == b.history.epochs.size());
  for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
    CHECK(a.history.epochs[i].train_loss == b.history.epochs[i].train_loss);
    CHECK(a.history.epochs[i].test_ba == b.history.epochs[i].test_ba);
    CHECK(a.history.epochs[i].test_auc == b.history.epochs[i].test_auc);
  }
  for (std::size_t p = 0; p < a.model.params.size(); ++p)
    CHECK(a.model.params[p].value == b.model.params[p].value);

  cfg.learning_rate = 0.0;
  cfg.batch_size = 40;
  const auto z = train<float>(tr, te, cfg);
  const TinyResNet<float> init(cfg, derive_seed(cfg.seed, {0}));
  for (std::size_t p = 0; p < init.params().size(); ++p)
    if (init.params()[p].trainable) CHECK(z.model.params[p].value == init.params()[p].value);
  for (const auto& e : z.history.epochs)
    CHECK(e.train_loss == doctest::Approx(z.history.epochs[0].train_loss).epsilon(1e-6));
}

TEST_CASE("train rejects single-class data") {
  auto tr = separable(10, 5);
  TensorDataset only_neg;
  only_neg.channels = 2;
  only_neg.height = 8;
  only_neg.width = 8;
  for (std::size_t i = 0; i < tr.size(); ++i)
    if (tr.labels[i] == 0) only_neg.add(tr.items[i], 0);
  CHECK_THROWS_AS(train<float>(only_neg, tr, smoke_config()), ConfigError);
  CHECK_THROWS_AS(train<float>(tr, only_neg, smoke_config()), ConfigError);
  CHECK_THROWS_AS(tr.add(std::make_shared<std::vector<float>>(5), 1), ConfigError);
  CHECK_THROWS_AS(tr.add(std::make_shared<std::vector<float>>(128), 3), ConfigError);
}

TEST_CASE("predict edge cases") {
  CHECK(sigmoid_score(0.0) == 0.5);
  CHECK(sigmoid_score(1e6) == 1 - 1e-7);
  CHECK(sigmoid_score(-1e6) == 1e-7);
  TrainedModel<float> m{smoke_config(), TinyResNet<float>(smoke_config(), 1).params()};
  TensorDataset empty;
  empty.channels = 2;
  empty.height = 8;
  empty.width = 8;
  CHECK(predict(m, empty).empty());
}

TEST_CASE("model config text and checkpoint round trip") {
  ModelConfig cfg = smoke_config();
  cfg.blocks = {{4, 1}, {6, 2}};
  const auto text = format_model_config(cfg);
  const auto back = parse_model_config(text);
  CHECK(format_model_config(back) == text);
  CHECK(back.blocks.size() == 2);
  CHECK(back.blocks[1].out_channels == 6);
  CHECK(back.blocks[1].stride == 2);
  CHECK(back.learning_rate == cfg.learning_rate);
  CHECK_THROWS_AS(parse_model_config("blocks=4x\n"), ConfigError);
  ModelConfig c2;
  CHECK_FALSE(set_model_option(c2, "nonsense", "1"));
  CHECK(set_model_option(c2, "epochs", "0"));
  CHECK_THROWS_AS(c2.validate(), ConfigError);

  TrainedModel<float> m{cfg, TinyResNet<float>(cfg, 12).params()};
  const auto path = std::filesystem::temp_directory_path() / "desatscan_ckpt_test.dsck";
  write_checkpoint(path, m);
  const auto r = read_checkpoint(path);
  std::filesystem::remove(path);
  CHECK(format_model_config(r.config) == text);
  REQUIRE(r.params.size() == m.params.size());
  for (std::size_t p = 0; p < m.params.size(); ++p) {
    CHECK(r.params[p].name == m.params[p].name);
    CHECK(r.params[p].value == m.params[p].value);
  }
}
