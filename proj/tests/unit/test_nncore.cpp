#include <doctest.h>

#include <cmath>
#include <numeric>

#include "evotraj/errors.hpp"
#include "evotraj/nn/gradcheck.hpp"
#include "evotraj/nn/layers.hpp"
#include "evotraj/nn/loss.hpp"
#include "evotraj/nn/lstm.hpp"
#include "evotraj/nn/optimizer.hpp"
#include "evotraj/nn/serialize.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace evotraj;
using namespace evotraj::nn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (float& v : t.values) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

double weighted_sum(const Tensor& y, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * r[i];
  return s;
}

void zero_grads(const std::vector<Parameter*>& ps) {
  for (Parameter* p : ps) p->zero_grad();
}

}  // namespace

// --- tensor kernels ----------------------------------------------------------

TEST_CASE("matrix kernels agree with the naive triple loop") {
  Rng rng(1);
  for (auto [m, k, n] : {std::array<std::size_t, 3>{1, 1, 1}, {3, 5, 7}, {9, 4, 300}, {6, 37, 513}, {4, 8, 256}}) {
    const Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    const Tensor at = random_tensor({k, m}, rng), bt = random_tensor({n, k}, rng);
    std::vector<float> nn(m * n), tn(m * n), nt(m * n, 1.0f);
    gemm_nn(a.data(), b.data(), nn.data(), m, k, n, false);
    gemm_tn(at.data(), b.data(), tn.data(), m, k, n, false);
    gemm_nt(a.data(), bt.data(), nt.data(), m, k, n, true);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double e_nn = 0, e_tn = 0, e_nt = 1.0;
        for (std::size_t p = 0; p < k; ++p) {
          e_nn += double(a[i * k + p]) * b[p * n + j];
          e_tn += double(at[p * m + i]) * b[p * n + j];
          e_nt += double(a[i * k + p]) * bt[j * k + p];
        }
        CHECK(std::abs(nn[i * n + j] - e_nn) < 1e-4);
        CHECK(std::abs(tn[i * n + j] - e_tn) < 1e-4);
        CHECK(std::abs(nt[i * n + j] - e_nt) < 1e-4);
      }
  }
}

TEST_CASE("dot product matches a double accumulation") {
  Rng rng(2);
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 1000u}) {
    const Tensor a = random_tensor({n}, rng), b = random_tensor({n}, rng);
    double e = 0;
    for (std::size_t i = 0; i < n; ++i) e += double(a[i]) * b[i];
    CHECK(std::abs(dot(a.data(), b.data(), n) - e) < 1e-4);
  }
}

TEST_CASE("non-finite values are detected") {
  Tensor t({3});
  CHECK_NOTHROW(check_finite(t, "t"));
  t[1] = std::nanf("");
  CHECK_THROWS_AS(check_finite(t, "t"), NumericalError);
  t[1] = INFINITY;
  CHECK_THROWS_AS(check_finite(t, "t"), NumericalError);
}

TEST_CASE("reshape keeps the data and rejects a different element count") {
  Tensor t({2, 3});
  std::iota(t.values.begin(), t.values.end(), 0.0f);
  const Tensor r = t.reshaped({3, 2});
  CHECK(r.values == t.values);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
}

// --- dense ---------------------------------------------------------------

TEST_CASE("dense layer with zero weights and bias outputs zero") {
  Rng rng(3);
  Dense d("d", 4, 3, Activation::Identity, rng);
  d.weight.value.fill(0.0f);
  d.bias.value.fill(0.0f);
  const Tensor y = d.forward(random_tensor({2, 4}, rng));
  for (float v : y.values) CHECK(v == 0.0f);
}

TEST_CASE("identity weights with ReLU clip negatives") {
  Rng rng(4);
  Dense d("d", 2, 2, Activation::ReLU, rng);
  d.weight.value.values = {1, 0, 0, 1};
  d.bias.value.fill(0.0f);
  Tensor x({1, 2});
  x.values = {-1.0f, 2.0f};
  CHECK(d.forward(x).values == std::vector<float>{0.0f, 2.0f});
}

TEST_CASE("dense shape mismatch names both shapes") {
  Rng rng(5);
  Dense d("d", 4, 3, Activation::Identity, rng);
  try {
    d.forward(Tensor({2, 5}));
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x5]") != std::string::npos);
    CHECK(msg.find("[3x4]") != std::string::npos);
  }
}

TEST_CASE("dense input gradient matches central differences within 1e-4 relative") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    Dense d("d", 4, 3, Activation::Identity, rng);
    Parameter x("x", {2, 4});
    x.value = random_tensor({2, 4}, rng);
    const Tensor r = random_tensor({2, 3}, rng);
    d.forward(x.value);
    const Tensor analytic = d.backward(r);
    std::vector<Parameter*> inputs{&x};
    // The map is linear in x, so a wide step is exact up to rounding.
    const auto numeric =
        oracles::finite_difference_grad([&] { return weighted_sum(d.forward(x.value), r); }, inputs, 0.05);
    for (std::size_t i = 0; i < analytic.size(); ++i)
      CHECK(oracles::compare("dense dx", numeric[0][i], analytic[i], 1e-4, oracles::Tolerance::Relative).pass);
  }
}

// --- gradient checker ----------------------------------------------------

namespace {

GradCheckTarget dense_target(Dense& d, const Tensor& x, const Tensor& r) {
  GradCheckTarget t;
  t.parameters = d.parameters();
  t.loss = [&d, x, r] { return weighted_sum(d.forward(x), r); };
  t.backward = [&d, x, r] {
    zero_grads(d.parameters());
    d.forward(x);
    d.backward(r);
  };
  t.activation_pattern = [&d] { return d.activation_pattern(0); };
  return t;
}

}  // namespace

TEST_CASE("gradient check passes on a dense layer") {
  Rng rng(6);
  Dense d("d", 5, 4, Activation::ReLU, rng);
  const Tensor x = random_tensor({3, 5}, rng), r = random_tensor({3, 4}, rng);
  const GradCheckReport rep = gradient_check(dense_target(d, x, r));
  INFO(rep.summary());
  CHECK(rep.passed());
  CHECK(rep.checked > 0);
}

TEST_CASE("gradient check flags a corrupted backward on the corrupted parameter") {
  Rng rng(7);
  Dense d("d", 5, 4, Activation::Identity, rng);
  const Tensor x = random_tensor({3, 5}, rng), r = random_tensor({3, 4}, rng);
  GradCheckTarget t = dense_target(d, x, r);
  const auto honest = t.backward;
  t.backward = [&d, honest] {
    honest();
    for (float& g : d.bias.grad.values) g = -g;
  };
  const GradCheckReport rep = gradient_check(t);
  CHECK_FALSE(rep.passed());
  CHECK(rep.worst.parameter == "d.bias");
  for (const auto& e : rep.entries)
    if (!e.passed) CHECK(e.parameter == "d.bias");
}

TEST_CASE("gradient check refuses oversized fragments") {
  Rng rng(8);
  Dense d("d", 100, 60, Activation::Identity, rng);
  const Tensor x = random_tensor({1, 100}, rng), r = random_tensor({1, 60}, rng);
  CHECK_THROWS_AS(gradient_check(dense_target(d, x, r)), ConfigError);
}

// --- convolution and pooling ---------------------------------------------

TEST_CASE("conv block maps all-zero input to all-zero features when biases are zero") {
  Rng rng(9);
  ConvBlock block("cnn", 8, 8, 1, ConvSpec{}, 16, 8, rng);
  for (Parameter* p : block.parameters())
    if (p->name.ends_with(".bias")) p->value.fill(0.0f);
  const Tensor y = block.forward(Tensor({2, 8, 8, 1}));
  CHECK(y.shape == std::vector<std::size_t>{2, 8});
  for (float v : y.values) CHECK(v == 0.0f);
}

TEST_CASE("max pooling of a uniform grid is uniform") {
  MaxPool2D pool;
  const Tensor y = pool.forward(Tensor({1, 8, 8, 3}, 0.4f));
  CHECK(y.shape == std::vector<std::size_t>{1, 4, 4, 3});
  for (float v : y.values) CHECK(v == 0.4f);
}

TEST_CASE("conv block rejects inputs smaller than 8x8") {
  Rng rng(10);
  CHECK_THROWS_AS(ConvBlock("cnn", 4, 8, 1, ConvSpec{}, 4, 4, rng), ShapeError);
  ConvBlock ok("cnn", 8, 8, 1, ConvSpec{}, 4, 4, rng);
  CHECK_THROWS_AS(ok.forward(Tensor({1, 6, 6, 1})), ShapeError);
}

TEST_CASE("1-filter conv on 8x8 matches central differences within 1e-4") {
  Rng rng(11);
  Conv2D conv("c", 1, 1, rng);
  const Tensor x = random_tensor({1, 8, 8, 1}, rng);
  const Tensor r = random_tensor({1, 8, 8, 1}, rng);
  GradCheckTarget t;
  t.parameters = conv.parameters();
  t.loss = [&] { return weighted_sum(conv.forward(x), r); };
  t.backward = [&] {
    zero_grads(conv.parameters());
    conv.forward(x);
    conv.backward(r);
  };
  t.activation_pattern = [&] { return conv.activation_pattern(0); };
  GradCheckOptions o;
  o.step = 1e-2;  // piecewise linear: wide steps are exact away from kinks
  o.relative_tolerance = 1e-4;
  o.absolute_tolerance = 1e-5;
  const GradCheckReport rep = gradient_check(t, o);
  INFO(rep.summary());
  CHECK(rep.passed());

  // Input gradient through the same oracle.
  Parameter xp("x", {1, 8, 8, 1});
  xp.value = x;
  conv.forward(x);
  const Tensor dx = conv.backward(r);
  std::vector<Parameter*> inputs{&xp};
  const auto numeric =
      oracles::finite_difference_grad([&] { return weighted_sum(conv.forward(xp.value), r); }, inputs, 1e-3);
  std::size_t compared = 0;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (std::abs(dx[i]) < 1e-2) continue;
    ++compared;
    CHECK(oracles::compare("conv dx", numeric[0][i], dx[i], 1e-2, oracles::Tolerance::Relative).pass);
  }
  CHECK(compared > 0);
}

TEST_CASE("max pooling routes the gradient to the window maximum") {
  MaxPool2D pool;
  Tensor x({1, 2, 2, 1});
  x.values = {0.1f, 0.9f, 0.3f, 0.2f};
  pool.forward(x);
  Tensor up({1, 1, 1, 1});
  up[0] = 2.0f;
  CHECK(pool.backward(up).values == std::vector<float>{0.0f, 2.0f, 0.0f, 0.0f});
}

TEST_CASE("conv block gradients pass the checker") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(100 + seed);
    ConvBlock block("cnn", 8, 8, 1, ConvSpec{2, 2}, 4, 3, rng);
    const Tensor x = random_tensor({2, 8, 8, 1}, rng, 0.0, 1.0);
    const Tensor r = random_tensor({2, 3}, rng);
    GradCheckTarget t;
    t.parameters = block.parameters();
    t.loss = [&] { return weighted_sum(block.forward(x), r); };
    t.backward = [&] {
      zero_grads(block.parameters());
      block.forward(x);
      block.backward(r);
    };
    t.activation_pattern = [&] { return block.activation_pattern(0); };
    const GradCheckReport rep = gradient_check(t);
    INFO(rep.summary());
    CHECK(rep.passed());
  }
}

// --- LSTM ----------------------------------------------------------------

TEST_CASE("LSTM with zero weights and zero state stays at zero") {
  Rng rng(12);
  LstmCell cell("l", 3, 4, rng);
  cell.weight.value.fill(0.0f);
  cell.bias.value.fill(0.0f);
  std::vector<Tensor> xs;
  for (int t = 0; t < 4; ++t) xs.push_back(random_tensor({2, 3}, rng));
  for (const Tensor& h : cell.forward(xs))
    for (float v : h.values) CHECK(v == 0.0f);
  const LstmState s = cell.step(xs[0], {Tensor({2, 4}), Tensor({2, 4})});
  for (float v : s.c.values) CHECK(v == 0.0f);
}

TEST_CASE("saturated forget gate carries the cell state") {
  Rng rng(13);
  const std::size_t h = 3;
  LstmCell cell("l", 2, h, rng);
  cell.weight.value.fill(0.0f);
  for (std::size_t j = 0; j < h; ++j) {
    cell.bias.value[0 * h + j] = -20.0f;  // input
    cell.bias.value[1 * h + j] = 20.0f;   // forget
    cell.bias.value[2 * h + j] = -20.0f;  // output
    cell.bias.value[3 * h + j] = 0.0f;
  }
  LstmState prev{Tensor({1, h}), Tensor({1, h})};
  prev.c.values = {0.7f, -1.3f, 2.0f};
  LstmState s = prev;
  for (int t = 0; t < 5; ++t) {
    const LstmState next = cell.step(random_tensor({1, 2}, rng), s);
    for (std::size_t j = 0; j < h; ++j) CHECK(std::abs(next.c[j] - s.c[j]) < 1e-6);
    s = next;
  }
}

TEST_CASE("LSTM reports NaN gates") {
  Rng rng(14);
  LstmCell cell("l", 2, 2, rng);
  Tensor x({1, 2});
  x[0] = std::nanf("");
  CHECK_THROWS_AS(cell.step(x, {Tensor({1, 2}), Tensor({1, 2})}), NumericalError);
}

namespace {

GradCheckTarget lstm_chain_target(std::vector<LstmCell>& cells, const std::vector<Tensor>& xs,
                                  const std::vector<Tensor>& rs) {
  GradCheckTarget t;
  for (LstmCell& c : cells)
    for (Parameter* p : c.parameters()) t.parameters.push_back(p);
  t.loss = [&cells, xs, rs] {
    std::vector<Tensor> seq = xs;
    for (LstmCell& c : cells) seq = c.forward(seq);
    double s = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) s += weighted_sum(seq[i], rs[i]);
    return s;
  };
  t.backward = [&cells, xs, rs, params = t.parameters] {
    zero_grads(params);
    std::vector<Tensor> seq = xs;
    for (LstmCell& c : cells) seq = c.forward(seq);
    std::vector<Tensor> grad = rs;
    for (auto it = cells.rbegin(); it != cells.rend(); ++it) grad = it->backward(grad);
  };
  return t;
}

}  // namespace

TEST_CASE("BPTT on tau = 3, H = 4 matches finite differences within 1e-4 relative") {
  Rng rng(15);
  std::vector<LstmCell> cells{LstmCell("l0", 3, 4, rng)};
  std::vector<Tensor> xs, rs;
  for (int t = 0; t < 3; ++t) {
    xs.push_back(random_tensor({2, 3}, rng));
    rs.push_back(random_tensor({2, 4}, rng));
  }
  GradCheckOptions o;
  o.step = 1e-2;
  o.relative_tolerance = 1e-4;
  o.absolute_tolerance = 2e-5;
  const GradCheckReport rep = gradient_check(lstm_chain_target(cells, xs, rs), o);
  INFO(rep.summary());
  CHECK(rep.passed());
}

TEST_CASE("gradient check passes on a chain of two LSTM cells") {
  Rng rng(16);
  std::vector<LstmCell> cells{LstmCell("l0", 3, 4, rng), LstmCell("l1", 4, 3, rng)};
  std::vector<Tensor> xs, rs;
  for (int t = 0; t < 4; ++t) {
    xs.push_back(random_tensor({2, 3}, rng));
    rs.push_back(random_tensor({2, 3}, rng));
  }
  const GradCheckReport rep = gradient_check(lstm_chain_target(cells, xs, rs));
  INFO(rep.summary());
  CHECK(rep.passed());
}

// --- dropout -------------------------------------------------------------

TEST_CASE("dropout identities") {
  Rng rng(17);
  const Tensor x = random_tensor({10, 10}, rng);
  CHECK(dropout(x, 0.0f, Mode::Train, rng) == x);
  CHECK(dropout(x, 0.0f, Mode::Eval, rng) == x);
  CHECK(dropout(x, 0.7f, Mode::Eval, rng) == x);
  CHECK_THROWS_AS(Dropout(1.0f), ConfigError);
  CHECK_THROWS_AS(Dropout(-0.1f), ConfigError);
}

TEST_CASE("training dropout keeps half the values and preserves the mean") {
  Rng rng(18);
  const Tensor x({100000}, 1.0f);
  const Tensor y = dropout(x, 0.5f, Mode::Train, rng);
  std::size_t kept = 0;
  double sum = 0.0;
  for (float v : y.values) {
    kept += v != 0.0f;
    sum += v;
  }
  CHECK(std::abs(kept / 1e5 - 0.5) <= 0.01);
  CHECK(std::abs(sum / 1e5 - 1.0) <= 0.02);
}

TEST_CASE("dropout backward applies the forward mask") {
  Rng rng(19);
  Dropout d(0.3f);
  const Tensor x = random_tensor({50}, rng);
  const Tensor y = d.forward(x, Mode::Train, rng);
  const Tensor g = d.backward(Tensor({50}, 1.0f));
  for (std::size_t i = 0; i < 50; ++i) CHECK(g[i] * x[i] == doctest::Approx(y[i]));
}

// --- losses --------------------------------------------------------------

TEST_CASE("losses vanish at the target") {
  Rng rng(20);
  const Tensor p = random_tensor({3, 4}, rng);
  for (LossKind k : {LossKind::MSE, LossKind::LogCosh}) {
    const LossResult r = loss_eval(k, p, p);
    CHECK(r.value == 0.0);
    for (float g : r.gradient.values) CHECK(g == 0.0f);
  }
}

TEST_CASE("MSE of errors 3 and -1 is 5") {
  Tensor p({2}), t({2});
  p.values = {3.0f, -1.0f};
  CHECK(loss_eval(LossKind::MSE, p, t).value == 5.0);
}

TEST_CASE("loss values are non-negative") {
  Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    const Tensor p = random_tensor({7}, rng, -30, 30), t = random_tensor({7}, rng, -30, 30);
    CHECK(loss_eval(LossKind::MSE, p, t).value >= 0.0);
    CHECK(loss_eval(LossKind::LogCosh, p, t).value >= 0.0);
  }
}

TEST_CASE("LogCosh gradient is tanh(error)/n and matches finite differences within 1e-6") {
  Rng rng(22);
  Parameter p("p", {6});
  p.value = random_tensor({6}, rng, -2, 2);
  const Tensor t = random_tensor({6}, rng, -2, 2);
  const LossResult r = loss_eval(LossKind::LogCosh, p.value, t);
  std::vector<Parameter*> ps{&p};
  const auto numeric = oracles::finite_difference_grad([&] { return loss_eval(LossKind::LogCosh, p.value, t).value; }, ps);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(std::abs(r.gradient[i] - std::tanh(double(p.value[i]) - t[i]) / 6.0) < 1e-7);
    CHECK(std::abs(numeric[0][i] - r.gradient[i]) < 1e-6);
  }
}

TEST_CASE("loss shape mismatch") {
  CHECK_THROWS_AS(loss_eval(LossKind::MSE, Tensor({2}), Tensor({3})), ShapeError);
}

// --- optimizers ----------------------------------------------------------

namespace {

struct Scalar {
  Parameter p{"w", {1}};
  std::vector<Parameter*> list{&p};
};

float one_step(OptimizerSettings s, float w, float g, int steps = 1) {
  Scalar x;
  x.p.value[0] = w;
  OptimizerState st(s);
  st.init(x.list);
  for (int i = 0; i < steps; ++i) {
    x.p.grad[0] = g;
    st.apply(x.list);
  }
  return x.p.value[0];
}

}  // namespace

TEST_CASE("SGD: w = 1, lr 0.1, grad 2 gives 0.8") {
  OptimizerSettings s = OptimizerSettings::defaults(OptimizerKind::SGD);
  s.learning_rate = 0.1f;
  CHECK(one_step(s, 1.0f, 2.0f) == 0.8f);
}

TEST_CASE("Adam first step is -lr sign(g) within 1e-6") {
  for (float g : {1e-3f, 0.5f, 7.0f, -2.0f}) {
    const OptimizerSettings s = OptimizerSettings::defaults(OptimizerKind::Adam);
    const double dw = double(one_step(s, 1.0f, g)) - 1.0;
    CHECK(std::abs(dw + 0.001 * (g > 0 ? 1 : -1)) < 1e-6);
  }
}

TEST_CASE("single steps of every update rule match hand derivations") {
  const double w = 1.0, g = 0.5, lr = 0.01;
  auto settings = [&](OptimizerKind k) {
    OptimizerSettings s = OptimizerSettings::defaults(k, 0.9f);
    s.learning_rate = static_cast<float>(lr);
    return s;
  };
  // Momentum SGD over two steps: v1 = -lr g, v2 = mu v1 - lr g.
  CHECK(one_step(settings(OptimizerKind::SGD), w, g, 2) == doctest::Approx(w - lr * g - (0.9 * lr * g + lr * g)).epsilon(1e-6));
  // RMSprop: s = 0.1 g^2.
  CHECK(one_step(settings(OptimizerKind::RMSprop), w, g) == doctest::Approx(w - lr * g / std::sqrt(0.1 * g * g)).epsilon(1e-6));
  // AdaGrad: s = g^2, step = lr.
  CHECK(one_step(settings(OptimizerKind::AdaGrad), w, g) == doctest::Approx(w - lr).epsilon(1e-6));
  // Adadelta: s = 0.05 g^2, delta = sqrt(eps) / sqrt(s + eps) g.
  const double delta = std::sqrt(1e-6) / std::sqrt(0.05 * g * g + 1e-6) * g;
  CHECK(one_step(settings(OptimizerKind::Adadelta), w, g) == doctest::Approx(w - lr * delta).epsilon(1e-7));
  // Adam and AdaMax move by lr on the first step.
  CHECK(one_step(settings(OptimizerKind::Adam), w, g) == doctest::Approx(w - lr).epsilon(1e-6));
  CHECK(one_step(settings(OptimizerKind::AdaMax), w, g) == doctest::Approx(w - lr).epsilon(1e-6));
  // NAdam: m^ = b1 (0.1 g) / (1 - b1^2) + g.
  const double m_hat = 0.9 * 0.1 * g / (1.0 - 0.81) + g;
  CHECK(one_step(settings(OptimizerKind::NAdam), w, g) == doctest::Approx(w - lr * m_hat / g).epsilon(1e-6));
}

TEST_CASE("AdaGrad steps shrink under a repeated gradient") {
  OptimizerSettings s = OptimizerSettings::defaults(OptimizerKind::AdaGrad);
  s.learning_rate = 0.1f;
  const float w1 = one_step(s, 0.0f, 1.0f, 1);
  const float w2 = one_step(s, 0.0f, 1.0f, 2);
  CHECK(std::abs(w2 - w1) < std::abs(w1));
}

TEST_CASE("optimizer state contract") {
  Scalar x;
  OptimizerState st(OptimizerSettings::defaults(OptimizerKind::Adam));
  CHECK_THROWS_AS(st.apply(x.list), StateError);
  st.init(x.list);
  for (std::size_t i = 1; i <= 3; ++i) {
    st.apply(x.list);
    CHECK(st.step() == i);
  }
  Scalar other;
  std::vector<Parameter*> two{&x.p, &other.p};
  CHECK_THROWS_AS(st.apply(two), StateError);
}

TEST_CASE("optimizer names round trip in allele order") {
  const char* names[] = {"RMSprop", "NAdam", "SGD", "AdaGrad", "Adadelta", "Adam", "AdaMax"};
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(to_string(kAllOptimizers[i]) == names[i]);
    CHECK(optimizer_from_string(names[i]) == kAllOptimizers[i]);
  }
  CHECK_FALSE(optimizer_from_string("Lion").has_value());
  CHECK(default_learning_rate(OptimizerKind::SGD) == 1e-2f);
  CHECK(default_learning_rate(OptimizerKind::Adam) == 1e-3f);
}

// Learning rates for the quadratic bowl f(w) = |w|^2 from (5, -5).
//   SGD 0.1, RMSprop 0.05, NAdam 0.1, AdaGrad 1.0, Adadelta 50, Adam 0.1, AdaMax 0.1
TEST_CASE("every optimizer drives the quadratic bowl below 1e-2 within 500 steps") {
  const std::pair<OptimizerKind, float> table[] = {
      {OptimizerKind::SGD, 0.1f},     {OptimizerKind::RMSprop, 0.05f}, {OptimizerKind::NAdam, 0.1f},
      {OptimizerKind::AdaGrad, 1.0f}, {OptimizerKind::Adadelta, 50.0f}, {OptimizerKind::Adam, 0.1f},
      {OptimizerKind::AdaMax, 0.1f}};
  for (auto [kind, lr] : table) {
    Parameter w("w", {2});
    w.value.values = {5.0f, -5.0f};
    std::vector<Parameter*> ps{&w};
    OptimizerSettings s = OptimizerSettings::defaults(kind);
    s.learning_rate = lr;
    OptimizerState st(s);
    st.init(ps);
    double f = 50.0;
    std::size_t steps = 0;
    while (f >= 1e-2 && steps < 500) {
      for (std::size_t i = 0; i < 2; ++i) w.grad[i] = 2.0f * w.value[i];
      st.apply(ps);
      ++steps;
      f = double(w.value[0]) * w.value[0] + double(w.value[1]) * w.value[1];
    }
    INFO(to_string(kind), " lr ", lr, " f ", f, " after ", steps);
    CHECK(f < 1e-2);
  }
}

// --- determinism and persistence -----------------------------------------

TEST_CASE("forward and backward are bitwise reproducible for identical seeds") {
  auto run = [] {
    Rng rng(23);
    ConvBlock block("cnn", 8, 8, 1, ConvSpec{}, 6, 5, rng);
    const Tensor x = random_tensor({3, 8, 8, 1}, rng, 0, 1);
    const Tensor y = block.forward(x);
    block.backward(Tensor(y.shape, 1.0f));
    std::vector<float> out = y.values;
    for (Parameter* p : block.parameters()) out.insert(out.end(), p->grad.values.begin(), p->grad.values.end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("parameters round trip through the flat float file") {
  testsupport::TempDir dir("nn_ser");
  Rng rng(24);
  Dense a("a", 3, 2, Activation::ReLU, rng), b("b", 3, 2, Activation::ReLU, rng);
  save_parameters(a.parameters(), dir / "p");
  CHECK(std::filesystem::file_size(dir / "p.f32") == 8u * 4u);
  // Same names are required; copy a's layout under the names in the file.
  Dense c("a", 3, 2, Activation::ReLU, rng);
  load_parameters(c.parameters(), dir / "p");
  CHECK(c.weight.value == a.weight.value);
  CHECK(c.bias.value == a.bias.value);
  CHECK_THROWS_AS(load_parameters(b.parameters(), dir / "p"), FormatError);
  Dense wrong("a", 4, 2, Activation::ReLU, rng);
  CHECK_THROWS_AS(load_parameters(wrong.parameters(), dir / "p"), FormatError);
  std::filesystem::resize_file(dir / "p.f32", 12);
  CHECK_THROWS_AS(load_parameters(c.parameters(), dir / "p"), FormatError);
}
