#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "vwseg/nn/loss.hpp"

using namespace vwseg::nn;

TEST_SUITE_BEGIN("loss");

TEST_CASE("perfect binary prediction with foreground scores exactly -1") {
  const std::vector<float> s{1.f, 0.f, 1.f, 1.f, 0.f, 0.f, 0.f, 1.f};
  CHECK(combined_loss(s.data(), s.data(), s.size()) == -1.0f);
}

TEST_CASE("all-zero prediction scores k/N") {
  std::vector<float> pred(16, 0.f), target(16, 0.f);
  target[1] = target[5] = target[6] = target[7] = target[12] = 1.f;  // k = 5
  CHECK(combined_loss(pred.data(), target.data(), pred.size()) == 5.0f / 16.0f);
}

TEST_CASE("hand case [1,1,0,0] vs [0,1,1,0] scores 0") {
  const std::vector<float> pred{1.f, 1.f, 0.f, 0.f}, target{0.f, 1.f, 1.f, 0.f};
  CHECK(combined_loss(pred.data(), target.data(), 4) == 0.0f);
}

TEST_CASE("both all-zero maps score 0 through the eps guard") {
  const std::vector<float> zero(8, 0.f);
  CHECK(combined_loss(zero.data(), zero.data(), zero.size()) == 0.0f);
}

TEST_CASE("loss is bounded below by -1") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> pred(32), target(32);
    for (auto& v : pred) v = u(rng);
    for (auto& v : target) v = coin(rng) ? 1.f : 0.f;
    const float l = combined_loss(pred.data(), target.data(), pred.size());
    CHECK(l >= -1.0f);
  }
}

TEST_CASE("analytic gradient matches central differences at 100 random pixels") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::bernoulli_distribution coin(0.35);
  const std::size_t n = 8 * 16;
  std::vector<double> pred(n), target(n), grad(n);
  for (auto& v : pred) v = u(rng);
  for (auto& v : target) v = coin(rng) ? 1.0 : 0.0;

  combined_loss_grad(pred.data(), target.data(), n, grad.data());

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const double h = 1e-6;
  for (int check = 0; check < 100; ++check) {
    const std::size_t i = pick(rng);
    const double saved = pred[i];
    pred[i] = saved + h;
    const double up = combined_loss(pred.data(), target.data(), n);
    pred[i] = saved - h;
    const double down = combined_loss(pred.data(), target.data(), n);
    pred[i] = saved;
    const double fd = (up - down) / (2 * h);
    const double rel = std::abs(grad[i] - fd) / std::max({std::abs(grad[i]), std::abs(fd), 1e-9});
    CHECK(rel <= 1e-3);
  }
}

TEST_CASE("gradient scale factor is applied") {
  const std::vector<double> pred{0.3, 0.8}, target{0.0, 1.0};
  std::vector<double> g1(2), g2(2);
  combined_loss_grad(pred.data(), target.data(), 2, g1.data(), 1.0);
  combined_loss_grad(pred.data(), target.data(), 2, g2.data(), 0.5);
  CHECK(g2[0] == doctest::Approx(0.5 * g1[0]));
  CHECK(g2[1] == doctest::Approx(0.5 * g1[1]));
}

TEST_CASE("batch loss is the mean of per-slice losses") {
  TensorT<float> pred(2, 1, 2, 2), target(2, 1, 2, 2);
  // slice 0: perfect match with foreground -> -1
  pred.at(0, 0, 0, 0) = 1.f;
  target.at(0, 0, 0, 0) = 1.f;
  // slice 1: all-zero pred, one foreground pixel -> 1/4
  target.at(1, 0, 1, 1) = 1.f;
  TensorT<float> grad;
  const float loss = batch_loss(pred, target, &grad);
  CHECK(loss == doctest::Approx((-1.0 + 0.25) / 2.0));

  // per-slice gradients are scaled by 1/batch
  std::vector<float> g_single(4);
  combined_loss_grad(pred.plane(1, 0), target.plane(1, 0), 4, g_single.data(), 1.0f);
  for (int i = 0; i < 4; ++i) CHECK(grad.plane(1, 0)[i] == doctest::Approx(g_single[i] / 2.0f));
}

TEST_CASE("shape mismatches are rejected") {
  TensorT<float> a(1, 1, 2, 2), b(1, 1, 2, 3);
  CHECK_THROWS_AS(batch_loss(a, b, static_cast<TensorT<float>*>(nullptr)),
                  std::invalid_argument);
}

TEST_SUITE_END();
