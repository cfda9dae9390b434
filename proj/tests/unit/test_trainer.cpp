#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "oracles.hpp"
#include "specklediff/checkpoint.hpp"
#include "specklediff/errors.hpp"
#include "specklediff/phantom.hpp"
#include "specklediff/trainer.hpp"

using namespace specklediff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "specklediff_trainer_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<Image> small_dataset(int n, int size = 16) {
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) {
    PhantomSpec s;
    s.height = s.width = size;
    s.undulation = 0.5;
    s.vessels = 0;
    s.seed = 40 + i;
    out.push_back(make_phantom(s).noisy);
  }
  return out;
}

// Loss of the double-precision copy at fixed draws, without touching gradients.
double fixed_draw_loss(const EpsNet<double>& net, const std::vector<Image>& batch,
                       const std::vector<NoiseDraw>& draws, const VarianceSchedule& sched, LossWeighting wt) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Image xt = q_sample(batch[i], draws[i].t, draws[i].eps, sched);
    const auto out = net.forward(std::vector<double>(xt.data().begin(), xt.data().end()), xt.height(), xt.width(),
                                 draws[i].t);
    double sq = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) sq += (out[k] - draws[i].eps[k]) * (out[k] - draws[i].eps[k]);
    total += loss_weight(draws[i].t, sched, wt) * sq / static_cast<double>(out.size());
  }
  return total / static_cast<double>(batch.size());
}

bool same_params(const EpsilonPredictor& a, const EpsilonPredictor& b) {
  if (a.params().size() != b.params().size()) return false;
  for (std::size_t i = 0; i < a.params().size(); ++i)
    if (a.params()[i].value != b.params()[i].value) return false;
  return true;
}

}  // namespace

TEST_CASE("learning-rate halving") {
  TrainConfig c;
  CHECK(lr_schedule(0, c) == 1e-4);
  CHECK(lr_schedule(4, c) == 1e-4);
  CHECK(lr_schedule(5, c) == 5e-5);
  CHECK(lr_schedule(12, c) == 2.5e-5);
  double prev = lr_schedule(0, c);
  for (int e = 1; e < 60; ++e) {
    const double lr = lr_schedule(e, c);
    CHECK(lr <= prev);
    if (e % 5 != 0) CHECK(lr == prev);
    prev = lr;
  }
}

TEST_CASE("train config defaults, validation and json") {
  TrainConfig c;
  CHECK(c.epochs == 500);
  CHECK(c.batch_size == 2);
  CHECK(c.initial_lr == 1e-4);
  CHECK(c.lr_halving_period_epochs == 5);
  CHECK(c.T == 100);
  CHECK(c.loss_weighting == LossWeighting::simplified);
  CHECK_NOTHROW(c.validate());
  TrainConfig bad = c;
  bad.initial_lr = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  TrainConfig d;
  d.epochs = 7;
  d.seed = 123456789012345ull;
  d.loss_weighting = LossWeighting::bound_weighted;
  nlohmann::json j = d;
  const TrainConfig back = j.get<TrainConfig>();
  CHECK(back.epochs == 7);
  CHECK(back.seed == d.seed);
  CHECK(back.loss_weighting == LossWeighting::bound_weighted);
  const TrainConfig partial = nlohmann::json{{"epochs", 3}, {"unrelated", true}}.get<TrainConfig>();
  CHECK(partial.epochs == 3);
  CHECK(partial.initial_lr == 1e-4);
  CHECK(loss_weighting_from_string("simplified") == LossWeighting::simplified);
  CHECK_THROWS_AS(loss_weighting_from_string("other"), ConfigError);
}

TEST_CASE("loss weights") {
  const auto s = default_schedule();
  for (int t : {1, 50, 100}) {
    CHECK(loss_weight(t, s, LossWeighting::simplified) == 1.0);
    const double expect = s.beta(t) / (2.0 * s.alpha(t) * (1.0 - s.alpha_bar(t)));
    CHECK(loss_weight(t, s, LossWeighting::bound_weighted) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("objective for oracle and zero predictors") {
  const auto s = default_schedule();
  const auto data = small_dataset(1);
  const Image& x0 = data[0];
  const EpsFn oracle_eps = [&](const Image& xt, int t) {
    Image e(xt.height(), xt.width());
    for (std::size_t i = 0; i < e.size(); ++i)
      e[i] = static_cast<float>((xt[i] - std::sqrt(s.alpha_bar(t)) * x0[i]) / std::sqrt(1 - s.alpha_bar(t)));
    return e;
  };
  Rng rng(3);
  for (int k = 0; k < 20; ++k) CHECK(eps_objective({x0}, oracle_eps, s, LossWeighting::simplified, rng) < 1e-8);

  const EpsFn zero = [](const Image& xt, int) { return Image(xt.height(), xt.width(), 0.0f); };
  double acc = 0.0;
  for (int k = 0; k < 200; ++k) acc += eps_objective({x0}, zero, s, LossWeighting::simplified, rng);
  CHECK(acc / 200 == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("training loss gradient matches central differences") {
  const auto s = default_schedule();
  const std::vector<Image> data{oracle::random_image(8, 8, 1), oracle::random_image(8, 8, 2)};
  EpsNet<double> net = EpsilonPredictor(NetworkConfig::tiny(), 21).cast<double>();
  Rng rng(5);
  for (auto wt : {LossWeighting::simplified, LossWeighting::bound_weighted}) {
    const auto draws = draw_noise(data, s, rng);
    net.zero_grad();
    const double loss = objective_with_gradients(net, data, draws, s, wt);
    CHECK(loss == doctest::Approx(fixed_draw_loss(net, data, draws, s, wt)).epsilon(1e-12));
    std::mt19937_64 pick(9);
    int agree = 0, total = 0;
    for (int k = 0; k < 40; ++k) {
      auto& p = net.params()[pick() % net.params().size()];
      const std::size_t i = pick() % p.size();
      const double saved = p.value[i];
      p.value[i] = saved + 1e-3;
      const double up = fixed_draw_loss(net, data, draws, s, wt);
      p.value[i] = saved - 1e-3;
      const double down = fixed_draw_loss(net, data, draws, s, wt);
      p.value[i] = saved;
      const double numeric = (up - down) / 2e-3;
      const double scale = std::max(std::fabs(numeric), std::fabs(p.grad[i]));
      ++total;
      if (scale < 1e-9 || std::fabs(numeric - p.grad[i]) <= 1e-3 * scale) ++agree;
    }
    CHECK(agree >= 0.95 * total);
  }
}

TEST_CASE("one step is deterministic from the same state") {
  TrainConfig cfg;
  cfg.seed = 4;
  const auto data = small_dataset(2);
  const auto sched = cfg.schedule();
  Checkpoint a = Checkpoint::initial(NetworkConfig::tiny(), cfg);
  Checkpoint b = a;
  Rng ra(77), rb(77);
  const double la = training_step(data, a, sched, cfg, 1e-3, ra);
  const double lb = training_step(data, b, sched, cfg, 1e-3, rb);
  CHECK(la == lb);
  CHECK(la >= 0.0);
  CHECK(same_params(a.model, b.model));
  CHECK(a.step == 1);
  CHECK_FALSE(same_params(a.model, Checkpoint::initial(NetworkConfig::tiny(), cfg).model));
}

TEST_CASE("non-finite loss aborts with the step indices") {
  TrainConfig cfg;
  const auto data = small_dataset(2);
  Checkpoint c = Checkpoint::initial(NetworkConfig::tiny(), cfg);
  c.model.params().front().value[0] = std::numeric_limits<float>::quiet_NaN();
  Rng rng(1);
  try {
    training_step(data, c, cfg.schedule(), cfg, 1e-4, rng);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("batch t =") != std::string::npos);
    CHECK(std::string(e.kind()) == "training");
  }
}

TEST_CASE("train contracts") {
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train({}, NetworkConfig::tiny(), cfg), ConfigError);
  auto data = small_dataset(1);
  data.push_back(Image(8, 8));
  CHECK_THROWS_AS(train(data, NetworkConfig::tiny(), cfg), ContractError);

  cfg.epochs = 0;
  const Checkpoint init = Checkpoint::initial(NetworkConfig::tiny(), cfg);
  const auto res = train(small_dataset(1), init, cfg);
  CHECK(same_params(res.checkpoint.model, init.model));
  CHECK(res.checkpoint.epoch == 0);
  CHECK(res.checkpoint.step == 0);
  CHECK(res.log.empty());
}

TEST_CASE("seeded training reproduces its loss curve and resumes exactly") {
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.seed = 8;
  cfg.initial_lr = 1e-3;
  cfg.lr_halving_period_epochs = 2;
  const auto data = small_dataset(5);
  const auto a = train(data, NetworkConfig::tiny(), cfg);
  const auto b = train(data, NetworkConfig::tiny(), cfg);
  REQUIRE(a.log.size() == 12u);
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss == b.log[i].loss);
  CHECK(same_params(a.checkpoint.model, b.checkpoint.model));
  CHECK(a.log.back().lr == 5e-4);

  TrainConfig half = cfg;
  half.epochs = 2;
  const auto first = train(data, NetworkConfig::tiny(), half);
  const fs::path path = scratch("resume.ckpt");
  save_checkpoint(first.checkpoint, path.string());
  const auto second = train(data, load_checkpoint(path.string()), half);
  CHECK(second.checkpoint.epoch == 4);
  CHECK(second.checkpoint.step == a.checkpoint.step);
  CHECK(same_params(second.checkpoint.model, a.checkpoint.model));
  for (std::size_t i = 0; i < second.log.size(); ++i) CHECK(second.log[i].loss == a.log[6 + i].loss);
}

TEST_CASE("desk network loss decreases on a single image") {
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 1;
  PhantomSpec spec;
  const std::vector<Image> data{make_phantom(spec).noisy};
  const auto res = train(data, NetworkConfig::desk(), cfg);
  const auto& m = res.epoch_median_loss;
  REQUIRE(m.size() == 50u);
  std::vector<double> head(m.begin(), m.begin() + 10), tail(m.end() - 10, m.end());
  std::sort(head.begin(), head.end());
  std::sort(tail.begin(), tail.end());
  CAPTURE(m.front());
  CAPTURE(m.back());
  CHECK(tail[5] < head[5]);
  CHECK(m.back() < m.front());
  for (double v : m) CHECK(v >= 0.0);
}

TEST_CASE("checkpoint round trip is lossless") {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 31;
  cfg.loss_weighting = LossWeighting::bound_weighted;
  const auto res = train(small_dataset(3), NetworkConfig::tiny(), cfg);
  const fs::path path = scratch("roundtrip.ckpt");
  save_checkpoint(res.checkpoint, path.string());
  const Checkpoint back = load_checkpoint(path.string());
  CHECK(back.model.config() == res.checkpoint.model.config());
  CHECK(same_params(back.model, res.checkpoint.model));
  CHECK(back.model.parameter_count() == res.checkpoint.model.parameter_count());
  CHECK(back.schedule == res.checkpoint.schedule);
  CHECK(back.schedule.alpha_bar(100) == res.checkpoint.schedule.alpha_bar(100));
  CHECK(back.adam.step == res.checkpoint.adam.step);
  CHECK(back.adam.m == res.checkpoint.adam.m);
  CHECK(back.adam.v == res.checkpoint.adam.v);
  CHECK(back.epoch == 1);
  CHECK(back.step == res.checkpoint.step);
  CHECK(back.train.seed == 31u);
  CHECK(back.train.loss_weighting == LossWeighting::bound_weighted);

  // Saving the loaded checkpoint reproduces the file byte for byte.
  const fs::path again = scratch("roundtrip2.ckpt");
  save_checkpoint(back, again.string());
  std::ifstream f1(path, std::ios::binary), f2(again, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {}), b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const fs::path path = scratch("corrupt.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(path.string()), IoError);
  CHECK_THROWS_AS(load_checkpoint((scratch("missing") / "x.ckpt").string()), IoError);

  TrainConfig cfg;
  const Checkpoint c = Checkpoint::initial(NetworkConfig::tiny(), cfg);
  const fs::path good = scratch("truncated.ckpt");
  save_checkpoint(c, good.string());
  fs::resize_file(good, fs::file_size(good) - 16);
  CHECK_THROWS_AS(load_checkpoint(good.string()), IoError);
}

TEST_CASE("loss log csv") {
  const fs::path path = scratch("loss.csv");
  write_loss_csv({{0, 1, 0.5, 1e-4}, {0, 2, 0.25, 1e-4}}, path.string());
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "epoch,step,loss,lr");
  CHECK(row == "0,1,0.5,0.0001");
}
