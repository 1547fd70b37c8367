#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "esgrl/agents.hpp"
#include "test_support.hpp"

using namespace esgrl;
using testing::error_kind;

namespace {

double get_param(const ActorCritic& ac, std::size_t i) {
  const std::size_t na = ac.actor.mean_net().num_params(), A = ac.actor.action_dim();
  if (i < na) return ac.actor.mean_net().params()[i];
  if (i < na + A) return ac.actor.log_std()[i - na];
  return ac.critic.params()[i - na - A];
}

void set_param(ActorCritic& ac, std::size_t i, double v) {
  const std::size_t na = ac.actor.mean_net().num_params(), A = ac.actor.action_dim();
  if (i < na)
    ac.actor.mean_net().mutable_params()[i] = v;
  else if (i < na + A)
    ac.actor.mutable_log_std()[i - na] = v;
  else
    ac.critic.mutable_params()[i - na - A] = v;
}

AgentHyper small_hyper(Algorithm algo) {
  AgentHyper h = AgentHyper::defaults(algo);
  h.hidden = {6};
  h.seed = 3;
  return h;
}

// Buffer of `n` transitions sampled from the current policy.
RolloutBuffer sampled_buffer(const ActorCritic& ac, std::size_t n, std::size_t obs_dim, Rng& rng) {
  RolloutBuffer buf(n, obs_dim, ac.actor.action_dim());
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> obs(obs_dim);
    for (auto& v : obs) v = rng.normal();
    auto s = ac.actor.sample(obs, rng);
    buf.add(obs, s.action, s.log_prob, 0.01 * rng.normal(), ac.value(obs), t + 1 == n);
  }
  buf.last_value = 0.0;
  return buf;
}

// Perturbs every parameter away from zero so finite differences see curvature.
void jitter(ActorCritic& ac, Rng& rng) {
  for (std::size_t i = 0; i < ac.num_params(); ++i) set_param(ac, i, get_param(ac, i) + 0.1 * rng.normal());
}

std::size_t fd_mismatches(ActorCritic& ac, const std::function<double()>& loss, const std::vector<double>& grad) {
  std::size_t bad = 0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < ac.num_params(); ++i) {
    const double orig = get_param(ac, i);
    set_param(ac, i, orig + h);
    const double fp = loss();
    set_param(ac, i, orig - h);
    const double fm = loss();
    set_param(ac, i, orig);
    bad += !testing::close_rel(grad[i], (fp - fm) / (2 * h), 1e-4, 1e-6);
  }
  return bad;
}

std::shared_ptr<const FeaturePanel> market(double drift_up, double drift_down, double vol, std::size_t days,
                                           std::uint64_t seed) {
  SynthSpec spec;
  spec.assets = {{"UP", drift_up, vol, 5, 5, 5, 0}, {"DN", drift_down, vol, 5, 5, 5, 0}};
  return compute_features(std::make_shared<const AlignedDataset>(synth_market(spec, days, seed)), IndicatorConfig{});
}

}  // namespace

TEST_CASE("hyperparameter defaults and validation") {
  auto a = AgentHyper::defaults(Algorithm::kA2C);
  CHECK(a.learning_rate == 2e-4);
  CHECK(a.entropy_coef == 5e-3);
  CHECK(a.rollout_length == 5);
  CHECK(a.total_timesteps == 50000);
  auto p = AgentHyper::defaults(Algorithm::kPPO);
  CHECK(p.learning_rate == 1e-4);
  CHECK(p.batch_size == 128);
  CHECK(p.rollout_length == 2048);
  CHECK(p.epochs == 10);
  CHECK_NOTHROW(a.validate());
  CHECK_NOTHROW(p.validate());

  auto bad = a;
  bad.clip_epsilon = 1.0;
  CHECK(error_kind([&] { bad.validate(); }) == ErrorKind::kValidation);
  bad = a;
  bad.total_timesteps = 4;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = a;
  bad.gae_lambda = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);

  CHECK(std::string(to_string(Algorithm::kPPO)) == "ppo");
  CHECK(algorithm_from_string("a2c") == Algorithm::kA2C);
  CHECK(algorithm_from_string("PPO") == Algorithm::kPPO);
  CHECK_THROWS_AS(algorithm_from_string("ddpg"), Error);
  CHECK(a.canonical() != p.canonical());
}

TEST_CASE("rollout buffer lifecycle") {
  RolloutBuffer buf(2, 3, 2);
  CHECK(error_kind([&] { buf.consume(); }) == ErrorKind::kState);
  buf.add(std::vector<double>{1, 2, 3}, std::vector<double>{0, 1}, -1.0, 0.5, 0.1, false);
  CHECK_THROWS_AS(buf.add(std::vector<double>{1, 2}, std::vector<double>{0, 1}, 0, 0, 0, false), Error);
  buf.add(std::vector<double>{4, 5, 6}, std::vector<double>{1, 0}, -2.0, 0.5, 0.1, true);
  CHECK(buf.full());
  CHECK(error_kind([&] { buf.add(std::vector<double>{1, 2, 3}, std::vector<double>{0, 1}, 0, 0, 0, false); }) ==
        ErrorKind::kState);
  CHECK(buf.observation(1)[2] == 6.0);
  CHECK(buf.action(0)[1] == 1.0);
  buf.consume();
  CHECK(buf.consumed());
  CHECK(error_kind([&] { buf.consume(); }) == ErrorKind::kState);
  buf.clear();
  CHECK(buf.size() == 0);
  CHECK_FALSE(buf.consumed());
}

TEST_CASE("compute_advantages examples") {
  std::vector<std::uint8_t> none(3, 0);
  auto a = compute_advantages(std::vector<double>{1, 1, 1}, std::vector<double>{0, 0, 0},
                              std::vector<std::uint8_t>{0, 0, 1}, 0.0, 1.0, 1.0);
  CHECK(a.advantages == std::vector<double>{3, 2, 1});
  CHECK(a.returns == std::vector<double>{3, 2, 1});

  std::vector<double> r{0.5, -0.2, 0.3}, v{0.1, 0.4, -0.3};
  auto td = compute_advantages(r, v, none, 0.7, 0.9, 0.0);
  CHECK(td.advantages[0] == doctest::Approx(0.5 + 0.9 * 0.4 - 0.1));
  CHECK(td.advantages[1] == doctest::Approx(-0.2 + 0.9 * -0.3 - 0.4));
  CHECK(td.advantages[2] == doctest::Approx(0.3 + 0.9 * 0.7 + 0.3));

  auto myopic = compute_advantages(r, v, none, 0.7, 0.0, 0.95);
  for (int i = 0; i < 3; ++i) CHECK(myopic.advantages[i] == doctest::Approx(r[i] - v[i]));

  // A done flag stops bootstrapping across the episode boundary.
  auto cut = compute_advantages(r, v, std::vector<std::uint8_t>{0, 1, 0}, 0.7, 0.9, 0.95);
  CHECK(cut.advantages[1] == doctest::Approx(-0.2 - 0.4));
  for (int i = 0; i < 3; ++i) CHECK(cut.returns[i] == doctest::Approx(cut.advantages[i] + v[i]));

  CHECK(error_kind([&] { compute_advantages(r, std::vector<double>{1}, none, 0, 0.9, 0.9); }) ==
        ErrorKind::kInvalidArgument);
}

TEST_CASE("standardize") {
  Rng rng(1);
  std::vector<double> x(50);
  for (auto& v : x) v = 3 + 2 * rng.normal();
  auto order = x;
  standardize(x);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / 50;
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  CHECK(std::abs(mean) < 1e-12);
  CHECK(std::sqrt(var / 50) == doctest::Approx(1.0).epsilon(1e-6));
  for (int i = 0; i < 49; ++i) CHECK((order[i] < order[i + 1]) == (x[i] < x[i + 1]));
}

TEST_CASE("clip_grad_norm") {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> g(20);
    for (auto& v : g) v = rng.normal() * rng.uniform(0, 3);
    double pre = 0;
    for (double v : g) pre += v * v;
    pre = std::sqrt(pre);
    const double max_norm = rng.uniform(0.1, 5);
    CHECK(clip_grad_norm(g, max_norm) == doctest::Approx(pre));
    double post = 0;
    for (double v : g) post += v * v;
    CHECK(std::sqrt(post) <= max_norm + 1e-9);
  }
}

TEST_CASE("a2c loss gradient matches finite differences") {
  Rng rng(3);
  for (std::size_t n : {1u, 6u}) {
    auto hyper = small_hyper(Algorithm::kA2C);
    auto ac = ActorCritic::create(4, 2, hyper);
    jitter(ac, rng);
    auto buf = sampled_buffer(ac, n, 4, rng);
    std::vector<double> adv(n), ret(n);
    for (std::size_t i = 0; i < n; ++i) {
      adv[i] = rng.normal();
      ret[i] = rng.normal();
    }
    std::vector<double> grad(ac.num_params(), 0.0);
    a2c_loss(buf, adv, ret, ac, hyper, &grad);
    CHECK(fd_mismatches(ac, [&] { return a2c_loss(buf, adv, ret, ac, hyper).total; }, grad) == 0);
  }
}

TEST_CASE("a2c degenerate updates") {
  Rng rng(4);
  auto hyper = small_hyper(Algorithm::kA2C);
  hyper.entropy_coef = 0.0;
  auto ac = ActorCritic::create(3, 2, hyper);
  auto buf = sampled_buffer(ac, 5, 3, rng);

  std::vector<double> zero(5, 0.0), ret(5);
  for (std::size_t i = 0; i < 5; ++i) ret[i] = ac.value(buf.observation(i));
  std::vector<double> grad(ac.num_params(), 0.0);
  auto loss = a2c_loss(buf, zero, ret, ac, hyper, &grad);
  CHECK(loss.value == 0.0);
  CHECK(loss.policy == 0.0);
  for (double g : grad) CHECK(g == 0.0);
  const auto before = ac.actor;
  apply_gradient(ac, grad, 1e-3);
  CHECK(ac.actor == before);
}

TEST_CASE("a2c step improves the surrogate on its own buffer") {
  Rng rng(5);
  auto hyper = small_hyper(Algorithm::kA2C);
  hyper.entropy_coef = 0.0;
  hyper.value_coef = 0.0;
  auto ac = ActorCritic::create(3, 2, hyper);
  jitter(ac, rng);
  auto buf = sampled_buffer(ac, 20, 3, rng);
  std::vector<double> adv(20), ret(20, 0.0);
  for (auto& a : adv) a = rng.normal();
  std::vector<double> grad(ac.num_params(), 0.0);
  const double before = a2c_loss(buf, adv, ret, ac, hyper, &grad).policy;
  // mean[log pi * A] = -policy loss; a small step against the gradient raises it.
  for (std::size_t i = 0; i < ac.num_params(); ++i) set_param(ac, i, get_param(ac, i) - 1e-4 * grad[i]);
  CHECK(a2c_loss(buf, adv, ret, ac, hyper).policy < before);
}

TEST_CASE("ppo ratio is one at collection time") {
  Rng rng(6);
  auto hyper = small_hyper(Algorithm::kPPO);
  auto ac = ActorCritic::create(4, 3, hyper);
  jitter(ac, rng);
  auto buf = sampled_buffer(ac, 64, 4, rng);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double logp = ac.actor.log_prob(ac.actor.mean(buf.observation(i)), buf.action(i));
    CHECK(std::abs(std::exp(logp - buf.log_probs[i]) - 1.0) <= 1e-9);
  }
  std::vector<double> adv(64), ret(64);
  for (std::size_t i = 0; i < 64; ++i) {
    adv[i] = rng.normal();
    ret[i] = rng.normal();
  }
  std::vector<std::size_t> idx(64);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // At theta_old the clipped and unclipped objectives coincide with the A2C form's value.
  auto p = ppo_loss(buf, idx, adv, ret, ac, hyper, 0.2);
  auto wide = ppo_loss(buf, idx, adv, ret, ac, hyper, 1e9);
  CHECK(p.policy == doctest::Approx(-std::accumulate(adv.begin(), adv.end(), 0.0) / 64).epsilon(1e-12));
  CHECK(p.total == doctest::Approx(wide.total).epsilon(1e-12));

  std::vector<double> g1(ac.num_params(), 0.0), g2(ac.num_params(), 0.0);
  ppo_loss(buf, idx, adv, ret, ac, hyper, 0.2, &g1);
  a2c_loss(buf, adv, ret, ac, hyper, &g2);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-9));
}

TEST_CASE("ppo clipping and unclipped limit") {
  Rng rng(7);
  auto hyper = small_hyper(Algorithm::kPPO);
  hyper.entropy_coef = 0.0;
  hyper.value_coef = 0.0;
  auto ac = ActorCritic::create(3, 2, hyper);
  jitter(ac, rng);
  auto buf = sampled_buffer(ac, 16, 3, rng);
  std::vector<double> adv(16), ret(16, 0.0);
  for (auto& a : adv) a = rng.normal();
  std::vector<std::size_t> idx(16);
  std::iota(idx.begin(), idx.end(), std::size_t{0});

  SUBCASE("positive advantage above 1 + eps has zero gradient") {
    auto shifted = buf;
    for (auto& lp : shifted.log_probs) lp -= 1.0;  // ratio = e > 1.2
    std::vector<double> pos(16, 1.0), grad(ac.num_params(), 0.0);
    auto l = ppo_loss(shifted, idx, pos, ret, ac, hyper, 0.2, &grad);
    CHECK(l.policy == doctest::Approx(-1.2));
    for (double g : grad) CHECK(g == 0.0);
    // Finite differences agree: the clipped objective is flat there.
    CHECK(fd_mismatches(ac, [&] { return ppo_loss(shifted, idx, pos, ret, ac, hyper, 0.2).total; }, grad) == 0);
  }

  SUBCASE("very wide clip recovers the unclipped surrogate") {
    auto shifted = buf;
    for (std::size_t i = 0; i < 16; ++i) shifted.log_probs[i] += 0.5 * rng.normal();
    double manual = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      const double logp = ac.actor.log_prob(ac.actor.mean(shifted.observation(i)), shifted.action(i));
      manual -= std::exp(logp - shifted.log_probs[i]) * adv[i] / 16;
    }
    CHECK(std::abs(ppo_loss(shifted, idx, adv, ret, ac, hyper, 1e12).policy - manual) <= 1e-9);
  }

  SUBCASE("gradient matches finite differences away from the clip kinks") {
    hyper.entropy_coef = 0.01;
    hyper.value_coef = 0.5;
    auto shifted = buf;
    for (std::size_t i = 0; i < 16; ++i) shifted.log_probs[i] += 0.05 * rng.normal();
    std::vector<double> r2(16);
    for (auto& v : r2) v = rng.normal();
    std::vector<std::size_t> half(idx.begin(), idx.begin() + 8);
    std::vector<double> grad(ac.num_params(), 0.0);
    ppo_loss(shifted, half, adv, r2, ac, hyper, 0.2, &grad);
    CHECK(fd_mismatches(ac, [&] { return ppo_loss(shifted, half, adv, r2, ac, hyper, 0.2).total; }, grad) == 0);
  }
}

TEST_CASE("update diagnostics and gradient clipping") {
  Rng rng(8);
  auto hyper = small_hyper(Algorithm::kA2C);
  hyper.max_grad_norm = 1e-3;
  auto ac = ActorCritic::create(3, 2, hyper);
  auto buf = sampled_buffer(ac, 5, 3, rng);
  auto d = a2c_update(buf, ac, hyper);
  CHECK(d.clipped_grad_norm <= hyper.max_grad_norm + 1e-9);
  CHECK(d.grad_norm >= d.clipped_grad_norm);
  CHECK(std::isfinite(d.policy_loss));
  CHECK(error_kind([&] { a2c_update(buf, ac, hyper); }) == ErrorKind::kState);

  auto ph = small_hyper(Algorithm::kPPO);
  ph.batch_size = 4;
  ph.epochs = 3;
  auto pac = ActorCritic::create(3, 2, ph);
  auto pbuf = sampled_buffer(pac, 16, 3, rng);
  Rng shuffle(1);
  auto pd = ppo_update(pbuf, pac, ph, shuffle);
  CHECK(pd.clip_fraction >= 0.0);
  CHECK(pd.clip_fraction <= 1.0);
  CHECK(pd.clipped_grad_norm <= ph.max_grad_norm + 1e-9);
}

TEST_CASE("training loop arithmetic, determinism and evaluation") {
  auto panel = market(0.002, -0.002, 0.002, 120, 1);
  EnvConfig ec;
  ec.regulate = false;
  ec.esg_in_state = false;

  auto hyper = small_hyper(Algorithm::kA2C);
  hyper.total_timesteps = hyper.rollout_length;
  PortfolioEnv env(panel, panel->usable_start(), 119, ec);
  CHECK(train(env, hyper).log.size() == 1);

  for (Algorithm algo : {Algorithm::kA2C, Algorithm::kPPO}) {
    auto h = small_hyper(algo);
    h.total_timesteps = 300;
    h.rollout_length = algo == Algorithm::kPPO ? 64 : 5;
    h.batch_size = 16;
    h.epochs = 2;
    PortfolioEnv e1(panel, panel->usable_start(), 119, ec), e2(panel, panel->usable_start(), 119, ec);
    auto a = train(e1, h), b = train(e2, h);
    CHECK(a.policy == b.policy);
    CHECK(a.log_csv() == b.log_csv());
    CHECK(a.log.size() == 300 / h.rollout_length);
    CHECK(a.log.back().timestep == (300 / h.rollout_length) * h.rollout_length);
    CHECK(a.log_csv().rfind("update,timestep,policy_loss,value_loss,entropy,mean_reward\n", 0) == 0);

    h.seed = 99;
    PortfolioEnv e3(panel, panel->usable_start(), 119, ec);
    CHECK_FALSE(train(e3, h).policy == a.policy);

    auto r1 = evaluate(a.policy, e1), r2 = evaluate(a.policy, e1);
    CHECK(r1.raw_returns == r2.raw_returns);
    CHECK(r1.weights == r2.weights);
    double product = 1;
    for (double r : r1.raw_returns) product *= 1 + r;
    CHECK(product == doctest::Approx(r1.final_value()).epsilon(1e-12));
  }
}

TEST_CASE("evaluation guards and flat markets") {
  auto flat = market(0.0, 0.0, 0.0, 100, 1);
  EnvConfig ec;
  PortfolioEnv env(flat, flat->usable_start(), 99, ec);
  auto h = small_hyper(Algorithm::kA2C);
  auto ac = ActorCritic::create(env.obs_dim(), env.action_dim(), h);
  TrainedPolicy fresh{ac.actor, ac.critic, env.obs_stats(), env.fingerprint()};
  auto ep = evaluate(fresh, env);
  for (double r : ep.raw_returns) CHECK(r == 0.0);

  EnvConfig other = ec;
  other.esg_in_state = false;
  PortfolioEnv env2(flat, flat->usable_start(), 99, other);
  CHECK(error_kind([&] { evaluate(fresh, env2); }) == ErrorKind::kValidation);

  auto trending = market(0.001, -0.001, 0.01, 100, 2);
  PortfolioEnv env3(trending, trending->usable_start(), 99, ec);
  CHECK(env3.fingerprint() == env.fingerprint());
  CHECK(error_kind([&] { evaluate(fresh, env3); }) == ErrorKind::kValidation);
}

TEST_CASE("trained policy save and load") {
  testing::TempDir dir;
  auto panel = market(0.001, -0.001, 0.01, 100, 3);
  PortfolioEnv env(panel, panel->usable_start(), 99, EnvConfig{});
  auto h = small_hyper(Algorithm::kA2C);
  h.total_timesteps = 50;
  auto res = train(env, h);
  res.policy.save(dir.file("p.ckpt"));
  auto back = TrainedPolicy::load(dir.file("p.ckpt"));
  CHECK(back == res.policy);
  CHECK(evaluate(back, env).weights == evaluate(res.policy, env).weights);
  CHECK(error_kind([&] { TrainedPolicy::load(dir.file("nope.ckpt")); }) == ErrorKind::kIo);
}
