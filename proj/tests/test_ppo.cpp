#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cartloco/amp.hpp"
#include "cartloco/checkpoint.hpp"
#include "cartloco/config.hpp"
#include "cartloco/policy.hpp"
#include "cartloco/ppo.hpp"
#include "cartloco/rng.hpp"
#include "oracles.hpp"

using namespace cartloco;
using namespace cartloco::rl;

namespace {

// Desk-sized training shape: big enough to exercise every code path, small enough to
// run inside the suite.
Config tiny_config() {
    Config cfg;
    cfg.ppo.num_envs = 2;
    cfg.ppo.horizon = 8;
    cfg.ppo.epochs = 2;
    cfg.ppo.minibatch = 8;
    cfg.ppo.stage1_iterations = 2;
    cfg.ppo.stage2_iterations = 2;
    cfg.nets.policy_hidden = {16};
    cfg.nets.value_hidden = {16};
    cfg.nets.disc_hidden = {16};
    cfg.amp.batch_size = 8;
    cfg.amp.replay_capacity = 256;
    cfg.amp.ref_transitions = 64;
    cfg.curriculum.window = 2;
    return cfg;
}

// Value net that outputs exactly `c` regardless of input: zero weights, output bias c.
nn::NetParams constant_value_net(int obs_dim, double c) {
    nn::NetParams p;
    p.spec = mlp_spec(obs_dim, {8}, 1);
    p.values.assign(p.spec.param_count(), 0.0);
    p.values[p.spec.bias_offset(1)] = c;
    return p;
}

// Synthetic one-step-per-env batch sampled from the live policy, so stored log-probs
// are exact for it (ratio == 1 on the first minibatch).
RolloutBatch synthetic_batch(const PolicyHead& policy, int n, Rng& rng) {
    const int obs_dim = policy.net.spec.input_size();
    RolloutBatch b;
    b.num_envs = n;
    b.horizon = 1;
    b.log_probs.assign(static_cast<size_t>(n), 0.0);
    b.values.assign(static_cast<size_t>(n), 0.0);
    b.rewards.assign(static_cast<size_t>(n), 0.0);
    b.task_rewards.assign(static_cast<size_t>(n), 0.0);
    b.style_rewards.assign(static_cast<size_t>(n), 0.0);
    b.dones.assign(static_cast<size_t>(n), 0);
    b.values_last.assign(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        Vec obs(static_cast<size_t>(obs_dim));
        for (double& x : obs) x = rng.uniform(-1.0, 1.0);
        const ActionSample as = sample_action(policy, obs, rng);
        b.obs.push_back(obs);
        b.raw_obs.push_back(obs);
        b.actions.push_back(as.action);
        b.exec_actions.push_back(sim::Action{});
        b.log_probs[static_cast<size_t>(i)] = as.log_prob;
        b.rewards[static_cast<size_t>(i)] = rng.uniform(-1.0, 1.0);
    }
    return b;
}

double mean_unclipped_surrogate(const PolicyHead& policy, const RolloutBatch& b) {
    const size_t n = static_cast<size_t>(b.size());
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += b.advantages[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (size_t i = 0; i < n; ++i) var += sq(b.advantages[i] - mean);
    const double inv_sd = 1.0 / (std::sqrt(var / static_cast<double>(n)) + 1e-8);
    double j = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Vec mu = nn::net_forward(policy.net, b.obs[i]);
        const double lp = gaussian_log_prob(mu, policy.log_std, b.actions[i]);
        j += std::exp(lp - b.log_probs[i]) * ((b.advantages[i] - mean) * inv_sd);
    }
    return j / static_cast<double>(n);
}

}  // namespace

TEST_CASE("gae matches the two-reward hand example") {
    const Vec rewards{1.0, 1.0};
    const Vec values{0.0, 0.0, 0.0};
    const std::vector<unsigned char> dones{0, 0};
    const GaeResult g = compute_gae(rewards, values, dones, 0.99, 0.95);
    REQUIRE(g.advantages[0] == Catch::Approx(1.9405).epsilon(1e-12));
    REQUIRE(g.advantages[1] == Catch::Approx(1.0).epsilon(1e-12));
    // Zero values make returns equal advantages.
    REQUIRE(g.returns[0] == g.advantages[0]);
    REQUIRE(g.returns[1] == g.advantages[1]);
}

TEST_CASE("gae agrees with the brute-force oracle") {
    Rng rng(404);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t t_len = 10;
        Vec rewards(t_len), values(t_len + 1);
        std::vector<unsigned char> dones(t_len);
        std::vector<int> dones_int(t_len);
        for (size_t i = 0; i < t_len; ++i) {
            rewards[i] = rng.uniform(-2.0, 2.0);
            dones[i] = rng.uniform01() < 0.2 ? 1 : 0;
            dones_int[i] = dones[i];
        }
        for (double& v : values) v = rng.uniform(-1.0, 1.0);
        const double gamma = rng.uniform(0.9, 1.0);
        const double lam = rng.uniform(0.0, 1.0);
        const GaeResult g = compute_gae(rewards, values, dones, gamma, lam);
        const Vec ref = oracle::brute_gae(rewards, values, dones_int, gamma, lam);
        worst = std::max(worst, oracle::max_discrepancy(g.advantages, ref, 1e-12));
        for (size_t i = 0; i < t_len; ++i)
            REQUIRE(g.returns[i] == Catch::Approx(g.advantages[i] + values[i]).margin(1e-12));
    }
    REQUIRE(worst < 1e-10);
}

TEST_CASE("gae with lambda zero reduces to one-step deltas") {
    Rng rng(405);
    Vec rewards(6), values(7);
    std::vector<unsigned char> dones{0, 1, 0, 0, 1, 0};
    for (double& r : rewards) r = rng.uniform(-1.0, 1.0);
    for (double& v : values) v = rng.uniform(-1.0, 1.0);
    const GaeResult g = compute_gae(rewards, values, dones, 0.99, 0.0);
    for (size_t i = 0; i < rewards.size(); ++i) {
        const double mask = dones[i] ? 0.0 : 1.0;
        REQUIRE(g.advantages[i] == rewards[i] + 0.99 * mask * values[i + 1] - values[i]);
    }
}

TEST_CASE("gae edge shapes") {
    const GaeResult g = compute_gae(Vec(4, 0.0), Vec(5, 0.0), std::vector<unsigned char>(4, 0), 0.99, 0.95);
    for (double a : g.advantages) REQUIRE(a == 0.0);
    for (double r : g.returns) REQUIRE(r == 0.0);
    REQUIRE_THROWS_AS(compute_gae(Vec(4, 0.0), Vec(4, 0.0), std::vector<unsigned char>(4, 0), 0.99, 0.95),
                      ContractError);
    REQUIRE_THROWS_AS(compute_gae(Vec(4, 0.0), Vec(5, 0.0), std::vector<unsigned char>(3, 0), 0.99, 0.95),
                      ContractError);
}

TEST_CASE("a done blocks credit from flowing backward across it") {
    Rng rng(406);
    Vec rewards(8), values(9);
    for (double& r : rewards) r = rng.uniform(-1.0, 1.0);
    for (double& v : values) v = rng.uniform(-1.0, 1.0);
    std::vector<unsigned char> dones(8, 0);
    dones[4] = 1;
    const GaeResult base = compute_gae(rewards, values, dones, 0.99, 0.95);

    Vec tampered = rewards;
    Vec tampered_v = values;
    for (size_t i = 5; i < 8; ++i) tampered[i] += 100.0;
    for (size_t i = 6; i < 9; ++i) tampered_v[i] -= 50.0;
    const GaeResult cut = compute_gae(tampered, tampered_v, dones, 0.99, 0.95);
    // Everything at or before the done (which also ignores values[5]) is untouched.
    for (size_t i = 0; i <= 4; ++i) REQUIRE(cut.advantages[i] == base.advantages[i]);
    REQUIRE(cut.advantages[5] != base.advantages[5]);
}

TEST_CASE("add_gae slices the batch per environment") {
    Rng rng(407);
    RolloutBatch b;
    b.num_envs = 2;
    b.horizon = 3;
    const int n = 6;
    b.rewards.resize(n);
    b.values.resize(n);
    b.dones = {0, 1, 0, 0, 0, 1};
    b.values_last = {0.4, -0.2};
    for (int i = 0; i < n; ++i) {
        b.rewards[static_cast<size_t>(i)] = rng.uniform(-1.0, 1.0);
        b.values[static_cast<size_t>(i)] = rng.uniform(-1.0, 1.0);
    }
    add_gae(b, 0.99, 0.95);
    for (int e = 0; e < 2; ++e) {
        Vec r(b.rewards.begin() + e * 3, b.rewards.begin() + e * 3 + 3);
        Vec v(b.values.begin() + e * 3, b.values.begin() + e * 3 + 3);
        v.push_back(b.values_last[static_cast<size_t>(e)]);
        std::vector<unsigned char> d(b.dones.begin() + e * 3, b.dones.begin() + e * 3 + 3);
        const GaeResult g = compute_gae(r, v, d, 0.99, 0.95);
        for (int t = 0; t < 3; ++t) {
            REQUIRE(b.advantages[static_cast<size_t>(e * 3 + t)] == g.advantages[static_cast<size_t>(t)]);
            REQUIRE(b.returns[static_cast<size_t>(e * 3 + t)] == g.returns[static_cast<size_t>(t)]);
        }
    }
}

TEST_CASE("input widening preserves behaviour on the original features") {
    Rng rng(408);
    const PolicyHead narrow = make_policy(44, {32, 16}, 12, -1.0, 90);
    nn::RunningNorm norm44(44);
    for (int i = 0; i < 50; ++i) {
        Vec o(44);
        for (double& x : o) x = rng.uniform(-2.0, 2.0);
        norm44.update(o);
    }

    const nn::NetParams wide = nn::net_extend_input(narrow.net, 48);
    nn::RunningNorm norm48 = norm44;
    norm48.extend(48);
    REQUIRE(wide.spec.input_size() == 48);
    REQUIRE(norm48.dim() == 48);

    for (int trial = 0; trial < 100; ++trial) {
        Vec o44(44), o48(48);
        for (int k = 0; k < 44; ++k) {
            o44[static_cast<size_t>(k)] = rng.uniform(-2.0, 2.0);
            o48[static_cast<size_t>(k)] = o44[static_cast<size_t>(k)];
        }
        // New columns carry zero weight, so even non-zero appended features are inert.
        for (int k = 44; k < 48; ++k) o48[static_cast<size_t>(k)] = rng.uniform(-2.0, 2.0);
        const Vec out_narrow = nn::net_forward(narrow.net, norm44.normalize(o44));
        const Vec out_wide = nn::net_forward(wide, norm48.normalize(o48));
        for (int j = 0; j < 12; ++j)
            REQUIRE(out_wide[static_cast<size_t>(j)] == out_narrow[static_cast<size_t>(j)]);
    }

    REQUIRE_THROWS_AS(nn::net_extend_input(narrow.net, 40), ContractError);
}

TEST_CASE("rollout collection is deterministic and distinct across envs") {
    const Config cfg = tiny_config();
    const PolicyHead policy = make_policy(44, {16}, 12, -1.0, 21);
    const nn::NetParams value = make_value_net(44, {16}, 22);

    auto collect_once = [&]() {
        std::vector<sim::EnvRunner> envs;
        for (int e = 0; e < cfg.ppo.num_envs; ++e)
            envs.emplace_back(cfg, sim::Stage::kLocomotion, sim::Backend::kA, 555, e);
        std::vector<Rng> rngs;
        for (int e = 0; e < cfg.ppo.num_envs; ++e)
            rngs.push_back(derive_rng(555, stream::kAction, static_cast<std::uint64_t>(e)));
        nn::RunningNorm norm(44);
        CollectStats st;
        RolloutBatch b = collect_rollouts(policy, value, envs, norm, rngs, cfg,
                                          Variant::kLocomotion, nullptr, nullptr, &st);
        return std::make_pair(std::move(b), st);
    };

    const auto [a, sa] = collect_once();
    const auto [b, sb] = collect_once();
    REQUIRE(a.size() == 16);
    REQUIRE(a.obs.size() == 16);
    REQUIRE(a.obs[0].size() == 44);
    REQUIRE(a.actions[0].size() == 12);
    for (int i = 0; i < a.size(); ++i) {
        const size_t s = static_cast<size_t>(i);
        REQUIRE(a.obs[s] == b.obs[s]);
        REQUIRE(a.raw_obs[s] == b.raw_obs[s]);
        REQUIRE(a.actions[s] == b.actions[s]);
        REQUIRE(a.log_probs[s] == b.log_probs[s]);
        REQUIRE(a.values[s] == b.values[s]);
        REQUIRE(a.rewards[s] == b.rewards[s]);
        REQUIRE(a.dones[s] == b.dones[s]);
    }
    REQUIRE(a.values_last == b.values_last);
    REQUIRE(sa.steps == 16);
    REQUIRE(sa.reward_mean == sb.reward_mean);
    // Env streams are independent: the two envs' first observations differ.
    REQUIRE(a.raw_obs[0] != a.raw_obs[static_cast<size_t>(cfg.ppo.horizon)]);
}

TEST_CASE("episode cuts land where the clock says and timeouts fold in the bootstrap") {
    Config cfg = tiny_config();
    cfg.ppo.num_envs = 1;
    cfg.ppo.horizon = 7;
    cfg.env.episode.stage1_seconds = 0.05;  // timeout after exactly 3 control steps
    const PolicyHead policy = make_policy(44, {16}, 12, -1.0, 31);

    auto collect_with_value = [&](double c) {
        std::vector<sim::EnvRunner> envs;
        envs.emplace_back(cfg, sim::Stage::kLocomotion, sim::Backend::kA, 777, 0);
        std::vector<Rng> rngs{derive_rng(777, stream::kAction, 0)};
        nn::RunningNorm norm(44);
        const nn::NetParams value = constant_value_net(44, c);
        return collect_rollouts(policy, value, envs, norm, rngs, cfg, Variant::kLocomotion,
                                nullptr, nullptr, nullptr);
    };

    const RolloutBatch plain = collect_with_value(0.0);
    const RolloutBatch boosted = collect_with_value(5.0);

    const std::vector<unsigned char> want{0, 0, 1, 0, 0, 1, 0};
    for (size_t i = 0; i < want.size(); ++i) {
        REQUIRE(plain.dones[i] == want[i]);
        REQUIRE(boosted.dones[i] == want[i]);
        REQUIRE(plain.values[i] == 0.0);
        REQUIRE(boosted.values[i] == 5.0);
        REQUIRE(plain.task_rewards[i] == 0.0);
        REQUIRE(plain.style_rewards[i] == 0.0);
        // The only reward difference a different value net can make is the timeout
        // bootstrap gamma * V(s_T).
        const double delta = boosted.rewards[i] - plain.rewards[i];
        if (want[i])
            REQUIRE(delta == Catch::Approx(cfg.ppo.gamma * 5.0).margin(1e-12));
        else
            REQUIRE(delta == 0.0);
    }
    REQUIRE(plain.values_last[0] == 0.0);
    REQUIRE(boosted.values_last[0] == 5.0);
}

TEST_CASE("near-zero exploration reproduces the mean action") {
    const Config cfg = tiny_config();
    PolicyHead policy = make_policy(44, {16}, 12, -1.0, 41);
    // Bypasses the configured clamp on purpose: sigma = e^-40 is effectively zero but
    // keeps log-probs finite.
    policy.log_std.assign(12, -40.0);
    const nn::NetParams value = make_value_net(44, {16}, 42);

    std::vector<sim::EnvRunner> envs;
    envs.emplace_back(cfg, sim::Stage::kLocomotion, sim::Backend::kA, 888, 0);
    std::vector<Rng> rngs{derive_rng(888, stream::kAction, 0)};
    nn::RunningNorm norm(44);
    const RolloutBatch b = collect_rollouts(policy, value, envs, norm, rngs, cfg,
                                            Variant::kLocomotion, nullptr, nullptr, nullptr);
    for (int t = 0; t < cfg.ppo.horizon; ++t) {
        const size_t s = static_cast<size_t>(t);
        const Vec mu = mean_action(policy, b.obs[s]);
        for (int j = 0; j < 12; ++j)
            REQUIRE(b.actions[s][static_cast<size_t>(j)] ==
                    Catch::Approx(mu[static_cast<size_t>(j)]).margin(1e-12));
        REQUIRE(std::isfinite(b.log_probs[s]));
    }
}

TEST_CASE("no-amp collection never touches the discriminator") {
    const Config cfg = tiny_config();
    const PolicyHead policy = make_policy(48, {16}, 12, -1.0, 51);
    const nn::NetParams value = constant_value_net(48, 0.0);

    // A live discriminator context is supplied and must stay untouched.
    const amp::DiscriminatorHead disc = amp::make_discriminator(17, {16}, 10.0, 52);
    const nn::RunningNorm feat_norm(17);
    AmpContext ctx;
    ctx.head = &disc;
    ctx.feat_norm = &feat_norm;
    ctx.mode = amp::ProjectionMode::kPartial;

    std::vector<sim::EnvRunner> envs;
    for (int e = 0; e < 2; ++e) envs.emplace_back(cfg, sim::Stage::kCartPush, sim::Backend::kA, 999, e);
    std::vector<Rng> rngs{derive_rng(999, stream::kAction, 0), derive_rng(999, stream::kAction, 1)};
    nn::RunningNorm norm(48);
    const RolloutBatch b = collect_rollouts(policy, value, envs, norm, rngs, cfg, Variant::kNoAmp,
                                            &ctx, nullptr, nullptr);
    REQUIRE(ctx.style_evals == 0);
    REQUIRE(b.transitions.empty());
    for (int i = 0; i < b.size(); ++i) {
        const size_t s = static_cast<size_t>(i);
        REQUIRE(b.style_rewards[s] == 0.0);
        // Zero value net means the timeout patch adds exactly zero, so every slot is
        // the bare task composite.
        REQUIRE(b.rewards[s] == cfg.rewards.task_weight * b.task_rewards[s]);
    }
}

TEST_CASE("adversarial collection scores style on every transition") {
    const Config cfg = tiny_config();
    const PolicyHead policy = make_policy(48, {16}, 12, -1.0, 61);
    const nn::NetParams value = constant_value_net(48, 0.0);
    const amp::DiscriminatorHead disc = amp::make_discriminator(17, {16}, 10.0, 62);
    const nn::RunningNorm feat_norm(17);
    AmpContext ctx;
    ctx.head = &disc;
    ctx.feat_norm = &feat_norm;
    ctx.mode = amp::ProjectionMode::kPartial;

    std::vector<sim::EnvRunner> envs;
    for (int e = 0; e < 2; ++e) envs.emplace_back(cfg, sim::Stage::kCartPush, sim::Backend::kA, 444, e);
    std::vector<Rng> rngs{derive_rng(444, stream::kAction, 0), derive_rng(444, stream::kAction, 1)};
    nn::RunningNorm norm(48);
    const RolloutBatch b = collect_rollouts(policy, value, envs, norm, rngs, cfg,
                                            Variant::kPartialAmp, &ctx, nullptr, nullptr);
    REQUIRE(ctx.style_evals == b.size());
    REQUIRE(b.transitions.size() == static_cast<size_t>(b.size()));
    for (int i = 0; i < b.size(); ++i) {
        const size_t s = static_cast<size_t>(i);
        REQUIRE(b.style_rewards[s] >= 0.0);
        REQUIRE(b.style_rewards[s] <= 1.0);
        REQUIRE(b.transitions[s].phi_s.size() == 17);
        const double combined = cfg.rewards.style_weight * b.style_rewards[s] +
                                cfg.rewards.task_weight * b.task_rewards[s];
        REQUIRE(b.rewards[s] == Catch::Approx(combined).margin(1e-12));
    }
    // Requesting the adversarial variant without a context is a contract violation.
    std::vector<sim::EnvRunner> envs2;
    envs2.emplace_back(cfg, sim::Stage::kCartPush, sim::Backend::kA, 445, 0);
    std::vector<Rng> rngs2{derive_rng(445, stream::kAction, 0)};
    nn::RunningNorm norm2(48);
    REQUIRE_THROWS_AS(collect_rollouts(policy, value, envs2, norm2, rngs2, cfg,
                                       Variant::kPartialAmp, nullptr, nullptr, nullptr),
                      ContractError);
}

TEST_CASE("hierarchical collection replays frozen legs and trains only the arm head") {
    const Config cfg = tiny_config();
    const PolicyHead policy = make_policy(48, {16}, 4, -1.0, 71);
    const nn::NetParams value = constant_value_net(48, 0.0);

    FrozenBase base;
    base.head = make_policy(44, {16}, 12, -1.0, 72);
    base.obs_norm = nn::RunningNorm(44);
    {
        Rng r(73);
        for (int i = 0; i < 40; ++i) {
            Vec o(44);
            for (double& x : o) x = r.uniform(-1.0, 1.0);
            base.obs_norm.update(o);
        }
    }

    const amp::DiscriminatorHead disc = amp::make_discriminator(17, {16}, 10.0, 74);
    const nn::RunningNorm feat_norm(17);
    AmpContext ctx;
    ctx.head = &disc;
    ctx.feat_norm = &feat_norm;

    std::vector<sim::EnvRunner> envs;
    for (int e = 0; e < 2; ++e) envs.emplace_back(cfg, sim::Stage::kCartPush, sim::Backend::kA, 333, e);
    std::vector<Rng> rngs{derive_rng(333, stream::kAction, 0), derive_rng(333, stream::kAction, 1)};
    nn::RunningNorm norm(48);
    const RolloutBatch b = collect_rollouts(policy, value, envs, norm, rngs, cfg,
                                            Variant::kHierarchical, &ctx, &base, nullptr);

    REQUIRE(ctx.style_evals == 0);
    REQUIRE(b.transitions.empty());
    for (int i = 0; i < b.size(); ++i) {
        const size_t s = static_cast<size_t>(i);
        REQUIRE(b.actions[s].size() == 4);
        // Legs are the frozen policy's mean action on the stage-1 observation slice,
        // normalized with the frozen stats.
        Vec base_in(b.raw_obs[s].begin(), b.raw_obs[s].begin() + 44);
        const Vec legs = mean_action(base.head, base.obs_norm.normalize(base_in));
        for (int j = 0; j < 8; ++j)
            REQUIRE(b.exec_actions[s].v[static_cast<size_t>(j)] == legs[static_cast<size_t>(j)]);
        for (int j = 0; j < 4; ++j)
            REQUIRE(b.exec_actions[s].v[static_cast<size_t>(8 + j)] == b.actions[s][static_cast<size_t>(j)]);
    }

    // Without the frozen base the variant cannot run.
    std::vector<sim::EnvRunner> envs2;
    envs2.emplace_back(cfg, sim::Stage::kCartPush, sim::Backend::kA, 334, 0);
    std::vector<Rng> rngs2{derive_rng(334, stream::kAction, 0)};
    nn::RunningNorm norm2(48);
    REQUIRE_THROWS_AS(collect_rollouts(policy, value, envs2, norm2, rngs2, cfg,
                                       Variant::kHierarchical, nullptr, nullptr, nullptr),
                      ContractError);
}

TEST_CASE("ppo update at ratio one leaves kl and clip fraction at zero") {
    PolicyHead policy = make_policy(10, {16}, 3, -1.0, 81);
    nn::NetParams value = make_value_net(10, {16}, 82);
    Rng rng(83);
    RolloutBatch b = synthetic_batch(policy, 64, rng);
    add_gae(b, 0.99, 0.95);

    PpoConfig cfg;
    cfg.epochs = 1;
    cfg.minibatch = 64;  // one minibatch: every sample sees the pre-step policy
    cfg.lr = 1e-4;
    nn::AdamState op, ov;
    Rng shuffle = derive_rng(84, stream::kShuffle);
    const Vec before = policy.net.values;
    const PpoMetrics m = ppo_update(policy, value, b, cfg, op, ov, shuffle);

    REQUIRE(m.kl == 0.0);
    REQUIRE(m.clip_fraction == 0.0);
    REQUIRE(m.surrogate == Catch::Approx(0.0).margin(1e-12));  // normalized advantages
    REQUIRE(m.entropy == Catch::Approx(gaussian_entropy(Vec(3, -1.0))).margin(1e-12));
    REQUIRE(std::isfinite(m.value_loss));
    REQUIRE(policy.net.values != before);  // the step itself is real
}

TEST_CASE("a small update step raises the unclipped surrogate") {
    PolicyHead policy = make_policy(8, {16}, 2, -1.0, 91);
    nn::NetParams value = make_value_net(8, {16}, 92);
    Rng rng(93);
    RolloutBatch b = synthetic_batch(policy, 128, rng);
    add_gae(b, 0.99, 0.95);

    PpoConfig cfg;
    cfg.epochs = 1;
    cfg.minibatch = 128;
    cfg.lr = 1e-6;
    cfg.entropy_coef = 0.0;  // isolate the surrogate direction
    nn::AdamState op, ov;
    Rng shuffle = derive_rng(94, stream::kShuffle);
    ppo_update(policy, value, b, cfg, op, ov, shuffle);

    const double after = mean_unclipped_surrogate(policy, b);
    REQUIRE(after > 1e-10);  // started at exactly 0 (normalized advantages, ratio 1)
    REQUIRE(after < 0.1);
}

TEST_CASE("ppo update metrics stay in range under a stale policy") {
    PolicyHead policy = make_policy(10, {16}, 3, -1.0, 101);
    nn::NetParams value = make_value_net(10, {16}, 102);
    Rng rng(103);
    RolloutBatch b = synthetic_batch(policy, 96, rng);
    add_gae(b, 0.99, 0.95);

    // Stale log-probs: the policy moved since collection.
    for (double& w : policy.net.values) w += 0.03;
    policy.log_std.assign(3, -0.7);

    PpoConfig cfg;
    cfg.epochs = 3;
    cfg.minibatch = 32;
    nn::AdamState op, ov;
    Rng shuffle = derive_rng(104, stream::kShuffle);
    const PpoMetrics m = ppo_update(policy, value, b, cfg, op, ov, shuffle);
    REQUIRE(std::isfinite(m.kl));
    REQUIRE(std::isfinite(m.surrogate));
    REQUIRE(std::isfinite(m.value_loss));
    REQUIRE(m.value_loss >= 0.0);
    REQUIRE(m.clip_fraction >= 0.0);
    REQUIRE(m.clip_fraction <= 1.0);
    REQUIRE(m.entropy > 0.0);
    for (double s : policy.log_std) {
        REQUIRE(s >= cfg.log_std_min);
        REQUIRE(s <= cfg.log_std_max);
    }
}

TEST_CASE("ppo update rejects malformed batches") {
    PolicyHead policy = make_policy(6, {8}, 2, -1.0, 111);
    nn::NetParams value = make_value_net(6, {8}, 112);
    PpoConfig cfg;
    nn::AdamState op, ov;
    Rng shuffle(113);

    RolloutBatch empty;
    REQUIRE_THROWS_AS(ppo_update(policy, value, empty, cfg, op, ov, shuffle), ContractError);

    Rng rng(114);
    RolloutBatch no_adv = synthetic_batch(policy, 8, rng);
    REQUIRE_THROWS_AS(ppo_update(policy, value, no_adv, cfg, op, ov, shuffle), ContractError);

    RolloutBatch poisoned = synthetic_batch(policy, 8, rng);
    add_gae(poisoned, 0.99, 0.95);
    poisoned.advantages[3] = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(ppo_update(policy, value, poisoned, cfg, op, ov, shuffle), NumericError);
}

TEST_CASE("curriculum advances exactly once on a qualifying window") {
    CurriculumConfig cc;  // survival > 0.8, lin vel err < 0.2, window 8
    std::vector<IterStats> window;

    // Short window: hold.
    for (int i = 0; i < cc.window - 1; ++i) window.push_back({1.0, 0.0});
    REQUIRE(curriculum_advance(1, window, cc) == 1);

    // Full window, both thresholds met: advance once.
    window.push_back({1.0, 0.0});
    REQUIRE(curriculum_advance(1, window, cc) == 2);
    REQUIRE(curriculum_advance(2, window, cc) == 2);  // never past 2, never back

    // Either threshold failing holds the phase.
    std::vector<IterStats> weak(static_cast<size_t>(cc.window), {0.7, 0.0});
    REQUIRE(curriculum_advance(1, weak, cc) == 1);
    std::vector<IterStats> sloppy(static_cast<size_t>(cc.window), {1.0, 0.3});
    REQUIRE(curriculum_advance(1, sloppy, cc) == 1);

    // Means decide, not single rows: one bad row in a strong window still passes.
    std::vector<IterStats> mixed(static_cast<size_t>(cc.window), {1.0, 0.05});
    mixed[2] = {0.5, 0.1};
    REQUIRE(curriculum_advance(1, mixed, cc) == 2);
}

TEST_CASE("stage-1 smoke training is byte-deterministic") {
    const Config cfg = tiny_config();
    const std::string log_path = "test_stage1_log.csv";
    std::remove(log_path.c_str());

    const nn::Checkpoint a = train_stage1(cfg, 7, log_path);
    const nn::Checkpoint b = train_stage1(cfg, 7);
    const nn::Checkpoint c = train_stage1(cfg, 8);

    REQUIRE(nn::checkpoint_to_string(a) == nn::checkpoint_to_string(b));
    REQUIRE(nn::checkpoint_to_string(a) != nn::checkpoint_to_string(c));
    REQUIRE(a.stage == 1);
    REQUIRE(a.variant == "locomotion");
    REQUIRE(a.iterations_done == 2);
    REQUIRE(a.policy.spec.input_size() == 44);
    REQUIRE(a.policy.spec.output_size() == 12);
    REQUIRE(a.obs_norm.count > 0);

    // Round trip through disk.
    nn::save_checkpoint(a, "test_stage1_ckpt.json");
    const nn::Checkpoint loaded = nn::load_checkpoint("test_stage1_ckpt.json");
    REQUIRE(nn::checkpoint_to_string(loaded) == nn::checkpoint_to_string(a));
    std::remove("test_stage1_ckpt.json");

    // Log: header plus one row per iteration, comma-separated.
    std::ifstream f(log_path);
    REQUIRE(f.good());
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(f, line))
        if (!line.empty()) lines.push_back(line);
    REQUIRE(lines.size() == 3);
    REQUIRE(lines[0].rfind("iter,steps,reward,", 0) == 0);
    REQUIRE(lines[1].rfind("1,16,", 0) == 0);
    REQUIRE(lines[2].rfind("2,32,", 0) == 0);
    std::remove(log_path.c_str());
}

TEST_CASE("stage-2 variants wire their optional parts") {
    const Config cfg = tiny_config();
    const nn::Checkpoint stage1 = train_stage1(cfg, 7);

    SECTION("no_amp warm start widens the nets and carries no discriminator") {
        const nn::Checkpoint c = train_stage2(cfg, stage1, Variant::kNoAmp, nullptr, 7);
        REQUIRE(c.stage == 2);
        REQUIRE(c.variant == "no_amp");
        REQUIRE(c.policy.spec.input_size() == 48);
        REQUIRE(c.policy.spec.output_size() == 12);
        REQUIRE_FALSE(c.disc.has_value());
        REQUIRE_FALSE(c.base_policy.has_value());
        REQUIRE(c.iterations_done == 2);
    }

    SECTION("adversarial variant trains a discriminator and is byte-deterministic") {
        const amp::RefDataset ref =
            amp::collect_reference(stage1, cfg, amp::ProjectionMode::kPartial, 64, 3);
        const nn::Checkpoint c1 = train_stage2(cfg, stage1, Variant::kPartialAmp, &ref, 7);
        const nn::Checkpoint c2 = train_stage2(cfg, stage1, Variant::kPartialAmp, &ref, 7);
        REQUIRE(nn::checkpoint_to_string(c1) == nn::checkpoint_to_string(c2));
        REQUIRE(c1.variant == "partial_amp");
        REQUIRE(c1.disc.has_value());
        REQUIRE(c1.disc_norm.has_value());
        REQUIRE(c1.disc->spec.input_size() == 34);
        REQUIRE(c1.opt_disc.has_value());
        REQUIRE(c1.opt_disc->step > 0);  // the replay held a full batch by iteration 1

        // Projection dimension mismatch is rejected up front.
        REQUIRE_THROWS_AS(train_stage2(cfg, stage1, Variant::kFullAmp, &ref, 7), ContractError);
        REQUIRE_THROWS_AS(train_stage2(cfg, stage1, Variant::kPartialAmp, nullptr, 7), ContractError);
    }

    SECTION("hierarchical keeps the frozen base in the bundle") {
        const nn::Checkpoint c = train_stage2(cfg, stage1, Variant::kHierarchical, nullptr, 7);
        REQUIRE(c.variant == "hierarchical");
        REQUIRE(c.policy.spec.input_size() == 48);
        REQUIRE(c.policy.spec.output_size() == 4);
        REQUIRE(c.log_std.size() == 4);
        REQUIRE(c.base_policy.has_value());
        REQUIRE(c.base_log_std.has_value());
        REQUIRE(c.base_obs_norm.has_value());
        REQUIRE(c.base_policy->spec.input_size() == 44);
        REQUIRE(c.base_obs_norm->dim() == 44);
    }

    SECTION("stage-2 rejects bad warm-start inputs") {
        nn::Checkpoint not_stage1 = stage1;
        not_stage1.stage = 2;
        REQUIRE_THROWS_AS(train_stage2(cfg, not_stage1, Variant::kNoAmp, nullptr, 7), ContractError);
        REQUIRE_THROWS_AS(train_stage2(cfg, stage1, Variant::kLocomotion, nullptr, 7), ContractError);
    }
}
