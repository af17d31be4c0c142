#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cartloco/checkpoint.hpp"
#include "cartloco/config.hpp"
#include "cartloco/env.hpp"
#include "cartloco/errors.hpp"
#include "cartloco/hash.hpp"
#include "cartloco/math.hpp"
#include "cartloco/net.hpp"
#include "cartloco/policy.hpp"
#include "cartloco/rng.hpp"

// Adversarial motion prior over projected state transitions: the projection keeps the
// locomotion-relevant state (yaw rate + leg joints), a least-squares discriminator
// separates reference pairs (label +1) from policy pairs (label -1) under a parameter-
// gradient penalty, and the bounded style reward feeds the stage-2 composite.

namespace cartloco::amp {

enum class ProjectionMode { kPartial, kFull };

constexpr int kPartialDim = 17;  // omega(1) + leg q(8) + leg qd(8)
constexpr int kFullDim = 24;     // partial + arm q(3) + grip(1) + EE pose(3)

inline int projection_dim(ProjectionMode m) { return m == ProjectionMode::kPartial ? kPartialDim : kFullDim; }

// Fixed layout: [omega, q_leg 0..7, qd_leg 0..7] and, in full mode, [q_arm 0..2,
// q_grip, ee.x, ee.y, ee_angle] appended (EE pose in the base frame). Bitwise function
// of the state fields it reads; in partial mode arm/gripper/EE/cart never enter.
inline Vec project(const sim::SimState& s, ProjectionMode mode, const GeometryConfig& g) {
    Vec v;
    v.reserve(static_cast<size_t>(projection_dim(mode)));
    v.push_back(s.omega);
    for (double q : s.q_leg) v.push_back(q);
    for (double qd : s.qd_leg) v.push_back(qd);
    if (mode == ProjectionMode::kFull) {
        for (double q : s.q_arm) v.push_back(q);
        v.push_back(s.q_grip);
        const sim::ArmFk fk = sim::arm_fk(s.q_arm.data(), g);
        v.push_back(fk.ee.x);
        v.push_back(fk.ee.y);
        v.push_back(fk.ee_angle);
    }
    return v;
}

struct ProjectedTransition {
    Vec phi_s;
    Vec phi_s_next;
};

struct RefDataset {
    int proj_dim = kPartialDim;
    std::string source_policy_id;  // fingerprint of the generating policy parameters
    std::uint64_t generation_seed = 0;
    std::vector<ProjectedTransition> transitions;
};

inline std::string policy_fingerprint(const nn::Checkpoint& ckpt) {
    Fnv1a f;
    f.update(ckpt.policy.values);
    f.update(ckpt.log_std);
    return f.hex();
}

// --- dataset file format -------------------------------------------------------------
// Raw little-endian binary: magic "CLREFSET", u32 layout version, u32 projection size,
// u64 pair count, u64 generation seed, u32 id length + id bytes, then count pairs of
// 2*proj_dim doubles. The loader validates the header and the payload length.

namespace detail {
constexpr char kRefMagic[8] = {'C', 'L', 'R', 'E', 'F', 'S', 'E', 'T'};
constexpr std::uint32_t kRefVersion = 1;

template <typename T>
void put(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::ifstream& f, const std::string& path) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw IoError("truncated reference dataset: " + path);
    return v;
}
}  // namespace detail

inline void save_ref_dataset(const RefDataset& ds, const std::string& path) {
    if (ds.transitions.empty()) throw ContractError("save_ref_dataset: dataset must be non-empty");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(detail::kRefMagic, sizeof(detail::kRefMagic));
    detail::put(f, detail::kRefVersion);
    detail::put(f, static_cast<std::uint32_t>(ds.proj_dim));
    detail::put(f, static_cast<std::uint64_t>(ds.transitions.size()));
    detail::put(f, ds.generation_seed);
    detail::put(f, static_cast<std::uint32_t>(ds.source_policy_id.size()));
    f.write(ds.source_policy_id.data(), static_cast<std::streamsize>(ds.source_policy_id.size()));
    for (const ProjectedTransition& t : ds.transitions) {
        if (static_cast<int>(t.phi_s.size()) != ds.proj_dim ||
            static_cast<int>(t.phi_s_next.size()) != ds.proj_dim)
            throw ContractError("save_ref_dataset: transition dimension != header projection size");
        f.write(reinterpret_cast<const char*>(t.phi_s.data()),
                static_cast<std::streamsize>(t.phi_s.size() * sizeof(double)));
        f.write(reinterpret_cast<const char*>(t.phi_s_next.data()),
                static_cast<std::streamsize>(t.phi_s_next.size() * sizeof(double)));
    }
    if (!f) throw IoError("write failed: " + path);
}

inline RefDataset load_ref_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open reference dataset: " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, detail::kRefMagic, sizeof(magic)) != 0)
        throw IoError("not a reference dataset file: " + path);
    const auto version = detail::get<std::uint32_t>(f, path);
    if (version != detail::kRefVersion)
        throw IoError("unsupported reference dataset version " + std::to_string(version) + ": " + path);
    RefDataset ds;
    ds.proj_dim = static_cast<int>(detail::get<std::uint32_t>(f, path));
    if (ds.proj_dim < 1) throw IoError("reference dataset header has projection size 0: " + path);
    const auto count = detail::get<std::uint64_t>(f, path);
    if (count == 0) throw IoError("reference dataset is empty: " + path);
    ds.generation_seed = detail::get<std::uint64_t>(f, path);
    const auto id_len = detail::get<std::uint32_t>(f, path);
    ds.source_policy_id.resize(id_len);
    f.read(ds.source_policy_id.data(), static_cast<std::streamsize>(id_len));
    if (!f) throw IoError("truncated reference dataset: " + path);
    ds.transitions.resize(count);
    const size_t dim = static_cast<size_t>(ds.proj_dim);
    for (ProjectedTransition& t : ds.transitions) {
        t.phi_s.resize(dim);
        t.phi_s_next.resize(dim);
        f.read(reinterpret_cast<char*>(t.phi_s.data()), static_cast<std::streamsize>(dim * sizeof(double)));
        f.read(reinterpret_cast<char*>(t.phi_s_next.data()),
               static_cast<std::streamsize>(dim * sizeof(double)));
        if (!f) throw IoError("truncated reference dataset: " + path);
    }
    f.peek();
    if (!f.eof()) throw IoError("trailing bytes after declared pair count: " + path);
    return ds;
}

// Per-dimension standardization statistics over every projected half in the dataset.
// Computed once from reference data and then frozen; both discriminator inputs and the
// policy-side stream are normalized with these same statistics.
inline nn::RunningNorm ref_feature_norm(const RefDataset& ds) {
    if (ds.transitions.empty()) throw ContractError("ref_feature_norm: empty dataset");
    nn::RunningNorm n(static_cast<size_t>(ds.proj_dim));
    for (const ProjectedTransition& t : ds.transitions) {
        n.update(t.phi_s);
        n.update(t.phi_s_next);
    }
    return n;
}

// Discriminator input: the two normalized halves concatenated, length 2*proj_dim.
inline Vec disc_input(const ProjectedTransition& t, const nn::RunningNorm& norm) {
    Vec x = norm.normalize(t.phi_s);
    const Vec b = norm.normalize(t.phi_s_next);
    x.insert(x.end(), b.begin(), b.end());
    return x;
}

struct DiscriminatorHead {
    nn::NetParams net;   // input 2*proj_dim, scalar output
    double w_gp = 10.0;  // parameter-gradient penalty coefficient
};

inline DiscriminatorHead make_discriminator(int proj_dim, const std::vector<int>& hidden, double w_gp,
                                            std::uint64_t seed) {
    DiscriminatorHead h;
    h.net = nn::net_init(rl::mlp_spec(2 * proj_dim, hidden, 1), seed);
    h.w_gp = w_gp;
    return h;
}

struct DiscLoss {
    double loss = 0.0;
    Vec grad;  // exact d loss / d params, penalty differentiated through
    double mean_d_ref = 0.0;
    double mean_d_pol = 0.0;
    double gp = 0.0;  // penalty term's contribution to loss
};

// loss = mean_ref (D-1)^2 + mean_pol (D+1)^2 + (w_gp/2) mean_ref ||dD/dpsi||^2.
// The penalty's gradient needs second derivatives: per reference sample, grad gains
// w_gp/n_ref * H g where g is the sample's parameter gradient and H g comes from the
// exact Hessian-vector product (no finite differences anywhere).
inline DiscLoss discriminator_loss(const DiscriminatorHead& head, const std::vector<Vec>& ref_batch,
                                   const std::vector<Vec>& policy_batch) {
    if (ref_batch.empty() || policy_batch.empty())
        throw ContractError("discriminator_loss: both batches must be non-empty");
    DiscLoss out;
    out.grad.assign(head.net.values.size(), 0.0);
    const double inv_r = 1.0 / static_cast<double>(ref_batch.size());
    const double inv_p = 1.0 / static_cast<double>(policy_batch.size());
    const Vec one{1.0};
    for (const Vec& x : ref_batch) {
        const double d = nn::net_forward(head.net, x)[0];
        out.mean_d_ref += d * inv_r;
        out.loss += sq(d - 1.0) * inv_r;
        const nn::BackwardResult b = nn::net_backward(head.net, x, one);
        const double c = 2.0 * (d - 1.0) * inv_r;
        for (size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += c * b.param_grad[i];
        if (head.w_gp != 0.0) {
            double g2 = 0.0;
            for (double gi : b.param_grad) g2 += gi * gi;
            out.gp += 0.5 * head.w_gp * g2 * inv_r;
            const Vec hg = nn::net_hvp(head.net, x, one, b.param_grad);
            const double cg = head.w_gp * inv_r;
            for (size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += cg * hg[i];
        }
    }
    for (const Vec& x : policy_batch) {
        const double d = nn::net_forward(head.net, x)[0];
        out.mean_d_pol += d * inv_p;
        out.loss += sq(d + 1.0) * inv_p;
        const nn::BackwardResult b = nn::net_backward(head.net, x, one);
        const double c = 2.0 * (d + 1.0) * inv_p;
        for (size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += c * b.param_grad[i];
    }
    out.loss += out.gp;
    return out;
}

// max[0, 1 - 0.25 (D - 1)^2]: 1 at D = 1, 0 from D = -1 outward, in [0, 1] for any D.
inline double style_from_d(double d) { return std::max(0.0, 1.0 - 0.25 * sq(d - 1.0)); }

inline double style_reward(const DiscriminatorHead& head, const ProjectedTransition& t,
                           const nn::RunningNorm& norm) {
    return style_from_d(nn::net_forward(head.net, disc_input(t, norm))[0]);
}

inline double combined_reward(double style, double task, const RewardConfig& rw) {
    return rw.style_weight * style + rw.task_weight * task;
}

// Ring buffer of the most recent policy-side transitions, uniform sampling.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw ContractError("ReplayBuffer: capacity must be positive");
        items_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
    }

    void push(ProjectedTransition t) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const ProjectedTransition& at(std::size_t i) const { return items_[i]; }
    const ProjectedTransition& sample(Rng& rng) const {
        if (items_.empty()) throw ContractError("ReplayBuffer::sample: buffer is empty");
        return items_[static_cast<std::size_t>(rng.below(items_.size()))];
    }

  private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // overwrite cursor once full
    std::vector<ProjectedTransition> items_;
};

struct AmpMetrics {
    double loss = 0.0;
    double mean_d_ref = 0.0;
    double mean_d_pol = 0.0;
    double gp = 0.0;
};

// One Adam step on the discriminator. Batch draw order (all reference indices, then all
// replay indices) is a determinism contract.
inline AmpMetrics amp_update(DiscriminatorHead& head, const RefDataset& ref, const ReplayBuffer& replay,
                             const nn::RunningNorm& norm, int batch_size, nn::AdamState& opt,
                             const nn::AdamConfig& opt_cfg, Rng& rng) {
    if (batch_size < 1) throw ContractError("amp_update: batch_size must be positive");
    if (ref.transitions.empty()) throw ContractError("amp_update: reference dataset is empty");
    if (replay.size() < static_cast<std::size_t>(batch_size))
        throw ContractError("amp_update: replay buffer holds " + std::to_string(replay.size()) +
                            " < batch_size " + std::to_string(batch_size));
    std::vector<Vec> rb, pb;
    rb.reserve(static_cast<size_t>(batch_size));
    pb.reserve(static_cast<size_t>(batch_size));
    for (int k = 0; k < batch_size; ++k)
        rb.push_back(disc_input(ref.transitions[static_cast<std::size_t>(rng.below(ref.transitions.size()))], norm));
    for (int k = 0; k < batch_size; ++k) pb.push_back(disc_input(replay.sample(rng), norm));
    const DiscLoss dl = discriminator_loss(head, rb, pb);
    nn::adam_step(head.net.values, dl.grad, opt, opt_cfg);
    return {dl.loss, dl.mean_d_ref, dl.mean_d_pol, dl.gp};
}

// Rolls the stage-1 policy (mean actions, no exploration noise) across randomized
// locomotion environments and stores consecutive projected pairs. Termination pairs
// (s_{T-1}, s_T) are kept; no pair ever spans a reset.
inline RefDataset collect_reference(const nn::Checkpoint& ckpt, const Config& cfg, ProjectionMode mode,
                                    int transitions, std::uint64_t seed,
                                    sim::Backend backend = sim::Backend::kA) {
    if (transitions < 1) throw ContractError("collect_reference: need at least one transition");
    RefDataset ds;
    ds.proj_dim = projection_dim(mode);
    ds.generation_seed = seed;
    ds.source_policy_id = policy_fingerprint(ckpt);
    ds.transitions.reserve(static_cast<size_t>(transitions));

    const int num_envs = std::max(1, cfg.ppo.num_envs);
    std::vector<sim::EnvRunner> runners;
    runners.reserve(static_cast<size_t>(num_envs));
    for (int i = 0; i < num_envs; ++i)
        runners.emplace_back(cfg, sim::Stage::kLocomotion, backend, seed, i);
    const rl::PolicyHead head{ckpt.policy, ckpt.log_std};

    while (static_cast<int>(ds.transitions.size()) < transitions) {
        for (sim::EnvRunner& r : runners) {
            if (static_cast<int>(ds.transitions.size()) >= transitions) break;
            if (r.state().terminated) r.reset();
            const Vec phi_before = project(r.state(), mode, cfg.env.geometry);
            const Vec obs = ckpt.obs_norm.normalize(r.observe_now());
            r.step(sim::Action::from_vec(rl::mean_action(head, obs)));
            ds.transitions.push_back({phi_before, project(r.state(), mode, cfg.env.geometry)});
        }
    }
    return ds;
}

}  // namespace cartloco::amp
