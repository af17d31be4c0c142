#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cartloco/errors.hpp"
#include "cartloco/math.hpp"
#include "cartloco/rng.hpp"

namespace cartloco::nn {

enum class Activation { kTanh, kElu, kIdentity };

inline std::string activation_name(Activation a) {
    switch (a) {
        case Activation::kTanh: return "tanh";
        case Activation::kElu: return "elu";
        case Activation::kIdentity: return "identity";
    }
    return "identity";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "tanh") return Activation::kTanh;
    if (s == "elu") return Activation::kElu;
    if (s == "identity") return Activation::kIdentity;
    throw ConfigError("unknown activation: " + s);
}

// Dense feedforward network shape: layer_sizes = [input, hidden..., output].
struct NetSpec {
    std::vector<int> layer_sizes;
    Activation hidden_activation = Activation::kElu;
    Activation output_activation = Activation::kIdentity;

    void validate() const {
        if (layer_sizes.size() < 2) throw ConfigError("NetSpec needs at least input and output sizes");
        for (int s : layer_sizes)
            if (s < 1) throw ConfigError("NetSpec layer sizes must be >= 1");
    }

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }

    // Flat parameter layout, part of the public contract: for each layer l, the weight
    // matrix W_l (out x in, row-major) followed by the bias b_l (out). Layers in order.
    std::size_t param_count() const {
        std::size_t n = 0;
        for (int l = 0; l < num_layers(); ++l) {
            const std::size_t in = static_cast<std::size_t>(layer_sizes[l]);
            const std::size_t out = static_cast<std::size_t>(layer_sizes[l + 1]);
            n += in * out + out;
        }
        return n;
    }

    std::size_t weight_offset(int layer) const {
        std::size_t off = 0;
        for (int l = 0; l < layer; ++l) {
            const std::size_t in = static_cast<std::size_t>(layer_sizes[l]);
            const std::size_t out = static_cast<std::size_t>(layer_sizes[l + 1]);
            off += in * out + out;
        }
        return off;
    }
    std::size_t bias_offset(int layer) const {
        return weight_offset(layer) +
               static_cast<std::size_t>(layer_sizes[layer]) * static_cast<std::size_t>(layer_sizes[layer + 1]);
    }

    bool operator==(const NetSpec& o) const {
        return layer_sizes == o.layer_sizes && hidden_activation == o.hidden_activation &&
               output_activation == o.output_activation;
    }
};

struct NetParams {
    NetSpec spec;
    Vec values;
};

inline double act_eval(Activation a, double z) {
    switch (a) {
        case Activation::kTanh: return std::tanh(z);
        case Activation::kElu: return z > 0.0 ? z : std::expm1(z);
        case Activation::kIdentity: return z;
    }
    return z;
}

// First derivative, expressed from the pre-activation z.
inline double act_deriv(Activation a, double z) {
    switch (a) {
        case Activation::kTanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::kElu: return z > 0.0 ? 1.0 : std::exp(z);
        case Activation::kIdentity: return 1.0;
    }
    return 1.0;
}

inline double act_second_deriv(Activation a, double z) {
    switch (a) {
        case Activation::kTanh: {
            const double t = std::tanh(z);
            return -2.0 * t * (1.0 - t * t);
        }
        case Activation::kElu: return z > 0.0 ? 0.0 : std::exp(z);
        case Activation::kIdentity: return 0.0;
    }
    return 0.0;
}

// Scaled-uniform initialization: W ~ U(-s, s) with s = sqrt(6 / (fan_in + fan_out)),
// drawn layer by layer from a single stream keyed only by `seed`; biases zero.
inline NetParams net_init(const NetSpec& spec, std::uint64_t seed) {
    spec.validate();
    NetParams p;
    p.spec = spec;
    p.values.assign(spec.param_count(), 0.0);
    Rng rng = derive_rng(seed, stream::kInit);
    for (int l = 0; l < spec.num_layers(); ++l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        const double s = std::sqrt(6.0 / static_cast<double>(in + out));
        double* w = p.values.data() + spec.weight_offset(l);
        for (int i = 0; i < in * out; ++i) w[i] = rng.uniform(-s, s);
        // biases stay zero
    }
    return p;
}

// Same network over a wider input: first-layer weight rows gain zero columns at the
// tail, every other parameter is copied. A net extended this way computes identical
// outputs whenever the added observation entries are zero — the warm-start contract
// for growing the observation layout.
inline NetParams net_extend_input(const NetParams& p, int new_input) {
    const int old_input = p.spec.input_size();
    if (new_input < old_input) throw ContractError("net_extend_input: cannot shrink the input");
    NetParams out;
    out.spec = p.spec;
    out.spec.layer_sizes[0] = new_input;
    out.values.assign(out.spec.param_count(), 0.0);
    const int first_out = p.spec.layer_sizes[1];
    for (int r = 0; r < first_out; ++r) {
        const double* src = p.values.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(old_input);
        double* dst = out.values.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(new_input);
        for (int c = 0; c < old_input; ++c) dst[c] = src[c];
    }
    // first-layer biases and every later layer sit at shifted offsets but identical bytes
    const std::size_t rest = p.values.size() - p.spec.bias_offset(0);
    const double* src = p.values.data() + p.spec.bias_offset(0);
    double* dst = out.values.data() + out.spec.bias_offset(0);
    for (std::size_t i = 0; i < rest; ++i) dst[i] = src[i];
    return out;
}

namespace detail {
struct ForwardTrace {
    // pre[l] holds z_l for layer l (size layer_sizes[l+1]); post[l] holds the activation.
    std::vector<Vec> pre;
    std::vector<Vec> post;
};

inline Activation layer_activation(const NetSpec& spec, int layer) {
    return layer + 1 == spec.num_layers() ? spec.output_activation : spec.hidden_activation;
}

inline void forward_trace(const NetParams& p, const Vec& input, ForwardTrace& tr) {
    const NetSpec& spec = p.spec;
    const int L = spec.num_layers();
    tr.pre.resize(static_cast<size_t>(L));
    tr.post.resize(static_cast<size_t>(L));
    const Vec* h = &input;
    for (int l = 0; l < L; ++l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        const double* w = p.values.data() + spec.weight_offset(l);
        const double* b = p.values.data() + spec.bias_offset(l);
        Vec& z = tr.pre[static_cast<size_t>(l)];
        z.assign(static_cast<size_t>(out), 0.0);
        for (int r = 0; r < out; ++r) {
            double acc = b[r];
            const double* wr = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(in);
            for (int c = 0; c < in; ++c) acc += wr[c] * (*h)[static_cast<size_t>(c)];
            z[static_cast<size_t>(r)] = acc;
        }
        const Activation a = layer_activation(spec, l);
        Vec& y = tr.post[static_cast<size_t>(l)];
        y.resize(static_cast<size_t>(out));
        for (int r = 0; r < out; ++r) y[static_cast<size_t>(r)] = act_eval(a, z[static_cast<size_t>(r)]);
        h = &y;
    }
}
}  // namespace detail

inline Vec net_forward(const NetParams& p, const Vec& input) {
    if (static_cast<int>(input.size()) != p.spec.input_size())
        throw ContractError("net_forward: input size " + std::to_string(input.size()) + " != spec input " +
                            std::to_string(p.spec.input_size()));
    detail::ForwardTrace tr;
    detail::forward_trace(p, input, tr);
    return tr.post.back();
}

struct BackwardResult {
    Vec param_grad;  // d<output, output_grad>/d values, same flat layout as NetParams.values
    Vec input_grad;  // d<output, output_grad>/d input
};

// Exact reverse-mode gradients of the scalar <output, output_grad>.
inline BackwardResult net_backward(const NetParams& p, const Vec& input, const Vec& output_grad) {
    const NetSpec& spec = p.spec;
    if (static_cast<int>(input.size()) != spec.input_size())
        throw ContractError("net_backward: input size mismatch");
    if (static_cast<int>(output_grad.size()) != spec.output_size())
        throw ContractError("net_backward: output_grad size mismatch");

    detail::ForwardTrace tr;
    detail::forward_trace(p, input, tr);

    const int L = spec.num_layers();
    BackwardResult res;
    res.param_grad.assign(p.values.size(), 0.0);

    // delta = dS/dz_l, swept from the last layer down.
    Vec delta(output_grad.size());
    {
        const Activation a = detail::layer_activation(spec, L - 1);
        const Vec& z = tr.pre[static_cast<size_t>(L - 1)];
        for (size_t i = 0; i < delta.size(); ++i) delta[i] = output_grad[i] * act_deriv(a, z[i]);
    }
    for (int l = L - 1; l >= 0; --l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        const Vec& h_prev = (l == 0) ? input : tr.post[static_cast<size_t>(l - 1)];
        double* gw = res.param_grad.data() + spec.weight_offset(l);
        double* gb = res.param_grad.data() + spec.bias_offset(l);
        for (int r = 0; r < out; ++r) {
            const double d = delta[static_cast<size_t>(r)];
            double* gwr = gw + static_cast<std::size_t>(r) * static_cast<std::size_t>(in);
            for (int c = 0; c < in; ++c) gwr[c] += d * h_prev[static_cast<size_t>(c)];
            gb[r] += d;
        }
        // propagate to previous layer
        const double* w = p.values.data() + spec.weight_offset(l);
        Vec prev(static_cast<size_t>(in), 0.0);
        for (int r = 0; r < out; ++r) {
            const double d = delta[static_cast<size_t>(r)];
            const double* wr = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(in);
            for (int c = 0; c < in; ++c) prev[static_cast<size_t>(c)] += wr[c] * d;
        }
        if (l > 0) {
            const Activation a = detail::layer_activation(spec, l - 1);
            const Vec& z = tr.pre[static_cast<size_t>(l - 1)];
            delta.resize(static_cast<size_t>(in));
            for (int c = 0; c < in; ++c) delta[static_cast<size_t>(c)] = prev[static_cast<size_t>(c)] * act_deriv(a, z[static_cast<size_t>(c)]);
        } else {
            res.input_grad = prev;
        }
    }
    return res;
}

struct BackwardJvpResult {
    Vec param_grad_dot;  // tangent of BackwardResult.param_grad
    Vec input_grad_dot;  // tangent of BackwardResult.input_grad
};

// Forward-mode tangent pushed through both the forward and the backward sweep.
// Seeds: dir_params perturbs the flat parameter vector, dir_input perturbs the input
// (either may be empty, meaning zero). output_grad is held constant. Yields exact
//   param_grad_dot = H_pp * dir_params + H_px * dir_input
//   input_grad_dot = H_xp * dir_params + H_xx * dir_input
// where H blocks are second derivatives of the scalar <output, output_grad>. The
// dir_input seeding is what differentiates a squared input-gradient norm w.r.t. the
// parameters (seed with 2 * input_grad and read param_grad_dot).
inline BackwardJvpResult net_backward_jvp(const NetParams& p, const Vec& input, const Vec& output_grad,
                                          const Vec& dir_params, const Vec& dir_input) {
    const NetSpec& spec = p.spec;
    if (!dir_params.empty() && dir_params.size() != p.values.size())
        throw ContractError("net_backward_jvp: dir_params size mismatch");
    if (!dir_input.empty() && static_cast<int>(dir_input.size()) != spec.input_size())
        throw ContractError("net_backward_jvp: dir_input size mismatch");
    if (static_cast<int>(input.size()) != spec.input_size())
        throw ContractError("net_backward_jvp: input size mismatch");
    if (static_cast<int>(output_grad.size()) != spec.output_size())
        throw ContractError("net_backward_jvp: output_grad size mismatch");
    const bool has_dp = !dir_params.empty();
    const bool has_di = !dir_input.empty();

    detail::ForwardTrace tr;
    detail::forward_trace(p, input, tr);
    const int L = spec.num_layers();

    // Tangent forward sweep: zdot_l, hdot_l.
    std::vector<Vec> zdot(static_cast<size_t>(L)), hdot(static_cast<size_t>(L));
    {
        const Vec* h = &input;
        const Vec* hd = has_di ? &dir_input : nullptr;
        for (int l = 0; l < L; ++l) {
            const int in = spec.layer_sizes[l];
            const int out = spec.layer_sizes[l + 1];
            const double* w = p.values.data() + spec.weight_offset(l);
            const double* dw = has_dp ? dir_params.data() + spec.weight_offset(l) : nullptr;
            const double* db = has_dp ? dir_params.data() + spec.bias_offset(l) : nullptr;
            Vec& zd = zdot[static_cast<size_t>(l)];
            zd.assign(static_cast<size_t>(out), 0.0);
            for (int r = 0; r < out; ++r) {
                double acc = db ? db[r] : 0.0;
                const double* wr = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(in);
                const double* dwr = dw ? dw + static_cast<std::size_t>(r) * static_cast<std::size_t>(in) : nullptr;
                for (int c = 0; c < in; ++c) {
                    if (dwr) acc += dwr[c] * (*h)[static_cast<size_t>(c)];
                    if (hd) acc += wr[c] * (*hd)[static_cast<size_t>(c)];
                }
                zd[static_cast<size_t>(r)] = acc;
            }
            const Activation a = detail::layer_activation(spec, l);
            const Vec& z = tr.pre[static_cast<size_t>(l)];
            Vec& hdl = hdot[static_cast<size_t>(l)];
            hdl.resize(static_cast<size_t>(out));
            for (int r = 0; r < out; ++r)
                hdl[static_cast<size_t>(r)] = act_deriv(a, z[static_cast<size_t>(r)]) * zd[static_cast<size_t>(r)];
            h = &tr.post[static_cast<size_t>(l)];
            hd = &hdl;
        }
    }

    // Backward sweep carrying (delta, delta_dot) pairs.
    BackwardJvpResult res;
    res.param_grad_dot.assign(p.values.size(), 0.0);
    Vec delta(output_grad.size()), delta_dot(output_grad.size());
    {
        const Activation a = detail::layer_activation(spec, L - 1);
        const Vec& z = tr.pre[static_cast<size_t>(L - 1)];
        const Vec& zd = zdot[static_cast<size_t>(L - 1)];
        for (size_t i = 0; i < delta.size(); ++i) {
            delta[i] = output_grad[i] * act_deriv(a, z[i]);
            delta_dot[i] = output_grad[i] * act_second_deriv(a, z[i]) * zd[i];
        }
    }
    for (int l = L - 1; l >= 0; --l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        const Vec& h_prev = (l == 0) ? input : tr.post[static_cast<size_t>(l - 1)];
        const Vec* hd_prev = (l == 0) ? (has_di ? &dir_input : nullptr) : &hdot[static_cast<size_t>(l - 1)];
        double* gw = res.param_grad_dot.data() + spec.weight_offset(l);
        double* gb = res.param_grad_dot.data() + spec.bias_offset(l);
        for (int r = 0; r < out; ++r) {
            const double d = delta[static_cast<size_t>(r)];
            const double dd = delta_dot[static_cast<size_t>(r)];
            double* gwr = gw + static_cast<std::size_t>(r) * static_cast<std::size_t>(in);
            for (int c = 0; c < in; ++c) {
                double t = dd * h_prev[static_cast<size_t>(c)];
                if (hd_prev) t += d * (*hd_prev)[static_cast<size_t>(c)];
                gwr[c] += t;
            }
            gb[r] += dd;
        }
        const double* w = p.values.data() + spec.weight_offset(l);
        const double* dw = has_dp ? dir_params.data() + spec.weight_offset(l) : nullptr;
        Vec prev(static_cast<size_t>(in), 0.0), prev_dot(static_cast<size_t>(in), 0.0);
        for (int r = 0; r < out; ++r) {
            const double d = delta[static_cast<size_t>(r)];
            const double dd = delta_dot[static_cast<size_t>(r)];
            const double* wr = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(in);
            const double* dwr = dw ? dw + static_cast<std::size_t>(r) * static_cast<std::size_t>(in) : nullptr;
            for (int c = 0; c < in; ++c) {
                prev[static_cast<size_t>(c)] += wr[c] * d;
                double t = wr[c] * dd;
                if (dwr) t += dwr[c] * d;
                prev_dot[static_cast<size_t>(c)] += t;
            }
        }
        if (l > 0) {
            const Activation a = detail::layer_activation(spec, l - 1);
            const Vec& z = tr.pre[static_cast<size_t>(l - 1)];
            const Vec& zd = zdot[static_cast<size_t>(l - 1)];
            delta.resize(static_cast<size_t>(in));
            delta_dot.resize(static_cast<size_t>(in));
            for (int c = 0; c < in; ++c) {
                const double sp = act_deriv(a, z[static_cast<size_t>(c)]);
                const double spp = act_second_deriv(a, z[static_cast<size_t>(c)]);
                delta[static_cast<size_t>(c)] = prev[static_cast<size_t>(c)] * sp;
                delta_dot[static_cast<size_t>(c)] =
                    prev_dot[static_cast<size_t>(c)] * sp + prev[static_cast<size_t>(c)] * spp * zd[static_cast<size_t>(c)];
            }
        } else {
            res.input_grad_dot = prev_dot;
        }
    }
    return res;
}

// Pure parameter Hessian-vector product of the scalar <output, output_grad>.
inline Vec net_hvp(const NetParams& p, const Vec& input, const Vec& output_grad, const Vec& dir) {
    return net_backward_jvp(p, input, output_grad, dir, Vec{}).param_grad_dot;
}

}  // namespace cartloco::nn
