// SPDX-License-Identifier: Apache-2.0

#include "csimap/neural.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <sstream>

#include "csimap/errors.hpp"
#include "csimap/io.hpp"

namespace csimap {

namespace {

void put_u8(std::string& b, std::uint8_t v) { b.push_back(static_cast<char>(v)); }

void put_u32(std::string& b, std::uint32_t v) {
    char tmp[4];
    std::memcpy(tmp, &v, 4);
    b.append(tmp, 4);
}

void put_u64(std::string& b, std::uint64_t v) {
    char tmp[8];
    std::memcpy(tmp, &v, 8);
    b.append(tmp, 8);
}

void put_f64(std::string& b, double v) {
    char tmp[8];
    std::memcpy(tmp, &v, 8);
    b.append(tmp, 8);
}

struct ByteReader {
    const std::string& buf;
    std::size_t off = 0;

    void need(std::size_t n) const {
        if (off + n > buf.size())
            throw DataError("checkpoint truncated");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[off++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v;
        std::memcpy(&v, buf.data() + off, 4);
        off += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v;
        std::memcpy(&v, buf.data() + off, 8);
        off += 8;
        return v;
    }
    double f64() {
        need(8);
        double v;
        std::memcpy(&v, buf.data() + off, 8);
        off += 8;
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(off, n);
        off += n;
        return s;
    }
};

std::string spec_bytes(const MlpSpec& spec) {
    std::string b;
    put_u64(b, spec.widths.size());
    for (std::size_t w : spec.widths)
        put_u64(b, w);
    for (Activation a : spec.activations)
        put_u8(b, static_cast<std::uint8_t>(a));
    put_u8(b, spec.dropout ? 1 : 0);
    if (spec.dropout) {
        put_u64(b, spec.dropout->after_layer);
        put_f64(b, spec.dropout->rate);
    }
    return b;
}

double activate(Activation a, double z) {
    switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::linear: return z;
    }
    throw ConfigError("unknown activation");
}

double activate_derivative(Activation a, double z) {
    switch (a) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    case Activation::linear: return 1.0;
    }
    throw ConfigError("unknown activation");
}

} // namespace

void MlpSpec::validate() const {
    if (widths.size() < 2)
        throw ConfigError("mlp spec needs at least input and output widths");
    for (std::size_t w : widths)
        if (w == 0)
            throw ConfigError("mlp spec widths must be positive");
    if (activations.size() != num_layers())
        throw ConfigError("mlp spec needs one activation per dense layer");
    if (activations.back() != Activation::linear)
        throw ConfigError("mlp output layer must be linear");
    if (dropout) {
        if (!(dropout->rate >= 0.0 && dropout->rate < 1.0))
            throw ConfigError("dropout rate must be in [0, 1)");
        if (dropout->after_layer < 1 || dropout->after_layer >= num_layers())
            throw ConfigError("dropout must sit after a hidden dense layer");
    }
}

std::uint64_t MlpSpec::hash() const {
    const std::string b = spec_bytes(*this);
    return fnv1a(b.data(), b.size());
}

MlpSpec make_mlp_spec(std::vector<std::size_t> widths, Activation hidden,
                      std::optional<DropoutSpec> dropout) {
    MlpSpec spec;
    spec.widths = std::move(widths);
    if (spec.widths.size() >= 2) {
        spec.activations.assign(spec.widths.size() - 2, hidden);
        spec.activations.push_back(Activation::linear);
    }
    spec.dropout = dropout;
    spec.validate();
    return spec;
}

MlpSpec default_dnn_spec(std::size_t m, std::optional<double> dropout_rate) {
    std::optional<DropoutSpec> drop;
    if (dropout_rate)
        drop = DropoutSpec{2, *dropout_rate};
    return make_mlp_spec({16 * m, 16 * m, 8 * m, 4 * m, 2 * m}, Activation::relu, drop);
}

MlpSpec default_encoder_spec(std::size_t m, std::size_t out_width) {
    return make_mlp_spec({16 * m, 8 * m, 2 * m, out_width});
}

MlpSpec default_decoder_spec(std::size_t m, std::size_t latent_dim) {
    return make_mlp_spec({latent_dim, 2 * m, 4 * m, 2 * m});
}

std::vector<double> flatten_input(const CMatrix& h_u) {
    std::vector<double> x(h_u.rows * h_u.cols * 2);
    std::size_t k = 0;
    for (std::size_t ant = 0; ant < h_u.rows; ++ant)
        for (std::size_t sub = 0; sub < h_u.cols; ++sub) {
            const cdouble v = h_u(ant, sub);
            x[k++] = v.real();
            x[k++] = v.imag();
        }
    return x;
}

CMatrix unflatten_input(std::span<const double> x, std::size_t m, std::size_t num_subcarriers) {
    if (x.size() != m * num_subcarriers * 2)
        throw DataError("unflatten_input: length does not match m x subcarriers x 2");
    CMatrix h(m, num_subcarriers);
    std::size_t k = 0;
    for (std::size_t ant = 0; ant < m; ++ant)
        for (std::size_t sub = 0; sub < num_subcarriers; ++sub) {
            h(ant, sub) = cdouble(x[k], x[k + 1]);
            k += 2;
        }
    return h;
}

CVector complexify(std::span<const double> x) {
    if (x.size() % 2 != 0)
        throw DataError("complexify: odd length");
    CVector v(x.size() / 2);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = cdouble(x[2 * i], x[2 * i + 1]);
    return v;
}

std::vector<double> realify(const CVector& v) {
    std::vector<double> x(v.size() * 2);
    for (std::size_t i = 0; i < v.size(); ++i) {
        x[2 * i] = v[i].real();
        x[2 * i + 1] = v[i].imag();
    }
    return x;
}

Mlp::Mlp(MlpSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    Rng rng(seed);
    const std::size_t layers = spec_.num_layers();
    weights.resize(layers);
    biases.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = spec_.widths[l];
        const std::size_t out = spec_.widths[l + 1];
        const double limit = std::sqrt(3.0 / static_cast<double>(in));
        weights[l].resize(out * in);
        for (double& w : weights[l])
            w = (2.0 * rng.uniform() - 1.0) * limit;
        biases[l].assign(out, 0.0);
    }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
    return activations_after(spec_.num_layers(), x);
}

std::vector<double> Mlp::activations_after(std::size_t layer, std::span<const double> x) const {
    if (x.size() != spec_.input_width())
        throw DataError("mlp forward: input width mismatch");
    if (layer < 1 || layer > spec_.num_layers())
        throw ConfigError("activations_after: layer out of range");
    std::vector<double> a(x.begin(), x.end());
    std::vector<double> z;
    for (std::size_t l = 0; l < layer; ++l) {
        const std::size_t in = spec_.widths[l];
        const std::size_t out = spec_.widths[l + 1];
        z.assign(biases[l].begin(), biases[l].end());
        const double* w = weights[l].data();
        for (std::size_t i = 0; i < out; ++i) {
            const double* row = w + i * in;
            double acc = z[i];
            for (std::size_t j = 0; j < in; ++j)
                acc += row[j] * a[j];
            z[i] = acc;
        }
        const Activation act = spec_.activations[l];
        if (act != Activation::linear)
            for (double& v : z)
                v = activate(act, v);
        a.swap(z);
    }
    return a;
}

std::vector<double> Mlp::forward_train(std::span<const double> x, Cache& cache,
                                       Rng& drop_rng) const {
    if (x.size() != spec_.input_width())
        throw DataError("mlp forward: input width mismatch");
    const std::size_t layers = spec_.num_layers();
    cache.act.assign(layers + 1, {});
    cache.pre.assign(layers, {});
    cache.drop_scale.clear();
    cache.act[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = spec_.widths[l];
        const std::size_t out = spec_.widths[l + 1];
        std::vector<double>& z = cache.pre[l];
        z.assign(biases[l].begin(), biases[l].end());
        const double* w = weights[l].data();
        const double* a = cache.act[l].data();
        for (std::size_t i = 0; i < out; ++i) {
            const double* row = w + i * in;
            double acc = z[i];
            for (std::size_t j = 0; j < in; ++j)
                acc += row[j] * a[j];
            z[i] = acc;
        }
        std::vector<double>& y = cache.act[l + 1];
        y.resize(out);
        const Activation act = spec_.activations[l];
        for (std::size_t i = 0; i < out; ++i)
            y[i] = activate(act, z[i]);
        if (spec_.dropout && spec_.dropout->after_layer == l + 1 && spec_.dropout->rate > 0.0) {
            const double rate = spec_.dropout->rate;
            const double keep_scale = 1.0 / (1.0 - rate);
            cache.drop_scale.resize(out);
            for (std::size_t i = 0; i < out; ++i) {
                const double s = drop_rng.uniform() >= rate ? keep_scale : 0.0;
                cache.drop_scale[i] = s;
                y[i] *= s;
            }
        }
    }
    return cache.act[layers];
}

void Mlp::Grads::init(const MlpSpec& spec) {
    const std::size_t layers = spec.num_layers();
    w.resize(layers);
    b.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        w[l].assign(spec.widths[l + 1] * spec.widths[l], 0.0);
        b[l].assign(spec.widths[l + 1], 0.0);
    }
}

void Mlp::Grads::zero() {
    for (auto& v : w)
        std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : b)
        std::fill(v.begin(), v.end(), 0.0);
}

void Mlp::backward(const Cache& cache, std::span<const double> grad_out, Grads& g) const {
    const std::size_t layers = spec_.num_layers();
    if (grad_out.size() != spec_.output_width())
        throw DataError("mlp backward: gradient width mismatch");
    std::vector<double> upstream(grad_out.begin(), grad_out.end());
    std::vector<double> delta, next;
    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t in = spec_.widths[l];
        const std::size_t out = spec_.widths[l + 1];
        if (spec_.dropout && spec_.dropout->after_layer == l + 1 && !cache.drop_scale.empty())
            for (std::size_t i = 0; i < out; ++i)
                upstream[i] *= cache.drop_scale[i];
        delta.resize(out);
        const Activation act = spec_.activations[l];
        for (std::size_t i = 0; i < out; ++i)
            delta[i] = upstream[i] * activate_derivative(act, cache.pre[l][i]);
        const double* a = cache.act[l].data();
        double* gw = g.w[l].data();
        for (std::size_t i = 0; i < out; ++i) {
            const double d = delta[i];
            double* row = gw + i * in;
            for (std::size_t j = 0; j < in; ++j)
                row[j] += d * a[j];
            g.b[l][i] += d;
        }
        if (l > 0) {
            next.assign(in, 0.0);
            const double* w = weights[l].data();
            for (std::size_t i = 0; i < out; ++i) {
                const double d = delta[i];
                const double* row = w + i * in;
                for (std::size_t j = 0; j < in; ++j)
                    next[j] += d * row[j];
            }
            upstream.swap(next);
        }
    }
}

CosineLoss cosine_loss_and_grad(std::span<const double> raw_output, const CVector& h_d) {
    if (raw_output.size() != 2 * h_d.size())
        throw DataError("cosine loss: output width does not match 2x target length");
    const std::size_t m = h_d.size();
    double n_w = 0.0, n_h = 0.0;
    cdouble s(0.0, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const cdouble w(raw_output[2 * i], raw_output[2 * i + 1]);
        const cdouble h = h_d[i];
        n_w += std::norm(w);
        n_h += std::norm(h);
        s += std::conj(h) * w;
    }
    if (!(n_h > 0.0))
        throw NumericalError("cosine loss: zero-norm target");
    if (!(n_w > 0.0))
        throw NumericalError("cosine loss: zero-norm network output");
    const double p = std::norm(s) / (n_h * n_w);
    CosineLoss out;
    out.loss = 1.0 - p;
    out.grad.resize(2 * m);
    const double c = 2.0 / (n_h * n_w);
    const double radial = std::norm(s) / n_w;
    for (std::size_t i = 0; i < m; ++i) {
        const cdouble w(raw_output[2 * i], raw_output[2 * i + 1]);
        const cdouble gp = c * (s * h_d[i] - radial * w); // paired gradient of P
        out.grad[2 * i] = -gp.real();
        out.grad[2 * i + 1] = -gp.imag();
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0))
        throw ConfigError("learning_rate must be positive");
    if (batch_size < 1)
        throw ConfigError("batch_size must be positive");
    if (epochs < 1)
        throw ConfigError("epochs must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("adam betas must be in [0, 1)");
    if (!(epsilon > 0.0))
        throw ConfigError("epsilon must be positive");
}

namespace {

struct AdamState {
    std::vector<std::vector<double>> mw, vw, mb, vb;
    std::size_t t = 0;

    explicit AdamState(const Mlp& model) {
        const std::size_t layers = model.weights.size();
        mw.resize(layers);
        vw.resize(layers);
        mb.resize(layers);
        vb.resize(layers);
        for (std::size_t l = 0; l < layers; ++l) {
            mw[l].assign(model.weights[l].size(), 0.0);
            vw[l].assign(model.weights[l].size(), 0.0);
            mb[l].assign(model.biases[l].size(), 0.0);
            vb[l].assign(model.biases[l].size(), 0.0);
        }
    }
};

void adam_update(std::vector<double>& p, std::span<const double> g, std::vector<double>& m,
                 std::vector<double>& v, const TrainConfig& cfg, double bc1, double bc2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        p[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
    }
}

void sgd_update(std::vector<double>& p, std::span<const double> g, const TrainConfig& cfg) {
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] -= cfg.learning_rate * g[i];
}

} // namespace

TrainResult train_mlp(const MlpSpec& spec, std::span<const std::vector<double>> inputs,
                      const LossFn& loss, const TrainConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (inputs.empty())
        throw DataError("train_mlp: empty training set");
    for (const auto& x : inputs)
        if (x.size() != spec.input_width())
            throw DataError("train_mlp: input width mismatch");

    double sq_acc = 0.0;
    std::size_t entry_count = 0;
    for (const auto& x : inputs) {
        for (double v : x)
            sq_acc += v * v;
        entry_count += x.size();
    }
    const double rms = std::sqrt(sq_acc / static_cast<double>(entry_count));
    TrainResult result;
    result.input_scale = rms > 0.0 && std::isfinite(rms) ? 1.0 / rms : 1.0;

    std::vector<std::vector<double>> xs(inputs.begin(), inputs.end());
    for (auto& x : xs)
        for (double& v : x)
            v *= result.input_scale;

    result.model = Mlp(spec, mix_seed(cfg.seed, 0));
    Mlp& model = result.model;
    const std::uint64_t shuffle_base = mix_seed(cfg.seed, 1);
    Rng drop_rng(mix_seed(cfg.seed, 2));
    std::optional<AdamState> adam;
    if (cfg.optimizer == Optimizer::adam)
        adam.emplace(model);

    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;

    Mlp::Cache cache;
    Mlp::Grads grads;
    grads.init(spec);
    std::vector<double> grad_buf(spec.output_width());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(shuffle_base, epoch));
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double loss_acc = 0.0;
        std::size_t counted = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, n);
            grads.zero();
            double batch_loss = 0.0;
            bool skip = false;
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t idx = order[k];
                const std::vector<double> out = model.forward_train(xs[idx], cache, drop_rng);
                double l;
                try {
                    l = loss(out, idx, grad_buf);
                } catch (const NumericalError&) {
                    skip = true;
                    break;
                }
                model.backward(cache, grad_buf, grads);
                batch_loss += l;
            }
            if (skip) {
                ++result.skipped_batches;
                continue;
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (auto& v : grads.w)
                for (double& g : v)
                    g *= inv;
            for (auto& v : grads.b)
                for (double& g : v)
                    g *= inv;
            if (adam) {
                ++adam->t;
                const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam->t));
                const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam->t));
                for (std::size_t l = 0; l < model.weights.size(); ++l) {
                    adam_update(model.weights[l], grads.w[l], adam->mw[l], adam->vw[l], cfg, bc1,
                                bc2);
                    adam_update(model.biases[l], grads.b[l], adam->mb[l], adam->vb[l], cfg, bc1,
                                bc2);
                }
            } else {
                for (std::size_t l = 0; l < model.weights.size(); ++l) {
                    sgd_update(model.weights[l], grads.w[l], cfg);
                    sgd_update(model.biases[l], grads.b[l], cfg);
                }
            }
            loss_acc += batch_loss;
            counted += stop - start;
        }
        const double epoch_mean =
            counted > 0 ? loss_acc / static_cast<double>(counted)
                        : std::numeric_limits<double>::quiet_NaN();
        result.epoch_loss.push_back(epoch_mean);
        if (!std::isfinite(epoch_mean)) {
            std::ostringstream msg;
            msg << "training diverged at epoch " << epoch << " (skipped batches so far "
                << result.skipped_batches << "); recent epoch losses:";
            const std::size_t from = result.epoch_loss.size() > 8 ? result.epoch_loss.size() - 8
                                                                  : 0;
            for (std::size_t e = from; e < result.epoch_loss.size(); ++e)
                msg << ' ' << result.epoch_loss[e];
            throw NumericalError(msg.str());
        }
    }
    return result;
}

MlpEstimator::MlpEstimator(Mlp model, double input_scale, std::string id,
                           std::optional<std::uint64_t> provenance)
    : model_(std::move(model)), input_scale_(input_scale), id_(std::move(id)),
      provenance_(provenance) {}

CVector MlpEstimator::predict(const CMatrix& h_u) const {
    std::vector<double> x = flatten_input(h_u);
    for (double& v : x)
        v *= input_scale_;
    CVector w = complexify(model_.forward(x));
    double n2 = 0.0;
    for (const auto& v : w)
        n2 += std::norm(v);
    if (!(n2 > 0.0) || !std::isfinite(n2))
        throw NumericalError("estimator produced zero or non-finite precoder");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& v : w)
        v *= inv;
    return w;
}

TrainedDnn train_dnn(const MlpSpec& spec, std::span<const SamplePair> pairs,
                     const TrainConfig& cfg, std::string id) {
    spec.validate();
    if (pairs.empty())
        throw DataError("train_dnn: empty training set");
    const std::size_t in_width = pairs.front().h_u.rows * pairs.front().h_u.cols * 2;
    const std::size_t out_width = pairs.front().h_d.size() * 2;
    if (spec.input_width() != in_width)
        throw ConfigError("spec input width does not match the flattened uplink width");
    if (spec.output_width() != out_width)
        throw ConfigError("spec output width does not match 2x the downlink length");

    std::vector<std::vector<double>> inputs;
    inputs.reserve(pairs.size());
    for (const auto& p : pairs)
        inputs.push_back(flatten_input(p.h_u));

    const LossFn loss = [&pairs](std::span<const double> out, std::size_t idx,
                                 std::span<double> grad) {
        CosineLoss cl = cosine_loss_and_grad(out, pairs[idx].h_d);
        std::copy(cl.grad.begin(), cl.grad.end(), grad.begin());
        return cl.loss;
    };
    TrainResult tr = train_mlp(spec, inputs, loss, cfg);
    TrainedDnn out;
    out.epoch_loss = std::move(tr.epoch_loss);
    out.skipped_batches = tr.skipped_batches;
    out.estimator = std::make_unique<MlpEstimator>(std::move(tr.model), tr.input_scale,
                                                   std::move(id), position_fingerprint(pairs));
    return out;
}

double canonical_angle(double a) {
    double r = std::remainder(a, 2.0 * std::numbers::pi);
    if (r <= -std::numbers::pi)
        r = std::numbers::pi;
    return r;
}

AoaLabel aoa_from_position(const Vec3& position, const ArrayPose& pose) {
    const Vec3 d = position - pose.position;
    if (d.norm() < 1e-12)
        throw DataError("aoa_from_position: position coincides with the array");
    Vec3 bh{pose.broadside.x, pose.broadside.y, 0.0};
    const double bhn = bh.norm();
    if (bhn < 1e-12)
        throw DataError("aoa_from_position: broadside has no horizontal component");
    bh = bh * (1.0 / bhn);
    const Vec3 dh{d.x, d.y, 0.0};
    const double cross_z = bh.x * d.y - bh.y * d.x;
    const double dot = bh.x * d.x + bh.y * d.y;
    AoaLabel label;
    label.azimuth = canonical_angle(std::atan2(cross_z, dot));
    label.elevation = std::atan2(d.z, dh.norm());
    return label;
}

void EncoderDecoderSpec::validate() const {
    encoder.validate();
    decoder.validate();
    switch (mode) {
    case LatentMode::free_latent:
        if (latent_dim != 1 && latent_dim != 2)
            throw ConfigError("free latent dimension must be 1 or 2");
        if (encoder.output_width() != latent_dim)
            throw ConfigError("encoder output width must equal the latent dimension");
        if (decoder.input_width() != latent_dim)
            throw ConfigError("decoder input width must equal the latent dimension");
        break;
    case LatentMode::azimuth:
        if (latent_dim != 1)
            throw ConfigError("azimuth mode forces latent dimension 1");
        if (encoder.output_width() != 2)
            throw ConfigError("angle encoder nets regress (sin, cos): output width must be 2");
        if (decoder.input_width() != 1)
            throw ConfigError("azimuth decoder takes one angle");
        break;
    case LatentMode::azimuth_elevation:
        if (latent_dim != 2)
            throw ConfigError("azimuth_elevation mode forces latent dimension 2");
        if (encoder.output_width() != 2)
            throw ConfigError("angle encoder nets regress (sin, cos): output width must be 2");
        if (decoder.input_width() != 2)
            throw ConfigError("azimuth_elevation decoder takes two angles");
        break;
    }
}

EncoderDecoderSpec default_encdec_spec(LatentMode mode, std::size_t latent_dim, std::size_t m) {
    EncoderDecoderSpec spec;
    spec.mode = mode;
    switch (mode) {
    case LatentMode::free_latent:
        spec.latent_dim = latent_dim;
        spec.encoder = default_encoder_spec(m, latent_dim);
        break;
    case LatentMode::azimuth:
        spec.latent_dim = 1;
        spec.encoder = default_encoder_spec(m, 2);
        break;
    case LatentMode::azimuth_elevation:
        spec.latent_dim = 2;
        spec.encoder = default_encoder_spec(m, 2);
        break;
    }
    spec.decoder = default_decoder_spec(m, spec.latent_dim);
    spec.validate();
    return spec;
}

std::vector<double> AngleEncoder::encode(const CMatrix& h_u) const {
    std::vector<double> x = flatten_input(h_u);
    for (double& v : x)
        v *= input_scale;
    std::vector<double> angles;
    angles.reserve(nets.size());
    for (const Mlp& net : nets) {
        const std::vector<double> sc = net.forward(x);
        angles.push_back(canonical_angle(std::atan2(sc[0], sc[1])));
    }
    return angles;
}

CVector Decoder::decode(std::span<const double> angles) const {
    if (angles.size() != latent_dim)
        throw DataError("decoder: latent width mismatch");
    std::vector<double> x(angles.size());
    for (std::size_t i = 0; i < angles.size(); ++i)
        x[i] = canonical_angle(angles[i]) * input_scale;
    return complexify(model.forward(x));
}

AngleEncoder train_supervised_encoder(const MlpSpec& per_angle_spec,
                                      std::span<const SamplePair> pairs,
                                      std::span<const AoaLabel> labels, LatentMode mode,
                                      const TrainConfig& cfg,
                                      std::vector<std::vector<double>>* epoch_loss) {
    if (epoch_loss)
        epoch_loss->clear();
    if (mode == LatentMode::free_latent)
        throw ConfigError("supervised encoder training needs an angle latent mode");
    if (pairs.size() != labels.size())
        throw DataError("encoder training: one label per pair required");
    if (pairs.empty())
        throw DataError("encoder training: empty training set");
    if (per_angle_spec.output_width() != 2)
        throw ConfigError("angle encoder nets regress (sin, cos): output width must be 2");

    std::vector<std::vector<double>> inputs;
    inputs.reserve(pairs.size());
    for (const auto& p : pairs)
        inputs.push_back(flatten_input(p.h_u));

    const std::size_t num_angles = mode == LatentMode::azimuth ? 1 : 2;
    AngleEncoder encoder;
    encoder.mode = mode;
    for (std::size_t a = 0; a < num_angles; ++a) {
        std::vector<std::array<double, 2>> targets(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const double angle = a == 0 ? labels[i].azimuth : labels[i].elevation;
            targets[i] = {std::sin(angle), std::cos(angle)};
        }
        const LossFn loss = [&targets](std::span<const double> out, std::size_t idx,
                                       std::span<double> grad) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 2; ++k) {
                const double d = out[k] - targets[idx][k];
                grad[k] = d; // mean over the two outputs, factor 2 cancels
                acc += 0.5 * d * d;
            }
            return acc;
        };
        TrainConfig angle_cfg = cfg;
        angle_cfg.seed = mix_seed(cfg.seed, 10 + a);
        TrainResult tr = train_mlp(per_angle_spec, inputs, loss, angle_cfg);
        encoder.input_scale = tr.input_scale; // same inputs for both nets
        encoder.nets.push_back(std::move(tr.model));
        if (epoch_loss)
            epoch_loss->push_back(std::move(tr.epoch_loss));
    }
    return encoder;
}

Decoder train_supervised_decoder(const MlpSpec& decoder_spec, std::span<const AoaLabel> labels,
                                 std::span<const CVector> targets, LatentMode mode,
                                 const TrainConfig& cfg, std::vector<double>* epoch_loss) {
    if (mode == LatentMode::free_latent)
        throw ConfigError("supervised decoder training needs an angle latent mode");
    if (labels.size() != targets.size())
        throw DataError("decoder training: one target per label required");
    if (labels.empty())
        throw DataError("decoder training: empty training set");
    const std::size_t latent_dim = mode == LatentMode::azimuth ? 1 : 2;
    if (decoder_spec.input_width() != latent_dim)
        throw ConfigError("decoder input width does not match the latent mode");

    std::vector<std::vector<double>> inputs;
    inputs.reserve(labels.size());
    for (const auto& label : labels) {
        std::vector<double> x{canonical_angle(label.azimuth)};
        if (latent_dim == 2)
            x.push_back(canonical_angle(label.elevation));
        inputs.push_back(std::move(x));
    }
    const LossFn loss = [&targets](std::span<const double> out, std::size_t idx,
                                   std::span<double> grad) {
        CosineLoss cl = cosine_loss_and_grad(out, targets[idx]);
        std::copy(cl.grad.begin(), cl.grad.end(), grad.begin());
        return cl.loss;
    };
    TrainConfig dec_cfg = cfg;
    dec_cfg.seed = mix_seed(cfg.seed, 20);
    TrainResult tr = train_mlp(decoder_spec, inputs, loss, dec_cfg);
    if (epoch_loss)
        *epoch_loss = std::move(tr.epoch_loss);
    Decoder dec;
    dec.model = std::move(tr.model);
    dec.input_scale = tr.input_scale;
    dec.latent_dim = latent_dim;
    return dec;
}

ComposedEstimator::ComposedEstimator(AngleEncoder encoder, Decoder decoder, std::string id,
                                     std::optional<std::uint64_t> provenance)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)), id_(std::move(id)),
      provenance_(provenance) {
    if (encoder_.num_angles() != decoder_.latent_dim)
        throw ConfigError("encoder angle count does not match decoder latent width");
}

CVector ComposedEstimator::predict(const CMatrix& h_u) const {
    CVector w = decoder_.decode(encoder_.encode(h_u));
    double n2 = 0.0;
    for (const auto& v : w)
        n2 += std::norm(v);
    if (!(n2 > 0.0) || !std::isfinite(n2))
        throw NumericalError("estimator produced zero or non-finite precoder");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& v : w)
        v *= inv;
    return w;
}

std::unique_ptr<ComposedEstimator> compose(AngleEncoder encoder, Decoder decoder, std::string id,
                                           std::optional<std::uint64_t> provenance) {
    return std::make_unique<ComposedEstimator>(std::move(encoder), std::move(decoder),
                                               std::move(id), provenance);
}

TrainedDnn train_free_encdec(const EncoderDecoderSpec& spec, std::span<const SamplePair> pairs,
                             const TrainConfig& cfg, std::string id) {
    spec.validate();
    if (spec.mode != LatentMode::free_latent)
        throw ConfigError("train_free_encdec expects the free latent mode");
    if (spec.encoder.dropout || spec.decoder.dropout)
        throw ConfigError("dropout is not supported in the bottleneck net");
    MlpSpec joint;
    joint.widths = spec.encoder.widths;
    joint.widths.insert(joint.widths.end(), spec.decoder.widths.begin() + 1,
                        spec.decoder.widths.end());
    joint.activations = spec.encoder.activations;
    joint.activations.insert(joint.activations.end(), spec.decoder.activations.begin(),
                             spec.decoder.activations.end());
    return train_dnn(joint, pairs, cfg, std::move(id));
}

TrainedEncDec train_angle_encdec(const EncoderDecoderSpec& spec,
                                 std::span<const SamplePair> pairs, const ArrayPose& pose,
                                 const TrainConfig& cfg, std::string id, bool fine_tune) {
    spec.validate();
    if (spec.mode == LatentMode::free_latent)
        throw ConfigError("train_angle_encdec expects an angle latent mode");
    if (fine_tune)
        throw ConfigError(
            "fine_tune is reserved: composed estimators stay frozen after supervised training");
    if (pairs.empty())
        throw DataError("train_angle_encdec: empty training set");

    std::vector<AoaLabel> labels;
    labels.reserve(pairs.size());
    for (const auto& p : pairs)
        labels.push_back(aoa_from_position(p.position, pose));

    TrainedEncDec out;
    AngleEncoder encoder = train_supervised_encoder(spec.encoder, pairs, labels, spec.mode, cfg,
                                                    &out.encoder_epoch_loss);

    std::vector<CVector> targets;
    targets.reserve(pairs.size());
    for (const auto& p : pairs)
        targets.push_back(p.h_d);
    Decoder decoder = train_supervised_decoder(spec.decoder, labels, targets, spec.mode, cfg,
                                               &out.decoder_epoch_loss);

    out.estimator = compose(std::move(encoder), std::move(decoder), std::move(id),
                            position_fingerprint(pairs));
    return out;
}

std::vector<double> latent_values(const MlpEstimator& est, std::size_t boundary_layer,
                                  const CMatrix& h_u) {
    std::vector<double> x = flatten_input(h_u);
    for (double& v : x)
        v *= est.input_scale();
    return est.model().activations_after(boundary_layer, x);
}

double latent_azimuth_correlation(const MlpEstimator& est, std::size_t boundary_layer,
                                  std::span<const SamplePair> pairs, const ArrayPose& pose) {
    if (pairs.empty())
        throw DataError("latent correlation: empty pair list");
    const std::size_t n = pairs.size();
    std::vector<double> lat(n), az(n);
    for (std::size_t i = 0; i < n; ++i) {
        lat[i] = latent_values(est, boundary_layer, pairs[i].h_u)[0];
        az[i] = aoa_from_position(pairs[i].position, pose).azimuth;
    }
    double ml = 0.0, ma = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ml += lat[i];
        ma += az[i];
    }
    ml /= static_cast<double>(n);
    ma /= static_cast<double>(n);
    double cov = 0.0, vl = 0.0, va = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (lat[i] - ml) * (az[i] - ma);
        vl += (lat[i] - ml) * (lat[i] - ml);
        va += (az[i] - ma) * (az[i] - ma);
    }
    if (!(vl > 0.0) || !(va > 0.0))
        return 0.0;
    return cov / std::sqrt(vl * va);
}

namespace {

constexpr char kCheckpointMagic[4] = {'C', 'S', 'M', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_model(std::string& b, const Mlp& model) {
    const MlpSpec& spec = model.spec();
    put_u64(b, spec.hash());
    b += spec_bytes(spec);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        for (double w : model.weights[l])
            put_f64(b, w);
        for (double v : model.biases[l])
            put_f64(b, v);
    }
}

Mlp get_model(ByteReader& r) {
    const std::uint64_t stored_hash = r.u64();
    MlpSpec spec;
    const std::uint64_t num_widths = r.u64();
    if (num_widths < 2 || num_widths > 64)
        throw DataError("checkpoint spec has an implausible layer count");
    for (std::uint64_t i = 0; i < num_widths; ++i)
        spec.widths.push_back(r.u64());
    for (std::uint64_t i = 0; i + 1 < num_widths; ++i) {
        const std::uint8_t a = r.u8();
        if (a > 2)
            throw DataError("checkpoint spec has an unknown activation");
        spec.activations.push_back(static_cast<Activation>(a));
    }
    if (r.u8() != 0) {
        DropoutSpec drop;
        drop.after_layer = r.u64();
        drop.rate = r.f64();
        spec.dropout = drop;
    }
    spec.validate();
    if (spec.hash() != stored_hash)
        throw DataError("checkpoint spec hash mismatch");
    Mlp model(spec, 0);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        for (double& w : model.weights[l])
            w = r.f64();
        for (double& v : model.biases[l])
            v = r.f64();
    }
    return model;
}

void put_header(std::string& b, std::uint8_t kind, const Estimator& est) {
    b.append(kCheckpointMagic, 4);
    put_u32(b, kCheckpointVersion);
    put_u8(b, kind);
    const std::string id = est.id();
    put_u32(b, static_cast<std::uint32_t>(id.size()));
    b += id;
    const auto prov = est.provenance();
    put_u8(b, prov ? 1 : 0);
    put_u64(b, prov.value_or(0));
}

} // namespace

void save_checkpoint(const std::string& path, const Estimator& estimator) {
    std::string b;
    if (const auto* c = dynamic_cast<const ConstantEstimator*>(&estimator)) {
        put_header(b, 0, estimator);
        const CVector& w = c->vector();
        put_u64(b, w.size());
        for (const cdouble& v : w) {
            put_f64(b, v.real());
            put_f64(b, v.imag());
        }
    } else if (const auto* m = dynamic_cast<const MlpEstimator*>(&estimator)) {
        put_header(b, 1, estimator);
        put_f64(b, m->input_scale());
        put_model(b, m->model());
    } else if (const auto* e = dynamic_cast<const ComposedEstimator*>(&estimator)) {
        put_header(b, 2, estimator);
        put_u8(b, static_cast<std::uint8_t>(e->encoder().mode));
        put_u8(b, static_cast<std::uint8_t>(e->encoder().nets.size()));
        put_f64(b, e->encoder().input_scale);
        for (const Mlp& net : e->encoder().nets)
            put_model(b, net);
        put_f64(b, e->decoder().input_scale);
        put_u64(b, e->decoder().latent_dim);
        put_model(b, e->decoder().model);
    } else {
        throw DataError("estimator kind is not checkpointable");
    }
    atomic_write_file(path, b);
}

std::unique_ptr<Estimator> load_checkpoint(const std::string& path) {
    const std::string buf = read_file(path);
    ByteReader r{buf};
    if (r.bytes(4) != std::string(kCheckpointMagic, 4))
        throw DataError(path + ": not a model checkpoint");
    if (r.u32() != kCheckpointVersion)
        throw DataError(path + ": unsupported checkpoint version");
    const std::uint8_t kind = r.u8();
    const std::uint32_t id_len = r.u32();
    if (id_len > 4096)
        throw DataError(path + ": implausible id length");
    const std::string id = r.bytes(id_len);
    std::optional<std::uint64_t> prov;
    const bool has_prov = r.u8() != 0;
    const std::uint64_t prov_value = r.u64();
    if (has_prov)
        prov = prov_value;

    switch (kind) {
    case 0: {
        const std::uint64_t m = r.u64();
        if (m == 0 || m > 4096)
            throw DataError(path + ": implausible precoder length");
        CVector w(m);
        for (auto& v : w) {
            const double re = r.f64();
            const double im = r.f64();
            v = cdouble(re, im);
        }
        return std::make_unique<ConstantEstimator>(std::move(w), id, prov);
    }
    case 1: {
        const double scale = r.f64();
        Mlp model = get_model(r);
        return std::make_unique<MlpEstimator>(std::move(model), scale, id, prov);
    }
    case 2: {
        const std::uint8_t mode_raw = r.u8();
        if (mode_raw != 1 && mode_raw != 2)
            throw DataError(path + ": composed checkpoint has an unknown latent mode");
        AngleEncoder enc;
        enc.mode = static_cast<LatentMode>(mode_raw);
        const std::uint8_t num_nets = r.u8();
        enc.input_scale = r.f64();
        for (std::uint8_t i = 0; i < num_nets; ++i)
            enc.nets.push_back(get_model(r));
        Decoder dec;
        dec.input_scale = r.f64();
        dec.latent_dim = r.u64();
        dec.model = get_model(r);
        return std::make_unique<ComposedEstimator>(std::move(enc), std::move(dec), id, prov);
    }
    default:
        throw DataError(path + ": unknown checkpoint kind");
    }
}

} // namespace csimap
