#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "condensity/core.hpp"
#include "condensity/error.hpp"
#include "condensity/rng.hpp"
#include "condensity/transform.hpp"

namespace condensity {

struct MlpParams {
    int hidden_layers = 5;
    int hidden_width = 20;
    int batch_size = 1024;
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    int max_epochs = 20;

    void validate() const {
        if (hidden_layers < 1 || hidden_width < 1 || batch_size < 1 || max_epochs < 1)
            throw ConfigError("mlp config: counts must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("mlp config: learning_rate must be > 0");
        if (!(weight_decay >= 0.0)) throw ConfigError("mlp config: weight_decay must be >= 0");
    }
};

namespace detail {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}
} // namespace detail

// One linear layer, optionally followed by batch normalization (hidden
// layers only; the output layer is a plain linear map).
struct MlpLayer {
    std::size_t in = 0, out = 0;
    bool batch_norm = false;
    Vector weight; // out x in, row-major
    Vector bias;   // out
    Vector gamma, beta;         // batch-norm scale/shift
    Vector run_mean, run_var;   // prediction-time statistics

    bool operator==(const MlpLayer& other) const = default;
};

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.9; // run = 0.9*run + 0.1*batch

// Fully connected network: hidden_layers x [linear -> batchnorm -> SiLU]
// followed by a scalar linear output. Prediction uses running batch-norm
// statistics and is a pure function of (model, features).
struct MlpModel {
    std::vector<MlpLayer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }

    Vector predict(const Matrix& features) const {
        if (features.cols() != input_dim())
            throw ConfigError("mlp predict: feature width " + std::to_string(features.cols()) +
                              " != input_dim " + std::to_string(input_dim()));
        const std::size_t n = features.rows();
        Vector cur(features.data(), features.data() + n * features.cols());
        std::size_t cur_w = features.cols();
        Vector next;
        for (const auto& layer : layers) {
            next.assign(n * layer.out, 0.0);
            for (std::size_t r = 0; r < n; ++r) {
                const double* x = cur.data() + r * cur_w;
                double* z = next.data() + r * layer.out;
                for (std::size_t o = 0; o < layer.out; ++o) {
                    const double* w = layer.weight.data() + o * layer.in;
                    double acc = layer.bias[o];
                    for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * x[i];
                    z[o] = acc;
                }
            }
            if (layer.batch_norm) {
                for (std::size_t o = 0; o < layer.out; ++o) {
                    const double inv = 1.0 / std::sqrt(layer.run_var[o] + kBnEps);
                    const double scale = layer.gamma[o] * inv;
                    const double shift = layer.beta[o] - scale * layer.run_mean[o];
                    for (std::size_t r = 0; r < n; ++r) {
                        double& v = next[r * layer.out + o];
                        v = detail::silu(scale * v + shift);
                    }
                }
            }
            cur.swap(next);
            cur_w = layer.out;
        }
        return cur; // final layer has out == 1
    }

    bool operator==(const MlpModel& other) const = default;
};

// Minibatch AdamW trainer for the least-squares objective. One train_round
// is one epoch over the design in a seed-determined shuffle order. All
// reductions are sequential, so training is deterministic for a fixed seed.
//
// The design passed to the constructor must outlive the trainer.
class MlpTrainer {
public:
    MlpTrainer(const MlpParams& params, const AuxiliaryDesign& design, std::uint64_t seed)
        : params_(params), design_(&design), shuffle_rng_(substream(seed, kShuffleStream)) {
        params_.validate();
        if (design.rows() == 0) throw ConfigError("mlp trainer: empty design");

        SplitMix64 init_rng = substream(seed, kInitStream);
        std::size_t in = design.width();
        for (int l = 0; l < params_.hidden_layers; ++l) {
            model_.layers.push_back(make_layer(in, static_cast<std::size_t>(params_.hidden_width),
                                               true, init_rng));
            in = static_cast<std::size_t>(params_.hidden_width);
        }
        model_.layers.push_back(make_layer(in, 1, false, init_rng));
        init_adam_state();
    }

    bool exhausted() const { return epochs_done_ >= params_.max_epochs; }
    int rounds_done() const { return epochs_done_; }
    const MlpModel& model() const { return model_; }

    void train_round() {
        if (exhausted()) throw Exhausted("mlp trainer: epoch budget spent");
        const std::size_t n = design_->rows();
        std::vector<std::uint32_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0u);
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng_.next() % (i + 1));
            std::swap(perm[i], perm[j]);
        }
        const std::size_t bs = static_cast<std::size_t>(params_.batch_size);
        Matrix batch_x;
        Vector batch_t;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t b = std::min(bs, n - start);
            batch_x = Matrix(b, design_->width());
            batch_t.resize(b);
            for (std::size_t r = 0; r < b; ++r) {
                const auto src = design_->features.row(perm[start + r]);
                std::copy(src.begin(), src.end(), batch_x.row(r).begin());
                batch_t[r] = design_->targets[perm[start + r]];
            }
            Gradients grads = backward(batch_x, batch_t, /*update_running=*/true);
            adam_step(grads);
        }
        ++epochs_done_;
    }

    // Mean squared error of the current model over the whole design,
    // prediction mode (running statistics).
    double training_mse() const {
        const Vector pred = model_.predict(design_->features);
        double acc = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred[i] - design_->targets[i];
            acc += d * d;
        }
        return acc / static_cast<double>(pred.size());
    }

    // ---- gradient-check hooks (training-mode loss and gradients on a
    // fixed batch; neither touches running statistics or Adam state) ----

    Vector parameters() const {
        Vector out;
        for (const auto& l : model_.layers) {
            out.insert(out.end(), l.weight.begin(), l.weight.end());
            out.insert(out.end(), l.bias.begin(), l.bias.end());
            if (l.batch_norm) {
                out.insert(out.end(), l.gamma.begin(), l.gamma.end());
                out.insert(out.end(), l.beta.begin(), l.beta.end());
            }
        }
        return out;
    }

    void set_parameters(std::span<const double> flat) {
        std::size_t pos = 0;
        auto take = [&](Vector& dst) {
            if (pos + dst.size() > flat.size()) throw ConfigError("set_parameters: flat vector too short");
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                      flat.begin() + static_cast<std::ptrdiff_t>(pos + dst.size()), dst.begin());
            pos += dst.size();
        };
        for (auto& l : model_.layers) {
            take(l.weight);
            take(l.bias);
            if (l.batch_norm) {
                take(l.gamma);
                take(l.beta);
            }
        }
        if (pos != flat.size()) throw ConfigError("set_parameters: flat vector too long");
    }

    double batch_loss(const Matrix& x, std::span<const double> targets) {
        Forward f = forward_training(x, /*update_running=*/false);
        double acc = 0.0;
        for (std::size_t r = 0; r < targets.size(); ++r) {
            const double d = f.activations.back()[r] - targets[r];
            acc += d * d;
        }
        return acc / static_cast<double>(targets.size());
    }

    Vector batch_gradients(const Matrix& x, std::span<const double> targets) {
        Gradients g = backward(x, targets, /*update_running=*/false);
        Vector out;
        for (std::size_t l = 0; l < model_.layers.size(); ++l) {
            out.insert(out.end(), g.weight[l].begin(), g.weight[l].end());
            out.insert(out.end(), g.bias[l].begin(), g.bias[l].end());
            if (model_.layers[l].batch_norm) {
                out.insert(out.end(), g.gamma[l].begin(), g.gamma[l].end());
                out.insert(out.end(), g.beta[l].begin(), g.beta[l].end());
            }
        }
        return out;
    }

private:
    static constexpr std::uint64_t kInitStream = 101;
    static constexpr std::uint64_t kShuffleStream = 202;

    struct Forward {
        // Per layer: input to the layer, pre-batchnorm linear output,
        // normalized activations, pre-activation batchnorm output.
        std::vector<Vector> inputs;       // layer count entries, row-major
        std::vector<Vector> linear_out;
        std::vector<Vector> xhat;
        std::vector<Vector> bn_out;
        std::vector<Vector> batch_mean, batch_var;
        std::vector<Vector> activations;  // output of each layer after SiLU (or raw for final)
        std::size_t batch = 0;
    };

    struct Gradients {
        std::vector<Vector> weight, bias, gamma, beta;
    };

    static MlpLayer make_layer(std::size_t in, std::size_t out, bool bn, SplitMix64& rng) {
        MlpLayer l;
        l.in = in;
        l.out = out;
        l.batch_norm = bn;
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        l.weight.resize(out * in);
        l.bias.resize(out);
        for (auto& w : l.weight) w = (2.0 * rng.uniform() - 1.0) * bound;
        for (auto& b : l.bias) b = (2.0 * rng.uniform() - 1.0) * bound;
        if (bn) {
            l.gamma.assign(out, 1.0);
            l.beta.assign(out, 0.0);
            l.run_mean.assign(out, 0.0);
            l.run_var.assign(out, 1.0);
        }
        return l;
    }

    void init_adam_state() {
        const std::size_t L = model_.layers.size();
        m_.weight.resize(L);
        m_.bias.resize(L);
        m_.gamma.resize(L);
        m_.beta.resize(L);
        v_ = m_;
        for (std::size_t l = 0; l < L; ++l) {
            m_.weight[l].assign(model_.layers[l].weight.size(), 0.0);
            m_.bias[l].assign(model_.layers[l].bias.size(), 0.0);
            v_.weight[l].assign(model_.layers[l].weight.size(), 0.0);
            v_.bias[l].assign(model_.layers[l].bias.size(), 0.0);
            if (model_.layers[l].batch_norm) {
                m_.gamma[l].assign(model_.layers[l].gamma.size(), 0.0);
                m_.beta[l].assign(model_.layers[l].beta.size(), 0.0);
                v_.gamma[l].assign(model_.layers[l].gamma.size(), 0.0);
                v_.beta[l].assign(model_.layers[l].beta.size(), 0.0);
            }
        }
    }

    Forward forward_training(const Matrix& x, bool update_running) {
        if (x.cols() != model_.input_dim()) throw ConfigError("mlp forward: width mismatch");
        Forward f;
        f.batch = x.rows();
        const std::size_t L = model_.layers.size();
        f.inputs.resize(L);
        f.linear_out.resize(L);
        f.xhat.resize(L);
        f.bn_out.resize(L);
        f.batch_mean.resize(L);
        f.batch_var.resize(L);
        f.activations.resize(L);

        Vector cur(x.data(), x.data() + x.rows() * x.cols());
        for (std::size_t l = 0; l < L; ++l) {
            auto& layer = model_.layers[l];
            const std::size_t B = f.batch, in = layer.in, out = layer.out;
            f.inputs[l] = cur;
            Vector z(B * out);
            for (std::size_t r = 0; r < B; ++r) {
                const double* xr = cur.data() + r * in;
                double* zr = z.data() + r * out;
                for (std::size_t o = 0; o < out; ++o) {
                    const double* w = layer.weight.data() + o * in;
                    double acc = layer.bias[o];
                    for (std::size_t i = 0; i < in; ++i) acc += w[i] * xr[i];
                    zr[o] = acc;
                }
            }
            f.linear_out[l] = z;
            if (layer.batch_norm) {
                Vector mean(out, 0.0), var(out, 0.0);
                for (std::size_t r = 0; r < B; ++r)
                    for (std::size_t o = 0; o < out; ++o) mean[o] += z[r * out + o];
                for (std::size_t o = 0; o < out; ++o) mean[o] /= static_cast<double>(B);
                for (std::size_t r = 0; r < B; ++r)
                    for (std::size_t o = 0; o < out; ++o) {
                        const double c = z[r * out + o] - mean[o];
                        var[o] += c * c;
                    }
                for (std::size_t o = 0; o < out; ++o) var[o] /= static_cast<double>(B);
                if (update_running) {
                    for (std::size_t o = 0; o < out; ++o) {
                        layer.run_mean[o] = kBnMomentum * layer.run_mean[o] + (1.0 - kBnMomentum) * mean[o];
                        layer.run_var[o] = kBnMomentum * layer.run_var[o] + (1.0 - kBnMomentum) * var[o];
                    }
                }
                Vector xh(B * out), u(B * out), act(B * out);
                for (std::size_t o = 0; o < out; ++o) {
                    const double inv = 1.0 / std::sqrt(var[o] + kBnEps);
                    for (std::size_t r = 0; r < B; ++r) {
                        const double xhat = (z[r * out + o] - mean[o]) * inv;
                        const double bn = layer.gamma[o] * xhat + layer.beta[o];
                        xh[r * out + o] = xhat;
                        u[r * out + o] = bn;
                        act[r * out + o] = detail::silu(bn);
                    }
                }
                f.batch_mean[l] = std::move(mean);
                f.batch_var[l] = std::move(var);
                f.xhat[l] = std::move(xh);
                f.bn_out[l] = std::move(u);
                f.activations[l] = act;
                cur = std::move(act);
            } else {
                f.activations[l] = z;
                cur = std::move(z);
            }
        }
        return f;
    }

    Gradients backward(const Matrix& x, std::span<const double> targets, bool update_running) {
        Forward f = forward_training(x, update_running);
        const std::size_t L = model_.layers.size();
        const std::size_t B = f.batch;

        Gradients g;
        g.weight.resize(L);
        g.bias.resize(L);
        g.gamma.resize(L);
        g.beta.resize(L);

        // d(mean squared error)/d(prediction)
        Vector delta(B);
        for (std::size_t r = 0; r < B; ++r)
            delta[r] = 2.0 * (f.activations[L - 1][r] - targets[r]) / static_cast<double>(B);

        for (std::size_t li = L; li-- > 0;) {
            const auto& layer = model_.layers[li];
            const std::size_t in = layer.in, out = layer.out;

            // delta currently holds dLoss/d(layer output after activation)
            Vector dz; // dLoss/d(linear output)
            if (layer.batch_norm) {
                const Vector& u = f.bn_out[li];
                const Vector& xh = f.xhat[li];
                Vector du(B * out);
                for (std::size_t k = 0; k < B * out; ++k)
                    du[k] = delta[k] * detail::silu_grad(u[k]);
                g.gamma[li].assign(out, 0.0);
                g.beta[li].assign(out, 0.0);
                Vector mean_du(out, 0.0), mean_duxh(out, 0.0);
                for (std::size_t r = 0; r < B; ++r)
                    for (std::size_t o = 0; o < out; ++o) {
                        const double d = du[r * out + o];
                        g.beta[li][o] += d;
                        g.gamma[li][o] += d * xh[r * out + o];
                    }
                for (std::size_t o = 0; o < out; ++o) {
                    mean_du[o] = g.beta[li][o] / static_cast<double>(B);
                    mean_duxh[o] = g.gamma[li][o] / static_cast<double>(B);
                }
                dz.resize(B * out);
                for (std::size_t o = 0; o < out; ++o) {
                    const double inv = layer.gamma[o] / std::sqrt(f.batch_var[li][o] + kBnEps);
                    for (std::size_t r = 0; r < B; ++r) {
                        const std::size_t k = r * out + o;
                        dz[k] = inv * (du[k] - mean_du[o] - xh[k] * mean_duxh[o]);
                    }
                }
            } else {
                dz = delta;
            }

            const Vector& input = f.inputs[li];
            g.weight[li].assign(out * in, 0.0);
            g.bias[li].assign(out, 0.0);
            for (std::size_t r = 0; r < B; ++r) {
                const double* xr = input.data() + r * in;
                const double* dzr = dz.data() + r * out;
                for (std::size_t o = 0; o < out; ++o) {
                    const double d = dzr[o];
                    g.bias[li][o] += d;
                    double* gw = g.weight[li].data() + o * in;
                    for (std::size_t i = 0; i < in; ++i) gw[i] += d * xr[i];
                }
            }
            if (li > 0) {
                Vector dx(B * in, 0.0);
                for (std::size_t r = 0; r < B; ++r) {
                    const double* dzr = dz.data() + r * out;
                    double* dxr = dx.data() + r * in;
                    for (std::size_t o = 0; o < out; ++o) {
                        const double d = dzr[o];
                        const double* w = layer.weight.data() + o * in;
                        for (std::size_t i = 0; i < in; ++i) dxr[i] += d * w[i];
                    }
                }
                delta = std::move(dx);
            }
        }
        return g;
    }

    void adam_step(const Gradients& g) {
        ++step_;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
        auto update = [&](Vector& param, Vector& m, Vector& v, const Vector& grad, bool decay) {
            for (std::size_t i = 0; i < param.size(); ++i) {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                double step = mhat / (std::sqrt(vhat) + eps);
                if (decay) step += params_.weight_decay * param[i];
                param[i] -= params_.learning_rate * step;
            }
        };
        for (std::size_t l = 0; l < model_.layers.size(); ++l) {
            auto& layer = model_.layers[l];
            update(layer.weight, m_.weight[l], v_.weight[l], g.weight[l], /*decay=*/true);
            update(layer.bias, m_.bias[l], v_.bias[l], g.bias[l], /*decay=*/false);
            if (layer.batch_norm) {
                update(layer.gamma, m_.gamma[l], v_.gamma[l], g.gamma[l], /*decay=*/false);
                update(layer.beta, m_.beta[l], v_.beta[l], g.beta[l], /*decay=*/false);
            }
        }
    }

    MlpParams params_;
    const AuxiliaryDesign* design_;
    SplitMix64 shuffle_rng_;
    MlpModel model_;
    Gradients m_, v_;
    std::uint64_t step_ = 0;
    int epochs_done_ = 0;
};

} // namespace condensity
