#include "splitwiper/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "splitwiper/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint and wire formats assume a little-endian host");

namespace splitwiper {

namespace {

// out = a (r x k) * b (k x c)
Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double av = a.at(i, k);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out.at(i, j) += av * b.at(k, j);
            }
        }
    }
    return out;
}

// out = a^T (k x r)^T * b -> (a.cols x b.cols), a and b share row count
Tensor matmul_at_b(const Tensor& a, const Tensor& b) {
    Tensor out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double av = a.at(k, i);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out.at(i, j) += av * b.at(k, j);
            }
        }
    }
    return out;
}

// out = a * b^T, a (r x k), b (c x k) -> (r x c)
Tensor matmul_a_bt(const Tensor& a, const Tensor& b) {
    Tensor out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                acc += a.at(i, k) * b.at(j, k);
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

double activate(Activation act, double z) {
    return act == Activation::Relu ? (z > 0.0 ? z : 0.0) : z;
}

double activate_grad(Activation act, double z) {
    return act == Activation::Relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0;
}

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ostream& os, T v) {
    write_bytes(os, &v, sizeof(v));
}

template <typename T>
T read_pod(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw FormatError("checkpoint truncated");
    return v;
}

}  // namespace

std::vector<Activation> default_activation_plan(std::size_t n_layers) {
    std::vector<Activation> plan(n_layers, Activation::Relu);
    if (!plan.empty()) plan.back() = Activation::Identity;
    return plan;
}

MlpModel init_mlp(const std::vector<std::size_t>& layer_dims,
                  const std::vector<Activation>& activations,
                  double dropout_rate, std::uint64_t seed) {
    if (layer_dims.size() < 2) {
        throw InvalidDimension("layer_dims needs at least an input and an output dim");
    }
    for (std::size_t d : layer_dims) {
        if (d < 1) throw InvalidDimension("layer dimension must be >= 1");
    }
    const std::size_t n_layers = layer_dims.size() - 1;
    if (activations.size() != n_layers) {
        throw ShapeError("activation plan length " + std::to_string(activations.size()) +
                         " does not match layer count " + std::to_string(n_layers));
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw ConfigError("dropout_rate must lie in [0, 1)");
    }

    MlpModel model;
    model.init_seed_ = seed;
    model.dropout_rate_ = dropout_rate;
    model.dropout_rng_ = SplitMix64(derive_seed(seed, streams::kDropout));

    SplitMix64 rng(seed);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::size_t in = layer_dims[l];
        const std::size_t out = layer_dims[l + 1];
        DenseLayer layer;
        layer.weights = Tensor(in, out);
        layer.bias = Tensor(1, out);
        layer.activation = activations[l];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        for (double& w : layer.weights.raw()) w = rng.next_uniform(-limit, limit);
        model.layers_.push_back(std::move(layer));
    }
    return model;
}

MlpModel init_mlp(const std::vector<std::size_t>& layer_dims,
                  double dropout_rate, std::uint64_t seed) {
    return init_mlp(layer_dims, default_activation_plan(layer_dims.size() - 1),
                    dropout_rate, seed);
}

void MlpModel::reseed_dropout(std::uint64_t seed) {
    dropout_rng_ = SplitMix64(derive_seed(seed, streams::kDropout));
}

std::pair<Tensor, ForwardTrace> forward(MlpModel& model, const Tensor& batch,
                                        RunMode mode) {
    if (model.layers().empty()) throw ShapeError("forward on empty model");
    if (batch.cols() != model.in_dim()) {
        throw ShapeError("batch cols " + std::to_string(batch.cols()) +
                         " does not match model in-dim " + std::to_string(model.in_dim()));
    }

    ForwardTrace trace;
    trace.input = batch;
    const std::size_t n_layers = model.layers().size();
    const bool dropping = mode == RunMode::Train && model.dropout_rate() > 0.0;
    const double p = model.dropout_rate();
    const double keep_scale = dropping ? 1.0 / (1.0 - p) : 1.0;

    Tensor current = batch;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const DenseLayer& layer = model.layers()[l];
        Tensor z = matmul(current, layer.weights);
        for (std::size_t r = 0; r < z.rows(); ++r) {
            for (std::size_t c = 0; c < z.cols(); ++c) {
                z.at(r, c) += layer.bias.at(0, c);
            }
        }
        Tensor a(z.rows(), z.cols());
        for (std::size_t i = 0; i < z.size(); ++i) {
            a.raw()[i] = activate(layer.activation, z.raw()[i]);
        }

        Tensor mask;  // empty when no dropout applied on this layer
        if (dropping && l + 1 < n_layers) {
            mask = Tensor(a.rows(), a.cols());
            for (std::size_t i = 0; i < a.size(); ++i) {
                mask.raw()[i] = model.dropout_rng().next_double() < p ? 0.0 : keep_scale;
                a.raw()[i] *= mask.raw()[i];
            }
        }

        trace.pre_activations.push_back(std::move(z));
        trace.post_activations.push_back(a);
        trace.dropout_masks.push_back(std::move(mask));
        current = std::move(a);
    }
    return {current, std::move(trace)};
}

Tensor forward_eval(const MlpModel& model, const Tensor& batch) {
    // Eval never consumes the mask stream, so a const copy-free path is safe.
    MlpModel& mutable_model = const_cast<MlpModel&>(model);
    return forward(mutable_model, batch, RunMode::Eval).first;
}

std::pair<double, Tensor> loss_softmax_xent(const Tensor& logits,
                                            const std::vector<std::uint32_t>& labels) {
    if (labels.size() != logits.rows()) {
        throw ShapeError("label count does not match logits rows");
    }
    const std::size_t n = logits.rows();
    const std::size_t classes = logits.cols();
    Tensor dlogits(n, classes);
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        if (labels[r] >= classes) {
            throw LabelError("label " + std::to_string(labels[r]) +
                             " out of range for " + std::to_string(classes) + " logits");
        }
        double max_logit = logits.at(r, 0);
        for (std::size_t c = 1; c < classes; ++c) max_logit = std::max(max_logit, logits.at(r, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(logits.at(r, c) - max_logit);
        const double log_denom = std::log(denom);
        loss += -(logits.at(r, labels[r]) - max_logit - log_denom);
        for (std::size_t c = 0; c < classes; ++c) {
            const double softmax = std::exp(logits.at(r, c) - max_logit) / denom;
            dlogits.at(r, c) = (softmax - (c == labels[r] ? 1.0 : 0.0)) / static_cast<double>(n);
        }
    }
    return {loss / static_cast<double>(n), std::move(dlogits)};
}

std::pair<Gradients, Tensor> backward(const MlpModel& model,
                                      const ForwardTrace& trace,
                                      const Tensor& upstream) {
    const std::size_t n_layers = model.layers().size();
    if (trace.layer_count() != n_layers ||
        trace.post_activations.size() != n_layers ||
        trace.dropout_masks.size() != n_layers) {
        throw TraceError("trace layer count does not match model");
    }
    for (std::size_t l = 0; l < n_layers; ++l) {
        if (trace.pre_activations[l].cols() != model.layers()[l].out_dim()) {
            throw TraceError("trace shapes do not match model layer " + std::to_string(l));
        }
    }
    if (!upstream.same_shape(trace.post_activations.back())) {
        throw ShapeError("upstream shape does not match forward output");
    }

    Gradients grads;
    if (!model.frozen()) grads.layers.resize(n_layers);

    Tensor delta = upstream;  // gradient wrt the layer's (post-dropout) output
    for (std::size_t li = n_layers; li-- > 0;) {
        const DenseLayer& layer = model.layers()[li];
        const Tensor& mask = trace.dropout_masks[li];
        if (mask.size() != 0) {
            for (std::size_t i = 0; i < delta.size(); ++i) delta.raw()[i] *= mask.raw()[i];
        }
        const Tensor& z = trace.pre_activations[li];
        for (std::size_t i = 0; i < delta.size(); ++i) {
            delta.raw()[i] *= activate_grad(layer.activation, z.raw()[i]);
        }

        const Tensor& layer_input = li == 0 ? trace.input : trace.post_activations[li - 1];
        if (!model.frozen()) {
            grads.layers[li].weights = matmul_at_b(layer_input, delta);
            Tensor bias_grad(1, delta.cols());
            for (std::size_t r = 0; r < delta.rows(); ++r) {
                for (std::size_t c = 0; c < delta.cols(); ++c) {
                    bias_grad.at(0, c) += delta.at(r, c);
                }
            }
            grads.layers[li].bias = std::move(bias_grad);
        }
        delta = matmul_a_bt(delta, layer.weights);
    }
    return {std::move(grads), std::move(delta)};
}

void sgd_step(MlpModel& model, const Gradients& grads, double lr) {
    if (model.frozen()) throw FrozenError("sgd_step on a frozen model");
    if (grads.layers.size() != model.layers().size()) {
        throw ShapeError("gradient layer count does not match model");
    }
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
        DenseLayer& layer = model.layers_[l];
        const LayerGrads& g = grads.layers[l];
        if (!g.weights.same_shape(layer.weights) || !g.bias.same_shape(layer.bias)) {
            throw ShapeError("gradient shape does not match layer " + std::to_string(l));
        }
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            layer.weights.raw()[i] -= lr * g.weights.raw()[i];
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            layer.bias.raw()[i] -= lr * g.bias.raw()[i];
        }
    }
}

void set_frozen(MlpModel& model, bool frozen) { model.frozen_ = frozen; }

std::uint64_t mac_count(const MlpModel& model, std::size_t batch_rows, PassKind pass) {
    std::uint64_t per_row = 0;
    for (const DenseLayer& layer : model.layers()) {
        per_row += static_cast<std::uint64_t>(layer.in_dim()) * layer.out_dim();
    }
    const std::uint64_t fwd = per_row * batch_rows;
    return pass == PassKind::Forward ? fwd : 3 * fwd;
}

std::uint64_t mac_count(const std::vector<std::size_t>& layer_dims,
                        std::size_t batch_rows, PassKind pass) {
    std::uint64_t per_row = 0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        per_row += static_cast<std::uint64_t>(layer_dims[l]) * layer_dims[l + 1];
    }
    const std::uint64_t fwd = per_row * batch_rows;
    return pass == PassKind::Forward ? fwd : 3 * fwd;
}

namespace {
constexpr char kMagic[4] = {'S', 'W', 'P', 'R'};
constexpr std::uint8_t kVersion = 0x01;
}  // namespace

namespace {
void write_checkpoint_stream(const MlpModel& model, std::ostream& os) {
    write_bytes(os, kMagic, 4);
    write_pod(os, kVersion);
    write_pod(os, static_cast<std::uint32_t>(model.layers().size()));
    for (const DenseLayer& layer : model.layers()) {
        write_pod(os, static_cast<std::uint32_t>(layer.in_dim()));
        write_pod(os, static_cast<std::uint32_t>(layer.out_dim()));
        write_pod(os, static_cast<std::uint8_t>(layer.activation));
        write_bytes(os, layer.weights.data(), layer.weights.size() * sizeof(double));
        write_bytes(os, layer.bias.data(), layer.bias.size() * sizeof(double));
    }
    write_pod(os, static_cast<std::uint8_t>(model.frozen() ? 1 : 0));
    write_pod(os, model.dropout_rate());
}
}  // namespace

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
    write_checkpoint_stream(model, os);
    if (!os) throw FormatError("checkpoint write failed: " + path.string());
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open checkpoint: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic: " + path.string());
    }
    if (read_pod<std::uint8_t>(is) != kVersion) {
        throw FormatError("unsupported checkpoint version");
    }
    const auto n_layers = read_pod<std::uint32_t>(is);
    if (n_layers == 0 || n_layers > 1u << 16) {
        throw FormatError("implausible layer count");
    }
    MlpModel model;
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        const auto in = read_pod<std::uint32_t>(is);
        const auto out = read_pod<std::uint32_t>(is);
        if (in == 0 || out == 0 || in > 1u << 20 || out > 1u << 20) {
            throw FormatError("implausible layer dims");
        }
        const auto act = read_pod<std::uint8_t>(is);
        if (act > 1) throw FormatError("unknown activation code");
        DenseLayer layer;
        layer.activation = static_cast<Activation>(act);
        layer.weights = Tensor(in, out);
        is.read(reinterpret_cast<char*>(layer.weights.data()),
                static_cast<std::streamsize>(layer.weights.size() * sizeof(double)));
        layer.bias = Tensor(1, out);
        is.read(reinterpret_cast<char*>(layer.bias.data()),
                static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
        if (!is) throw FormatError("checkpoint truncated");
        model.layers_.push_back(std::move(layer));
    }
    model.frozen_ = read_pod<std::uint8_t>(is) != 0;
    model.dropout_rate_ = read_pod<double>(is);
    return model;
}

std::vector<std::uint8_t> checkpoint_bytes(const MlpModel& model) {
    std::ostringstream os(std::ios::binary);
    write_checkpoint_stream(model, os);
    const std::string s = os.str();
    return std::vector<std::uint8_t>(s.begin(), s.end());
}

bool models_bit_equal(const MlpModel& a, const MlpModel& b) {
    if (a.layers().size() != b.layers().size()) return false;
    if (a.frozen() != b.frozen()) return false;
    const double da = a.dropout_rate(), db = b.dropout_rate();
    if (std::memcmp(&da, &db, sizeof(double)) != 0) return false;
    for (std::size_t l = 0; l < a.layers().size(); ++l) {
        const DenseLayer& la = a.layers()[l];
        const DenseLayer& lb = b.layers()[l];
        if (la.activation != lb.activation) return false;
        if (!la.weights.same_shape(lb.weights) || !la.bias.same_shape(lb.bias)) return false;
        if (std::memcmp(la.weights.data(), lb.weights.data(),
                        la.weights.size() * sizeof(double)) != 0) return false;
        if (std::memcmp(la.bias.data(), lb.bias.data(),
                        la.bias.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

double model_param_distance(const MlpModel& a, const MlpModel& b) {
    if (a.layers().size() != b.layers().size()) {
        throw ReportError("models have different layer counts");
    }
    double dist = 0.0;
    for (std::size_t l = 0; l < a.layers().size(); ++l) {
        const DenseLayer& la = a.layers()[l];
        const DenseLayer& lb = b.layers()[l];
        if (!la.weights.same_shape(lb.weights) || !la.bias.same_shape(lb.bias)) {
            throw ReportError("models have different layer shapes");
        }
        for (std::size_t i = 0; i < la.weights.size(); ++i) {
            dist = std::max(dist, std::abs(la.weights.raw()[i] - lb.weights.raw()[i]));
        }
        for (std::size_t i = 0; i < la.bias.size(); ++i) {
            dist = std::max(dist, std::abs(la.bias.raw()[i] - lb.bias.raw()[i]));
        }
    }
    return dist;
}

}  // namespace splitwiper
