#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "splitwiper/rng.hpp"
#include "splitwiper/tensor.hpp"

namespace splitwiper {

enum class Activation : std::uint8_t { Identity = 0, Relu = 1 };

struct DenseLayer {
    Tensor weights;  // in x out
    Tensor bias;     // 1 x out
    Activation activation = Activation::Identity;

    std::size_t in_dim() const { return weights.rows(); }
    std::size_t out_dim() const { return weights.cols(); }
};

enum class RunMode { Train, Eval };
enum class PassKind { Forward, ForwardBackward };

/// Per-layer record of one forward pass, consumed by backward().
/// post_activations hold what the next layer actually saw, i.e. dropout is
/// already applied where a mask exists. Masks are empty tensors for layers
/// that ran without dropout.
struct ForwardTrace {
    Tensor input;
    std::vector<Tensor> pre_activations;
    std::vector<Tensor> post_activations;
    std::vector<Tensor> dropout_masks;

    std::size_t layer_count() const { return pre_activations.size(); }
};

struct LayerGrads {
    Tensor weights;
    Tensor bias;
};

/// Parameter gradients per layer; empty list when the model is frozen.
struct Gradients {
    std::vector<LayerGrads> layers;
    bool empty() const { return layers.empty(); }
};

/// Feedforward dense network. Client halves run with dropout_rate == 0;
/// only server-side models carry dropout, drawn from a dedicated seeded
/// mask stream so replays are exact.
class MlpModel {
public:
    MlpModel() = default;

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

    bool frozen() const { return frozen_; }
    double dropout_rate() const { return dropout_rate_; }
    std::uint64_t init_seed() const { return init_seed_; }

    std::size_t in_dim() const { return layers_.front().in_dim(); }
    std::size_t out_dim() const { return layers_.back().out_dim(); }

    /// Re-keys the dropout mask stream. Used when a model is reconstructed
    /// from a checkpoint, which stores no generator state.
    void reseed_dropout(std::uint64_t seed);

    SplitMix64& dropout_rng() { return dropout_rng_; }

private:
    friend MlpModel init_mlp(const std::vector<std::size_t>&,
                             const std::vector<Activation>&, double,
                             std::uint64_t);
    friend void set_frozen(MlpModel&, bool);
    friend void sgd_step(MlpModel&, const Gradients&, double);
    friend MlpModel load_checkpoint(const std::filesystem::path&);

    std::vector<DenseLayer> layers_;
    bool frozen_ = false;
    double dropout_rate_ = 0.0;
    std::uint64_t init_seed_ = 0;
    SplitMix64 dropout_rng_{0};
};

/// Builds the usual plan for n_layers dense layers: ReLU on every hidden
/// layer, Identity on the last.
std::vector<Activation> default_activation_plan(std::size_t n_layers);

/// Weights are drawn uniform in [-sqrt(6/(in+out)), +sqrt(6/(in+out))] from
/// one SplitMix64 stream seeded with `seed`, consumed layer by layer in
/// row-major order. Biases start at zero.
MlpModel init_mlp(const std::vector<std::size_t>& layer_dims,
                  const std::vector<Activation>& activations,
                  double dropout_rate, std::uint64_t seed);
MlpModel init_mlp(const std::vector<std::size_t>& layer_dims,
                  double dropout_rate, std::uint64_t seed);

/// Train mode applies inverted dropout (masks from the model's seeded
/// stream) to hidden-layer outputs; Eval mode never touches the stream.
std::pair<Tensor, ForwardTrace> forward(MlpModel& model, const Tensor& batch,
                                        RunMode mode);

/// Dropout-free forward pass for evaluation; leaves the model untouched.
Tensor forward_eval(const MlpModel& model, const Tensor& batch);

/// Mean negative log softmax probability of the true class, plus the logits
/// gradient (softmax - onehot) / batch_size.
std::pair<double, Tensor> loss_softmax_xent(const Tensor& logits,
                                            const std::vector<std::uint32_t>& labels);

/// Returns gradients for every unfrozen parameter and the gradient with
/// respect to the input batch (the protocol's G). A frozen model yields an
/// empty parameter list but still produces the input gradient.
std::pair<Gradients, Tensor> backward(const MlpModel& model,
                                      const ForwardTrace& trace,
                                      const Tensor& upstream);

void sgd_step(MlpModel& model, const Gradients& grads, double lr);

void set_frozen(MlpModel& model, bool frozen);

/// Compute-unit accounting: Forward = batch_rows * sum(in*out) over layers;
/// ForwardBackward = 3x that (forward, grad wrt weights, grad wrt input).
std::uint64_t mac_count(const MlpModel& model, std::size_t batch_rows,
                        PassKind pass);
std::uint64_t mac_count(const std::vector<std::size_t>& layer_dims,
                        std::size_t batch_rows, PassKind pass);

/// Checkpoint format (little-endian): magic "SWPR", version byte 0x01,
/// u32 layer count; per layer u32 in, u32 out, u8 activation code
/// (0=Identity, 1=ReLU), in*out f64 weights row-major, out f64 biases;
/// trailing u8 frozen flag, f64 dropout_rate.
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> checkpoint_bytes(const MlpModel& model);

/// Bit-exact comparison of everything the checkpoint format captures.
bool models_bit_equal(const MlpModel& a, const MlpModel& b);

/// Max absolute elementwise difference over all parameters.
double model_param_distance(const MlpModel& a, const MlpModel& b);

}  // namespace splitwiper
