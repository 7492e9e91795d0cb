#pragma once

// Minimal reverse-mode network engine: a sequential graph of dense, 3x3
// convolution, ReLU, 2x2 max-pool and flatten nodes ending in a K-way linear
// layer, with softmax soft-target cross-entropy and momentum SGD.
//
// The model is immutable during forward/backward. Activations live in a Tape
// owned by the caller, so a trained model can be evaluated from many threads.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "autolabel/rng.hpp"
#include "autolabel/tensor.hpp"

namespace autolabel {

/// Probability vector over K classes.
using SoftLabel = std::vector<double>;

enum class LayerKind : std::uint32_t { dense = 1, conv2d = 2, relu = 3, maxpool2 = 4, flatten = 5 };

std::string to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind;
    std::size_t units = 0;  // dense outputs or conv output channels
    std::size_t kernel = 0; // conv kernel size (odd)

    static LayerSpec dense(std::size_t units) { return {LayerKind::dense, units, 0}; }
    static LayerSpec conv(std::size_t channels, std::size_t kernel = 3) {
        return {LayerKind::conv2d, channels, kernel};
    }
    static LayerSpec relu() { return {LayerKind::relu, 0, 0}; }
    static LayerSpec maxpool() { return {LayerKind::maxpool2, 0, 0}; }
    static LayerSpec flatten() { return {LayerKind::flatten, 0, 0}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// input -> hidden... -> K, ReLU between dense layers.
std::vector<LayerSpec> mlp_architecture(std::span<const std::size_t> hidden, std::size_t classes);

/// conv(c1)-relu-pool-conv(c2)-relu-pool-flatten-dense(hidden)-relu-dense(K).
std::vector<LayerSpec> convnet_architecture(std::size_t c1, std::size_t c2, std::size_t hidden,
                                            std::size_t classes);

template <typename T>
using ParamList = std::vector<BasicTensor<T>>;

/// Cached activations of one forward pass.
template <typename T>
struct Tape {
    std::vector<BasicTensor<T>> inputs;           // input of every layer
    std::vector<std::vector<std::size_t>> argmax; // one entry per layer, filled for max-pool
};

template <typename T>
class BasicModel {
public:
    BasicModel() = default;

    /// Builds the graph for inputs of `input_shape` (C x H x W or a flat size)
    /// and He-uniform initialises weights from `rng`. Biases start at zero.
    BasicModel(Shape input_shape, std::vector<LayerSpec> layers, Rng& rng);

    /// Same graph with explicit parameter values (checkpoint loading).
    BasicModel(Shape input_shape, std::vector<LayerSpec> layers, ParamList<T> params);

    const Shape& input_shape() const noexcept { return input_shape_; }
    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t parameter_count() const noexcept;

    ParamList<T>& parameters() noexcept { return params_; }
    const ParamList<T>& parameters() const noexcept { return params_; }

    /// Zero-filled list shaped like parameters().
    ParamList<T> zeros_like_parameters() const;

    /// Logits [B x K] for a batch [B x input_shape...]. Fills `tape` when given.
    BasicTensor<T> logits(const BasicTensor<T>& batch, Tape<T>* tape = nullptr) const;

    /// Backpropagates d(loss)/d(logits). Parameter gradients are written to
    /// `param_grads` and the input gradient to `input_grad`; either may be null.
    void backward(const Tape<T>& tape, const BasicTensor<T>& grad_logits, ParamList<T>* param_grads,
                  BasicTensor<T>* input_grad) const;

    /// ReLU on/off masks and pool winners of a recorded pass; two passes with
    /// equal patterns lie in the same linear region of the network.
    std::vector<std::uint32_t> activation_pattern(const Tape<T>& tape) const;

    template <typename U>
    BasicModel<U> cast() const {
        ParamList<U> p;
        for (const auto& t : params_) p.push_back(t.template cast<U>());
        return BasicModel<U>(input_shape_, layers_, std::move(p));
    }

private:
    struct Node {
        Shape in_shape;  // per-sample
        Shape out_shape; // per-sample
        std::size_t first_param = 0;
    };

    void build(bool allocate);
    void check_batch(const BasicTensor<T>& batch) const;

    Shape input_shape_;
    std::vector<LayerSpec> layers_;
    std::vector<Node> nodes_;
    ParamList<T> params_;
    std::size_t num_classes_ = 0;
};

using Model = BasicModel<float>;
using ModelD = BasicModel<double>;

/// Per-sample output: softmax probabilities (double), argmax and max.
struct Prediction {
    std::vector<double> probabilities;
    std::size_t predicted_class = 0;
    double confidence = 0.0;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Stacks equally shaped images into a [B x C x H x W] batch.
template <typename T = float>
BasicTensor<T> stack(std::span<const Image> images);

/// Numerically stable softmax of one logit row, in double.
std::vector<double> softmax(std::span<const double> logits);

Prediction make_prediction(std::span<const double> logits);

template <typename T>
std::vector<Prediction> forward(const BasicModel<T>& model, const BasicTensor<T>& batch);

std::vector<Prediction> forward(const Model& model, std::span<const Image> images);

/// Probability floor applied before the logarithm in the loss.
inline constexpr double kLogFloor = 1e-12;

/// Throws InvalidLabel if `target` leaves the simplex by more than 1e-6.
void check_simplex(std::span<const double> target, double tol = 1e-6);

/// -sum_k target_k * log(max(p_k, 1e-12)).
double loss_soft_ce(const Prediction& prediction, std::span<const double> target);

template <typename T>
struct GradientResult {
    ParamList<T> grads;        // gradient of the mean loss
    double mean_loss = 0.0;
    BasicTensor<T> input_grad; // gradient of the mean loss w.r.t. the batch, if requested
};

/// Exact reverse-mode gradients of the mean soft-target cross-entropy.
template <typename T>
GradientResult<T> gradients(const BasicModel<T>& model, const BasicTensor<T>& batch,
                            std::span<const SoftLabel> targets, bool want_input_grad = false);

/// Per-sample losses and d(loss_b)/d(x_b) without parameter gradients.
template <typename T>
BasicTensor<T> input_gradients(const BasicModel<T>& model, const BasicTensor<T>& batch,
                               std::span<const SoftLabel> targets, std::vector<double>& per_sample_loss);

/// Per-sample losses only.
template <typename T>
std::vector<double> sample_losses(const BasicModel<T>& model, const BasicTensor<T>& batch,
                                  std::span<const SoftLabel> targets);

struct SgdParams {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;

    friend bool operator==(const SgdParams&, const SgdParams&) = default;
};

/// Momentum SGD: v <- mu*v + (g + wd*p); p <- p - lr*v. Velocity is owned here.
template <typename T>
class SgdOptimizer {
public:
    explicit SgdOptimizer(SgdParams params = {}) : params_(params) {}

    /// Applies one update in place. Throws NumericalError, leaving the model
    /// untouched, if any gradient is non-finite.
    BasicModel<T>& step(BasicModel<T>& model, const ParamList<T>& grads);

    SgdParams& params() noexcept { return params_; }
    const SgdParams& params() const noexcept { return params_; }

private:
    SgdParams params_;
    ParamList<T> velocity_;
};

using Sgd = SgdOptimizer<float>;

// Checkpoint: "ALNN", u32 version, u32 layer count, u32 input rank + dims,
// then per layer u32 kind, u32 units, u32 kernel, u32 tensor count, per tensor
// u32 rank + dims, followed by its little-endian f32 payload.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

} // namespace autolabel
