#include "autolabel/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "autolabel/kernels.hpp"

namespace autolabel {

std::string to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2: return "maxpool2";
    case LayerKind::flatten: return "flatten";
    }
    return "unknown";
}

std::vector<LayerSpec> mlp_architecture(std::span<const std::size_t> hidden, std::size_t classes) {
    std::vector<LayerSpec> layers{LayerSpec::flatten()};
    for (auto h : hidden) {
        layers.push_back(LayerSpec::dense(h));
        layers.push_back(LayerSpec::relu());
    }
    layers.push_back(LayerSpec::dense(classes));
    return layers;
}

std::vector<LayerSpec> convnet_architecture(std::size_t c1, std::size_t c2, std::size_t hidden,
                                            std::size_t classes) {
    return {LayerSpec::conv(c1),      LayerSpec::relu(),         LayerSpec::maxpool(),
            LayerSpec::conv(c2),      LayerSpec::relu(),         LayerSpec::maxpool(),
            LayerSpec::flatten(),     LayerSpec::dense(hidden),  LayerSpec::relu(),
            LayerSpec::dense(classes)};
}

// ---------------------------------------------------------------------------
// Graph construction

template <typename T>
BasicModel<T>::BasicModel(Shape input_shape, std::vector<LayerSpec> layers, Rng& rng)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    build(true);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& spec = layers_[i];
        if (spec.kind != LayerKind::dense && spec.kind != LayerKind::conv2d) continue;
        auto& w = params_[nodes_[i].first_param];
        const double fan_in = static_cast<double>(w.dim(1));
        const double bound = std::sqrt(6.0 / fan_in);
        for (auto& v : w.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
    }
}

template <typename T>
BasicModel<T>::BasicModel(Shape input_shape, std::vector<LayerSpec> layers, ParamList<T> params)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    build(true);
    if (params.size() != params_.size())
        throw InvalidInput("expected " + std::to_string(params_.size()) + " parameter tensors, got " +
                           std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].shape() != params_[i].shape())
            throw InvalidInput("parameter " + std::to_string(i) + " has shape " + shape_string(params[i].shape()) +
                               ", expected " + shape_string(params_[i].shape()));
    }
    params_ = std::move(params);
}

template <typename T>
void BasicModel<T>::build(bool allocate) {
    if (input_shape_.empty() || shape_size(input_shape_) == 0) throw InvalidConfig("model input shape is empty");
    if (layers_.empty() || layers_.back().kind != LayerKind::dense)
        throw InvalidConfig("model must end in a dense layer");
    nodes_.clear();
    if (allocate) params_.clear();
    Shape cur = input_shape_;
    for (const auto& spec : layers_) {
        Node node;
        node.in_shape = cur;
        node.first_param = params_.size();
        switch (spec.kind) {
        case LayerKind::dense: {
            if (cur.size() != 1) throw InvalidConfig("dense layer needs a flat input, got " + shape_string(cur));
            if (spec.units == 0) throw InvalidConfig("dense layer with zero units");
            if (allocate) {
                params_.emplace_back(Shape{spec.units, cur[0]});
                params_.emplace_back(Shape{spec.units});
            }
            cur = {spec.units};
            break;
        }
        case LayerKind::conv2d: {
            if (cur.size() != 3) throw InvalidConfig("conv layer needs a C x H x W input, got " + shape_string(cur));
            if (spec.units == 0 || spec.kernel % 2 == 0)
                throw InvalidConfig("conv layer needs output channels and an odd kernel");
            if (allocate) {
                params_.emplace_back(Shape{spec.units, cur[0] * spec.kernel * spec.kernel});
                params_.emplace_back(Shape{spec.units});
            }
            cur = {spec.units, cur[1], cur[2]};
            break;
        }
        case LayerKind::relu: break;
        case LayerKind::maxpool2: {
            if (cur.size() != 3 || cur[1] < 2 || cur[2] < 2)
                throw InvalidConfig("max-pool needs a C x H x W input of at least 2 x 2, got " + shape_string(cur));
            cur = {cur[0], cur[1] / 2, cur[2] / 2};
            break;
        }
        case LayerKind::flatten: cur = {shape_size(cur)}; break;
        default: throw InvalidConfig("unknown layer kind " + std::to_string(static_cast<std::uint32_t>(spec.kind)));
        }
        node.out_shape = cur;
        nodes_.push_back(std::move(node));
    }
    num_classes_ = cur[0];
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

template <typename T>
ParamList<T> BasicModel<T>::zeros_like_parameters() const {
    ParamList<T> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.emplace_back(p.shape());
    return out;
}

template <typename T>
void BasicModel<T>::check_batch(const BasicTensor<T>& batch) const {
    const auto& s = batch.shape();
    const bool ok = s.size() == input_shape_.size() + 1 && s[0] > 0 &&
                    std::equal(input_shape_.begin(), input_shape_.end(), s.begin() + 1);
    if (!ok)
        throw InvalidInput("batch shape " + shape_string(s) + " does not match model input " +
                           shape_string(input_shape_));
}

// ---------------------------------------------------------------------------
// Forward

template <typename T>
BasicTensor<T> BasicModel<T>::logits(const BasicTensor<T>& batch, Tape<T>* tape) const {
    check_batch(batch);
    const std::size_t nb = batch.dim(0);
    if (tape) {
        tape->inputs.clear();
        tape->argmax.assign(layers_.size(), {});
    }
    BasicTensor<T> cur = batch;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const auto& spec = layers_[li];
        const auto& node = nodes_[li];
        Shape out_shape{nb};
        out_shape.insert(out_shape.end(), node.out_shape.begin(), node.out_shape.end());
        BasicTensor<T> next;
        switch (spec.kind) {
        case LayerKind::dense: {
            const auto& w = params_[node.first_param];
            const auto& b = params_[node.first_param + 1];
            const std::size_t in = node.in_shape[0];
            const std::size_t out = spec.units;
            next = BasicTensor<T>(out_shape);
            kernels::matmul_nt(cur.data(), w.data(), next.data(), nb, out, in);
            for (std::size_t i = 0; i < nb; ++i)
                for (std::size_t o = 0; o < out; ++o) next[i * out + o] += b[o];
            break;
        }
        case LayerKind::conv2d: {
            const auto& w = params_[node.first_param];
            const auto& b = params_[node.first_param + 1];
            const kernels::ConvGeometry g{node.in_shape[0], node.in_shape[1], node.in_shape[2], spec.kernel};
            const std::size_t bp = nb * g.pixels();
            std::vector<T> cols(g.patch() * bp);
            kernels::im2col(cur.data(), cols.data(), nb, g);
            std::vector<T> tmp(spec.units * bp);
            kernels::matmul_nn(w.data(), cols.data(), tmp.data(), spec.units, bp, g.patch());
            next = BasicTensor<T>(out_shape);
            const std::size_t pixels = g.pixels();
            for (std::size_t i = 0; i < nb; ++i)
                for (std::size_t co = 0; co < spec.units; ++co) {
                    const T* src = tmp.data() + co * bp + i * pixels;
                    T* dst = next.data() + (i * spec.units + co) * pixels;
                    for (std::size_t p = 0; p < pixels; ++p) dst[p] = src[p] + b[co];
                }
            break;
        }
        case LayerKind::relu: {
            next = cur;
            for (auto& v : next.storage()) v = v > T{0} ? v : T{0};
            break;
        }
        case LayerKind::maxpool2: {
            next = BasicTensor<T>(out_shape);
            std::vector<std::size_t> argmax(next.size());
            kernels::maxpool2_forward(cur.data(), next.data(), argmax.data(), nb * node.in_shape[0],
                                      node.in_shape[1], node.in_shape[2]);
            if (tape) tape->argmax[li] = std::move(argmax);
            break;
        }
        case LayerKind::flatten: {
            next = cur;
            next.reshape(out_shape);
            break;
        }
        }
        if (tape) tape->inputs.push_back(std::move(cur));
        cur = std::move(next);
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Backward

template <typename T>
void BasicModel<T>::backward(const Tape<T>& tape, const BasicTensor<T>& grad_logits, ParamList<T>* param_grads,
                             BasicTensor<T>* input_grad) const {
    if (tape.inputs.size() != layers_.size()) throw InvalidInput("tape does not belong to this model");
    const std::size_t nb = tape.inputs.front().dim(0);
    if (grad_logits.shape() != Shape{nb, num_classes_})
        throw InvalidInput("logit gradient shape " + shape_string(grad_logits.shape()) + " does not match batch");
    if (param_grads && param_grads->size() != params_.size()) *param_grads = zeros_like_parameters();

    BasicTensor<T> g = grad_logits;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const auto& spec = layers_[li];
        const auto& node = nodes_[li];
        const auto& x = tape.inputs[li];
        const bool need_input = li > 0 || input_grad != nullptr;
        BasicTensor<T> gin;
        switch (spec.kind) {
        case LayerKind::dense: {
            const auto& w = params_[node.first_param];
            const std::size_t in = node.in_shape[0];
            const std::size_t out = spec.units;
            if (param_grads) {
                auto& dw = (*param_grads)[node.first_param];
                auto& db = (*param_grads)[node.first_param + 1];
                kernels::matmul_tn(g.data(), x.data(), dw.data(), out, in, nb);
                for (std::size_t o = 0; o < out; ++o) {
                    T acc{0};
                    for (std::size_t i = 0; i < nb; ++i) acc += g[i * out + o];
                    db[o] = acc;
                }
            }
            if (need_input) {
                gin = BasicTensor<T>(x.shape());
                kernels::matmul_nn(g.data(), w.data(), gin.data(), nb, in, out);
            }
            break;
        }
        case LayerKind::conv2d: {
            const auto& w = params_[node.first_param];
            const kernels::ConvGeometry geo{node.in_shape[0], node.in_shape[1], node.in_shape[2], spec.kernel};
            const std::size_t pixels = geo.pixels();
            const std::size_t bp = nb * pixels;
            const std::size_t co_n = spec.units;
            std::vector<T> dy(co_n * bp);
            for (std::size_t i = 0; i < nb; ++i)
                for (std::size_t co = 0; co < co_n; ++co) {
                    const T* src = g.data() + (i * co_n + co) * pixels;
                    std::copy(src, src + pixels, dy.data() + co * bp + i * pixels);
                }
            if (param_grads) {
                std::vector<T> cols(geo.patch() * bp);
                kernels::im2col(x.data(), cols.data(), nb, geo);
                auto& dw = (*param_grads)[node.first_param];
                auto& db = (*param_grads)[node.first_param + 1];
                kernels::matmul_nt(dy.data(), cols.data(), dw.data(), co_n, geo.patch(), bp);
                for (std::size_t co = 0; co < co_n; ++co) {
                    T acc{0};
                    const T* row = dy.data() + co * bp;
                    for (std::size_t j = 0; j < bp; ++j) acc += row[j];
                    db[co] = acc;
                }
            }
            if (need_input) {
                std::vector<T> dcols(geo.patch() * bp);
                kernels::matmul_tn(w.data(), dy.data(), dcols.data(), geo.patch(), bp, co_n);
                gin = BasicTensor<T>(x.shape());
                kernels::col2im(dcols.data(), gin.data(), nb, geo);
            }
            break;
        }
        case LayerKind::relu: {
            if (need_input) {
                gin = g;
                for (std::size_t i = 0; i < gin.size(); ++i)
                    if (!(x[i] > T{0})) gin[i] = T{0};
            }
            break;
        }
        case LayerKind::maxpool2: {
            if (need_input) {
                gin = BasicTensor<T>(x.shape());
                kernels::maxpool2_backward(g.data(), tape.argmax[li].data(), gin.data(), nb * node.in_shape[0],
                                           node.in_shape[1], node.in_shape[2]);
            }
            break;
        }
        case LayerKind::flatten: {
            if (need_input) {
                gin = std::move(g);
                gin.reshape(x.shape());
            }
            break;
        }
        }
        if (!need_input) break;
        g = std::move(gin);
    }
    if (input_grad) *input_grad = std::move(g);
}

template <typename T>
std::vector<std::uint32_t> BasicModel<T>::activation_pattern(const Tape<T>& tape) const {
    std::vector<std::uint32_t> pattern;
    for (std::size_t li = 0; li < layers_.size() && li < tape.inputs.size(); ++li) {
        if (layers_[li].kind == LayerKind::relu) {
            for (const auto v : tape.inputs[li].storage()) pattern.push_back(v > T{0} ? 1U : 0U);
        } else if (layers_[li].kind == LayerKind::maxpool2) {
            for (const auto idx : tape.argmax[li]) pattern.push_back(static_cast<std::uint32_t>(idx));
        }
    }
    return pattern;
}

template class BasicModel<float>;
template class BasicModel<double>;

// ---------------------------------------------------------------------------
// Predictions and loss

template <typename T>
BasicTensor<T> stack(std::span<const Image> images) {
    if (images.empty()) throw InvalidInput("cannot stack an empty image list");
    const Shape& s = images.front().shape();
    Shape bs{images.size()};
    bs.insert(bs.end(), s.begin(), s.end());
    BasicTensor<T> out(bs);
    const std::size_t per = shape_size(s);
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].shape() != s)
            throw InvalidInput("image " + std::to_string(i) + " has shape " + shape_string(images[i].shape()) +
                               ", expected " + shape_string(s));
        std::copy(images[i].storage().begin(), images[i].storage().end(), out.data() + i * per);
    }
    return out;
}

template BasicTensor<float> stack<float>(std::span<const Image>);
template BasicTensor<double> stack<double>(std::span<const Image>);

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) return p;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        p[k] = std::exp(logits[k] - mx);
        sum += p[k];
    }
    for (auto& v : p) v /= sum;
    return p;
}

Prediction make_prediction(std::span<const double> logits) {
    Prediction pred;
    pred.probabilities = softmax(logits);
    const auto it = std::max_element(pred.probabilities.begin(), pred.probabilities.end());
    pred.predicted_class = static_cast<std::size_t>(std::distance(pred.probabilities.begin(), it));
    pred.confidence = *it;
    return pred;
}

namespace {

template <typename T>
std::vector<double> logit_row(const BasicTensor<T>& logits, std::size_t i) {
    const std::size_t k = logits.dim(1);
    return std::vector<double>(logits.data() + i * k, logits.data() + (i + 1) * k);
}

template <typename T>
void check_targets(const BasicTensor<T>& batch, std::span<const SoftLabel> targets, std::size_t classes) {
    if (targets.size() != batch.dim(0))
        throw InvalidInput("got " + std::to_string(targets.size()) + " targets for a batch of " +
                           std::to_string(batch.dim(0)));
    for (const auto& t : targets) {
        if (t.size() != classes)
            throw InvalidLabel("target has " + std::to_string(t.size()) + " classes, model has " +
                               std::to_string(classes));
        check_simplex(t);
    }
}

} // namespace

template <typename T>
std::vector<Prediction> forward(const BasicModel<T>& model, const BasicTensor<T>& batch) {
    const auto z = model.logits(batch);
    std::vector<Prediction> out;
    out.reserve(batch.dim(0));
    for (std::size_t i = 0; i < batch.dim(0); ++i) out.push_back(make_prediction(logit_row(z, i)));
    return out;
}

template std::vector<Prediction> forward<float>(const Model&, const Tensor&);
template std::vector<Prediction> forward<double>(const ModelD&, const BasicTensor<double>&);

std::vector<Prediction> forward(const Model& model, std::span<const Image> images) {
    return forward(model, stack<float>(images));
}

void check_simplex(std::span<const double> target, double tol) {
    double sum = 0.0;
    for (const double v : target) {
        if (!std::isfinite(v) || v < -tol) throw InvalidLabel("soft label has a negative or non-finite entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > tol) throw InvalidLabel("soft label sums to " + std::to_string(sum));
}

double loss_soft_ce(const Prediction& prediction, std::span<const double> target) {
    if (target.size() != prediction.probabilities.size())
        throw InvalidLabel("target has " + std::to_string(target.size()) + " classes, prediction has " +
                           std::to_string(prediction.probabilities.size()));
    check_simplex(target);
    double loss = 0.0;
    for (std::size_t k = 0; k < target.size(); ++k) {
        if (target[k] == 0.0) continue;
        loss -= target[k] * std::log(std::max(prediction.probabilities[k], kLogFloor));
    }
    return loss;
}

template <typename T>
GradientResult<T> gradients(const BasicModel<T>& model, const BasicTensor<T>& batch,
                            std::span<const SoftLabel> targets, bool want_input_grad) {
    check_targets(batch, targets, model.num_classes());
    Tape<T> tape;
    const auto z = model.logits(batch, &tape);
    const std::size_t nb = batch.dim(0);
    const std::size_t k = model.num_classes();
    BasicTensor<T> dz(Shape{nb, k});
    GradientResult<T> result;
    double total = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
        const auto pred = make_prediction(logit_row(z, i));
        total += loss_soft_ce(pred, targets[i]);
        for (std::size_t c = 0; c < k; ++c)
            dz[i * k + c] = static_cast<T>((pred.probabilities[c] - targets[i][c]) / static_cast<double>(nb));
    }
    result.mean_loss = total / static_cast<double>(nb);
    result.grads = model.zeros_like_parameters();
    model.backward(tape, dz, &result.grads, want_input_grad ? &result.input_grad : nullptr);
    return result;
}

template GradientResult<float> gradients<float>(const Model&, const Tensor&, std::span<const SoftLabel>, bool);
template GradientResult<double> gradients<double>(const ModelD&, const BasicTensor<double>&,
                                                  std::span<const SoftLabel>, bool);

template <typename T>
BasicTensor<T> input_gradients(const BasicModel<T>& model, const BasicTensor<T>& batch,
                               std::span<const SoftLabel> targets, std::vector<double>& per_sample_loss) {
    check_targets(batch, targets, model.num_classes());
    Tape<T> tape;
    const auto z = model.logits(batch, &tape);
    const std::size_t nb = batch.dim(0);
    const std::size_t k = model.num_classes();
    BasicTensor<T> dz(Shape{nb, k});
    per_sample_loss.assign(nb, 0.0);
    for (std::size_t i = 0; i < nb; ++i) {
        const auto pred = make_prediction(logit_row(z, i));
        per_sample_loss[i] = loss_soft_ce(pred, targets[i]);
        for (std::size_t c = 0; c < k; ++c) dz[i * k + c] = static_cast<T>(pred.probabilities[c] - targets[i][c]);
    }
    BasicTensor<T> grad;
    model.backward(tape, dz, nullptr, &grad);
    return grad;
}

template Tensor input_gradients<float>(const Model&, const Tensor&, std::span<const SoftLabel>,
                                       std::vector<double>&);
template BasicTensor<double> input_gradients<double>(const ModelD&, const BasicTensor<double>&,
                                                     std::span<const SoftLabel>, std::vector<double>&);

template <typename T>
std::vector<double> sample_losses(const BasicModel<T>& model, const BasicTensor<T>& batch,
                                  std::span<const SoftLabel> targets) {
    check_targets(batch, targets, model.num_classes());
    const auto preds = forward(model, batch);
    std::vector<double> out(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) out[i] = loss_soft_ce(preds[i], targets[i]);
    return out;
}

template std::vector<double> sample_losses<float>(const Model&, const Tensor&, std::span<const SoftLabel>);
template std::vector<double> sample_losses<double>(const ModelD&, const BasicTensor<double>&,
                                                   std::span<const SoftLabel>);

// ---------------------------------------------------------------------------
// SGD

template <typename T>
BasicModel<T>& SgdOptimizer<T>::step(BasicModel<T>& model, const ParamList<T>& grads) {
    auto& params = model.parameters();
    if (grads.size() != params.size()) throw InvalidInput("gradient list does not match model parameters");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].shape() != params[i].shape())
            throw InvalidInput("gradient " + std::to_string(i) + " has shape " + shape_string(grads[i].shape()));
        for (const auto v : grads[i].storage())
            if (!std::isfinite(static_cast<double>(v))) throw NumericalError("non-finite gradient, epoch aborted");
    }
    if (velocity_.size() != params.size()) velocity_ = model.zeros_like_parameters();
    const double lr = params_.lr;
    const double mu = params_.momentum;
    const double wd = params_.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].storage();
        auto& v = velocity_[i].storage();
        const auto& g = grads[i].storage();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double d = static_cast<double>(g[j]) + wd * static_cast<double>(p[j]);
            const double vel = mu * static_cast<double>(v[j]) + d;
            v[j] = static_cast<T>(vel);
            p[j] = static_cast<T>(static_cast<double>(p[j]) - lr * vel);
        }
    }
    return model;
}

template class SgdOptimizer<float>;
template class SgdOptimizer<double>;

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

class Reader {
public:
    explicit Reader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        const auto* b = bytes_.data() + pos_;
        pos_ += 4;
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    void expect(const char* magic, std::size_t n) {
        need(n, "magic");
        if (std::memcmp(bytes_.data() + pos_, magic, n) != 0) throw FormatError("bad checkpoint magic", pos_);
        pos_ += n;
    }
    std::uint64_t offset() const { return pos_; }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) {
        if (pos_ + n > bytes_.size()) throw FormatError(std::string("truncated checkpoint reading ") + what, pos_);
    }
    std::vector<unsigned char> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidConfig("cannot open " + path.string() + " for writing");
    os.write("ALNN", 4);
    put_u32(os, kCheckpointVersion);
    put_u32(os, static_cast<std::uint32_t>(model.layers().size()));
    put_u32(os, static_cast<std::uint32_t>(model.input_shape().size()));
    for (auto d : model.input_shape()) put_u32(os, static_cast<std::uint32_t>(d));
    std::size_t pi = 0;
    for (const auto& spec : model.layers()) {
        put_u32(os, static_cast<std::uint32_t>(spec.kind));
        put_u32(os, static_cast<std::uint32_t>(spec.units));
        put_u32(os, static_cast<std::uint32_t>(spec.kernel));
        const std::uint32_t count =
            (spec.kind == LayerKind::dense || spec.kind == LayerKind::conv2d) ? 2U : 0U;
        put_u32(os, count);
        for (std::uint32_t t = 0; t < count; ++t, ++pi) {
            const auto& p = model.parameters()[pi];
            put_u32(os, static_cast<std::uint32_t>(p.rank()));
            for (auto d : p.shape()) put_u32(os, static_cast<std::uint32_t>(d));
            for (const float v : p.storage()) put_u32(os, std::bit_cast<std::uint32_t>(v));
        }
    }
    if (!os) throw InvalidConfig("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidConfig("cannot open checkpoint " + path.string());
    Reader r(std::vector<unsigned char>(std::istreambuf_iterator<char>(is), {}));
    r.expect("ALNN", 4);
    const auto version_at = r.offset();
    if (r.u32("version") != kCheckpointVersion) throw FormatError("unsupported checkpoint version", version_at);
    const auto layer_count = r.u32("layer count");
    const auto rank = r.u32("input rank");
    Shape input;
    for (std::uint32_t i = 0; i < rank; ++i) input.push_back(r.u32("input dim"));
    std::vector<LayerSpec> layers;
    ParamList<float> params;
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        const auto kind_at = r.offset();
        const auto kind = r.u32("layer kind");
        if (kind < 1 || kind > 5) throw FormatError("unknown layer kind " + std::to_string(kind), kind_at);
        LayerSpec spec{static_cast<LayerKind>(kind), r.u32("units"), r.u32("kernel")};
        layers.push_back(spec);
        const auto count = r.u32("tensor count");
        for (std::uint32_t t = 0; t < count; ++t) {
            const auto trank = r.u32("tensor rank");
            Shape s;
            for (std::uint32_t d = 0; d < trank; ++d) s.push_back(r.u32("tensor dim"));
            Tensor p(s);
            for (auto& v : p.storage()) v = r.f32("parameter payload");
            params.push_back(std::move(p));
        }
    }
    if (!r.at_end()) throw FormatError("trailing bytes after checkpoint", r.offset());
    try {
        return Model(std::move(input), std::move(layers), std::move(params));
    } catch (const Error& e) {
        throw FormatError(std::string("inconsistent checkpoint: ") + e.what(), 0);
    }
}

} // namespace autolabel
