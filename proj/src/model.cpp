#include "xmal/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "xmal/error.hpp"

namespace xmal {

std::string_view to_string(Modality m) { return m == Modality::Eeg ? "eeg" : "face"; }

void ModelConfig::validate() const {
    if (eeg_dim == 0 || face_dim == 0) throw ConfigError("model: input dimensions must be >= 1");
    if (embedding_dim == 0) throw ConfigError("model: embedding_dim must be >= 1");
    if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
    for (auto w : hidden)
        if (w == 0) throw ConfigError("model: hidden widths must be >= 1");
}

std::string encoder_weight_name(Modality m, std::size_t layer) {
    return "enc." + std::string(to_string(m)) + "." + std::to_string(layer) + ".w";
}

std::string encoder_bias_name(Modality m, std::size_t layer) {
    return "enc." + std::string(to_string(m)) + "." + std::to_string(layer) + ".b";
}

ModelParams::ModelParams(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    auto push = [this](std::string name, std::size_t rows, std::size_t cols) {
        names_.push_back(std::move(name));
        tensors_.emplace_back(rows, cols);
    };
    for (Modality m : {Modality::Eeg, Modality::Face}) {
        std::size_t in = config_.input_dim(m);
        for (std::size_t l = 0; l <= config_.hidden.size(); ++l) {
            const std::size_t out =
                l < config_.hidden.size() ? config_.hidden[l] : config_.embedding_dim;
            push(encoder_weight_name(m, l), in, out);
            push(encoder_bias_name(m, l), 1, out);
            in = out;
        }
    }
    push("head.task.w", config_.embedding_dim, config_.num_classes);
    push("head.task.b", 1, config_.num_classes);
    push("head.rel.eeg.w", config_.embedding_dim, 1);
    push("head.rel.eeg.b", 1, 1);
    push("head.rel.face.w", config_.embedding_dim, 1);
    push("head.rel.face.b", 1, 1);
}

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
    ModelParams p(config);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < p.tensors_.size(); ++i) {
        const auto& name = p.names_[i];
        if (name.ends_with(".b")) continue;
        Tensor& w = p.tensors_[i];
        const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        std::uniform_real_distribution<double> dist(-a, a);
        for (auto& x : w.data()) x = dist(rng);
    }
    return p;
}

std::size_t ModelParams::index_of(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::out_of_range("no parameter named " + std::string(name));
    return static_cast<std::size_t>(it - names_.begin());
}

Tensor& ModelParams::at(std::string_view name) { return tensors_[index_of(name)]; }
const Tensor& ModelParams::at(std::string_view name) const { return tensors_[index_of(name)]; }

bool ModelParams::all_finite() const noexcept {
    return std::all_of(tensors_.begin(), tensors_.end(),
                       [](const Tensor& t) { return t.all_finite(); });
}

BoundModel::BoundModel(ad::Tape& tape, const ModelParams& params)
    : tape_(&tape), params_(&params) {
    leaves_.reserve(params.tensors().size());
    for (const auto& t : params.tensors()) leaves_.push_back(tape.leaf(t));
}

ad::Var BoundModel::layer(std::string_view w, std::string_view b, ad::Var x) const {
    return ad::add(ad::matmul(x, leaves_[params_->index_of(w)]), leaves_[params_->index_of(b)]);
}

ad::Var BoundModel::encode(Modality m, ad::Var x) const {
    const auto& cfg = params_->config();
    if (x.cols() != cfg.input_dim(m)) {
        throw ShapeError("encode(" + std::string(to_string(m)) + "): expected width " +
                         std::to_string(cfg.input_dim(m)) + ", got " + std::to_string(x.cols()));
    }
    ad::Var h = x;
    const std::size_t depth = params_->encoder_depth();
    for (std::size_t l = 0; l < depth; ++l) {
        h = layer(encoder_weight_name(m, l), encoder_bias_name(m, l), h);
        if (l + 1 < depth) h = ad::relu(h);
    }
    return h;
}

ad::Var BoundModel::task_logits(ad::Var z_eeg) const {
    if (z_eeg.cols() != params_->config().embedding_dim) {
        throw ShapeError("predict: expected embedding width " +
                         std::to_string(params_->config().embedding_dim) + ", got " +
                         std::to_string(z_eeg.cols()));
    }
    return layer("head.task.w", "head.task.b", z_eeg);
}

ad::Var BoundModel::predict(ad::Var z_eeg) const { return ad::row_softmax(task_logits(z_eeg)); }

ad::Var BoundModel::reliability(Modality m, ad::Var z) const {
    if (z.cols() != params_->config().embedding_dim) {
        throw ShapeError("estimate_reliability: expected embedding width " +
                         std::to_string(params_->config().embedding_dim) + ", got " +
                         std::to_string(z.cols()));
    }
    const bool eeg = m == Modality::Eeg;
    return ad::sigmoid(layer(eeg ? "head.rel.eeg.w" : "head.rel.face.w",
                             eeg ? "head.rel.eeg.b" : "head.rel.face.b", z));
}

std::vector<Tensor> BoundModel::gradients() const {
    std::vector<Tensor> out;
    out.reserve(leaves_.size());
    for (auto v : leaves_) out.push_back(v.grad());
    return out;
}

Tensor encode(const ModelParams& params, Modality m, const Tensor& x) {
    ad::Tape tape;
    BoundModel model(tape, params);
    return model.encode(m, tape.constant(x)).value();
}

Tensor predict(const ModelParams& params, const Tensor& z_eeg) {
    ad::Tape tape;
    BoundModel model(tape, params);
    return model.predict(tape.constant(z_eeg)).value();
}

Tensor estimate_reliability(const ModelParams& params, Modality m, const Tensor& z) {
    ad::Tape tape;
    BoundModel model(tape, params);
    return model.reliability(m, tape.constant(z)).value();
}

Tensor predict_from_eeg(const ModelParams& params, const Tensor& x_eeg) {
    ad::Tape tape;
    BoundModel model(tape, params);
    return model.predict(model.encode(Modality::Eeg, tape.constant(x_eeg))).value();
}

}  // namespace xmal
