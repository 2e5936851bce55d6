#include "han/network.hpp"

#include <cmath>

namespace han {

ActivationTrace::ActivationTrace(int layer_size, int window) : window_(window) {
    if (layer_size < 1) throw ConfigError("activation trace needs layer_size >= 1");
    if (window < 1) throw ConfigError("activation trace needs window >= 1");
    slots_ = Matrix::Zero(window, layer_size);
}

void ActivationTrace::push(const Vector& activation) {
    if (activation.size() != slots_.cols())
        throw ConfigError("activation trace push: size mismatch");
    slots_.row(cursor_) = activation.transpose();
    cursor_ = (cursor_ + 1) % window_;
}

Vector ActivationTrace::mean() const {
    return slots_.colwise().sum().transpose() / static_cast<double>(window_);
}

void ActivationTrace::reset() {
    slots_.setZero();
    cursor_ = 0;
}

PlasticNetwork::PlasticNetwork(NetworkShape shape, int trace_window, Activation activation)
    : shape_(std::move(shape)), activation_(activation), trace_window_(trace_window) {
    shape_.validate();
    if (trace_window_ < 1) throw ConfigError("trace window M must be >= 1");
    weights_.reserve(shape_.num_weight_layers());
    for (int k = 0; k < shape_.num_weight_layers(); ++k)
        weights_.push_back(Matrix::Zero(shape_.rows(k), shape_.cols(k)));
    traces_.reserve(shape_.num_layers());
    for (int l = 0; l < shape_.num_layers(); ++l)
        traces_.emplace_back(shape_.layer_sizes[l], trace_window_);
}

void PlasticNetwork::init_weights_uniform(double range, Rng& rng) {
    for (auto& w : weights_)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-range, range);
}

void PlasticNetwork::set_weights(std::vector<Matrix> weights) {
    if (static_cast<int>(weights.size()) != shape_.num_weight_layers())
        throw ConfigError("set_weights: wrong number of weight layers");
    for (int k = 0; k < shape_.num_weight_layers(); ++k)
        if (weights[k].rows() != shape_.rows(k) || weights[k].cols() != shape_.cols(k))
            throw ConfigError("set_weights: shape mismatch at layer " + std::to_string(k));
    weights_ = std::move(weights);
}

Vector PlasticNetwork::forward(const Vector& state) {
    if (state.size() != shape_.input_size())
        throw ConfigError("forward: state length does not match input layer size");
    if (!all_finite(state)) throw InputError("forward: non-finite input");

    Vector x = state;
    traces_[0].push(x);
    for (int k = 0; k < shape_.num_weight_layers(); ++k) {
        Vector pre = weights_[k] * x;
        x = activation_ == Activation::Tanh ? pre.array().tanh().matrix() : pre;
        traces_[k + 1].push(x);
    }
    return x;
}

Vector PlasticNetwork::averaged_activations(int layer) const {
    if (layer < 0 || layer >= shape_.num_layers())
        throw ConfigError("averaged_activations: invalid layer index");
    return traces_[layer].mean();
}

Vector PlasticNetwork::flatten_weights() const {
    Vector flat(shape_.num_connections());
    Eigen::Index at = 0;
    for (const auto& w : weights_)
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) flat(at++) = w(i, j);
    return flat;
}

NetworkSnapshot PlasticNetwork::snapshot(long step) const { return {step, flatten_weights()}; }

void PlasticNetwork::reset_traces() {
    for (auto& t : traces_) t.reset();
}

} // namespace han
