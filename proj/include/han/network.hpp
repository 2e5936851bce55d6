#ifndef HAN_NETWORK_HPP
#define HAN_NETWORK_HPP

#include "han/rng.hpp"
#include "han/types.hpp"

#include <cstdint>
#include <vector>

namespace han {

enum class Activation { Tanh, Identity };

/// Ring buffer over the last M activation vectors of one layer. Slots start
/// at zero, so the mean over the buffer is the zero-padded window mean until
/// M values have been pushed.
class ActivationTrace {
public:
    ActivationTrace() = default;
    ActivationTrace(int layer_size, int window);

    void push(const Vector& activation);
    Vector mean() const;
    void reset();

    int window() const { return window_; }
    int layer_size() const { return static_cast<int>(slots_.cols()); }

private:
    Matrix slots_; // window x layer_size
    int window_ = 1;
    int cursor_ = 0;
};

/// Flattened copy of all plastic weights at one control step. Flattening is
/// layer-major then row-major; this order is the on-disk contract consumed by
/// the analysis tooling.
struct NetworkSnapshot {
    long step = 0;
    Vector weights;
};

/// Feedforward tanh controller whose weights are mutated online by a
/// plasticity rule. Keeps a per-layer activation history (input layer
/// included) so update rules can use temporally averaged activations.
class PlasticNetwork {
public:
    PlasticNetwork(NetworkShape shape, int trace_window, Activation activation = Activation::Tanh);

    /// Initialize every weight from U(-range, range).
    void init_weights_uniform(double range, Rng& rng);
    void set_weights(std::vector<Matrix> weights);

    /// One control-rate pass: writes every layer's activation (input
    /// included) into its trace and returns the output activation.
    Vector forward(const Vector& state);

    /// Window mean of the stored activations for a layer (0 = input layer).
    Vector averaged_activations(int layer) const;

    NetworkSnapshot snapshot(long step = 0) const;
    Vector flatten_weights() const;

    void reset_traces();

    const NetworkShape& shape() const { return shape_; }
    int trace_window() const { return trace_window_; }
    Activation activation() const { return activation_; }

    Matrix& weights(int weight_layer) { return weights_[weight_layer]; }
    const Matrix& weights(int weight_layer) const { return weights_[weight_layer]; }
    int num_weight_layers() const { return shape_.num_weight_layers(); }

private:
    NetworkShape shape_;
    Activation activation_;
    int trace_window_;
    std::vector<Matrix> weights_;
    std::vector<ActivationTrace> traces_; // one per layer, index 0 = input
};

} // namespace han

#endif
