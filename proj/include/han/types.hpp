#ifndef HAN_TYPES_HPP
#define HAN_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace han {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error hierarchy mirrored by the C API status codes.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct InputError : std::runtime_error {
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Layer sizes of a feedforward controller, input first, output last.
struct NetworkShape {
    std::vector<int> layer_sizes;

    NetworkShape() = default;
    explicit NetworkShape(std::vector<int> sizes) : layer_sizes(std::move(sizes)) { validate(); }

    void validate() const {
        if (layer_sizes.size() < 2)
            throw ConfigError("network shape needs at least an input and an output layer");
        for (int s : layer_sizes)
            if (s < 1) throw ConfigError("every layer size must be >= 1");
    }

    int num_layers() const { return static_cast<int>(layer_sizes.size()); }
    int num_weight_layers() const { return num_layers() - 1; }
    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    int rows(int weight_layer) const { return layer_sizes[weight_layer + 1]; }
    int cols(int weight_layer) const { return layer_sizes[weight_layer]; }

    /// Total connection count: sum over weight layers of rows*cols.
    long num_connections() const {
        long n = 0;
        for (int k = 0; k < num_weight_layers(); ++k) n += static_cast<long>(rows(k)) * cols(k);
        return n;
    }

    bool operator==(const NetworkShape& other) const { return layer_sizes == other.layer_sizes; }
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

} // namespace han

#endif
