#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace cgan {

inline constexpr double kSigmoidClamp = 1e-12;

enum class OutputActivation { linear, sigmoid };

struct MlpSpec {
    std::vector<int> layer_dims; // input, hidden..., output
    OutputActivation output_activation = OutputActivation::linear;

    void validate() const;
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    int layer_count() const { return static_cast<int>(layer_dims.size()) - 1; }
    bool operator==(const MlpSpec&) const = default;
};

struct MlpParams {
    MlpSpec spec;
    std::vector<Eigen::MatrixXd> weights; // weights[l] is dims[l+1] x dims[l]
    std::vector<Eigen::VectorXd> biases;
};

// Xavier-uniform weights, zero biases, filled in a fixed order from one
// seeded engine so the same seed always yields the same network.
MlpParams mlp_init(const MlpSpec& spec, std::uint64_t seed);

struct ForwardCache {
    std::vector<Eigen::MatrixXd> activations; // input to each layer
    std::vector<Eigen::MatrixXd> preacts;
    Eigen::MatrixXd output;
};

// Columns are samples. Hidden layers use ReLU; the output layer is identity
// or a sigmoid clamped away from 0 and 1 so logs stay finite.
Eigen::MatrixXd forward(const MlpParams& p, const Eigen::MatrixXd& input, ForwardCache* cache = nullptr);
Eigen::VectorXd forward_one(const MlpParams& p, const Eigen::VectorXd& input);

struct MlpGradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    Eigen::MatrixXd input; // d loss / d input batch
};

MlpGradients zero_gradients(const MlpParams& p);
void accumulate(MlpGradients& dst, const MlpGradients& src, double scale = 1.0);

// output_grad carries d loss / d output per column. Parameter gradients sum
// over the batch; any mean is the caller's business.
MlpGradients backward(const MlpParams& p, const ForwardCache& cache, const Eigen::MatrixXd& output_grad);

struct AdamConfig {
    double alpha = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    long long t = 0;
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
};

AdamState make_adam_state(const MlpParams& p, const AdamConfig& cfg);

// Bias-corrected update: p -= alpha * mhat / (sqrt(vhat) + epsilon).
void adam_step(MlpParams& p, const MlpGradients& g, AdamState& st);

void write_mlp(std::ostream& out, const MlpParams& p);
MlpParams read_mlp(std::istream& in);
void write_adam(std::ostream& out, const AdamState& st);
AdamState read_adam(std::istream& in, const MlpParams& p);

} // namespace cgan
