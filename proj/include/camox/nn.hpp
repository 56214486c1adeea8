#pragma once
// Neural network kernels for the SpO2 regressor: valid 2-D convolution,
// dense layers, ReLU, MSE + L2 loss, reverse-mode gradients, Adam with
// step decay, and checkpoint serialization.
//
// Architecture: three conv layers (first 3x3, then 1x3 once the channel
// axis has collapsed to height 1), two dense layers, ReLU everywhere but
// the final linear output.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "camox/core.hpp"

namespace camox::nn {

// ---- generic tensor ops (shape-checked; used directly by tests) ------------

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> s);
    std::size_t size() const { return data.size(); }
};

// Valid cross-correlation, stride 1. input (c_in, h, w), kernel
// (c_out, c_in, kh, kw), bias (c_out) -> output (c_out, h-kh+1, w-kw+1).
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias);

// y = W x + b with W (out, in)
Tensor dense_forward(const Tensor& weights, const Tensor& bias, const Tensor& x);

// ---- network ----------------------------------------------------------------

struct Arch {
    int in_h = 3;
    int in_w = kWindowFrames;
    std::array<int, 3> conv_ch{8, 16, 32};
    int fc_hidden = 64;

    // first conv is 3x3 and collapses the height axis; later convs are 1x3
    int w1() const { return in_w - 2; }
    int w2() const { return w1() - 2; }
    int w3() const { return w2() - 2; }
    int flat() const { return conv_ch[2] * w3(); }
    void validate() const;

    bool operator==(const Arch&) const = default;
};

struct ParamBlock {
    std::size_t offset = 0;
    std::size_t count = 0;
    bool is_weight = false;  // biases are excluded from the L2 penalty
};

// c1w c1b c2w c2b c3w c3b f1w f1b f2w f2b
std::array<ParamBlock, 10> param_layout(const Arch& arch);
std::size_t param_count(const Arch& arch);

struct Network {
    Arch arch;
    std::vector<double> params;
    ChannelStats stats;  // frozen at train time; inputs must be standardized with these

    double* block(int i);
    const double* block(int i) const;
};

// Glorot-uniform weights, zero biases, deterministic in seed.
Network make_network(const Arch& arch, std::uint64_t seed);

// Scratch buffers for one forward/backward pass; reuse across samples.
struct Workspace {
    explicit Workspace(const Arch& arch);

    std::vector<double> z1, a1, z2, a2, z3, a3, z4, a4;
    std::vector<double> dz1, dz2, dz3, dz4, da1, da2, da3, da4;
};

// Scalar prediction for a standardized 3 x 90 window (row-major).
double forward(const Network& net, const double* window, Workspace& ws);
double forward(const Network& net, const double* window);

// Inference helper; clamps to [0, 100] when requested.
double predict(const Network& net, const double* standardized_window, bool clamp);

struct LossValue {
    double mse = 0.0;
    double l2_penalty = 0.0;
    double total = 0.0;
};

// mse = mean squared error; l2_penalty = l2 * sum of squared weights.
LossValue loss_value(const std::vector<double>& predictions, const std::vector<double>& labels,
                     const Network& net, double l2);

double l2_sum_of_squares(const Network& net);

// Gradients of (mse + l2 * sum w^2) over a batch of standardized windows.
// grads is resized/zeroed; returns the batch loss and fills predictions.
LossValue forward_backward(const Network& net, const std::vector<const double*>& windows,
                           const std::vector<double>& labels, double l2,
                           std::vector<double>& grads, std::vector<double>& predictions,
                           Workspace& ws);

// ---- optimizer ----------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double l2 = 0.1;
    int decay_epoch = 80;
    double decay_factor = 0.1;
};

struct AdamState {
    AdamConfig cfg;
    std::uint64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamState(AdamConfig c) : cfg(c) {}

    // epoch is 0-based; epochs >= decay_epoch use lr * decay_factor
    double effective_lr(int epoch) const {
        return epoch >= cfg.decay_epoch ? cfg.lr * cfg.decay_factor : cfg.lr;
    }
    void update(std::vector<double>& params, const std::vector<double>& grads, int epoch);
};

// ---- checkpoints ----------------------------------------------------------------

// "CAMOXNN1" container: magic, JSON header (shapes, channel stats, config
// echo), then the flat little-endian float64 parameter array.
void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const nlohmann::json& config_echo);

struct Checkpoint {
    Network net;
    nlohmann::json config_echo;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace camox::nn
