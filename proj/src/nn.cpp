#include "camox/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "camox/io_util.hpp"
#include "camox/kernels.hpp"
#include "camox/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");
static_assert(sizeof(double) == 8);

namespace camox::nn {

using nlohmann::json;

// ---- raw kernels shared by the Tensor API and the Network fast path ---------

namespace {

// valid cross-correlation, stride 1
void conv_fwd_raw(const double* in, int c_in, int h, int w, const double* kernel,
                  const double* bias, int c_out, int kh, int kw, double* out) {
    const auto& k = kern::active_backend();
    const int oh_n = h - kh + 1;
    const int ow_n = w - kw + 1;
    for (int oc = 0; oc < c_out; ++oc) {
        double* out_c = out + std::size_t(oc) * oh_n * ow_n;
        for (int i = 0; i < oh_n * ow_n; ++i) out_c[i] = bias[oc];
        for (int ic = 0; ic < c_in; ++ic) {
            const double* in_c = in + std::size_t(ic) * h * w;
            for (int i = 0; i < kh; ++i) {
                for (int j = 0; j < kw; ++j) {
                    const double wgt = kernel[((std::size_t(oc) * c_in + ic) * kh + i) * kw + j];
                    for (int oh = 0; oh < oh_n; ++oh) {
                        k.axpy(wgt, in_c + std::size_t(oh + i) * w + j,
                               out_c + std::size_t(oh) * ow_n, std::size_t(ow_n));
                    }
                }
            }
        }
    }
}

// accumulates into d_kernel/d_bias; d_in (when non-null) must be zeroed by the caller
void conv_bwd_raw(const double* in, int c_in, int h, int w, const double* kernel, int c_out,
                  int kh, int kw, const double* d_out, double* d_kernel, double* d_bias,
                  double* d_in) {
    const auto& k = kern::active_backend();
    const int oh_n = h - kh + 1;
    const int ow_n = w - kw + 1;
    for (int oc = 0; oc < c_out; ++oc) {
        const double* dout_c = d_out + std::size_t(oc) * oh_n * ow_n;
        d_bias[oc] += k.sum(dout_c, std::size_t(oh_n) * ow_n);
        for (int ic = 0; ic < c_in; ++ic) {
            const double* in_c = in + std::size_t(ic) * h * w;
            double* din_c = d_in == nullptr ? nullptr : d_in + std::size_t(ic) * h * w;
            for (int i = 0; i < kh; ++i) {
                for (int j = 0; j < kw; ++j) {
                    const std::size_t widx = ((std::size_t(oc) * c_in + ic) * kh + i) * kw + j;
                    double acc = 0.0;
                    for (int oh = 0; oh < oh_n; ++oh) {
                        acc += k.dot(dout_c + std::size_t(oh) * ow_n,
                                     in_c + std::size_t(oh + i) * w + j, std::size_t(ow_n));
                    }
                    d_kernel[widx] += acc;
                    if (din_c != nullptr) {
                        const double wgt = kernel[widx];
                        for (int oh = 0; oh < oh_n; ++oh) {
                            k.axpy(wgt, dout_c + std::size_t(oh) * ow_n,
                                   din_c + std::size_t(oh + i) * w + j, std::size_t(ow_n));
                        }
                    }
                }
            }
        }
    }
}

void dense_fwd_raw(const double* w, const double* b, int out_n, int in_n, const double* x,
                   double* y) {
    const auto& k = kern::active_backend();
    for (int r = 0; r < out_n; ++r) {
        y[r] = k.dot(w + std::size_t(r) * in_n, x, std::size_t(in_n)) + b[r];
    }
}

// d_w/d_b accumulate; d_x (when non-null) must be zeroed by the caller
void dense_bwd_raw(const double* w, int out_n, int in_n, const double* x, const double* d_y,
                   double* d_w, double* d_b, double* d_x) {
    const auto& k = kern::active_backend();
    for (int r = 0; r < out_n; ++r) {
        d_b[r] += d_y[r];
        k.axpy(d_y[r], x, d_w + std::size_t(r) * in_n, std::size_t(in_n));
        if (d_x != nullptr) {
            k.axpy(d_y[r], w + std::size_t(r) * in_n, d_x, std::size_t(in_n));
        }
    }
}

}  // namespace

// ---- Tensor API ---------------------------------------------------------------

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw ValidationError("tensor extent must be positive");
        n *= std::size_t(e);
    }
    data.assign(n, 0.0);
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    if (input.shape.size() != 3 || kernel.shape.size() != 4 || bias.shape.size() != 1) {
        throw ValidationError("conv2d expects input (c,h,w), kernel (o,c,kh,kw), bias (o)");
    }
    const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
    const int c_out = kernel.shape[0], kh = kernel.shape[2], kw = kernel.shape[3];
    if (kernel.shape[1] != c_in) throw ValidationError("conv2d channel mismatch");
    if (bias.shape[0] != c_out) throw ValidationError("conv2d bias length mismatch");
    if (kh > h || kw > w) throw ValidationError("conv2d kernel larger than input");

    Tensor out({c_out, h - kh + 1, w - kw + 1});
    conv_fwd_raw(input.data.data(), c_in, h, w, kernel.data.data(), bias.data.data(), c_out, kh,
                 kw, out.data.data());
    return out;
}

Tensor dense_forward(const Tensor& weights, const Tensor& bias, const Tensor& x) {
    if (weights.shape.size() != 2 || bias.shape.size() != 1 || x.shape.size() != 1) {
        throw ValidationError("dense expects weights (out,in), bias (out), x (in)");
    }
    const int out_n = weights.shape[0], in_n = weights.shape[1];
    if (x.shape[0] != in_n || bias.shape[0] != out_n) {
        throw ValidationError("dense dimension mismatch");
    }
    Tensor y({out_n});
    dense_fwd_raw(weights.data.data(), bias.data.data(), out_n, in_n, x.data.data(),
                  y.data.data());
    return y;
}

// ---- network --------------------------------------------------------------------

void Arch::validate() const {
    if (in_h != 3) throw ValidationError("input height must be 3 (RGB channel axis)");
    if (in_w < 7) throw ValidationError("input width too small for three valid convolutions");
    for (int c : conv_ch) {
        if (c <= 0) throw ValidationError("conv channel counts must be positive");
    }
    if (fc_hidden <= 0) throw ValidationError("hidden width must be positive");
}

std::array<ParamBlock, 10> param_layout(const Arch& arch) {
    const std::size_t c1w = std::size_t(arch.conv_ch[0]) * 1 * 3 * 3;
    const std::size_t c2w = std::size_t(arch.conv_ch[1]) * arch.conv_ch[0] * 1 * 3;
    const std::size_t c3w = std::size_t(arch.conv_ch[2]) * arch.conv_ch[1] * 1 * 3;
    const std::size_t f1w = std::size_t(arch.fc_hidden) * arch.flat();
    const std::size_t f2w = std::size_t(arch.fc_hidden);

    std::array<ParamBlock, 10> blocks{};
    const std::size_t counts[10] = {c1w, std::size_t(arch.conv_ch[0]),
                                    c2w, std::size_t(arch.conv_ch[1]),
                                    c3w, std::size_t(arch.conv_ch[2]),
                                    f1w, std::size_t(arch.fc_hidden),
                                    f2w, 1};
    std::size_t off = 0;
    for (int i = 0; i < 10; ++i) {
        blocks[i] = ParamBlock{off, counts[i], i % 2 == 0};
        off += counts[i];
    }
    return blocks;
}

std::size_t param_count(const Arch& arch) {
    const auto blocks = param_layout(arch);
    return blocks.back().offset + blocks.back().count;
}

double* Network::block(int i) { return params.data() + param_layout(arch)[i].offset; }
const double* Network::block(int i) const { return params.data() + param_layout(arch)[i].offset; }

Network make_network(const Arch& arch, std::uint64_t seed) {
    arch.validate();
    Network net;
    net.arch = arch;
    net.params.assign(param_count(arch), 0.0);

    Rng rng(derive_seed(seed, "init"));
    const auto blocks = param_layout(arch);
    // fan_in/fan_out per weight block, matching the layer shapes
    const double fans[5][2] = {
        {1.0 * 3 * 3, double(arch.conv_ch[0]) * 3 * 3},
        {double(arch.conv_ch[0]) * 3, double(arch.conv_ch[1]) * 3},
        {double(arch.conv_ch[1]) * 3, double(arch.conv_ch[2]) * 3},
        {double(arch.flat()), double(arch.fc_hidden)},
        {double(arch.fc_hidden), 1.0},
    };
    for (int b = 0; b < 5; ++b) {
        const double bound = std::sqrt(6.0 / (fans[b][0] + fans[b][1]));
        double* w = net.params.data() + blocks[2 * b].offset;
        for (std::size_t i = 0; i < blocks[2 * b].count; ++i) w[i] = rng.uniform(-bound, bound);
        // small positive biases keep rectified units off the kink at start
        double* bias = net.params.data() + blocks[2 * b + 1].offset;
        for (std::size_t i = 0; i < blocks[2 * b + 1].count; ++i) bias[i] = 0.02;
    }
    return net;
}

Workspace::Workspace(const Arch& arch) {
    const std::size_t n1 = std::size_t(arch.conv_ch[0]) * arch.w1();
    const std::size_t n2 = std::size_t(arch.conv_ch[1]) * arch.w2();
    const std::size_t n3 = std::size_t(arch.conv_ch[2]) * arch.w3();
    const std::size_t n4 = std::size_t(arch.fc_hidden);
    z1.resize(n1); a1.resize(n1); dz1.resize(n1); da1.resize(n1);
    z2.resize(n2); a2.resize(n2); dz2.resize(n2); da2.resize(n2);
    z3.resize(n3); a3.resize(n3); dz3.resize(n3); da3.resize(n3);
    z4.resize(n4); a4.resize(n4); dz4.resize(n4); da4.resize(n4);
}

double forward(const Network& net, const double* window, Workspace& ws) {
    const auto& k = kern::active_backend();
    const Arch& a = net.arch;

    conv_fwd_raw(window, 1, a.in_h, a.in_w, net.block(0), net.block(1), a.conv_ch[0], 3, 3,
                 ws.z1.data());
    k.relu(ws.z1.data(), ws.a1.data(), ws.z1.size());
    conv_fwd_raw(ws.a1.data(), a.conv_ch[0], 1, a.w1(), net.block(2), net.block(3), a.conv_ch[1],
                 1, 3, ws.z2.data());
    k.relu(ws.z2.data(), ws.a2.data(), ws.z2.size());
    conv_fwd_raw(ws.a2.data(), a.conv_ch[1], 1, a.w2(), net.block(4), net.block(5), a.conv_ch[2],
                 1, 3, ws.z3.data());
    k.relu(ws.z3.data(), ws.a3.data(), ws.z3.size());
    dense_fwd_raw(net.block(6), net.block(7), a.fc_hidden, a.flat(), ws.a3.data(), ws.z4.data());
    k.relu(ws.z4.data(), ws.a4.data(), ws.z4.size());
    return k.dot(net.block(8), ws.a4.data(), std::size_t(a.fc_hidden)) + net.block(9)[0];
}

double forward(const Network& net, const double* window) {
    Workspace ws(net.arch);
    return forward(net, window, ws);
}

double predict(const Network& net, const double* standardized_window, bool clamp) {
    const double y = forward(net, standardized_window);
    if (!clamp) return y;
    return std::min(100.0, std::max(0.0, y));
}

LossValue loss_value(const std::vector<double>& predictions, const std::vector<double>& labels,
                     const Network& net, double l2) {
    if (predictions.empty() || predictions.size() != labels.size()) {
        throw ValidationError("loss needs equal non-empty prediction/label lists");
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - labels[i];
        sq += d * d;
    }
    LossValue lv;
    lv.mse = sq / double(predictions.size());
    lv.l2_penalty = l2 * l2_sum_of_squares(net);
    lv.total = lv.mse + lv.l2_penalty;
    return lv;
}

double l2_sum_of_squares(const Network& net) {
    const auto& k = kern::active_backend();
    double acc = 0.0;
    for (const ParamBlock& b : param_layout(net.arch)) {
        if (b.is_weight) acc += k.sumsq(net.params.data() + b.offset, b.count);
    }
    return acc;
}

namespace {

// reverse pass for one sample; d_upstream = dL/dy
void backward_sample(const Network& net, const double* window, double d_upstream,
                     double* grads, Workspace& ws) {
    const auto& k = kern::active_backend();
    const Arch& a = net.arch;
    const auto blocks = param_layout(a);
    auto g = [&](int i) { return grads + blocks[i].offset; };

    // output layer
    g(9)[0] += d_upstream;
    k.axpy(d_upstream, ws.a4.data(), g(8), std::size_t(a.fc_hidden));
    std::fill(ws.da4.begin(), ws.da4.end(), 0.0);
    k.axpy(d_upstream, net.block(8), ws.da4.data(), std::size_t(a.fc_hidden));
    k.relu_grad(ws.z4.data(), ws.da4.data(), ws.dz4.data(), ws.z4.size());

    // hidden dense layer
    std::fill(ws.da3.begin(), ws.da3.end(), 0.0);
    dense_bwd_raw(net.block(6), a.fc_hidden, a.flat(), ws.a3.data(), ws.dz4.data(), g(6), g(7),
                  ws.da3.data());
    k.relu_grad(ws.z3.data(), ws.da3.data(), ws.dz3.data(), ws.z3.size());

    // conv stack
    std::fill(ws.da2.begin(), ws.da2.end(), 0.0);
    conv_bwd_raw(ws.a2.data(), a.conv_ch[1], 1, a.w2(), net.block(4), a.conv_ch[2], 1, 3,
                 ws.dz3.data(), g(4), g(5), ws.da2.data());
    k.relu_grad(ws.z2.data(), ws.da2.data(), ws.dz2.data(), ws.z2.size());

    std::fill(ws.da1.begin(), ws.da1.end(), 0.0);
    conv_bwd_raw(ws.a1.data(), a.conv_ch[0], 1, a.w1(), net.block(2), a.conv_ch[1], 1, 3,
                 ws.dz2.data(), g(2), g(3), ws.da1.data());
    k.relu_grad(ws.z1.data(), ws.da1.data(), ws.dz1.data(), ws.z1.size());

    conv_bwd_raw(window, 1, a.in_h, a.in_w, net.block(0), a.conv_ch[0], 3, 3, ws.dz1.data(),
                 g(0), g(1), nullptr);
}

}  // namespace

LossValue forward_backward(const Network& net, const std::vector<const double*>& windows,
                           const std::vector<double>& labels, double l2,
                           std::vector<double>& grads, std::vector<double>& predictions,
                           Workspace& ws) {
    if (windows.empty() || windows.size() != labels.size()) {
        throw ValidationError("batch needs equal non-empty window/label lists");
    }
    const auto& k = kern::active_backend();
    const std::size_t batch = windows.size();
    grads.assign(net.params.size(), 0.0);
    predictions.resize(batch);

    double sq = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const double y = forward(net, windows[i], ws);
        predictions[i] = y;
        const double err = y - labels[i];
        sq += err * err;
        backward_sample(net, windows[i], 2.0 * err / double(batch), grads.data(), ws);
    }

    LossValue lv;
    lv.mse = sq / double(batch);
    lv.l2_penalty = 0.0;
    for (const ParamBlock& b : param_layout(net.arch)) {
        if (!b.is_weight) continue;
        lv.l2_penalty += l2 * k.sumsq(net.params.data() + b.offset, b.count);
        k.axpy(2.0 * l2, net.params.data() + b.offset, grads.data() + b.offset, b.count);
    }
    lv.total = lv.mse + lv.l2_penalty;
    return lv;
}

void AdamState::update(std::vector<double>& params, const std::vector<double>& grads, int epoch) {
    if (params.size() != grads.size()) throw InternalError("adam: parameter/gradient size mismatch");
    if (m.empty()) {
        m.assign(params.size(), 0.0);
        v.assign(params.size(), 0.0);
    }
    if (m.size() != params.size()) throw InternalError("adam: state size mismatch");

    step += 1;
    const double inv_bc1 = 1.0 / (1.0 - std::pow(cfg.beta1, double(step)));
    const double inv_bc2 = 1.0 / (1.0 - std::pow(cfg.beta2, double(step)));
    kern::active_backend().adam_update(params.data(), m.data(), v.data(), grads.data(),
                                       params.size(), effective_lr(epoch), cfg.beta1, cfg.beta2,
                                       cfg.eps, inv_bc1, inv_bc2);
}

// ---- checkpoints ------------------------------------------------------------------

namespace {
constexpr char kNetMagic[8] = {'C', 'A', 'M', 'O', 'X', 'N', 'N', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const json& config_echo) {
    json header;
    header["version"] = 1;
    header["arch"] = {{"in_h", net.arch.in_h},
                      {"in_w", net.arch.in_w},
                      {"conv_ch", net.arch.conv_ch},
                      {"fc_hidden", net.arch.fc_hidden}};
    header["param_count"] = net.params.size();
    header["channel_stats"] = {{"mean", net.stats.mean}, {"std", net.stats.std_dev}};
    header["config"] = config_echo;
    const std::string header_str = header.dump();

    std::string out(kNetMagic, sizeof(kNetMagic));
    append_u32_le(out, std::uint32_t(header_str.size()));
    out += header_str;
    const std::size_t payload = net.params.size() * sizeof(double);
    const std::size_t base = out.size();
    out.resize(base + payload);
    std::memcpy(out.data() + base, net.params.data(), payload);
    write_text_file(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string blob = read_text_file(path);
    if (blob.size() < sizeof(kNetMagic) + 4 ||
        std::memcmp(blob.data(), kNetMagic, sizeof(kNetMagic)) != 0) {
        throw DataError("not a CAMOXNN1 checkpoint: " + path.string());
    }
    const std::uint32_t header_len =
        read_u32_le(reinterpret_cast<const unsigned char*>(blob.data()) + sizeof(kNetMagic));
    const std::size_t header_off = sizeof(kNetMagic) + 4;
    if (blob.size() < header_off + header_len) {
        throw DataError("truncated checkpoint header: " + path.string());
    }
    const json header = json::parse(blob.substr(header_off, header_len));

    Checkpoint ck;
    ck.net.arch.in_h = header.at("arch").at("in_h").get<int>();
    ck.net.arch.in_w = header.at("arch").at("in_w").get<int>();
    const auto ch = header.at("arch").at("conv_ch").get<std::vector<int>>();
    if (ch.size() != 3) throw DataError("checkpoint conv_ch must have 3 entries");
    ck.net.arch.conv_ch = {ch[0], ch[1], ch[2]};
    ck.net.arch.fc_hidden = header.at("arch").at("fc_hidden").get<int>();
    ck.net.arch.validate();

    const std::size_t n = header.at("param_count").get<std::size_t>();
    if (n != param_count(ck.net.arch)) {
        throw DataError("checkpoint parameter count does not match architecture");
    }
    const auto mean = header.at("channel_stats").at("mean").get<std::vector<double>>();
    const auto stdd = header.at("channel_stats").at("std").get<std::vector<double>>();
    if (mean.size() != 3 || stdd.size() != 3) throw DataError("checkpoint stats malformed");
    ck.net.stats.mean = {mean[0], mean[1], mean[2]};
    ck.net.stats.std_dev = {stdd[0], stdd[1], stdd[2]};
    ck.config_echo = header.value("config", json::object());

    const std::size_t payload_off = header_off + header_len;
    if (blob.size() != payload_off + n * sizeof(double)) {
        throw DataError("checkpoint payload size mismatch: " + path.string());
    }
    ck.net.params.resize(n);
    std::memcpy(ck.net.params.data(), blob.data() + payload_off, n * sizeof(double));
    return ck;
}

}  // namespace camox::nn
