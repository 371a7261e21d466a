#pragma once

#include <bit>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cassi/layers.hpp"

namespace cassi {

// Classifier hyperparameters. The stack is three conv1d/batchnorm/ReLU
// stages over the measurement axis, dropout, a hidden dense layer with
// ReLU, and a dense output under the softmax cross-entropy head.
struct ClassifierConfig {
    std::size_t conv_channels[3] = {16, 32, 64};
    std::size_t kernel = 3;
    double dropout_rate = 0.2;
    std::size_t hidden = 128;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.9;
};

inline std::vector<LayerSpec> classifier_specs(std::size_t input_len, std::size_t classes,
                                               const ClassifierConfig& cfg = {}) {
    require(input_len >= 1, "classifier: input length must be positive");
    require(classes >= 2, "classifier: need at least 2 classes");
    std::vector<LayerSpec> specs;
    std::size_t ch_in = 1;
    for (std::size_t stage = 0; stage < 3; ++stage) {
        LayerSpec conv;
        conv.kind = LayerSpec::Kind::Conv1d;
        conv.in_channels = ch_in;
        conv.out_channels = cfg.conv_channels[stage];
        conv.kernel = cfg.kernel;
        specs.push_back(conv);

        LayerSpec bn;
        bn.kind = LayerSpec::Kind::BatchNorm;
        bn.channels = cfg.conv_channels[stage];
        bn.epsilon = cfg.bn_epsilon;
        bn.momentum = cfg.bn_momentum;
        specs.push_back(bn);

        LayerSpec relu;
        relu.kind = LayerSpec::Kind::ReLU;
        specs.push_back(relu);
        ch_in = cfg.conv_channels[stage];
    }

    LayerSpec drop;
    drop.kind = LayerSpec::Kind::Dropout;
    drop.rate = cfg.dropout_rate;
    specs.push_back(drop);

    LayerSpec fc1;
    fc1.kind = LayerSpec::Kind::Dense;
    fc1.in = ch_in * input_len;
    fc1.out = cfg.hidden;
    specs.push_back(fc1);

    LayerSpec relu;
    relu.kind = LayerSpec::Kind::ReLU;
    specs.push_back(relu);

    LayerSpec fc2;
    fc2.kind = LayerSpec::Kind::Dense;
    fc2.in = cfg.hidden;
    fc2.out = classes;
    specs.push_back(fc2);

    LayerSpec head;
    head.kind = LayerSpec::Kind::SoftmaxXent;
    head.classes = classes;
    specs.push_back(head);
    return specs;
}

inline std::unique_ptr<Layer> make_layer(const LayerSpec& spec, Rng& init_rng,
                                         std::uint64_t dropout_seed) {
    using Kind = LayerSpec::Kind;
    switch (spec.kind) {
    case Kind::OpticalDense: {
        auto layer = std::make_unique<OpticalDense>(spec.shots, spec.bands);
        layer->init_uniform(init_rng);
        return layer;
    }
    case Kind::Conv1d:
        return std::make_unique<Conv1d>(spec.in_channels, spec.out_channels, spec.kernel,
                                        init_rng);
    case Kind::BatchNorm:
        return std::make_unique<BatchNorm1d>(spec.channels, spec.epsilon, spec.momentum);
    case Kind::ReLU:
        return std::make_unique<ReLU>();
    case Kind::Dropout:
        return std::make_unique<Dropout>(spec.rate, dropout_seed);
    case Kind::Dense:
        return std::make_unique<Dense>(spec.in, spec.out, init_rng);
    case Kind::SoftmaxXent:
        throw Error("make_layer: the softmax head is not a hidden layer");
    }
    throw Error("make_layer: unknown layer kind");
}

// ---------------------------------------------------------------------------
// Network: hidden layers plus the softmax cross-entropy head. The spec list
// must end with the head; when an optical-dense spec appears it must be the
// first layer (the sensing operator).
// ---------------------------------------------------------------------------
class Network {
public:
    std::vector<std::unique_ptr<Layer>> layers;
    SoftmaxXent head{2};

    Network() = default;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    Tensor logits(const Tensor& x, bool training, std::size_t from_layer = 0) {
        require(from_layer <= layers.size(), "network: from_layer out of range");
        Tensor t = x;
        for (std::size_t i = from_layer; i < layers.size(); ++i)
            t = layers[i]->forward(t, training);
        return t;
    }

    double loss(const Tensor& x, const std::vector<int>& labels, bool training,
                std::size_t from_layer = 0) {
        backprop_from_ = from_layer;
        return head.forward(logits(x, training, from_layer), labels);
    }

    // Backpropagates from the head through the layers touched by the last
    // loss() call; returns the gradient w.r.t. that call's input.
    Tensor backward() {
        Tensor g = head.backward();
        for (std::size_t i = layers.size(); i > backprop_from_; --i)
            g = layers[i - 1]->backward(g);
        return g;
    }

    std::vector<ParamBlock> params() {
        std::vector<ParamBlock> blocks;
        for (auto& layer : layers) layer->collect_params(blocks);
        return blocks;
    }

    void zero_grads() {
        for (auto block : params())
            std::fill(block.g, block.g + block.n, 0.0);
    }

    OpticalDense* optical() {
        if (layers.empty()) return nullptr;
        return dynamic_cast<OpticalDense*>(layers.front().get());
    }

    Dropout* dropout() {
        for (auto& layer : layers)
            if (auto* d = dynamic_cast<Dropout*>(layer.get())) return d;
        return nullptr;
    }

    std::vector<LayerSpec> specs() const {
        std::vector<LayerSpec> out;
        for (const auto& layer : layers) out.push_back(layer->spec());
        out.push_back(head.spec());
        return out;
    }

private:
    std::size_t backprop_from_ = 0;
};

// Builds a network from specs (head last). Parameterized layers consume
// init_rng in list order; a frozen sensing operator can be patched in
// afterwards via Network::optical().
inline Network build_network(const std::vector<LayerSpec>& specs, Rng& init_rng,
                             std::uint64_t dropout_seed) {
    require(!specs.empty() && specs.back().kind == LayerSpec::Kind::SoftmaxXent,
            "network: spec list must end with the softmax head");
    Network net;
    std::size_t dropout_count = 0;
    for (std::size_t i = 0; i + 1 < specs.size(); ++i) {
        const auto& spec = specs[i];
        require(spec.kind != LayerSpec::Kind::SoftmaxXent,
                "network: softmax head must be the last spec");
        if (spec.kind == LayerSpec::Kind::OpticalDense)
            require(i == 0, "network: the optical layer must come first");
        std::uint64_t seed = splitmix64(dropout_seed ^ (0x9e37U + dropout_count));
        if (spec.kind == LayerSpec::Kind::Dropout) ++dropout_count;
        net.layers.push_back(make_layer(spec, init_rng, seed));
    }
    net.head = SoftmaxXent(specs.back().classes);
    return net;
}

// ---------------------------------------------------------------------------
// MDL1 checkpoint format (bit-exact):
//   line 1:  "MDL1 <layer-line-count>"
//   then one text line per layer, in network order:
//     "optical <S> <L>"
//     "conv1d <Cin> <Cout> <K>"
//     "batchnorm <C> <epsilon> <momentum>"
//     "relu"
//     "dropout <rate>"
//     "dense <In> <Out>"
//     "softmax <C>"        (always the last line)
//   then "params <count>" and <count> little-endian IEEE-754 64-bit doubles:
//   each layer's state in network order (optical: phi; conv1d: weights then
//   biases; batchnorm: gamma, beta, running mean, running variance; dense:
//   weights then biases).
// ---------------------------------------------------------------------------
namespace detail {

inline void put_f64_le(std::ostream& os, double d) {
    auto u = std::bit_cast<std::uint64_t>(d);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline bool get_f64_le(std::istream& is, double& d) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    d = std::bit_cast<double>(u);
    return true;
}

inline std::string spec_line(const LayerSpec& s) {
    char buf[128];
    using Kind = LayerSpec::Kind;
    switch (s.kind) {
    case Kind::OpticalDense:
        std::snprintf(buf, sizeof buf, "optical %zu %zu", s.shots, s.bands);
        break;
    case Kind::Conv1d:
        std::snprintf(buf, sizeof buf, "conv1d %zu %zu %zu", s.in_channels, s.out_channels,
                      s.kernel);
        break;
    case Kind::BatchNorm:
        std::snprintf(buf, sizeof buf, "batchnorm %zu %.17g %.17g", s.channels, s.epsilon,
                      s.momentum);
        break;
    case Kind::ReLU:
        std::snprintf(buf, sizeof buf, "relu");
        break;
    case Kind::Dropout:
        std::snprintf(buf, sizeof buf, "dropout %.17g", s.rate);
        break;
    case Kind::Dense:
        std::snprintf(buf, sizeof buf, "dense %zu %zu", s.in, s.out);
        break;
    case Kind::SoftmaxXent:
        std::snprintf(buf, sizeof buf, "softmax %zu", s.classes);
        break;
    }
    return buf;
}

inline LayerSpec parse_spec_line(const std::string& line, const std::string& path) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    LayerSpec s;
    using Kind = LayerSpec::Kind;
    if (kind == "optical") {
        s.kind = Kind::OpticalDense;
        ls >> s.shots >> s.bands;
    } else if (kind == "conv1d") {
        s.kind = Kind::Conv1d;
        ls >> s.in_channels >> s.out_channels >> s.kernel;
    } else if (kind == "batchnorm") {
        s.kind = Kind::BatchNorm;
        ls >> s.channels >> s.epsilon >> s.momentum;
    } else if (kind == "relu") {
        s.kind = Kind::ReLU;
    } else if (kind == "dropout") {
        s.kind = Kind::Dropout;
        ls >> s.rate;
    } else if (kind == "dense") {
        s.kind = Kind::Dense;
        ls >> s.in >> s.out;
    } else if (kind == "softmax") {
        s.kind = Kind::SoftmaxXent;
        ls >> s.classes;
    } else {
        throw Error(path + ": unknown MDL1 layer kind \"" + kind + "\"");
    }
    if (ls.fail()) throw Error(path + ": bad MDL1 layer line \"" + line + "\"");
    return s;
}

} // namespace detail

inline void save_network(Network& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open file for writing: " + path);
    auto specs = net.specs();
    os << "MDL1 " << specs.size() << "\n";
    for (const auto& s : specs) os << detail::spec_line(s) << "\n";

    std::size_t count = 0;
    for (const auto& layer : net.layers) count += layer->state_size();
    os << "params " << count << "\n";
    std::vector<double> buf;
    for (const auto& layer : net.layers) {
        buf.assign(layer->state_size(), 0.0);
        layer->save_state(buf.data());
        for (double d : buf) detail::put_f64_le(os, d);
    }
    require(static_cast<bool>(os), "write failed: " + path);
}

inline Network load_network(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open file: " + path);
    std::string line;
    if (!std::getline(is, line)) throw Error(path + ": missing MDL1 header");
    std::istringstream hs(line);
    std::string magic;
    std::size_t n_specs = 0;
    hs >> magic >> n_specs;
    if (magic != "MDL1" || n_specs == 0)
        throw Error(path + ": bad MDL1 header: \"" + line + "\"");

    std::vector<LayerSpec> specs;
    for (std::size_t i = 0; i < n_specs; ++i) {
        if (!std::getline(is, line)) throw Error(path + ": truncated MDL1 layer list");
        specs.push_back(detail::parse_spec_line(line, path));
    }

    if (!std::getline(is, line)) throw Error(path + ": missing params line");
    std::istringstream ps(line);
    std::string params_word;
    std::size_t declared = 0;
    ps >> params_word >> declared;
    if (params_word != "params") throw Error(path + ": missing params line");

    Rng dummy(0); // parameters are overwritten from the file
    Network net = build_network(specs, dummy, 0);

    std::size_t expected = 0;
    for (const auto& layer : net.layers) expected += layer->state_size();
    if (expected != declared)
        throw Error(path + ": params count " + std::to_string(declared) +
                    " does not match layer specs (" + std::to_string(expected) + ")");

    std::vector<double> buf;
    for (auto& layer : net.layers) {
        buf.assign(layer->state_size(), 0.0);
        for (double& d : buf)
            if (!detail::get_f64_le(is, d)) throw Error(path + ": truncated MDL1 params");
        layer->load_state(buf.data());
    }
    char extra;
    if (is.read(&extra, 1)) throw Error(path + ": MDL1 payload longer than declared");
    return net;
}

} // namespace cassi
