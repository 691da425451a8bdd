#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rng.hpp"

namespace relaysel::nn {

enum class Activation { relu, identity };

struct Layer {
    Eigen::MatrixXd weight; ///< out x in
    Eigen::VectorXd bias;   ///< out
    Activation activation = Activation::relu;

    std::size_t in() const { return static_cast<std::size_t>(weight.cols()); }
    std::size_t out() const { return static_cast<std::size_t>(weight.rows()); }
};

// Fully connected feed-forward network: rectifier hidden layers and an
// identity output layer, all in double precision.
class Network {
public:
    Network() = default;

    explicit Network(std::vector<Layer> layers) : layers_(std::move(layers)) { check(); }

    // sizes = {input, hidden..., output}. Parameters start at zero.
    static Network zeros(const std::vector<std::size_t>& sizes) {
        if (sizes.size() < 2)
            throw std::invalid_argument("network needs an input and an output size");
        std::vector<Layer> layers;
        for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
            Layer l;
            l.weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sizes[i + 1]),
                                             static_cast<Eigen::Index>(sizes[i]));
            l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[i + 1]));
            l.activation = i + 2 == sizes.size() ? Activation::identity : Activation::relu;
            layers.push_back(std::move(l));
        }
        return Network(std::move(layers));
    }

    // He-uniform weights, U(-sqrt(6/fan_in), sqrt(6/fan_in)); zero biases.
    static Network random(const std::vector<std::size_t>& sizes, Rng& rng) {
        Network net = zeros(sizes);
        for (auto& l : net.layers_) {
            const double limit = std::sqrt(6.0 / static_cast<double>(l.in()));
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                    l.weight(r, c) = (2.0 * rng.uniform01() - 1.0) * limit;
        }
        return net;
    }

    std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in(); }
    std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out(); }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> s;
        if (layers_.empty())
            return s;
        s.push_back(input_dim());
        for (const auto& l : layers_)
            s.push_back(l.out());
        return s;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_)
            n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        return n;
    }

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
        if (static_cast<std::size_t>(x.size()) != input_dim())
            throw std::invalid_argument("input has length " + std::to_string(x.size()) + ", network expects " +
                                        std::to_string(input_dim()));
        Eigen::VectorXd h = x;
        for (const auto& l : layers_) {
            Eigen::VectorXd z = l.weight * h + l.bias;
            if (l.activation == Activation::relu)
                z = z.cwiseMax(0.0);
            h = std::move(z);
        }
        return h;
    }

    std::vector<double> forward(std::span<const double> x) const {
        const Eigen::VectorXd out = forward(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())).eval());
        return {out.data(), out.data() + out.size()};
    }

    bool same_architecture(const Network& o) const {
        if (layers_.size() != o.layers_.size())
            return false;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            if (layers_[i].in() != o.layers_[i].in() || layers_[i].out() != o.layers_[i].out() ||
                layers_[i].activation != o.layers_[i].activation)
                return false;
        return true;
    }

    bool operator==(const Network& o) const {
        if (!same_architecture(o))
            return false;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            if (layers_[i].weight != o.layers_[i].weight || layers_[i].bias != o.layers_[i].bias)
                return false;
        return true;
    }

private:
    void check() const {
        if (layers_.empty())
            throw std::invalid_argument("network has no layers");
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (layers_[i].bias.size() != layers_[i].weight.rows())
                throw std::invalid_argument("bias length does not match layer " + std::to_string(i));
            if (i > 0 && layers_[i].in() != layers_[i - 1].out())
                throw std::invalid_argument("layer " + std::to_string(i) + " input does not match previous output");
        }
        if (layers_.back().activation != Activation::identity)
            throw std::invalid_argument("output layer must be linear");
    }

    std::vector<Layer> layers_;
};

// Same shapes as a network's parameters.
struct Gradients {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;

    static Gradients zeros_like(const Network& net) {
        Gradients g;
        for (const auto& l : net.layers()) {
            g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
            g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
        }
        return g;
    }
};

// One regression sample: pull Q(state, action) toward target and every
// Q(state, a) for a in zero_mask toward 0.
struct TargetSpec {
    std::vector<double> state;
    std::size_t action = 0;
    double target = 0.0;
    std::vector<std::size_t> zero_mask;
};

struct LossGradient {
    double loss = 0.0;
    Gradients grads;
};

// L = sum_i (y_i - Q(s_i, a_i))^2 + sum_i sum_{a in mask_i} Q(s_i, a)^2,
// summed over the batch, with its exact gradient.
inline LossGradient loss_and_gradient(const Network& net, std::span<const TargetSpec> batch) {
    if (batch.empty())
        throw std::invalid_argument("empty training batch");
    const auto& layers = net.layers();
    const auto n = static_cast<Eigen::Index>(batch.size());
    const auto in_dim = static_cast<Eigen::Index>(net.input_dim());
    const std::size_t out_dim = net.output_dim();

    Eigen::MatrixXd x(in_dim, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& spec = batch[static_cast<std::size_t>(j)];
        if (static_cast<Eigen::Index>(spec.state.size()) != in_dim)
            throw std::invalid_argument("training state has wrong length");
        x.col(j) = Eigen::Map<const Eigen::VectorXd>(spec.state.data(), in_dim);
    }

    // activations[0] = input, activations[i+1] = output of layer i
    std::vector<Eigen::MatrixXd> activations;
    activations.reserve(layers.size() + 1);
    activations.push_back(std::move(x));
    for (const auto& l : layers) {
        Eigen::MatrixXd z = l.weight * activations.back();
        z.colwise() += l.bias;
        if (l.activation == Activation::relu)
            z = z.cwiseMax(0.0);
        activations.push_back(std::move(z));
    }

    const Eigen::MatrixXd& q = activations.back();
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), q.cols());
    double loss = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& spec = batch[static_cast<std::size_t>(j)];
        if (spec.action >= out_dim)
            throw std::out_of_range("training action index out of range");
        const auto a = static_cast<Eigen::Index>(spec.action);
        const double err = q(a, j) - spec.target;
        loss += err * err;
        delta(a, j) += 2.0 * err;
        for (std::size_t m : spec.zero_mask) {
            if (m >= out_dim)
                throw std::out_of_range("zero-target action index out of range");
            const auto mi = static_cast<Eigen::Index>(m);
            loss += q(mi, j) * q(mi, j);
            delta(mi, j) += 2.0 * q(mi, j);
        }
    }

    LossGradient res;
    res.loss = loss;
    res.grads = Gradients::zeros_like(net);
    for (std::size_t i = layers.size(); i-- > 0;) {
        if (layers[i].activation == Activation::relu)
            delta = delta.cwiseProduct((activations[i + 1].array() > 0.0).cast<double>().matrix());
        res.grads.weight[i] = delta * activations[i].transpose();
        res.grads.bias[i] = delta.rowwise().sum();
        if (i > 0)
            delta = layers[i].weight.transpose() * delta;
    }
    return res;
}

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t step = 0;
    Gradients m;
    Gradients v;

    explicit AdamState(const Network& net) : m(Gradients::zeros_like(net)), v(Gradients::zeros_like(net)) {}
};

namespace detail {
template <class T>
void adam_update(T& param, const T& g, T& m, T& v, const AdamState& opt, double lr, double c1, double c2) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + opt.epsilon);
}
} // namespace detail

// Bias-corrected Adam.
inline void adam_step(Network& net, const Gradients& grads, AdamState& opt, double lr) {
    auto& layers = net.layers();
    if (grads.weight.size() != layers.size() || opt.m.weight.size() != layers.size())
        throw std::invalid_argument("gradient shape does not match network");
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (grads.weight[i].rows() != layers[i].weight.rows() || grads.weight[i].cols() != layers[i].weight.cols() ||
            grads.bias[i].size() != layers[i].bias.size())
            throw std::invalid_argument("gradient shape does not match layer " + std::to_string(i));

    ++opt.step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (std::size_t i = 0; i < layers.size(); ++i) {
        detail::adam_update(layers[i].weight, grads.weight[i], opt.m.weight[i], opt.v.weight[i], opt, lr, c1, c2);
        detail::adam_update(layers[i].bias, grads.bias[i], opt.m.bias[i], opt.v.bias[i], opt, lr, c1, c2);
    }
}

inline void copy_into(const Network& src, Network& dst) {
    if (!src.same_architecture(dst))
        throw std::invalid_argument("cannot copy between networks of different architecture");
    dst = src;
}

// Checkpoint text format, version 1:
//
//   relaysel-network 1
//   <layer count>
//   then per layer: "<in> <out> <relu|identity>", <out> lines of <in>
//   weights (row-major), one line of <out> biases.
//
// Values are written with 17 significant digits.
inline constexpr const char* checkpoint_magic = "relaysel-network";
inline constexpr int checkpoint_version = 1;

inline void save_checkpoint(const Network& net, std::ostream& os) {
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << checkpoint_magic << ' ' << checkpoint_version << '\n' << net.layers().size() << '\n';
    for (const auto& l : net.layers()) {
        os << l.in() << ' ' << l.out() << ' ' << (l.activation == Activation::relu ? "relu" : "identity") << '\n';
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                os << (c ? " " : "") << l.weight(r, c);
            os << '\n';
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r)
            os << (r ? " " : "") << l.bias(r);
        os << '\n';
    }
    os.precision(old_precision);
}

inline Network load_checkpoint(std::istream& is) {
    std::string magic;
    int version = 0;
    std::size_t count = 0;
    if (!(is >> magic >> version) || magic != checkpoint_magic)
        throw std::runtime_error("not a relaysel network checkpoint");
    if (version != checkpoint_version)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    if (!(is >> count) || count == 0)
        throw std::runtime_error("bad layer count in checkpoint");
    std::vector<Layer> layers(count);
    for (auto& l : layers) {
        std::size_t in = 0, out = 0;
        std::string act;
        if (!(is >> in >> out >> act))
            throw std::runtime_error("truncated checkpoint layer header");
        if (act == "relu")
            l.activation = Activation::relu;
        else if (act == "identity")
            l.activation = Activation::identity;
        else
            throw std::runtime_error("unknown activation '" + act + "' in checkpoint");
        l.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
        l.bias.resize(static_cast<Eigen::Index>(out));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                if (!(is >> l.weight(r, c)))
                    throw std::runtime_error("truncated checkpoint weights");
        for (Eigen::Index r = 0; r < l.bias.size(); ++r)
            if (!(is >> l.bias(r)))
                throw std::runtime_error("truncated checkpoint biases");
    }
    return Network(std::move(layers));
}

} // namespace relaysel::nn
