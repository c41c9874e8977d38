#include "cgan/mlp.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "cgan/errors.hpp"

namespace cgan {

void MlpSpec::validate() const {
    if (layer_dims.size() < 2)
        throw DimensionMismatch("network needs at least input and output dims");
    for (int d : layer_dims)
        if (d < 1)
            throw DimensionMismatch("layer dims must be positive");
}

MlpParams mlp_init(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    MlpParams p;
    p.spec = spec;
    std::mt19937_64 rng(seed);
    for (int l = 0; l < spec.layer_count(); ++l) {
        int fan_in = spec.layer_dims[static_cast<std::size_t>(l)];
        int fan_out = spec.layer_dims[static_cast<std::size_t>(l) + 1];
        double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c)
                w(r, c) = dist(rng);
        p.weights.push_back(std::move(w));
        p.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return p;
}

namespace {

void apply_sigmoid(Eigen::MatrixXd& z) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        double y = 1.0 / (1.0 + std::exp(-z.data()[i]));
        z.data()[i] = std::min(1.0 - kSigmoidClamp, std::max(kSigmoidClamp, y));
    }
}

void check_params(const MlpParams& p) {
    if (p.weights.size() != static_cast<std::size_t>(p.spec.layer_count()) || p.biases.size() != p.weights.size())
        throw DimensionMismatch("parameter tensors do not match the network spec");
}

} // namespace

Eigen::MatrixXd forward(const MlpParams& p, const Eigen::MatrixXd& input, ForwardCache* cache) {
    check_params(p);
    if (input.rows() != p.spec.input_dim())
        throw DimensionMismatch("input has " + std::to_string(input.rows()) + " rows, network expects " +
                                std::to_string(p.spec.input_dim()));
    if (cache) {
        cache->activations.clear();
        cache->preacts.clear();
    }
    Eigen::MatrixXd a = input;
    const int layers = p.spec.layer_count();
    for (int l = 0; l < layers; ++l) {
        if (cache)
            cache->activations.push_back(a);
        Eigen::MatrixXd z = (p.weights[static_cast<std::size_t>(l)] * a).colwise() + p.biases[static_cast<std::size_t>(l)];
        if (cache)
            cache->preacts.push_back(z);
        if (l + 1 < layers)
            a = z.cwiseMax(0.0);
        else if (p.spec.output_activation == OutputActivation::sigmoid) {
            apply_sigmoid(z);
            a = std::move(z);
        } else {
            a = std::move(z);
        }
    }
    if (cache)
        cache->output = a;
    return a;
}

Eigen::VectorXd forward_one(const MlpParams& p, const Eigen::VectorXd& input) {
    return forward(p, Eigen::MatrixXd(input), nullptr).col(0);
}

MlpGradients zero_gradients(const MlpParams& p) {
    check_params(p);
    MlpGradients g;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        g.weights.emplace_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
        g.biases.emplace_back(Eigen::VectorXd::Zero(p.biases[l].size()));
    }
    return g;
}

void accumulate(MlpGradients& dst, const MlpGradients& src, double scale) {
    if (dst.weights.size() != src.weights.size())
        throw DimensionMismatch("gradient layer counts differ");
    for (std::size_t l = 0; l < dst.weights.size(); ++l) {
        dst.weights[l] += scale * src.weights[l];
        dst.biases[l] += scale * src.biases[l];
    }
}

MlpGradients backward(const MlpParams& p, const ForwardCache& cache, const Eigen::MatrixXd& output_grad) {
    check_params(p);
    const int layers = p.spec.layer_count();
    if (cache.activations.size() != static_cast<std::size_t>(layers) ||
        cache.preacts.size() != static_cast<std::size_t>(layers))
        throw StaleCache("forward cache does not match the network depth");
    for (int l = 0; l < layers; ++l) {
        if (cache.preacts[static_cast<std::size_t>(l)].rows() != p.weights[static_cast<std::size_t>(l)].rows())
            throw StaleCache("forward cache was built for a different network");
    }
    if (output_grad.rows() != p.spec.output_dim() || output_grad.cols() != cache.output.cols())
        throw DimensionMismatch("output gradient shape does not match the forward pass");

    MlpGradients g;
    g.weights.resize(static_cast<std::size_t>(layers));
    g.biases.resize(static_cast<std::size_t>(layers));

    Eigen::MatrixXd delta;
    if (p.spec.output_activation == OutputActivation::sigmoid) {
        delta = (output_grad.array() * cache.output.array() * (1.0 - cache.output.array())).matrix();
    } else {
        delta = output_grad;
    }
    for (int l = layers - 1; l >= 0; --l) {
        const auto lu = static_cast<std::size_t>(l);
        g.weights[lu] = delta * cache.activations[lu].transpose();
        g.biases[lu] = delta.rowwise().sum();
        Eigen::MatrixXd back = p.weights[lu].transpose() * delta;
        if (l > 0) {
            const Eigen::MatrixXd& z = cache.preacts[lu - 1];
            delta = back.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
        } else {
            g.input = std::move(back);
        }
    }
    return g;
}

AdamState make_adam_state(const MlpParams& p, const AdamConfig& cfg) {
    check_params(p);
    AdamState st;
    st.cfg = cfg;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        st.m_w.emplace_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
        st.v_w.emplace_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
        st.m_b.emplace_back(Eigen::VectorXd::Zero(p.biases[l].size()));
        st.v_b.emplace_back(Eigen::VectorXd::Zero(p.biases[l].size()));
    }
    return st;
}

void adam_step(MlpParams& p, const MlpGradients& g, AdamState& st) {
    if (g.weights.size() != p.weights.size() || st.m_w.size() != p.weights.size())
        throw DimensionMismatch("optimizer state does not match the parameters");
    st.t += 1;
    const AdamConfig& c = st.cfg;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        st.m_w[l] = c.beta1 * st.m_w[l] + (1.0 - c.beta1) * g.weights[l];
        st.v_w[l] = (c.beta2 * st.v_w[l].array() + (1.0 - c.beta2) * g.weights[l].array().square()).matrix();
        Eigen::ArrayXXd mhat = st.m_w[l].array() / bc1;
        Eigen::ArrayXXd vhat = st.v_w[l].array() / bc2;
        p.weights[l].array() -= c.alpha * mhat / (vhat.sqrt() + c.epsilon);

        st.m_b[l] = c.beta1 * st.m_b[l] + (1.0 - c.beta1) * g.biases[l];
        st.v_b[l] = (c.beta2 * st.v_b[l].array() + (1.0 - c.beta2) * g.biases[l].array().square()).matrix();
        Eigen::ArrayXd mhat_b = st.m_b[l].array() / bc1;
        Eigen::ArrayXd vhat_b = st.v_b[l].array() / bc2;
        p.biases[l].array() -= c.alpha * mhat_b / (vhat_b.sqrt() + c.epsilon);
    }
}

namespace {

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in)
        throw Error("truncated network data");
    return v;
}

void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    put<std::int64_t>(out, m.rows());
    put<std::int64_t>(out, m.cols());
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Eigen::MatrixXd get_matrix(std::istream& in) {
    auto rows = get<std::int64_t>(in);
    auto cols = get<std::int64_t>(in);
    if (rows < 0 || cols < 0 || rows * cols > (1 << 28))
        throw Error("implausible matrix shape in network data");
    Eigen::MatrixXd m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in)
        throw Error("truncated network data");
    return m;
}

} // namespace

void write_mlp(std::ostream& out, const MlpParams& p) {
    check_params(p);
    put<std::uint32_t>(out, 0x314d4c50u); // "PLM1"
    put<std::uint8_t>(out, p.spec.output_activation == OutputActivation::sigmoid ? 1 : 0);
    put<std::int32_t>(out, static_cast<std::int32_t>(p.spec.layer_dims.size()));
    for (int d : p.spec.layer_dims)
        put<std::int32_t>(out, d);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        put_matrix(out, p.weights[l]);
        put_matrix(out, p.biases[l]);
    }
}

MlpParams read_mlp(std::istream& in) {
    if (get<std::uint32_t>(in) != 0x314d4c50u)
        throw Error("bad network magic");
    MlpParams p;
    p.spec.output_activation = get<std::uint8_t>(in) ? OutputActivation::sigmoid : OutputActivation::linear;
    auto ndims = get<std::int32_t>(in);
    if (ndims < 2 || ndims > 1000)
        throw Error("implausible layer count in network data");
    for (int i = 0; i < ndims; ++i)
        p.spec.layer_dims.push_back(get<std::int32_t>(in));
    p.spec.validate();
    for (int l = 0; l < p.spec.layer_count(); ++l) {
        p.weights.push_back(get_matrix(in));
        p.biases.push_back(Eigen::VectorXd(get_matrix(in)));
    }
    check_params(p);
    return p;
}

void write_adam(std::ostream& out, const AdamState& st) {
    put<double>(out, st.cfg.alpha);
    put<double>(out, st.cfg.beta1);
    put<double>(out, st.cfg.beta2);
    put<double>(out, st.cfg.epsilon);
    put<std::int64_t>(out, st.t);
    put<std::int32_t>(out, static_cast<std::int32_t>(st.m_w.size()));
    for (std::size_t l = 0; l < st.m_w.size(); ++l) {
        put_matrix(out, st.m_w[l]);
        put_matrix(out, st.v_w[l]);
        put_matrix(out, st.m_b[l]);
        put_matrix(out, st.v_b[l]);
    }
}

AdamState read_adam(std::istream& in, const MlpParams& p) {
    AdamState st;
    st.cfg.alpha = get<double>(in);
    st.cfg.beta1 = get<double>(in);
    st.cfg.beta2 = get<double>(in);
    st.cfg.epsilon = get<double>(in);
    st.t = get<std::int64_t>(in);
    auto layers = get<std::int32_t>(in);
    if (layers != static_cast<std::int32_t>(p.weights.size()))
        throw Error("optimizer state does not match the network");
    for (int l = 0; l < layers; ++l) {
        st.m_w.push_back(get_matrix(in));
        st.v_w.push_back(get_matrix(in));
        st.m_b.push_back(Eigen::VectorXd(get_matrix(in)));
        st.v_b.push_back(Eigen::VectorXd(get_matrix(in)));
    }
    return st;
}

} // namespace cgan
