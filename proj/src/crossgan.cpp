#include "cgan/crossgan.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "cgan/errors.hpp"
#include "cgan/util.hpp"

namespace cgan {

const char* to_string(Metric m) {
    return m == Metric::l1 ? "l1" : "l2_squared";
}

Metric metric_from_string(const std::string& s) {
    if (s == "l1") return Metric::l1;
    if (s == "l2_squared") return Metric::l2_squared;
    throw ConfigError("unknown metric '" + s + "' (expected l1 or l2_squared)");
}

const char* to_string(StepTag t) {
    return t == StepTag::step1 ? "step1" : "step2";
}

void HyperParams::validate(int n_a, int n_b) const {
    if (epochs < 1)
        throw ConfigError("epochs must be at least 1");
    if (batch_size < 1)
        throw ConfigError("batch size must be at least 1");
    int smaller = std::min(n_a, n_b);
    if (smaller > 0 && batch_size > smaller)
        throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds the smaller dataset (" +
                          std::to_string(smaller) + " samples)");
    for (int h : hidden_dims)
        if (h < 1)
            throw ConfigError("hidden layer widths must be positive");
    for (double l : lambdas)
        if (!std::isfinite(l) || l < 0.0)
            throw ConfigError("loss weights must be finite and nonnegative");
    if (!(adam.alpha > 0.0))
        throw ConfigError("learning rate must be positive");
    if (adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 || adam.beta2 >= 1.0)
        throw ConfigError("adam betas must lie in [0, 1)");
    if (!(geo.d1 > 0.0) || !(geo.d2 > geo.d1))
        throw ConfigError("distance thresholds need 0 < d1 < d2");
    if (!(geo.cutoff > 0.0))
        throw ConfigError("cutoff must be positive");
    if (decode_threshold < 0.0)
        throw ConfigError("decode threshold cannot be negative");
}

Normalizer Normalizer::fit(std::span<const DomainDataset* const> datasets) {
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());
    bool any = false;
    for (const DomainDataset* ds : datasets) {
        for (const EncodedSample& e : ds->samples) {
            any = true;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) {
                    double v = e.at(kLatticeBlock, r, c);
                    lo(c) = std::min(lo(c), v);
                    hi(c) = std::max(hi(c), v);
                }
        }
    }
    Normalizer n;
    if (!any)
        return n;
    for (int c = 0; c < 3; ++c) {
        n.lattice_shift(c) = 0.5 * (lo(c) + hi(c));
        n.lattice_scale(c) = std::max(0.5 * (hi(c) - lo(c)), 1e-8);
    }
    return n;
}

Eigen::VectorXd Normalizer::apply(const Eigen::VectorXd& phys) const {
    Eigen::VectorXd out = phys;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            int i = EncodedSample::index(kLatticeBlock, r, c);
            out(i) = (phys(i) - lattice_shift(c)) / lattice_scale(c);
        }
    return out;
}

Eigen::VectorXd Normalizer::invert(const Eigen::VectorXd& net) const {
    Eigen::VectorXd out = net;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            int i = EncodedSample::index(kLatticeBlock, r, c);
            out(i) = net(i) * lattice_scale(c) + lattice_shift(c);
        }
    return out;
}

Eigen::VectorXd Normalizer::gradient_to_net(const Eigen::VectorXd& phys_grad) const {
    Eigen::VectorXd out = phys_grad;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            int i = EncodedSample::index(kLatticeBlock, r, c);
            out(i) = phys_grad(i) * lattice_scale(c);
        }
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t role_seed(std::uint64_t base, StepTag tag, int role) {
    return splitmix64(base + (tag == StepTag::step2 ? 0x100u : 0u) + static_cast<std::uint64_t>(role));
}

MlpSpec generator_spec(const HyperParams& hp) {
    MlpSpec s;
    s.layer_dims.push_back(kSampleDim);
    for (int h : hp.hidden_dims)
        s.layer_dims.push_back(h);
    s.layer_dims.push_back(kSampleDim);
    s.output_activation = OutputActivation::linear;
    return s;
}

MlpSpec discriminator_spec(const HyperParams& hp) {
    MlpSpec s;
    s.layer_dims.push_back(kSampleDim);
    for (int h : hp.hidden_dims)
        s.layer_dims.push_back(h);
    s.layer_dims.push_back(1);
    s.output_activation = OutputActivation::sigmoid;
    return s;
}

Eigen::MatrixXd pack_normalized(std::span<const EncodedSample> samples, const Normalizer& norm) {
    Eigen::MatrixXd m(kSampleDim, static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i)
        m.col(static_cast<Eigen::Index>(i)) = norm.apply(samples[i].data);
    return m;
}

} // namespace

GanStepModel make_step_model(StepTag tag, const HyperParams& hp, const Normalizer& norm,
                             const std::string& element_a, const std::string& element_b) {
    GanStepModel m;
    m.step_tag = tag;
    m.element_a = element_a;
    m.element_b = element_b;
    m.norm = norm;
    m.seed = hp.seed;
    m.gen_fwd = mlp_init(generator_spec(hp), role_seed(hp.seed, tag, 1));
    m.gen_bwd = mlp_init(generator_spec(hp), role_seed(hp.seed, tag, 2));
    m.disc_a = mlp_init(discriminator_spec(hp), role_seed(hp.seed, tag, 3));
    m.disc_b = mlp_init(discriminator_spec(hp), role_seed(hp.seed, tag, 4));
    m.opt_gen_fwd = make_adam_state(m.gen_fwd, hp.adam);
    m.opt_gen_bwd = make_adam_state(m.gen_bwd, hp.adam);
    m.opt_disc_a = make_adam_state(m.disc_a, hp.adam);
    m.opt_disc_b = make_adam_state(m.disc_b, hp.adam);
    return m;
}

namespace {

void write_string(std::ostream& out, const std::string& s) {
    auto n = static_cast<std::uint32_t>(s.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    std::uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n > (1u << 20))
        throw Error("bad string in checkpoint");
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in)
        throw Error("truncated checkpoint");
    return s;
}

void serialize_model(std::ostream& out, const GanStepModel& m) {
    out.write("CGANCKP1", 8);
    std::uint8_t tag = m.step_tag == StepTag::step2 ? 2 : 1;
    out.write(reinterpret_cast<const char*>(&tag), 1);
    out.write(reinterpret_cast<const char*>(&m.seed), sizeof(m.seed));
    std::int32_t epoch = m.epoch;
    out.write(reinterpret_cast<const char*>(&epoch), sizeof(epoch));
    write_string(out, m.element_a);
    write_string(out, m.element_b);
    for (int c = 0; c < 3; ++c)
        out.write(reinterpret_cast<const char*>(&m.norm.lattice_shift(c)), sizeof(double));
    for (int c = 0; c < 3; ++c)
        out.write(reinterpret_cast<const char*>(&m.norm.lattice_scale(c)), sizeof(double));
    write_mlp(out, m.gen_fwd);
    write_adam(out, m.opt_gen_fwd);
    write_mlp(out, m.gen_bwd);
    write_adam(out, m.opt_gen_bwd);
    write_mlp(out, m.disc_a);
    write_adam(out, m.opt_disc_a);
    write_mlp(out, m.disc_b);
    write_adam(out, m.opt_disc_b);
}

GanStepModel deserialize_model(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "CGANCKP1")
        throw Error("not a model checkpoint (bad magic)");
    GanStepModel m;
    std::uint8_t tag = 0;
    in.read(reinterpret_cast<char*>(&tag), 1);
    m.step_tag = tag == 2 ? StepTag::step2 : StepTag::step1;
    in.read(reinterpret_cast<char*>(&m.seed), sizeof(m.seed));
    std::int32_t epoch = 0;
    in.read(reinterpret_cast<char*>(&epoch), sizeof(epoch));
    m.epoch = epoch;
    m.element_a = read_string(in);
    m.element_b = read_string(in);
    for (int c = 0; c < 3; ++c)
        in.read(reinterpret_cast<char*>(&m.norm.lattice_shift(c)), sizeof(double));
    for (int c = 0; c < 3; ++c)
        in.read(reinterpret_cast<char*>(&m.norm.lattice_scale(c)), sizeof(double));
    m.gen_fwd = read_mlp(in);
    m.opt_gen_fwd = read_adam(in, m.gen_fwd);
    m.gen_bwd = read_mlp(in);
    m.opt_gen_bwd = read_adam(in, m.gen_bwd);
    m.disc_a = read_mlp(in);
    m.opt_disc_a = read_adam(in, m.disc_a);
    m.disc_b = read_mlp(in);
    m.opt_disc_b = read_adam(in, m.disc_b);
    return m;
}

} // namespace

std::uint64_t model_checksum(const GanStepModel& m) {
    std::ostringstream ss(std::ios::binary);
    serialize_model(ss, m);
    std::string bytes = ss.str();
    return fnv1a64(bytes.data(), bytes.size());
}

void save_model(const std::filesystem::path& path, const GanStepModel& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot open checkpoint for writing: " + path.string());
    serialize_model(out, m);
    if (!out)
        throw Error("checkpoint write failed: " + path.string());
}

GanStepModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open checkpoint: " + path.string());
    return deserialize_model(in);
}

double reconstruction_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& rec, Metric metric) {
    if (x.size() != rec.size())
        throw DimensionMismatch("reconstruction operands differ in length");
    if (metric == Metric::l1)
        return (rec - x).cwiseAbs().mean();
    return (rec - x).array().square().mean();
}

namespace {

// d recon / d rec for one column pair.
Eigen::VectorXd reconstruction_grad(const Eigen::VectorXd& x, const Eigen::VectorXd& rec, Metric metric) {
    const double dim = static_cast<double>(x.size());
    if (metric == Metric::l1)
        return (rec - x).array().sign().matrix() / dim;
    return 2.0 * (rec - x) / dim;
}

struct GeoBatchResult {
    double geo1 = 0.0;
    double geo2 = 0.0;
    int warnings = 0;
    Eigen::MatrixXd net_grad; // lambda-weighted, per column; empty when not requested
};

// Mean geometric losses over the generated columns of both directions. The
// divisor is the pooled column count; samples that decode to nothing count
// zero and raise a warning instead of aborting the batch.
GeoBatchResult geo_over_batch(const GanStepModel& m, const Eigen::MatrixXd& net_cols, const HyperParams& hp,
                              bool want_grads) {
    GeoBatchResult res;
    const auto n = net_cols.cols();
    if (want_grads)
        res.net_grad = Eigen::MatrixXd::Zero(kSampleDim, n);
    EncodedSample tmp;
    tmp.occupancy_known = false;
    tmp.species_labels = {"", "H", m.element_a, m.element_b};
    for (Eigen::Index i = 0; i < n; ++i) {
        tmp.data = m.norm.invert(net_cols.col(i));
        GeoLossResult g = geo_losses(tmp, hp.geo, hp.geo_mode, hp.decode_threshold);
        if (g.no_pairs)
            ++res.warnings;
        res.geo1 += g.geo1;
        res.geo2 += g.geo2;
        if (want_grads) {
            Eigen::VectorXd phys = hp.lambdas[4] * g.grad1 + hp.lambdas[5] * g.grad2;
            res.net_grad.col(i) = m.norm.gradient_to_net(phys);
        }
    }
    return res;
}

struct GenEval {
    StepLosses losses;
    MlpGradients grad_gen_fwd, grad_gen_bwd;
};

// Generator-side terms and, when requested, the parameter gradients of both
// generators. Discriminators are read-only here.
GenEval generator_eval(const GanStepModel& m, const Eigen::MatrixXd& a_net, const Eigen::MatrixXd& b_net,
                       const HyperParams& hp, bool want_grads) {
    GenEval ev;
    const double na = static_cast<double>(a_net.cols());
    const double nb = static_cast<double>(b_net.cols());

    ForwardCache c_fa, c_ra, c_fb, c_rb, c_ya, c_yb;
    Eigen::MatrixXd fa = forward(m.gen_fwd, a_net, want_grads ? &c_fa : nullptr);
    Eigen::MatrixXd ra = forward(m.gen_bwd, fa, want_grads ? &c_ra : nullptr);
    Eigen::MatrixXd fb = forward(m.gen_bwd, b_net, want_grads ? &c_fb : nullptr);
    Eigen::MatrixXd rb = forward(m.gen_fwd, fb, want_grads ? &c_rb : nullptr);
    Eigen::MatrixXd yb = forward(m.disc_b, fa, want_grads ? &c_yb : nullptr);
    Eigen::MatrixXd ya = forward(m.disc_a, fb, want_grads ? &c_ya : nullptr);

    ev.losses.adv_fwd = -(yb.array().log().sum()) / na;
    ev.losses.adv_bwd = -(ya.array().log().sum()) / nb;
    for (Eigen::Index i = 0; i < a_net.cols(); ++i)
        ev.losses.rec_a += reconstruction_loss(a_net.col(i), ra.col(i), hp.metric);
    ev.losses.rec_a /= na;
    for (Eigen::Index i = 0; i < b_net.cols(); ++i)
        ev.losses.rec_b += reconstruction_loss(b_net.col(i), rb.col(i), hp.metric);
    ev.losses.rec_b /= nb;

    const bool geo_active = m.step_tag == StepTag::step2 && hp.geo_mode != GeoMode::off;
    GeoBatchResult geo_a, geo_b;
    if (geo_active) {
        geo_a = geo_over_batch(m, fa, hp, want_grads);
        geo_b = geo_over_batch(m, fb, hp, want_grads);
        const double pooled = na + nb;
        ev.losses.geo1 = (geo_a.geo1 + geo_b.geo1) / pooled;
        ev.losses.geo2 = (geo_a.geo2 + geo_b.geo2) / pooled;
        ev.losses.geo_warnings = geo_a.warnings + geo_b.warnings;
    }

    ev.losses.loss_g = hp.lambdas[0] * ev.losses.adv_fwd + hp.lambdas[1] * ev.losses.rec_a +
                       hp.lambdas[2] * ev.losses.adv_bwd + hp.lambdas[3] * ev.losses.rec_b +
                       hp.lambdas[4] * ev.losses.geo1 + hp.lambdas[5] * ev.losses.geo2;

    if (!want_grads)
        return ev;

    // Reconstruction paths: outer net first, its input gradient feeds the
    // inner net through the fake batches.
    Eigen::MatrixXd d_ra(kSampleDim, a_net.cols());
    for (Eigen::Index i = 0; i < a_net.cols(); ++i)
        d_ra.col(i) = (hp.lambdas[1] / na) * reconstruction_grad(a_net.col(i), ra.col(i), hp.metric);
    MlpGradients bw_ra = backward(m.gen_bwd, c_ra, d_ra);

    Eigen::MatrixXd d_rb(kSampleDim, b_net.cols());
    for (Eigen::Index i = 0; i < b_net.cols(); ++i)
        d_rb.col(i) = (hp.lambdas[3] / nb) * reconstruction_grad(b_net.col(i), rb.col(i), hp.metric);
    MlpGradients bw_rb = backward(m.gen_fwd, c_rb, d_rb);

    // Adversarial terms: only the input gradient of each discriminator is
    // used, their parameters stay frozen during the generator update.
    Eigen::MatrixXd d_yb = (-hp.lambdas[0] / na) * yb.array().inverse().matrix();
    MlpGradients bw_yb = backward(m.disc_b, c_yb, d_yb);
    Eigen::MatrixXd d_ya = (-hp.lambdas[2] / nb) * ya.array().inverse().matrix();
    MlpGradients bw_ya = backward(m.disc_a, c_ya, d_ya);

    Eigen::MatrixXd d_fa = bw_ra.input + bw_yb.input;
    Eigen::MatrixXd d_fb = bw_rb.input + bw_ya.input;
    if (geo_active) {
        if (geo_a.net_grad.size() > 0)
            d_fa += geo_a.net_grad / (na + nb);
        if (geo_b.net_grad.size() > 0)
            d_fb += geo_b.net_grad / (na + nb);
    }

    MlpGradients bw_fa = backward(m.gen_fwd, c_fa, d_fa);
    MlpGradients bw_fb = backward(m.gen_bwd, c_fb, d_fb);

    ev.grad_gen_fwd = std::move(bw_rb);
    accumulate(ev.grad_gen_fwd, bw_fa);
    ev.grad_gen_bwd = std::move(bw_ra);
    accumulate(ev.grad_gen_bwd, bw_fb);
    return ev;
}

struct DiscEval {
    double d_a = 0.0;
    double d_b = 0.0;
    MlpGradients grad_disc_a, grad_disc_b;
};

DiscEval discriminator_eval(const GanStepModel& m, const Eigen::MatrixXd& a_net, const Eigen::MatrixXd& b_net,
                            bool want_grads) {
    DiscEval ev;
    const double na = static_cast<double>(a_net.cols());
    const double nb = static_cast<double>(b_net.cols());

    Eigen::MatrixXd fa = forward(m.gen_fwd, a_net, nullptr);
    Eigen::MatrixXd fb = forward(m.gen_bwd, b_net, nullptr);

    ForwardCache c_real_a, c_fake_a, c_real_b, c_fake_b;
    Eigen::MatrixXd y_real_a = forward(m.disc_a, a_net, want_grads ? &c_real_a : nullptr);
    Eigen::MatrixXd y_fake_a = forward(m.disc_a, fb, want_grads ? &c_fake_a : nullptr);
    Eigen::MatrixXd y_real_b = forward(m.disc_b, b_net, want_grads ? &c_real_b : nullptr);
    Eigen::MatrixXd y_fake_b = forward(m.disc_b, fa, want_grads ? &c_fake_b : nullptr);

    ev.d_a = -(y_real_a.array().log().sum()) / na - ((1.0 - y_fake_a.array()).log().sum()) / nb;
    ev.d_b = -(y_real_b.array().log().sum()) / nb - ((1.0 - y_fake_b.array()).log().sum()) / na;

    if (!want_grads)
        return ev;

    Eigen::MatrixXd g_real_a = (-1.0 / na) * y_real_a.array().inverse().matrix();
    Eigen::MatrixXd g_fake_a = (1.0 / nb) * (1.0 - y_fake_a.array()).inverse().matrix();
    ev.grad_disc_a = backward(m.disc_a, c_real_a, g_real_a);
    accumulate(ev.grad_disc_a, backward(m.disc_a, c_fake_a, g_fake_a));

    Eigen::MatrixXd g_real_b = (-1.0 / nb) * y_real_b.array().inverse().matrix();
    Eigen::MatrixXd g_fake_b = (1.0 / na) * (1.0 - y_fake_b.array()).inverse().matrix();
    ev.grad_disc_b = backward(m.disc_b, c_real_b, g_real_b);
    accumulate(ev.grad_disc_b, backward(m.disc_b, c_fake_b, g_fake_b));
    return ev;
}

void check_finite_or_throw(const StepLosses& l, int epoch, int batch) {
    struct Item {
        const char* name;
        double v;
    };
    const Item items[] = {{"adv_fwd", l.adv_fwd}, {"rec_a", l.rec_a},   {"adv_bwd", l.adv_bwd}, {"rec_b", l.rec_b},
                          {"geo1", l.geo1},       {"geo2", l.geo2},     {"loss_g", l.loss_g},   {"d_a", l.d_a},
                          {"d_b", l.d_b},         {"loss_d", l.loss_d}};
    std::string bad;
    for (const Item& it : items) {
        if (!std::isfinite(it.v))
            bad += std::string(bad.empty() ? "" : ", ") + it.name + "=" + format_double(it.v);
    }
    if (!bad.empty())
        throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                            ": " + bad);
}

} // namespace

StepLosses evaluate_losses(const GanStepModel& m, std::span<const EncodedSample> batch_a,
                           std::span<const EncodedSample> batch_b, const HyperParams& hp) {
    if (batch_a.empty() || batch_b.empty())
        throw DimensionMismatch("loss evaluation needs non-empty batches");
    Eigen::MatrixXd a_net = pack_normalized(batch_a, m.norm);
    Eigen::MatrixXd b_net = pack_normalized(batch_b, m.norm);
    GenEval g = generator_eval(m, a_net, b_net, hp, false);
    DiscEval d = discriminator_eval(m, a_net, b_net, false);
    StepLosses l = g.losses;
    l.d_a = d.d_a;
    l.d_b = d.d_b;
    l.loss_d = d.d_a + d.d_b;
    return l;
}

GeneratorGradients generator_gradients(const GanStepModel& m, std::span<const EncodedSample> batch_a,
                                       std::span<const EncodedSample> batch_b, const HyperParams& hp) {
    if (batch_a.empty() || batch_b.empty())
        throw DimensionMismatch("gradient evaluation needs non-empty batches");
    Eigen::MatrixXd a_net = pack_normalized(batch_a, m.norm);
    Eigen::MatrixXd b_net = pack_normalized(batch_b, m.norm);
    GenEval g = generator_eval(m, a_net, b_net, hp, true);
    GeneratorGradients out;
    out.losses = g.losses;
    out.grad_fwd = std::move(g.grad_gen_fwd);
    out.grad_bwd = std::move(g.grad_gen_bwd);
    return out;
}

TrainLog train_step(GanStepModel& m, const DomainDataset& ds_a, const DomainDataset& ds_b, const HyperParams& hp,
                    const EpochCallback& on_epoch) {
    hp.validate(ds_a.size(), ds_b.size());
    if (ds_a.size() == 0 || ds_b.size() == 0)
        throw EmptyDirectory("training needs non-empty datasets on both sides");

    const auto t0 = std::chrono::steady_clock::now();
    Eigen::MatrixXd a_all = pack_normalized(ds_a.samples, m.norm);
    Eigen::MatrixXd b_all = pack_normalized(ds_b.samples, m.norm);

    std::mt19937_64 rng(splitmix64(hp.seed ^ 0x7261696e6c6f6f70ull));
    std::vector<int> order_a(static_cast<std::size_t>(ds_a.size()));
    std::vector<int> order_b(static_cast<std::size_t>(ds_b.size()));
    std::iota(order_a.begin(), order_a.end(), 0);
    std::iota(order_b.begin(), order_b.end(), 0);

    const int bs = hp.batch_size;
    const int nb = std::max(1, std::min(ds_a.size(), ds_b.size()) / bs);

    TrainLog log;
    log.step = m.step_tag;
    log.seed = hp.seed;

    Eigen::MatrixXd a_batch(kSampleDim, bs), b_batch(kSampleDim, bs);
    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        std::shuffle(order_a.begin(), order_a.end(), rng);
        std::shuffle(order_b.begin(), order_b.end(), rng);

        StepLosses sums;
        int warn_sum = 0;
        for (int b = 0; b < nb; ++b) {
            for (int k = 0; k < bs; ++k) {
                a_batch.col(k) = a_all.col(order_a[static_cast<std::size_t>(b * bs + k)]);
                b_batch.col(k) = b_all.col(order_b[static_cast<std::size_t>(b * bs + k)]);
            }

            DiscEval d = discriminator_eval(m, a_batch, b_batch, true);
            adam_step(m.disc_a, d.grad_disc_a, m.opt_disc_a);
            adam_step(m.disc_b, d.grad_disc_b, m.opt_disc_b);

            GenEval g = generator_eval(m, a_batch, b_batch, hp, true);
            adam_step(m.gen_fwd, g.grad_gen_fwd, m.opt_gen_fwd);
            adam_step(m.gen_bwd, g.grad_gen_bwd, m.opt_gen_bwd);

            StepLosses batch_losses = g.losses;
            batch_losses.d_a = d.d_a;
            batch_losses.d_b = d.d_b;
            batch_losses.loss_d = d.d_a + d.d_b;
            check_finite_or_throw(batch_losses, epoch, b);

            sums.adv_fwd += batch_losses.adv_fwd;
            sums.rec_a += batch_losses.rec_a;
            sums.adv_bwd += batch_losses.adv_bwd;
            sums.rec_b += batch_losses.rec_b;
            sums.geo1 += batch_losses.geo1;
            sums.geo2 += batch_losses.geo2;
            sums.loss_g += batch_losses.loss_g;
            sums.d_a += batch_losses.d_a;
            sums.d_b += batch_losses.d_b;
            sums.loss_d += batch_losses.loss_d;
            warn_sum += batch_losses.geo_warnings;
        }

        const double inv = 1.0 / nb;
        StepLosses means;
        means.adv_fwd = sums.adv_fwd * inv;
        means.rec_a = sums.rec_a * inv;
        means.adv_bwd = sums.adv_bwd * inv;
        means.rec_b = sums.rec_b * inv;
        means.geo1 = sums.geo1 * inv;
        means.geo2 = sums.geo2 * inv;
        means.loss_g = sums.loss_g * inv;
        means.d_a = sums.d_a * inv;
        means.d_b = sums.d_b * inv;
        means.loss_d = sums.loss_d * inv;
        means.geo_warnings = warn_sum;
        log.epochs.push_back({epoch, means});
        m.epoch = epoch;
        if (on_epoch)
            on_epoch(m, epoch);
    }

    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return log;
}

void write_trainlog_csv(const std::filesystem::path& path, const TrainLog& log) {
    std::string out = "# step=" + std::string(to_string(log.step)) + " seed=" + std::to_string(log.seed) + "\n";
    out += "epoch,adv_fwd,rec_a,adv_bwd,rec_b,geo1,geo2,loss_g,d_a,d_b,loss_d,geo_warn\n";
    for (const EpochRecord& r : log.epochs) {
        const StepLosses& l = r.losses;
        out += std::to_string(r.epoch);
        for (double v : {l.adv_fwd, l.rec_a, l.adv_bwd, l.rec_b, l.geo1, l.geo2, l.loss_g, l.d_a, l.d_b, l.loss_d}) {
            out += ",";
            out += format_double(v);
        }
        out += "," + std::to_string(l.geo_warnings) + "\n";
    }
    write_text_file(path, out);
}

std::vector<GeneratedSample> generate(const GanStepModel& m, const DomainDataset& ds, int count) {
    if (ds.size() == 0)
        throw EmptyDirectory("cannot generate from an empty dataset");
    if (count < 1)
        throw ConfigError("generation count must be at least 1");
    const bool fwd = ds.tag == DomainTag::ah || ds.tag == DomainTag::ahbg;
    const MlpParams& gen = fwd ? m.gen_fwd : m.gen_bwd;

    std::vector<GeneratedSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        int src = i % ds.size();
        Eigen::VectorXd net = m.norm.apply(ds.samples[static_cast<std::size_t>(src)].data);
        Eigen::VectorXd gen_out = forward_one(gen, net);

        GeneratedSample g;
        g.sample.data = m.norm.invert(gen_out);
        g.sample.occupancy_known = false;
        g.sample.species_labels = {"", "H", m.element_a, m.element_b};
        g.direction = fwd ? "fwd" : "bwd";
        g.source_index = src;
        g.source_file = ds.filenames.size() > static_cast<std::size_t>(src) ? ds.filenames[static_cast<std::size_t>(src)]
                                                                            : std::string();
        g.pseudo_binary = m.step_tag == StepTag::step1;
        out.push_back(std::move(g));
    }
    return out;
}

GanStepModel classic_train(const DomainDataset& ds_a, const DomainDataset& ds_b, const HyperParams& hp, TrainLog* log,
                           const EpochCallback& on_epoch) {
    const int n_pool = ds_a.size() + ds_b.size();
    if (n_pool == 0)
        throw EmptyDirectory("classic baseline needs training samples");
    if (hp.batch_size > n_pool)
        throw ConfigError("batch size exceeds the pooled dataset");
    hp.validate(n_pool, n_pool);

    const DomainDataset* sets[] = {&ds_a, &ds_b};
    Normalizer norm = Normalizer::fit(sets);

    GanStepModel m;
    m.step_tag = StepTag::step1;
    m.element_a = ds_a.element_a.empty() ? ds_b.element_a : ds_a.element_a;
    m.element_b = ds_a.element_b.empty() ? ds_b.element_b : ds_a.element_b;
    m.norm = norm;
    m.seed = hp.seed;
    m.gen_fwd = mlp_init(generator_spec(hp), role_seed(hp.seed, StepTag::step1, 21));
    m.disc_a = mlp_init(discriminator_spec(hp), role_seed(hp.seed, StepTag::step1, 22));
    // The cross-domain slots are unused here; keep them minimal.
    MlpSpec stub{{1, 1}, OutputActivation::linear};
    m.gen_bwd = mlp_init(stub, 0);
    m.disc_b = mlp_init(stub, 0);
    m.opt_gen_fwd = make_adam_state(m.gen_fwd, hp.adam);
    m.opt_disc_a = make_adam_state(m.disc_a, hp.adam);
    m.opt_gen_bwd = make_adam_state(m.gen_bwd, hp.adam);
    m.opt_disc_b = make_adam_state(m.disc_b, hp.adam);

    const auto t0 = std::chrono::steady_clock::now();
    Eigen::MatrixXd pool(kSampleDim, n_pool);
    for (int i = 0; i < ds_a.size(); ++i)
        pool.col(i) = norm.apply(ds_a.samples[static_cast<std::size_t>(i)].data);
    for (int i = 0; i < ds_b.size(); ++i)
        pool.col(ds_a.size() + i) = norm.apply(ds_b.samples[static_cast<std::size_t>(i)].data);

    std::mt19937_64 rng(splitmix64(hp.seed ^ 0x636c617373696367ull));
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw_noise = [&](Eigen::MatrixXd& z) {
        for (Eigen::Index c = 0; c < z.cols(); ++c)
            for (Eigen::Index r = 0; r < z.rows(); ++r)
                z(r, c) = gauss(rng);
    };

    std::vector<int> order(static_cast<std::size_t>(n_pool));
    std::iota(order.begin(), order.end(), 0);
    const int bs = hp.batch_size;
    const int nb = std::max(1, n_pool / bs);

    TrainLog local_log;
    local_log.step = StepTag::step1;
    local_log.seed = hp.seed;

    Eigen::MatrixXd real(kSampleDim, bs), z(kSampleDim, bs);
    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double adv_sum = 0.0, d_sum = 0.0;
        for (int b = 0; b < nb; ++b) {
            for (int k = 0; k < bs; ++k)
                real.col(k) = pool.col(order[static_cast<std::size_t>(b * bs + k)]);

            draw_noise(z);
            Eigen::MatrixXd fake = forward(m.gen_fwd, z, nullptr);
            ForwardCache c_real, c_fake;
            Eigen::MatrixXd y_real = forward(m.disc_a, real, &c_real);
            Eigen::MatrixXd y_fake = forward(m.disc_a, fake, &c_fake);
            double d_loss = -(y_real.array().log().sum()) / bs - ((1.0 - y_fake.array()).log().sum()) / bs;
            Eigen::MatrixXd g_real = (-1.0 / bs) * y_real.array().inverse().matrix();
            Eigen::MatrixXd g_fake = (1.0 / bs) * (1.0 - y_fake.array()).inverse().matrix();
            MlpGradients gd = backward(m.disc_a, c_real, g_real);
            accumulate(gd, backward(m.disc_a, c_fake, g_fake));
            adam_step(m.disc_a, gd, m.opt_disc_a);

            draw_noise(z);
            ForwardCache c_gen, c_y;
            Eigen::MatrixXd fake2 = forward(m.gen_fwd, z, &c_gen);
            Eigen::MatrixXd y2 = forward(m.disc_a, fake2, &c_y);
            double adv = -(y2.array().log().sum()) / bs;
            Eigen::MatrixXd d_y = (-1.0 / bs) * y2.array().inverse().matrix();
            MlpGradients through_d = backward(m.disc_a, c_y, d_y);
            MlpGradients gg = backward(m.gen_fwd, c_gen, through_d.input);
            adam_step(m.gen_fwd, gg, m.opt_gen_fwd);

            if (!std::isfinite(adv) || !std::isfinite(d_loss))
                throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(b) + ": adv=" + format_double(adv) +
                                    " d=" + format_double(d_loss));
            adv_sum += adv;
            d_sum += d_loss;
        }
        StepLosses l;
        l.adv_fwd = adv_sum / nb;
        l.loss_g = l.adv_fwd;
        l.d_a = d_sum / nb;
        l.loss_d = l.d_a;
        local_log.epochs.push_back({epoch, l});
        m.epoch = epoch;
        if (on_epoch)
            on_epoch(m, epoch);
    }
    local_log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log)
        *log = std::move(local_log);
    return m;
}

std::vector<GeneratedSample> classic_generate(const GanStepModel& m, int count) {
    if (count < 1)
        throw ConfigError("generation count must be at least 1");
    std::mt19937_64 rng(splitmix64(m.seed ^ 0x636c617373696373ull));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd z(kSampleDim, count);
    for (Eigen::Index c = 0; c < z.cols(); ++c)
        for (Eigen::Index r = 0; r < z.rows(); ++r)
            z(r, c) = gauss(rng);
    Eigen::MatrixXd made = forward(m.gen_fwd, z, nullptr);

    std::vector<GeneratedSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        GeneratedSample g;
        g.sample.data = m.norm.invert(made.col(i));
        g.sample.occupancy_known = false;
        g.sample.species_labels = {"", "H", m.element_a, m.element_b};
        g.direction = "noise";
        g.source_index = i;
        g.pseudo_binary = false;
        out.push_back(std::move(g));
    }
    return out;
}

BaselineResult run_baseline(BaselineKind kind, const DomainDataset& ds_a, const DomainDataset& ds_b,
                            const HyperParams& hp) {
    if (kind == BaselineKind::classic_gan) {
        BaselineResult res;
        res.model = classic_train(ds_a, ds_b, hp, &res.log);
        res.candidates = classic_generate(res.model, ds_a.size() + ds_b.size());
        return res;
    }

    const DomainDataset* sets[] = {&ds_a, &ds_b};
    Normalizer norm = Normalizer::fit(sets);
    BaselineResult res;
    res.model = make_step_model(StepTag::step1, hp, norm, ds_a.element_a, ds_a.element_b);
    res.log = train_step(res.model, ds_a, ds_b, hp);
    res.candidates = generate(res.model, ds_a, ds_a.size());
    std::vector<GeneratedSample> back = generate(res.model, ds_b, ds_b.size());
    res.candidates.insert(res.candidates.end(), std::make_move_iterator(back.begin()),
                          std::make_move_iterator(back.end()));
    return res;
}

} // namespace cgan
