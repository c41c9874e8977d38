#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "cgan/encoding.hpp"
#include "cgan/geometry.hpp"
#include "cgan/mlp.hpp"
#include "cgan/poscar.hpp"

namespace testsupport {

// Diagonally dominant lattice plus uniform coordinates; small enough cells
// that exact searches stay cheap but skewed enough to exercise the image
// logic.
inline cgan::CrystalStructure random_structure(std::mt19937_64& rng, int max_atoms = 8) {
    std::uniform_real_distribution<double> diag(3.0, 8.0);
    std::uniform_real_distribution<double> off(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    cgan::CrystalStructure s;
    s.comment = "random";
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            s.lattice(r, c) = r == c ? diag(rng) : off(rng);

    const std::vector<std::string> pool{"H", "Pd", "Ni"};
    std::uniform_int_distribution<int> nspecies(1, 3);
    int k = nspecies(rng);
    int remaining = std::uniform_int_distribution<int>(k, max_atoms)(rng);
    for (int i = 0; i < k; ++i) {
        int take = i == k - 1 ? remaining : std::uniform_int_distribution<int>(1, remaining - (k - 1 - i))(rng);
        remaining -= take;
        s.species_order.push_back(pool[static_cast<std::size_t>(i)]);
        s.species_counts.push_back(take);
        for (int a = 0; a < take; ++a) {
            cgan::AtomSite site;
            site.species = pool[static_cast<std::size_t>(i)];
            site.frac = {unit(rng), unit(rng), unit(rng)};
            s.sites.push_back(site);
        }
    }
    return s;
}

// Independent neighbor oracle: plain enumeration over a fixed image box.
struct OracleFirst {
    double distance = std::numeric_limits<double>::infinity();
    int partner = -1;
    std::array<int, 3> image{0, 0, 0};
    int multiplicity = 0;
};

struct OracleReport {
    std::vector<std::tuple<int, int, std::array<int, 3>, double>> pairs;
    std::vector<std::map<cgan::SpeciesPair, OracleFirst>> per_atom_first;
};

inline OracleReport brute_force_neighbors(const cgan::CrystalStructure& s, double cutoff, int box) {
    OracleReport rep;
    const int m = s.atom_count();
    rep.per_atom_first.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            cgan::SpeciesPair key = cgan::make_species_pair(s.sites[i].species, s.sites[j].species);
            Eigen::Vector3d df;
            for (int c = 0; c < 3; ++c)
                df(c) = cgan::wrap_frac(s.sites[j].frac(c)) - cgan::wrap_frac(s.sites[i].frac(c));
            OracleFirst& best = rep.per_atom_first[static_cast<std::size_t>(i)]
                                    .emplace(key, OracleFirst{})
                                    .first->second;
            for (int a = -box; a <= box; ++a)
                for (int b = -box; b <= box; ++b)
                    for (int c = -box; c <= box; ++c) {
                        if (i == j && a == 0 && b == 0 && c == 0)
                            continue;
                        Eigen::Vector3d u = df + Eigen::Vector3d(a, b, c);
                        double d = (s.lattice.transpose() * u).norm();
                        if (d <= cutoff)
                            rep.pairs.push_back({i, j, {a, b, c}, d});
                        if (d < best.distance) {
                            best.distance = d;
                            best.partner = j;
                            best.image = {a, b, c};
                        }
                    }
        }
        for (auto& [key, best] : rep.per_atom_first[static_cast<std::size_t>(i)]) {
            for (int j = 0; j < m; ++j) {
                if (cgan::make_species_pair(s.sites[i].species, s.sites[j].species) != key)
                    continue;
                Eigen::Vector3d df;
                for (int c = 0; c < 3; ++c)
                    df(c) = cgan::wrap_frac(s.sites[j].frac(c)) - cgan::wrap_frac(s.sites[i].frac(c));
                for (int a = -box; a <= box; ++a)
                    for (int b = -box; b <= box; ++b)
                        for (int c = -box; c <= box; ++c) {
                            if (i == j && a == 0 && b == 0 && c == 0)
                                continue;
                            Eigen::Vector3d u = df + Eigen::Vector3d(a, b, c);
                            if ((s.lattice.transpose() * u).norm() <= best.distance + 1e-9)
                                ++best.multiplicity;
                        }
            }
        }
    }
    return rep;
}

// Per-neuron forward pass written without any matrix algebra.
inline Eigen::VectorXd naive_forward(const cgan::MlpParams& p, const Eigen::VectorXd& x) {
    Eigen::VectorXd a = x;
    for (int l = 0; l < p.spec.layer_count(); ++l) {
        const Eigen::MatrixXd& w = p.weights[static_cast<std::size_t>(l)];
        const Eigen::VectorXd& b = p.biases[static_cast<std::size_t>(l)];
        Eigen::VectorXd z(w.rows());
        for (int r = 0; r < w.rows(); ++r) {
            double acc = b(r);
            for (int c = 0; c < w.cols(); ++c)
                acc += w(r, c) * a(c);
            z(r) = acc;
        }
        if (l + 1 < p.spec.layer_count()) {
            for (int r = 0; r < z.size(); ++r)
                z(r) = z(r) > 0.0 ? z(r) : 0.0;
        } else if (p.spec.output_activation == cgan::OutputActivation::sigmoid) {
            for (int r = 0; r < z.size(); ++r) {
                double v = 1.0 / (1.0 + std::exp(-z(r)));
                z(r) = std::min(1.0 - cgan::kSigmoidClamp, std::max(cgan::kSigmoidClamp, v));
            }
        }
        a = z;
    }
    return a;
}

// One scalar Adam update, the textbook recursion.
inline void reference_adam(double& p, double g, double& m, double& v, long long t, const cgan::AdamConfig& c) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    double mhat = m / (1.0 - std::pow(c.beta1, static_cast<double>(t)));
    double vhat = v / (1.0 - std::pow(c.beta2, static_cast<double>(t)));
    p -= c.alpha * mhat / (std::sqrt(vhat) + c.epsilon);
}

// Central finite difference of a scalar function of one coordinate.
template <class F>
double central_diff(F&& f, double& slot, double h) {
    const double saved = slot;
    slot = saved + h;
    double up = f();
    slot = saved - h;
    double down = f();
    slot = saved;
    return (up - down) / (2.0 * h);
}

inline cgan::MlpParams identity_generator() {
    cgan::MlpParams p;
    p.spec.layer_dims = {cgan::kSampleDim, cgan::kSampleDim};
    p.spec.output_activation = cgan::OutputActivation::linear;
    p.weights.push_back(Eigen::MatrixXd::Identity(cgan::kSampleDim, cgan::kSampleDim));
    p.biases.push_back(Eigen::VectorXd::Zero(cgan::kSampleDim));
    return p;
}

// Unique scratch directory under the build tree, wiped on construction.
struct ScratchDir {
    std::filesystem::path path;

    explicit ScratchDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() / ("cgan_test_" + name);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~ScratchDir() { std::filesystem::remove_all(path); }
};

} // namespace testsupport
