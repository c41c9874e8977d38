#include "cgan/corpus.hpp"

#include <cstdio>
#include <random>

#include "cgan/errors.hpp"
#include "cgan/util.hpp"

namespace cgan {

const char* to_string(Prototype p) {
    return p == Prototype::rocksalt ? "rocksalt" : "fluorite";
}

Prototype prototype_from_string(const std::string& s) {
    if (s == "rocksalt") return Prototype::rocksalt;
    if (s == "fluorite") return Prototype::fluorite;
    throw ConfigError("unknown prototype '" + s + "' (expected rocksalt or fluorite)");
}

CrystalStructure make_prototype(Prototype proto, const std::string& metal, double a) {
    CrystalStructure s;
    s.comment = metal + "H " + to_string(proto);
    s.scale = 1.0;
    s.lattice = a * Eigen::Matrix3d::Identity();

    auto add = [&s](const std::string& sp, double x, double y, double z) {
        s.sites.push_back({sp, Eigen::Vector3d(x, y, z)});
    };

    if (proto == Prototype::rocksalt) {
        // fcc metal + octahedral hydrogen, basis offset by 1/4.
        add(metal, 0.25, 0.25, 0.25);
        add(metal, 0.75, 0.75, 0.25);
        add(metal, 0.75, 0.25, 0.75);
        add(metal, 0.25, 0.75, 0.75);
        s.species_order.push_back(metal);
        s.species_counts.push_back(4);
        add("H", 0.75, 0.25, 0.25);
        add("H", 0.25, 0.75, 0.25);
        add("H", 0.25, 0.25, 0.75);
        add("H", 0.75, 0.75, 0.75);
        s.species_order.push_back("H");
        s.species_counts.push_back(4);
    } else {
        // fcc metal + tetrahedral hydrogen pairs, basis offset by 1/8.
        add(metal, 0.125, 0.125, 0.125);
        add(metal, 0.625, 0.625, 0.125);
        add(metal, 0.625, 0.125, 0.625);
        add(metal, 0.125, 0.625, 0.625);
        s.species_order.push_back(metal);
        s.species_counts.push_back(4);
        add("H", 0.375, 0.375, 0.375);
        add("H", 0.875, 0.875, 0.375);
        add("H", 0.875, 0.375, 0.875);
        add("H", 0.375, 0.875, 0.875);
        add("H", 0.875, 0.875, 0.875);
        add("H", 0.375, 0.375, 0.875);
        add("H", 0.375, 0.875, 0.375);
        add("H", 0.875, 0.375, 0.375);
        s.species_order.push_back("H");
        s.species_counts.push_back(8);
    }
    return s;
}

void make_synthetic_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir) {
    if (spec.count < 1)
        throw ConfigError("corpus count must be at least 1");
    if (!(spec.a_min >= 2.0 && spec.a_max <= 8.0 && spec.a_min <= spec.a_max))
        throw ConfigError("lattice parameter range must satisfy 2 <= a_min <= a_max <= 8");
    if (spec.jitter < 0.0 || spec.jitter > 0.02)
        throw ConfigError("jitter must lie in [0, 0.02]");
    if (spec.metal.empty() || spec.metal == "H")
        throw ConfigError("metal symbol must be a non-hydrogen element");

    std::filesystem::create_directories(out_dir);
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> a_dist(spec.a_min, spec.a_max);
    std::uniform_real_distribution<double> j_dist(-spec.jitter, spec.jitter);

    for (int i = 0; i < spec.count; ++i) {
        double a = a_dist(rng);
        CrystalStructure s = make_prototype(spec.prototype, spec.metal, a);
        for (AtomSite& site : s.sites)
            for (int c = 0; c < 3; ++c)
                site.frac(c) = wrap_frac(site.frac(c) + j_dist(rng));
        char name[64];
        std::snprintf(name, sizeof(name), "%sH_%s_%03d.poscar", spec.metal.c_str(), to_string(spec.prototype), i);
        s.comment += " " + std::to_string(i);
        write_text_file(out_dir / name, write_poscar(s));
    }
}

} // namespace cgan
