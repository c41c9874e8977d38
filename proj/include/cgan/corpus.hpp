#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cgan/poscar.hpp"

namespace cgan {

enum class Prototype { rocksalt, fluorite };
const char* to_string(Prototype p);
Prototype prototype_from_string(const std::string& s);

// Cubic metal-hydride cell with lattice parameter a. The basis is shifted
// away from the cell origin so every coordinate stays well clear of zero;
// distances are unaffected and the encoding threshold can never eat a site.
CrystalStructure make_prototype(Prototype proto, const std::string& metal, double a);

struct CorpusSpec {
    Prototype prototype = Prototype::rocksalt;
    std::string metal = "Pd";
    double a_min = 3.8;
    double a_max = 4.2;
    int count = 35;
    double jitter = 0.02; // max fractional perturbation per coordinate
    std::uint64_t seed = 1;
};

// Writes `count` POSCAR files (lattice parameter uniform in [a_min, a_max],
// coordinates jittered) into out_dir. Same spec, same files.
void make_synthetic_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir);

} // namespace cgan
