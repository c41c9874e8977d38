#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cgan/encoding.hpp"
#include "cgan/poscar.hpp"

namespace cgan {

// Unordered species pair, normalized so first <= second.
using SpeciesPair = std::pair<std::string, std::string>;

SpeciesPair make_species_pair(const std::string& a, const std::string& b);
std::string to_string(const SpeciesPair& p);

// Every same/cross pair among `species` except hydrogen-metal pairs, which
// are the bonds the model is supposed to form and therefore go unpenalized.
std::set<SpeciesPair> penalized_pairs_for(const std::vector<std::string>& species);

struct GeoConfig {
    double d1 = 1.8;    // hard floor for penalized first-neighbor distances
    double d2 = 3.0;    // soft ceiling
    double cutoff = 8.0; // pair enumeration radius for reports and histograms
    // Empty means "derive from the species actually present" via
    // penalized_pairs_for; a non-empty set is used verbatim.
    std::set<SpeciesPair> penalized;

    std::set<SpeciesPair> resolve_penalized(const std::vector<std::string>& present) const;
};

struct NeighborEntry {
    int i, j;                 // site indices (ordered pair, both directions listed)
    std::array<int, 3> image; // lattice translation applied to j
    double distance;
};

struct FirstNeighbor {
    double distance = 0.0;
    int partner = -1;
    std::array<int, 3> image{0, 0, 0};
    int multiplicity = 0; // partners tied with the minimum within 1e-9
};

struct NeighborReport {
    std::vector<NeighborEntry> pairs;                              // within cutoff
    std::vector<std::map<SpeciesPair, FirstNeighbor>> per_atom_first; // true minima, not cutoff-limited
    std::vector<double> first_distance;                            // per atom, min over classes
};

// Enumerates periodic images out to whatever radius is needed so that every
// atom's first neighbor is found even when it sits beyond the cutoff.
NeighborReport neighbor_distances(const CrystalStructure& s, double cutoff);

struct Histogram {
    double bin_width = 0.1;
    double cutoff = 8.0;
    std::vector<double> counts; // ordered pairs per atom, bin b covers [b*w, (b+1)*w)
};

Histogram pair_distribution(const CrystalStructure& s, double bin_width, double cutoff);
std::string histogram_tsv(const Histogram& h);

enum class GeoMode { paper, hinge, off };
const char* to_string(GeoMode m);
GeoMode geo_mode_from_string(const std::string& s);

struct GeoLossResult {
    double geo1 = 0.0; // pushes the closest penalized distance up toward d1
    double geo2 = 0.0; // pulls the d2-nearest distance onto d2 (negated in paper mode)
    Eigen::VectorXd grad1; // d geo1 / d sample, 216 values
    Eigen::VectorXd grad2;
    bool no_pairs = false; // sample decoded to nothing penalizable; losses are zero
    std::string note;
};

// Both terms are built from the multiset of first-neighbor distances between
// penalized species pairs of the decoded sample. Gradients flow to the
// coordinate rows of the atoms forming the selected pairs and to the lattice
// rows; rows dropped by the decode threshold get zero gradient.
GeoLossResult geo_losses(const EncodedSample& e, const GeoConfig& cfg, GeoMode mode = GeoMode::paper,
                         double threshold = kDefaultDecodeThreshold);

struct Violation {
    int i, j;
    std::array<int, 3> image;
    SpeciesPair pair;
    double distance;
    bool below; // true: closer than d1, false: first neighbor farther than d2
};

struct StructureVerdict {
    bool good = false;
    bool ternary = false;
    int distinct_species = 0;
    std::vector<Violation> violations;
};

// A structure is good when every penalized per-atom first-neighbor distance
// lies within [d1, d2].
StructureVerdict validate_structure(const CrystalStructure& s, const GeoConfig& cfg);

} // namespace cgan
