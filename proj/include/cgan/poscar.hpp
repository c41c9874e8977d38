#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace cgan {

struct AtomSite {
    std::string species;
    Eigen::Vector3d frac; // fractional, in [0,1) once canonical
};

// Periodic crystal in the VASP POSCAR sense. The lattice matrix stores the
// three lattice vectors as rows, already multiplied by the scale factor from
// the file; `scale` is kept only so the original header can be reported.
struct CrystalStructure {
    std::string comment;
    double scale = 1.0;
    Eigen::Matrix3d lattice = Eigen::Matrix3d::Identity(); // rows a, b, c
    std::vector<std::string> species_order;                // distinct, file order
    std::vector<int> species_counts;                       // parallel to species_order
    std::vector<AtomSite> sites;                           // grouped by species

    int atom_count() const { return static_cast<int>(sites.size()); }
    int count_of(const std::string& species) const;
};

// Maps x into [0,1), treating values that round up to 1.0 as 0.0.
double wrap_frac(double x);

// Parses one POSCAR document. Accepts both the pre-VASP5 dialect (species
// named on the comment line) and the VASP5 dialect (dedicated symbols line),
// direct or cartesian coordinates. Selective dynamics and velocity blocks are
// rejected.
CrystalStructure parse_poscar(const std::string& text);

// Direct-coordinate POSCAR with the scale folded in (scale line is 1.0).
std::string write_poscar(const CrystalStructure& s);

// Wraps all coordinates into [0,1) and regroups sites so that each species
// forms one contiguous run, in order of first appearance.
CrystalStructure canonicalize(const CrystalStructure& s);

// Equality up to tol; fractional coordinates are compared modulo 1.
bool approx_equal(const CrystalStructure& a, const CrystalStructure& b, double tol);

} // namespace cgan
