#include "cgan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cgan/errors.hpp"
#include "cgan/util.hpp"

namespace cgan {

SpeciesPair make_species_pair(const std::string& a, const std::string& b) {
    return a <= b ? SpeciesPair{a, b} : SpeciesPair{b, a};
}

std::string to_string(const SpeciesPair& p) {
    return p.first + "-" + p.second;
}

std::set<SpeciesPair> penalized_pairs_for(const std::vector<std::string>& species) {
    std::set<SpeciesPair> out;
    for (std::size_t i = 0; i < species.size(); ++i) {
        for (std::size_t j = i; j < species.size(); ++j) {
            bool ih = species[i] == "H";
            bool jh = species[j] == "H";
            if (ih != jh)
                continue; // hydrogen-metal bonds are the wanted ones
            out.insert(make_species_pair(species[i], species[j]));
        }
    }
    return out;
}

std::set<SpeciesPair> GeoConfig::resolve_penalized(const std::vector<std::string>& present) const {
    if (!penalized.empty())
        return penalized;
    return penalized_pairs_for(present);
}

namespace {

constexpr double kTieTol = 1e-9;
// Image enumeration budgets. Physical cells stay far below both; they only
// bite on degenerate lattices where an exact search would enumerate millions
// of images.
constexpr double kMaxImagesTotal = 200000.0; // exact searches, hard failure beyond
constexpr double kGeoMaxImages = 1000.0;     // training loss, truncates instead
constexpr double kGeoMinSlab = 0.5;          // thinnest cell the loss still scores (A)

struct Cell {
    Eigen::Matrix3d lattice;        // rows are the lattice vectors
    Eigen::Vector3d inv_col_norms;  // gradient norms of the cart->frac map
    double h_min;                   // smallest interplanar spacing
};

Cell make_cell(const Eigen::Matrix3d& lattice) {
    Cell c;
    c.lattice = lattice;
    Eigen::Matrix3d inv = lattice.inverse();
    for (int i = 0; i < 3; ++i)
        c.inv_col_norms(i) = inv.col(i).norm();
    c.h_min = 1.0 / c.inv_col_norms.maxCoeff();
    return c;
}

// Per-axis image bound covering every displacement shorter than radius.
Eigen::Vector3i bounds_for_radius(const Cell& c, double radius) {
    Eigen::Vector3i n;
    for (int i = 0; i < 3; ++i) {
        double b = 1.0 + std::ceil(radius * c.inv_col_norms(i) + 1e-12);
        n(i) = b > 1e6 || !std::isfinite(b) ? 1000000 : static_cast<int>(b);
    }
    return n;
}

double image_total(const Eigen::Vector3i& bound) {
    return (2.0 * bound(0) + 1.0) * (2.0 * bound(1) + 1.0) * (2.0 * bound(2) + 1.0);
}

double image_distance(const Cell& c, const Eigen::Vector3d& df, const Eigen::Vector3i& n) {
    Eigen::Vector3d u = df + n.cast<double>();
    return (c.lattice.transpose() * u).norm();
}

struct PairMin {
    double distance = std::numeric_limits<double>::infinity();
    Eigen::Vector3i image{0, 0, 0};
};

void scan_images(const Cell& c, const Eigen::Vector3d& df, bool self, const Eigen::Vector3i& bound, PairMin& best) {
    Eigen::Vector3i n;
    for (n(0) = -bound(0); n(0) <= bound(0); ++n(0))
        for (n(1) = -bound(1); n(1) <= bound(1); ++n(1))
            for (n(2) = -bound(2); n(2) <= bound(2); ++n(2)) {
                if (self && n(0) == 0 && n(1) == 0 && n(2) == 0)
                    continue;
                double d = image_distance(c, df, n);
                if (d < best.distance) {
                    best.distance = d;
                    best.image = n;
                }
            }
}

// Minimum-image distance. The [-1,1] box is exact whenever the found
// distance is at most the smallest interplanar spacing; otherwise the box is
// regrown to the radius that provably contains the minimum. A regrow larger
// than max_total images is skipped and the [-1,1] result kept, which can only
// happen on badly conditioned cells; truncated reports it.
PairMin pair_min_image(const Cell& c, const Eigen::Vector3d& df, bool self, double max_total, bool* truncated) {
    PairMin best;
    scan_images(c, df, self, Eigen::Vector3i{1, 1, 1}, best);
    if (best.distance > c.h_min + 1e-12) {
        Eigen::Vector3i bound = bounds_for_radius(c, best.distance);
        if (bound(0) > 1 || bound(1) > 1 || bound(2) > 1) {
            if (image_total(bound) > max_total) {
                if (truncated)
                    *truncated = true;
            } else {
                PairMin wide;
                scan_images(c, df, self, bound, wide);
                best = wide;
            }
        }
    }
    return best;
}

std::vector<Eigen::Vector3d> wrapped_coords(const CrystalStructure& s) {
    std::vector<Eigen::Vector3d> f;
    f.reserve(s.sites.size());
    for (const AtomSite& site : s.sites) {
        Eigen::Vector3d v;
        for (int c = 0; c < 3; ++c)
            v(c) = wrap_frac(site.frac(c));
        f.push_back(v);
    }
    return f;
}

std::vector<std::string> distinct_species(const CrystalStructure& s) {
    std::vector<std::string> out;
    for (const AtomSite& site : s.sites)
        if (std::find(out.begin(), out.end(), site.species) == out.end())
            out.push_back(site.species);
    return out;
}

struct FirstEntry {
    double distance;
    int i, j;
    Eigen::Vector3i image;
    Eigen::Vector3d u; // frac displacement f_j - f_i + image
    SpeciesPair key;
};

// One entry per (atom, penalized class) present: the first-neighbor distance
// of that atom within that class, self-images included. Exact within the
// image budget, see pair_min_image.
std::vector<FirstEntry> penalized_first_entries(const CrystalStructure& s, const std::set<SpeciesPair>& classes,
                                                double max_total, bool* truncated) {
    const Cell cell = make_cell(s.lattice);
    const std::vector<Eigen::Vector3d> f = wrapped_coords(s);
    const int m = s.atom_count();

    std::vector<FirstEntry> entries;
    for (int i = 0; i < m; ++i) {
        std::map<SpeciesPair, FirstEntry> per_class;
        for (int j = 0; j < m; ++j) {
            SpeciesPair key = make_species_pair(s.sites[i].species, s.sites[j].species);
            if (classes.find(key) == classes.end())
                continue;
            PairMin pm = pair_min_image(cell, f[j] - f[i], i == j, max_total, truncated);
            auto it = per_class.find(key);
            if (it == per_class.end() || pm.distance < it->second.distance) {
                FirstEntry e;
                e.distance = pm.distance;
                e.i = i;
                e.j = j;
                e.image = pm.image;
                e.u = f[j] - f[i] + pm.image.cast<double>();
                e.key = key;
                per_class[key] = e;
            }
        }
        for (const auto& [key, entry] : per_class)
            entries.push_back(entry);
    }
    return entries;
}

} // namespace

NeighborReport neighbor_distances(const CrystalStructure& s, double cutoff) {
    if (s.sites.empty())
        throw NoAtoms("neighbor search needs at least one atom");
    double det = s.lattice.determinant();
    if (det <= 1e-10)
        throw SingularLattice("neighbor search needs a non-degenerate lattice; determinant " + format_double(det));

    const Cell cell = make_cell(s.lattice);
    const std::vector<Eigen::Vector3d> f = wrapped_coords(s);
    const int m = s.atom_count();

    // Every pair's nearest image is no farther than half the perimeter bound,
    // so enumerating to this radius guarantees first neighbors are seen even
    // when they lie beyond the cutoff.
    double reach = 0.5 * (s.lattice.row(0).norm() + s.lattice.row(1).norm() + s.lattice.row(2).norm());
    double radius = std::max(cutoff, reach) + 1e-9;
    const Eigen::Vector3i bound = bounds_for_radius(cell, radius);
    if (image_total(bound) > kMaxImagesTotal)
        throw SingularLattice("lattice too ill-conditioned for an exact neighbor search");

    NeighborReport rep;
    rep.per_atom_first.resize(static_cast<std::size_t>(m));
    rep.first_distance.resize(static_cast<std::size_t>(m), 0.0);

    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const Eigen::Vector3d df = f[j] - f[i];
            const SpeciesPair key = make_species_pair(s.sites[i].species, s.sites[j].species);
            Eigen::Vector3i n;
            for (n(0) = -bound(0); n(0) <= bound(0); ++n(0))
                for (n(1) = -bound(1); n(1) <= bound(1); ++n(1))
                    for (n(2) = -bound(2); n(2) <= bound(2); ++n(2)) {
                        if (i == j && n(0) == 0 && n(1) == 0 && n(2) == 0)
                            continue;
                        double d = image_distance(cell, df, n);
                        if (d <= cutoff)
                            rep.pairs.push_back({i, j, {n(0), n(1), n(2)}, d});
                        auto it = rep.per_atom_first[i].find(key);
                        if (it == rep.per_atom_first[i].end() || d < it->second.distance) {
                            FirstNeighbor fn;
                            fn.distance = d;
                            fn.partner = j;
                            fn.image = {n(0), n(1), n(2)};
                            rep.per_atom_first[i][key] = fn;
                        }
                    }
        }
    }

    // Count ties in a second sweep now that the minima are known.
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const Eigen::Vector3d df = f[j] - f[i];
            const SpeciesPair key = make_species_pair(s.sites[i].species, s.sites[j].species);
            FirstNeighbor& fn = rep.per_atom_first[i][key];
            Eigen::Vector3i n;
            for (n(0) = -bound(0); n(0) <= bound(0); ++n(0))
                for (n(1) = -bound(1); n(1) <= bound(1); ++n(1))
                    for (n(2) = -bound(2); n(2) <= bound(2); ++n(2)) {
                        if (i == j && n(0) == 0 && n(1) == 0 && n(2) == 0)
                            continue;
                        if (image_distance(cell, df, n) <= fn.distance + kTieTol)
                            ++fn.multiplicity;
                    }
        }
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [key, fn] : rep.per_atom_first[i])
            best = std::min(best, fn.distance);
        rep.first_distance[i] = best;
    }
    return rep;
}

Histogram pair_distribution(const CrystalStructure& s, double bin_width, double cutoff) {
    if (bin_width <= 0.0)
        throw Error("bin width must be positive");
    NeighborReport rep = neighbor_distances(s, cutoff);
    Histogram h;
    h.bin_width = bin_width;
    h.cutoff = cutoff;
    h.counts.assign(static_cast<std::size_t>(std::floor(cutoff / bin_width)) + 1, 0.0);
    for (const NeighborEntry& p : rep.pairs) {
        auto b = static_cast<std::size_t>(std::floor(p.distance / bin_width + 1e-9));
        if (b < h.counts.size())
            h.counts[b] += 1.0;
    }
    const double m = s.atom_count();
    for (double& c : h.counts)
        c /= m;
    return h;
}

std::string histogram_tsv(const Histogram& h) {
    std::string out = "# r_lo\tr_hi\tpairs_per_atom\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        out += format_double(static_cast<double>(b) * h.bin_width);
        out += "\t";
        out += format_double(static_cast<double>(b + 1) * h.bin_width);
        out += "\t";
        out += format_double(h.counts[b]);
        out += "\n";
    }
    return out;
}

const char* to_string(GeoMode m) {
    switch (m) {
    case GeoMode::paper: return "paper";
    case GeoMode::hinge: return "hinge";
    case GeoMode::off: return "off";
    }
    return "?";
}

GeoMode geo_mode_from_string(const std::string& s) {
    if (s == "paper") return GeoMode::paper;
    if (s == "hinge") return GeoMode::hinge;
    if (s == "off") return GeoMode::off;
    throw ConfigError("unknown geo mode '" + s + "' (expected paper, hinge or off)");
}

namespace {

// Routes d(loss)/d(distance) of one selected pair onto the flat sample
// gradient: both endpoint coordinate rows plus the lattice rows.
void accumulate_pair_gradient(Eigen::VectorXd& grad, const FirstEntry& entry, double dloss_ddist,
                              const Eigen::Matrix3d& lattice, const std::vector<SiteOrigin>& origins) {
    if (entry.distance < 1e-9)
        return; // direction undefined at coincident points, leave the term flat
    Eigen::Vector3d r = lattice.transpose() * entry.u;
    Eigen::Vector3d rhat = r / entry.distance;
    Eigen::Vector3d dcoord = lattice * rhat; // d distance / d frac_j

    const SiteOrigin& oj = origins[static_cast<std::size_t>(entry.j)];
    const SiteOrigin& oi = origins[static_cast<std::size_t>(entry.i)];
    for (int c = 0; c < 3; ++c) {
        grad(EncodedSample::index(oj.block, oj.row, c)) += dloss_ddist * dcoord(c);
        grad(EncodedSample::index(oi.block, oi.row, c)) -= dloss_ddist * dcoord(c);
    }
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            grad(EncodedSample::index(kLatticeBlock, a, b)) += dloss_ddist * entry.u(a) * rhat(b);
}

} // namespace

GeoLossResult geo_losses(const EncodedSample& e, const GeoConfig& cfg, GeoMode mode, double threshold) {
    GeoLossResult res;
    res.grad1 = Eigen::VectorXd::Zero(kSampleDim);
    res.grad2 = Eigen::VectorXd::Zero(kSampleDim);
    if (mode == GeoMode::off)
        return res;

    std::vector<SiteOrigin> origins;
    CrystalStructure s;
    try {
        s = decode_mapped(e, threshold, &origins);
    } catch (const Error& err) {
        res.no_pairs = true;
        res.note = err.what();
        return res;
    }

    const Cell cell = make_cell(s.lattice);
    if (cell.h_min < kGeoMinSlab) {
        res.no_pairs = true;
        res.note = "decoded cell too flat to score";
        return res;
    }

    std::set<SpeciesPair> classes = cfg.resolve_penalized(distinct_species(s));
    bool truncated = false;
    std::vector<FirstEntry> entries = penalized_first_entries(s, classes, kGeoMaxImages, &truncated);
    if (entries.empty()) {
        res.no_pairs = true;
        res.note = "no penalized species pairs in decoded sample";
        return res;
    }
    if (truncated)
        res.note = "image search truncated on an ill-conditioned cell";

    if (mode == GeoMode::paper) {
        // Single closest-to-target selection per term, as a min over the
        // first-neighbor multiset; ties resolve to the earliest entry.
        const FirstEntry* pick1 = nullptr;
        const FirstEntry* pick2 = nullptr;
        double best1 = 0.0, best2 = 0.0;
        for (const FirstEntry& entry : entries) {
            double m1 = (cfg.d1 - entry.distance) * (cfg.d1 - entry.distance);
            double m2 = (cfg.d2 - entry.distance) * (cfg.d2 - entry.distance);
            if (!pick1 || m1 < best1) {
                pick1 = &entry;
                best1 = m1;
            }
            if (!pick2 || m2 < best2) {
                pick2 = &entry;
                best2 = m2;
            }
        }
        res.geo1 = best1;
        res.geo2 = -best2;
        accumulate_pair_gradient(res.grad1, *pick1, -2.0 * (cfg.d1 - pick1->distance), s.lattice, origins);
        accumulate_pair_gradient(res.grad2, *pick2, 2.0 * (cfg.d2 - pick2->distance), s.lattice, origins);
    } else {
        // Hinge variant: penalize every violating first distance, keep both
        // terms nonnegative.
        for (const FirstEntry& entry : entries) {
            if (entry.distance < cfg.d1) {
                double gap = cfg.d1 - entry.distance;
                res.geo1 += gap * gap;
                accumulate_pair_gradient(res.grad1, entry, -2.0 * gap, s.lattice, origins);
            } else if (entry.distance > cfg.d2) {
                double gap = entry.distance - cfg.d2;
                res.geo2 += gap * gap;
                accumulate_pair_gradient(res.grad2, entry, 2.0 * gap, s.lattice, origins);
            }
        }
    }
    return res;
}

StructureVerdict validate_structure(const CrystalStructure& s, const GeoConfig& cfg) {
    if (s.sites.empty())
        throw NoAtoms("validation needs at least one atom");
    if (s.lattice.determinant() <= 1e-10)
        throw SingularLattice("validation needs a non-degenerate lattice");

    StructureVerdict v;
    std::vector<std::string> present = distinct_species(s);
    v.distinct_species = static_cast<int>(present.size());
    v.ternary = v.distinct_species == 3;

    std::set<SpeciesPair> classes = cfg.resolve_penalized(present);

    const Cell cell = make_cell(s.lattice);
    double perimeter = s.lattice.row(0).norm() + s.lattice.row(1).norm() + s.lattice.row(2).norm();
    if (image_total(bounds_for_radius(cell, perimeter)) > kMaxImagesTotal) {
        // Exact search unaffordable; a short self-image still proves a
        // violation, anything else cannot be judged honestly.
        PairMin lam;
        scan_images(cell, Eigen::Vector3d::Zero(), true, Eigen::Vector3i{2, 2, 2}, lam);
        for (int i = 0; i < s.atom_count(); ++i) {
            SpeciesPair key = make_species_pair(s.sites[i].species, s.sites[i].species);
            if (classes.count(key) && lam.distance < cfg.d1 - kTieTol) {
                v.violations.push_back({i, i, {lam.image(0), lam.image(1), lam.image(2)}, key, lam.distance, true});
                v.good = false;
                return v;
            }
        }
        throw SingularLattice("lattice too ill-conditioned for an exact neighbor search");
    }

    std::vector<FirstEntry> entries = penalized_first_entries(s, classes, kMaxImagesTotal, nullptr);
    for (const FirstEntry& entry : entries) {
        if (entry.distance < cfg.d1 - kTieTol)
            v.violations.push_back({entry.i, entry.j, {entry.image(0), entry.image(1), entry.image(2)}, entry.key,
                                    entry.distance, true});
        else if (entry.distance > cfg.d2 + kTieTol)
            v.violations.push_back({entry.i, entry.j, {entry.image(0), entry.image(1), entry.image(2)}, entry.key,
                                    entry.distance, false});
    }
    v.good = v.violations.empty();
    return v;
}

} // namespace cgan
