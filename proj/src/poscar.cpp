#include "cgan/poscar.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

#include "cgan/errors.hpp"
#include "cgan/util.hpp"

namespace cgan {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r')
                cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty() && cur.back() == '\r')
        cur.pop_back();
    lines.push_back(cur);
    return lines;
}

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> tokens;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok)
        tokens.push_back(tok);
    return tokens;
}

bool is_blank(const std::string& line) {
    for (char c : line)
        if (!std::isspace(static_cast<unsigned char>(c)))
            return false;
    return true;
}

bool try_parse_real(const std::string& tok, double& out) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + tok.size() || !std::isfinite(v))
        return false;
    out = v;
    return true;
}

bool try_parse_int(const std::string& tok, long& out) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    long v = std::strtol(begin, &end, 10);
    if (end != begin + tok.size())
        return false;
    out = v;
    return true;
}

bool looks_like_symbol(const std::string& tok) {
    if (tok.empty() || !std::isalpha(static_cast<unsigned char>(tok[0])))
        return false;
    for (char c : tok)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
            return false;
    return true;
}

double parse_real_or(const std::string& tok, const char* what, int line_no) {
    double v;
    if (!try_parse_real(tok, v))
        throw MalformedHeader("line " + std::to_string(line_no + 1) + ": bad " + what + " '" + tok + "'");
    return v;
}

} // namespace

int CrystalStructure::count_of(const std::string& species) const {
    for (std::size_t i = 0; i < species_order.size(); ++i)
        if (species_order[i] == species)
            return species_counts[i];
    return 0;
}

double wrap_frac(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0)
        r = 0.0;
    return r;
}

CrystalStructure parse_poscar(const std::string& text) {
    std::vector<std::string> lines = split_lines(text);
    // Trailing blank lines are irrelevant; drop them so line counting is simple.
    while (lines.size() > 1 && is_blank(lines.back()))
        lines.pop_back();
    if (lines.size() < 8)
        throw MalformedHeader("truncated file: expected at least 8 lines, got " + std::to_string(lines.size()));

    CrystalStructure s;
    s.comment = lines[0];

    std::vector<std::string> scale_tokens = tokenize(lines[1]);
    if (scale_tokens.size() != 1)
        throw MalformedHeader("line 2: expected a single scale factor");
    double scale = parse_real_or(scale_tokens[0], "scale factor", 1);
    if (scale <= 0.0)
        throw MalformedHeader("line 2: scale factor must be positive, got " + scale_tokens[0]);
    s.scale = scale;

    Eigen::Matrix3d raw;
    for (int r = 0; r < 3; ++r) {
        std::vector<std::string> toks = tokenize(lines[2 + r]);
        if (toks.size() != 3)
            throw MalformedHeader("line " + std::to_string(3 + r) + ": lattice row needs 3 numbers");
        for (int c = 0; c < 3; ++c)
            raw(r, c) = parse_real_or(toks[c], "lattice component", 2 + r);
    }
    s.lattice = scale * raw;
    double det = s.lattice.determinant();
    if (det <= 1e-10)
        throw SingularLattice("lattice determinant must be positive (right-handed, non-degenerate cell); got " +
                              format_double(det));

    // Line 5 is either the species symbols (VASP 5) or already the counts
    // (pre-VASP5, symbols then live on the comment line).
    std::size_t cursor = 5;
    std::vector<std::string> symbols;
    std::vector<long> counts;

    std::vector<std::string> line5 = tokenize(lines[5]);
    if (line5.empty())
        throw MalformedHeader("line 6: expected species symbols or counts");
    bool all_ints = true;
    for (const std::string& t : line5) {
        long v;
        if (!try_parse_int(t, v)) {
            all_ints = false;
            break;
        }
    }
    if (all_ints) {
        for (const std::string& t : line5) {
            long v = 0;
            try_parse_int(t, v);
            counts.push_back(v);
        }
        std::vector<std::string> ctoks = tokenize(lines[0]);
        if (ctoks.size() < counts.size())
            throw MalformedHeader("comment line names " + std::to_string(ctoks.size()) +
                                  " species but counts line has " + std::to_string(counts.size()) + " entries");
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (!looks_like_symbol(ctoks[i]))
                throw MalformedHeader("comment line token '" + ctoks[i] + "' is not a species symbol");
            symbols.push_back(ctoks[i]);
        }
        cursor = 6;
    } else {
        for (const std::string& t : line5) {
            if (!looks_like_symbol(t))
                throw MalformedHeader("line 6: bad species symbol '" + t + "'");
            symbols.push_back(t);
        }
        if (lines.size() <= 6)
            throw MalformedHeader("missing counts line");
        std::vector<std::string> ctoks = tokenize(lines[6]);
        if (ctoks.size() != symbols.size())
            throw CountMismatch("species line has " + std::to_string(symbols.size()) + " symbols but counts line has " +
                                std::to_string(ctoks.size()) + " entries");
        for (const std::string& t : ctoks) {
            long v;
            if (!try_parse_int(t, v))
                throw MalformedHeader("line 7: bad atom count '" + t + "'");
            counts.push_back(v);
        }
        cursor = 7;
    }

    long total = 0;
    for (long c : counts) {
        if (c <= 0)
            throw MalformedHeader("species counts must be positive");
        total += c;
    }

    if (lines.size() <= cursor)
        throw MalformedHeader("missing coordinate mode line");
    std::vector<std::string> mode_toks = tokenize(lines[cursor]);
    if (mode_toks.empty())
        throw MalformedHeader("line " + std::to_string(cursor + 1) + ": empty coordinate mode line");
    char m = static_cast<char>(std::tolower(static_cast<unsigned char>(mode_toks[0][0])));
    if (m == 's')
        throw MalformedHeader("selective dynamics is not supported");
    bool cartesian;
    if (m == 'd')
        cartesian = false;
    else if (m == 'c' || m == 'k')
        cartesian = true;
    else
        throw UnknownCoordinateMode("unrecognized coordinate mode '" + mode_toks[0] + "'");
    ++cursor;

    std::vector<Eigen::Vector3d> coords;
    coords.reserve(static_cast<std::size_t>(total));
    while (cursor < lines.size() && static_cast<long>(coords.size()) < total) {
        const std::string& line = lines[cursor];
        if (is_blank(line))
            break;
        std::vector<std::string> toks = tokenize(line);
        if (toks.size() != 3)
            throw MalformedHeader("line " + std::to_string(cursor + 1) + ": coordinate row needs 3 numbers");
        Eigen::Vector3d v;
        for (int c = 0; c < 3; ++c)
            v(c) = parse_real_or(toks[c], "coordinate", static_cast<int>(cursor));
        coords.push_back(v);
        ++cursor;
    }
    if (static_cast<long>(coords.size()) != total)
        throw CountMismatch("counts promise " + std::to_string(total) + " atoms but only " +
                            std::to_string(coords.size()) + " coordinate rows are present");
    for (; cursor < lines.size(); ++cursor) {
        if (!is_blank(lines[cursor]))
            throw MalformedHeader("line " + std::to_string(cursor + 1) +
                                  ": unexpected content after coordinates (velocity blocks are not supported)");
    }

    // Merge duplicate symbol groups while keeping first-appearance order.
    std::vector<std::string> order;
    std::map<std::string, std::vector<Eigen::Vector3d>> grouped;
    std::size_t offset = 0;
    for (std::size_t g = 0; g < symbols.size(); ++g) {
        const std::string& sym = symbols[g];
        if (grouped.find(sym) == grouped.end())
            order.push_back(sym);
        auto& bucket = grouped[sym];
        for (long k = 0; k < counts[g]; ++k)
            bucket.push_back(coords[offset++]);
    }
    if (order.size() > 3)
        throw MalformedHeader("at most 3 distinct species are supported, got " + std::to_string(order.size()));

    Eigen::Matrix3d inv_t = s.lattice.transpose().inverse();
    for (const std::string& sym : order) {
        const auto& bucket = grouped[sym];
        s.species_order.push_back(sym);
        s.species_counts.push_back(static_cast<int>(bucket.size()));
        for (const Eigen::Vector3d& raw_coord : bucket) {
            Eigen::Vector3d frac;
            if (cartesian)
                frac = inv_t * (scale * raw_coord);
            else
                frac = raw_coord;
            for (int c = 0; c < 3; ++c)
                frac(c) = wrap_frac(frac(c));
            s.sites.push_back({sym, frac});
        }
    }
    return s;
}

std::string write_poscar(const CrystalStructure& s) {
    if (s.sites.empty())
        throw InvariantViolation("cannot write a structure with no atoms");
    if (s.species_order.size() != s.species_counts.size())
        throw InvariantViolation("species_order and species_counts disagree in length");
    long total = 0;
    for (int c : s.species_counts) {
        if (c <= 0)
            throw InvariantViolation("species counts must be positive");
        total += c;
    }
    if (total != s.atom_count())
        throw InvariantViolation("species counts sum to " + std::to_string(total) + " but there are " +
                                 std::to_string(s.atom_count()) + " sites");
    // Sites must form one contiguous run per species, in declared order.
    std::size_t idx = 0;
    for (std::size_t g = 0; g < s.species_order.size(); ++g) {
        for (int k = 0; k < s.species_counts[g]; ++k, ++idx) {
            if (s.sites[idx].species != s.species_order[g])
                throw InvariantViolation("sites are not grouped by species; run canonicalize first");
        }
    }
    for (const AtomSite& site : s.sites)
        for (int c = 0; c < 3; ++c)
            if (!(site.frac(c) >= 0.0 && site.frac(c) < 1.0))
                throw InvariantViolation("fractional coordinate outside [0,1); run canonicalize first");

    std::string out;
    out += s.comment.empty() ? "POSCAR" : s.comment;
    out += "\n1.0\n";
    for (int r = 0; r < 3; ++r) {
        out += "  " + format_fixed9(s.lattice(r, 0));
        out += "  " + format_fixed9(s.lattice(r, 1));
        out += "  " + format_fixed9(s.lattice(r, 2));
        out += "\n";
    }
    for (std::size_t g = 0; g < s.species_order.size(); ++g)
        out += (g ? " " : "") + s.species_order[g];
    out += "\n";
    for (std::size_t g = 0; g < s.species_counts.size(); ++g)
        out += (g ? " " : "") + std::to_string(s.species_counts[g]);
    out += "\nDirect\n";
    for (const AtomSite& site : s.sites) {
        out += "  " + format_fixed9(site.frac(0));
        out += "  " + format_fixed9(site.frac(1));
        out += "  " + format_fixed9(site.frac(2));
        out += "\n";
    }
    return out;
}

CrystalStructure canonicalize(const CrystalStructure& s) {
    CrystalStructure out;
    out.comment = s.comment;
    out.scale = s.scale;
    out.lattice = s.lattice;

    std::vector<std::string> order;
    std::map<std::string, std::vector<Eigen::Vector3d>> grouped;
    for (const AtomSite& site : s.sites) {
        if (grouped.find(site.species) == grouped.end())
            order.push_back(site.species);
        Eigen::Vector3d f;
        for (int c = 0; c < 3; ++c)
            f(c) = wrap_frac(site.frac(c));
        grouped[site.species].push_back(f);
    }
    for (const std::string& sym : order) {
        const auto& bucket = grouped[sym];
        out.species_order.push_back(sym);
        out.species_counts.push_back(static_cast<int>(bucket.size()));
        for (const Eigen::Vector3d& f : bucket)
            out.sites.push_back({sym, f});
    }
    return out;
}

bool approx_equal(const CrystalStructure& a, const CrystalStructure& b, double tol) {
    if (a.species_order != b.species_order || a.species_counts != b.species_counts)
        return false;
    if (a.sites.size() != b.sites.size())
        return false;
    if (((a.lattice - b.lattice).cwiseAbs().maxCoeff()) > tol)
        return false;
    for (std::size_t i = 0; i < a.sites.size(); ++i) {
        if (a.sites[i].species != b.sites[i].species)
            return false;
        for (int c = 0; c < 3; ++c) {
            double d = std::abs(a.sites[i].frac(c) - b.sites[i].frac(c));
            d = std::min(d, 1.0 - d); // periodic
            if (d > tol)
                return false;
        }
    }
    return true;
}

} // namespace cgan
