#include "cgan/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "cgan/errors.hpp"
#include "cgan/util.hpp"

namespace cgan {

using nlohmann::json;

const char* to_string(DomainTag tag) {
    switch (tag) {
    case DomainTag::ah: return "AH";
    case DomainTag::bh: return "BH";
    case DomainTag::ahbg: return "AHBg";
    case DomainTag::bhag: return "BHAg";
    }
    return "?";
}

DomainTag domain_tag_from_string(const std::string& s) {
    if (s == "AH") return DomainTag::ah;
    if (s == "BH") return DomainTag::bh;
    if (s == "AHBg") return DomainTag::ahbg;
    if (s == "BHAg") return DomainTag::bhag;
    throw Error("unknown domain tag '" + s + "'");
}

SlotMap make_slot_map(const std::string& element_a, const std::string& element_b) {
    if (element_a == "H" || element_b == "H")
        throw SlotConflict("metal element symbol cannot be H");
    if (element_a == element_b)
        throw SlotConflict("the two metal elements must differ");
    SlotMap m;
    m["H"] = kHydrogenBlock;
    m[element_a] = kMetalABlock;
    m[element_b] = kMetalBBlock;
    return m;
}

Eigen::Matrix3d EncodedSample::lattice() const {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            m(r, c) = at(kLatticeBlock, r, c);
    return m;
}

void EncodedSample::set_lattice(const Eigen::Matrix3d& m) {
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            at(kLatticeBlock, r, c) = m(r, c);
}

Eigen::Vector3d EncodedSample::row(int block, int r) const {
    return {at(block, r, 0), at(block, r, 1), at(block, r, 2)};
}

void EncodedSample::set_row(int block, int r, const Eigen::Vector3d& v) {
    for (int c = 0; c < 3; ++c)
        at(block, r, c) = v(c);
}

EncodedSample encode(const CrystalStructure& s, const SlotMap& slot_map) {
    for (const auto& [species, block] : slot_map) {
        if (block < 1 || block > 3)
            throw SlotConflict("slot map assigns '" + species + "' to block " + std::to_string(block) +
                               "; atoms may only live in blocks 1..3");
        if (species == "H" && block != kHydrogenBlock)
            throw SlotConflict("hydrogen must map to block 1");
        if (species != "H" && block == kHydrogenBlock)
            throw SlotConflict("block 1 is reserved for hydrogen, not '" + species + "'");
        for (const auto& [other, other_block] : slot_map)
            if (other != species && other_block == block)
                throw SlotConflict("species '" + species + "' and '" + other + "' both map to block " +
                                   std::to_string(block));
    }

    if (s.count_of("H") == 0)
        throw MissingHydrogen("structure has no hydrogen atoms");

    EncodedSample e;
    e.set_lattice(s.lattice);
    e.occupancy = {3, 0, 0, 0};
    for (const auto& [species, block] : slot_map)
        e.species_labels[static_cast<std::size_t>(block)] = species;

    for (const AtomSite& site : s.sites) {
        auto it = slot_map.find(site.species);
        if (it == slot_map.end())
            throw SlotConflict("species '" + site.species + "' has no slot assignment");
        int block = it->second;
        int& occ = e.occupancy[static_cast<std::size_t>(block)];
        if (occ >= kBlockRows)
            throw TooManyAtoms("more than " + std::to_string(kBlockRows) + " atoms of species '" + site.species + "'");
        Eigen::Vector3d f;
        for (int c = 0; c < 3; ++c)
            f(c) = wrap_frac(site.frac(c));
        e.set_row(block, occ, f);
        ++occ;
    }
    return e;
}

CrystalStructure decode(const EncodedSample& e, double threshold) {
    return decode_mapped(e, threshold, nullptr);
}

CrystalStructure decode_mapped(const EncodedSample& e, double threshold, std::vector<SiteOrigin>* origins) {
    CrystalStructure s;
    s.comment = "decoded sample";
    s.scale = 1.0;
    s.lattice = e.lattice();
    double det = s.lattice.determinant();
    if (det <= 1e-10)
        throw SingularLattice("decoded lattice determinant must be positive; got " + format_double(det));

    if (origins)
        origins->clear();
    for (int block = 1; block < kNumBlocks; ++block) {
        int kept = 0;
        std::vector<int> rows;
        if (e.occupancy_known) {
            int occ = e.occupancy[static_cast<std::size_t>(block)];
            if (occ < 0 || occ > kBlockRows)
                throw InvariantViolation("occupancy out of range for block " + std::to_string(block));
            for (int r = 0; r < occ; ++r)
                rows.push_back(r);
        } else {
            for (int r = 0; r < kBlockRows; ++r) {
                Eigen::Vector3d v = e.row(block, r);
                if (v.cwiseAbs().maxCoeff() > threshold)
                    rows.push_back(r);
            }
        }
        if (rows.empty())
            continue;
        const std::string& label = e.species_labels[static_cast<std::size_t>(block)];
        if (label.empty())
            throw InvariantViolation("block " + std::to_string(block) + " holds atoms but has no species label");
        for (int r : rows) {
            Eigen::Vector3d f = e.row(block, r);
            for (int c = 0; c < 3; ++c)
                f(c) = wrap_frac(f(c));
            s.sites.push_back({label, f});
            if (origins)
                origins->push_back({block, r});
            ++kept;
        }
        s.species_order.push_back(label);
        s.species_counts.push_back(kept);
    }
    if (s.sites.empty())
        throw NoAtoms("no coordinate row exceeds the decode threshold");
    return s;
}

namespace {

void check_domain_pattern(const EncodedSample& e, DomainTag tag, const std::string& filename) {
    int a = e.occupancy[kMetalABlock];
    int b = e.occupancy[kMetalBBlock];
    if (tag == DomainTag::ah) {
        if (a < 1 || b != 0)
            throw InvariantViolation(filename + ": does not match domain AH (needs metal A atoms, block 3 empty; got " +
                                     std::to_string(a) + "/" + std::to_string(b) + ")");
    } else if (tag == DomainTag::bh) {
        if (b < 1 || a != 0)
            throw InvariantViolation(filename + ": does not match domain BH (needs metal B atoms, block 2 empty; got " +
                                     std::to_string(a) + "/" + std::to_string(b) + ")");
    }
}

} // namespace

DomainDataset load_domain_dataset(const std::filesystem::path& dir, DomainTag tag, const SlotMap& slot_map) {
    DomainDataset ds;
    ds.tag = tag;
    ds.slot_map = slot_map;
    for (const auto& [species, block] : slot_map) {
        if (block == kMetalABlock)
            ds.element_a = species;
        else if (block == kMetalBBlock)
            ds.element_b = species;
    }

    std::vector<std::filesystem::path> files = list_files_sorted(dir);
    if (files.empty())
        throw EmptyDirectory("no files in " + dir.string());

    for (const auto& path : files) {
        const std::string name = path.filename().string();
        try {
            CrystalStructure s = parse_poscar(read_text_file(path));
            EncodedSample e = encode(s, slot_map);
            check_domain_pattern(e, tag, name);
            ds.samples.push_back(std::move(e));
            ds.filenames.push_back(name);
        } catch (const InvariantViolation&) {
            throw;
        } catch (const MalformedHeader& err) {
            throw MalformedHeader(name + ": " + err.what());
        } catch (const CountMismatch& err) {
            throw CountMismatch(name + ": " + err.what());
        } catch (const SingularLattice& err) {
            throw SingularLattice(name + ": " + err.what());
        } catch (const UnknownCoordinateMode& err) {
            throw UnknownCoordinateMode(name + ": " + err.what());
        } catch (const TooManyAtoms& err) {
            throw TooManyAtoms(name + ": " + err.what());
        } catch (const MissingHydrogen& err) {
            throw MissingHydrogen(name + ": " + err.what());
        } catch (const SlotConflict& err) {
            throw SlotConflict(name + ": " + err.what());
        } catch (const Error& err) {
            throw Error(name + ": " + err.what());
        }
    }
    return ds;
}

namespace {

json sample_to_json(const EncodedSample& e) {
    json j;
    j["data"] = std::vector<double>(e.data.data(), e.data.data() + e.data.size());
    j["occupancy"] = e.occupancy;
    j["labels"] = e.species_labels;
    j["occupancy_known"] = e.occupancy_known;
    return j;
}

EncodedSample sample_from_json(const json& j) {
    EncodedSample e;
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    if (data.size() != kSampleDim)
        throw Error("sample data must have " + std::to_string(kSampleDim) + " values, got " +
                    std::to_string(data.size()));
    e.data = Eigen::Map<const Eigen::VectorXd>(data.data(), kSampleDim);
    auto occ = j.at("occupancy").get<std::vector<int>>();
    auto labels = j.at("labels").get<std::vector<std::string>>();
    if (occ.size() != kNumBlocks || labels.size() != kNumBlocks)
        throw Error("sample occupancy/labels must have " + std::to_string(kNumBlocks) + " entries");
    std::copy(occ.begin(), occ.end(), e.occupancy.begin());
    std::copy(labels.begin(), labels.end(), e.species_labels.begin());
    e.occupancy_known = j.at("occupancy_known").get<bool>();
    return e;
}

} // namespace

void save_dataset_json(const std::filesystem::path& path, const DomainDataset& ds) {
    json j;
    j["tag"] = to_string(ds.tag);
    j["element_a"] = ds.element_a;
    j["element_b"] = ds.element_b;
    j["slot_map"] = ds.slot_map;
    j["filenames"] = ds.filenames;
    j["checksum"] = hex_u64(dataset_checksum(ds));
    json samples = json::array();
    for (const EncodedSample& e : ds.samples)
        samples.push_back(sample_to_json(e));
    j["samples"] = std::move(samples);
    write_text_file(path, j.dump(1));
}

DomainDataset load_dataset_json(const std::filesystem::path& path) {
    json j = json::parse(read_text_file(path));
    DomainDataset ds;
    ds.tag = domain_tag_from_string(j.at("tag").get<std::string>());
    ds.element_a = j.at("element_a").get<std::string>();
    ds.element_b = j.at("element_b").get<std::string>();
    ds.slot_map = j.at("slot_map").get<SlotMap>();
    ds.filenames = j.at("filenames").get<std::vector<std::string>>();
    for (const json& js : j.at("samples"))
        ds.samples.push_back(sample_from_json(js));
    if (ds.filenames.size() != ds.samples.size())
        throw Error("dataset file " + path.string() + ": filenames and samples differ in length");
    return ds;
}

std::uint64_t dataset_checksum(const DomainDataset& ds) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix_bytes = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (const EncodedSample& e : ds.samples) {
        mix_bytes(e.data.data(), sizeof(double) * kSampleDim);
        mix_bytes(e.occupancy.data(), sizeof(int) * kNumBlocks);
    }
    return h;
}

} // namespace cgan
