#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cgan/poscar.hpp"

namespace cgan {

inline constexpr int kNumBlocks = 4;
inline constexpr int kBlockRows = 18;
inline constexpr int kBlockCols = 3;
inline constexpr int kSampleDim = kNumBlocks * kBlockRows * kBlockCols; // 216

inline constexpr int kLatticeBlock = 0;
inline constexpr int kHydrogenBlock = 1;
inline constexpr int kMetalABlock = 2;
inline constexpr int kMetalBBlock = 3;

inline constexpr double kDefaultDecodeThreshold = 0.05;

enum class DomainTag { ah, bh, ahbg, bhag };
const char* to_string(DomainTag tag);
DomainTag domain_tag_from_string(const std::string& s);

// Species symbol -> block index (hydrogen must map to block 1, metals to 2/3).
using SlotMap = std::map<std::string, int>;

SlotMap make_slot_map(const std::string& element_a, const std::string& element_b);

// Fixed-shape sample: 4 blocks of 18 rows x 3 columns, flattened row-major
// into 216 values. Block 0 holds the three lattice vectors in its first three
// rows; blocks 1..3 hold fractional coordinates for hydrogen and the two
// metals. Unused rows are zero padding.
struct EncodedSample {
    Eigen::VectorXd data = Eigen::VectorXd::Zero(kSampleDim);
    std::array<int, kNumBlocks> occupancy{3, 0, 0, 0};
    std::array<std::string, kNumBlocks> species_labels{};
    bool occupancy_known = true;

    static int index(int block, int row, int col) { return (block * kBlockRows + row) * kBlockCols + col; }
    double at(int block, int row, int col) const { return data(index(block, row, col)); }
    double& at(int block, int row, int col) { return data(index(block, row, col)); }

    Eigen::Matrix3d lattice() const;
    void set_lattice(const Eigen::Matrix3d& m);
    Eigen::Vector3d row(int block, int row) const;
    void set_row(int block, int row, const Eigen::Vector3d& v);
};

EncodedSample encode(const CrystalStructure& s, const SlotMap& slot_map);

// Inverse of encode. When the sample's occupancy is unknown (raw generator
// output) a row counts as an atom iff its largest-magnitude entry exceeds
// `threshold`; kept coordinates are wrapped into [0,1).
CrystalStructure decode(const EncodedSample& e, double threshold = kDefaultDecodeThreshold);

// Where each decoded site came from, so gradients can be routed back.
struct SiteOrigin {
    int block;
    int row;
};
CrystalStructure decode_mapped(const EncodedSample& e, double threshold, std::vector<SiteOrigin>* origins);

struct DomainDataset {
    DomainTag tag = DomainTag::ah;
    std::string element_a;
    std::string element_b;
    SlotMap slot_map;
    std::vector<EncodedSample> samples;
    std::vector<std::string> filenames; // parallel to samples

    int size() const { return static_cast<int>(samples.size()); }
};

// Reads every regular file in `dir` as POSCAR, encodes them, and checks that
// the placeholder pattern matches the domain (AH: block 3 empty, BH: block 2
// empty). Files are visited in filename order.
DomainDataset load_domain_dataset(const std::filesystem::path& dir, DomainTag tag, const SlotMap& slot_map);

void save_dataset_json(const std::filesystem::path& path, const DomainDataset& ds);
DomainDataset load_dataset_json(const std::filesystem::path& path);

std::uint64_t dataset_checksum(const DomainDataset& ds);

} // namespace cgan
