#include "cgan/feature_transfer.hpp"

#include "cgan/errors.hpp"
#include "cgan/poscar.hpp"

namespace cgan {

EncodedSample transfer(const EncodedSample& original, const EncodedSample& generated, TransferDirection dir,
                       double threshold) {
    const int target = dir == TransferDirection::ah_to_ahbg ? kMetalBBlock : kMetalABlock;
    if (!original.occupancy_known)
        throw InvariantViolation("transfer needs an original sample with known occupancy");
    if (original.occupancy[static_cast<std::size_t>(target)] != 0)
        throw SlotNotEmpty("target block " + std::to_string(target) + " of the original sample already holds " +
                           std::to_string(original.occupancy[static_cast<std::size_t>(target)]) + " atoms");

    EncodedSample out = original;
    int kept = 0;
    for (int r = 0; r < kBlockRows; ++r) {
        Eigen::Vector3d v = generated.row(target, r);
        if (v.cwiseAbs().maxCoeff() > threshold) {
            for (int c = 0; c < 3; ++c)
                v(c) = wrap_frac(v(c));
            out.set_row(target, kept, v);
            ++kept;
        }
    }
    if (kept == 0)
        throw EmptyTransfer("generated block " + std::to_string(target) + " has no row above the threshold");
    for (int r = kept; r < kBlockRows; ++r)
        out.set_row(target, r, Eigen::Vector3d::Zero());

    out.occupancy[static_cast<std::size_t>(target)] = kept;
    out.occupancy_known = true;
    if (out.species_labels[static_cast<std::size_t>(target)].empty())
        out.species_labels[static_cast<std::size_t>(target)] = generated.species_labels[static_cast<std::size_t>(target)];
    return out;
}

TransferOutcome build_step2_datasets(const DomainDataset& ds_ah, const DomainDataset& ds_bh, const GanStepModel& step1,
                                     double threshold) {
    TransferOutcome out;
    out.ahbg.tag = DomainTag::ahbg;
    out.bhag.tag = DomainTag::bhag;
    for (DomainDataset* ds : {&out.ahbg, &out.bhag}) {
        ds->element_a = step1.element_a;
        ds->element_b = step1.element_b;
        ds->slot_map = ds_ah.slot_map.empty() ? ds_bh.slot_map : ds_ah.slot_map;
    }

    std::vector<GeneratedSample> gen_fwd = generate(step1, ds_ah, ds_ah.size());
    for (int i = 0; i < ds_ah.size(); ++i) {
        const auto iu = static_cast<std::size_t>(i);
        try {
            EncodedSample merged =
                transfer(ds_ah.samples[iu], gen_fwd[iu].sample, TransferDirection::ah_to_ahbg, threshold);
            out.ahbg.samples.push_back(std::move(merged));
            out.ahbg.filenames.push_back(ds_ah.filenames.size() > iu ? ds_ah.filenames[iu] : "");
        } catch (const EmptyTransfer& err) {
            ++out.dropped_ah;
            out.drop_log.push_back("AH[" + std::to_string(i) + "] " +
                                   (ds_ah.filenames.size() > iu ? ds_ah.filenames[iu] : "") + ": " + err.what());
        }
    }

    std::vector<GeneratedSample> gen_bwd = generate(step1, ds_bh, ds_bh.size());
    for (int i = 0; i < ds_bh.size(); ++i) {
        const auto iu = static_cast<std::size_t>(i);
        try {
            EncodedSample merged =
                transfer(ds_bh.samples[iu], gen_bwd[iu].sample, TransferDirection::bh_to_bhag, threshold);
            out.bhag.samples.push_back(std::move(merged));
            out.bhag.filenames.push_back(ds_bh.filenames.size() > iu ? ds_bh.filenames[iu] : "");
        } catch (const EmptyTransfer& err) {
            ++out.dropped_bh;
            out.drop_log.push_back("BH[" + std::to_string(i) + "] " +
                                   (ds_bh.filenames.size() > iu ? ds_bh.filenames[iu] : "") + ": " + err.what());
        }
    }

    if (out.ahbg.samples.empty() || out.bhag.samples.empty())
        throw AllSamplesDropped("feature transfer dropped every sample of a direction (AH kept " +
                                std::to_string(out.ahbg.size()) + ", BH kept " + std::to_string(out.bhag.size()) +
                                "); the step-1 generators are not producing usable metal blocks");
    return out;
}

} // namespace cgan
