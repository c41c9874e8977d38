#pragma once

#include <string>
#include <vector>

#include "cgan/crossgan.hpp"
#include "cgan/encoding.hpp"

namespace cgan {

enum class TransferDirection { ah_to_ahbg, bh_to_bhag };

// Fills the empty metal block of `original` with the rows of the same block
// of `generated` that clear the decode threshold; everything else is copied
// bit for bit. The donor rows are wrapped into [0,1) like any decode.
EncodedSample transfer(const EncodedSample& original, const EncodedSample& generated, TransferDirection dir,
                       double threshold = kDefaultDecodeThreshold);

struct TransferOutcome {
    DomainDataset ahbg;
    DomainDataset bhag;
    int dropped_ah = 0;
    int dropped_bh = 0;
    std::vector<std::string> drop_log; // one line per dropped sample
};

// Runs the step-1 generators over both domains and merges each output into
// its source sample, building the two mixed datasets step 2 trains on.
// Samples whose generated block stays entirely under the threshold are
// dropped and logged; losing every sample of a direction is an error.
TransferOutcome build_step2_datasets(const DomainDataset& ds_ah, const DomainDataset& ds_bh, const GanStepModel& step1,
                                     double threshold = kDefaultDecodeThreshold);

} // namespace cgan
