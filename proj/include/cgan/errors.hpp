#pragma once

#include <stdexcept>
#include <string>

namespace cgan {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define CGAN_DEFINE_ERROR(Name)                                                \
    struct Name : Error {                                                      \
        explicit Name(const std::string& msg) : Error(msg) {}                  \
    }

// poscar
CGAN_DEFINE_ERROR(MalformedHeader);
CGAN_DEFINE_ERROR(CountMismatch);
CGAN_DEFINE_ERROR(SingularLattice);
CGAN_DEFINE_ERROR(UnknownCoordinateMode);
CGAN_DEFINE_ERROR(InvariantViolation);

// encoding
CGAN_DEFINE_ERROR(TooManyAtoms);
CGAN_DEFINE_ERROR(MissingHydrogen);
CGAN_DEFINE_ERROR(SlotConflict);
CGAN_DEFINE_ERROR(NoAtoms);
CGAN_DEFINE_ERROR(EmptyDirectory);

// neural net
CGAN_DEFINE_ERROR(DimensionMismatch);
CGAN_DEFINE_ERROR(StaleCache);

// training
CGAN_DEFINE_ERROR(NonFiniteLoss);

// feature transfer
CGAN_DEFINE_ERROR(SlotNotEmpty);
CGAN_DEFINE_ERROR(EmptyTransfer);
CGAN_DEFINE_ERROR(AllSamplesDropped);

// pipeline
CGAN_DEFINE_ERROR(ConfigError);
CGAN_DEFINE_ERROR(StageError);
CGAN_DEFINE_ERROR(MissingReport);

#undef CGAN_DEFINE_ERROR

} // namespace cgan
