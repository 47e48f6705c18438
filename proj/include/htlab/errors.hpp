#pragma once

#include <stdexcept>
#include <string>

namespace htlab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "Error"; }
};

#define HTLAB_ERROR(Name)                                              \
    struct Name : Error {                                              \
        using Error::Error;                                            \
        const char* kind() const noexcept override { return #Name; }   \
    };

HTLAB_ERROR(StructureError)
HTLAB_ERROR(DimensionError)
HTLAB_ERROR(DegenerateBasis)
HTLAB_ERROR(QuadratureOverflow)
HTLAB_ERROR(BoundaryMass)
HTLAB_ERROR(CalibrationDivergence)
HTLAB_ERROR(SupportOverflow)
HTLAB_ERROR(InsufficientResolution)
HTLAB_ERROR(EpsTooLarge)
HTLAB_ERROR(BandLimitError)
HTLAB_ERROR(NonConvergent)
HTLAB_ERROR(SchemaError)

#undef HTLAB_ERROR

}  // namespace htlab
