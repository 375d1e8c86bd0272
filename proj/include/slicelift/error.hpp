#pragma once

#include <stdexcept>
#include <string>

namespace slicelift {

// Root of every error the library raises. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SLICELIFT_DEFINE_ERROR(Name, Base) \
  class Name : public Base {               \
   public:                                 \
    using Base::Base;                      \
  }

// volume-io
SLICELIFT_DEFINE_ERROR(UnsupportedDatatype, Error);
SLICELIFT_DEFINE_ERROR(CorruptHeader, Error);
SLICELIFT_DEFINE_ERROR(TruncatedData, Error);
SLICELIFT_DEFINE_ERROR(BadDimension, Error);
SLICELIFT_DEFINE_ERROR(IoFailure, Error);
SLICELIFT_DEFINE_ERROR(ValueOverflow, Error);
SLICELIFT_DEFINE_ERROR(IndexOutOfRange, Error);

// preprocess
SLICELIFT_DEFINE_ERROR(NonFiniteInput, Error);

// shared contract violations
SLICELIFT_DEFINE_ERROR(InvalidArgument, Error);
SLICELIFT_DEFINE_ERROR(InvalidBox, InvalidArgument);
SLICELIFT_DEFINE_ERROR(EmptyInput, Error);

// detections; strict-mode bounds failures are a kind of schema violation
SLICELIFT_DEFINE_ERROR(SchemaViolation, Error);
SLICELIFT_DEFINE_ERROR(BoundsViolation, SchemaViolation);
SLICELIFT_DEFINE_ERROR(EmptyScanId, SchemaViolation);

// lifting / evaluation / phantom
SLICELIFT_DEFINE_ERROR(MixedSlices, Error);
SLICELIFT_DEFINE_ERROR(ScanMismatch, Error);
SLICELIFT_DEFINE_ERROR(SpecOutOfBounds, Error);

#undef SLICELIFT_DEFINE_ERROR

}  // namespace slicelift
