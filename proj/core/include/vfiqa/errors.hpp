#pragma once

#include <stdexcept>
#include <string>

namespace vfiqa {

// Base class for every error this library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define VFIQA_DEFINE_ERROR(name)                                               \
    class name : public Error {                                                \
    public:                                                                    \
        using Error::Error;                                                    \
    }

// video I/O
VFIQA_DEFINE_ERROR(IoError);
VFIQA_DEFINE_ERROR(InvalidSpec);
VFIQA_DEFINE_ERROR(TruncatedStream);
VFIQA_DEFINE_ERROR(EmptySequence);
VFIQA_DEFINE_ERROR(IndexOutOfRange);

// flow
VFIQA_DEFINE_ERROR(DimensionMismatch);
VFIQA_DEFINE_ERROR(FrameTooSmall);
VFIQA_DEFINE_ERROR(NotFloFile);
VFIQA_DEFINE_ERROR(TruncatedFlow);
VFIQA_DEFINE_ERROR(NonFiniteFlow);

// metrics
VFIQA_DEFINE_ERROR(EmptyMask);

// stats
VFIQA_DEFINE_ERROR(DuplicateRecord);
VFIQA_DEFINE_ERROR(DegenerateFit);
VFIQA_DEFINE_ERROR(ZeroVariance);
VFIQA_DEFINE_ERROR(LengthMismatch);
VFIQA_DEFINE_ERROR(SubsetTooSmall);

// harness
VFIQA_DEFINE_ERROR(ManifestError);
VFIQA_DEFINE_ERROR(AbortedRun);

#undef VFIQA_DEFINE_ERROR

} // namespace vfiqa
