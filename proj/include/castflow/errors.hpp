#pragma once

#include <stdexcept>
#include <string>

namespace castflow {

// Root of the engine's error hierarchy. Each module throws the subtype
// named in its contract; catching Error covers all of them.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CASTFLOW_DEFINE_ERROR(Name)       \
    class Name : public Error {           \
    public:                               \
        using Error::Error;               \
    }

CASTFLOW_DEFINE_ERROR(SplitError);
CASTFLOW_DEFINE_ERROR(ConfigError);
CASTFLOW_DEFINE_ERROR(MetricError);
CASTFLOW_DEFINE_ERROR(ToolError);
CASTFLOW_DEFINE_ERROR(ModelError);
CASTFLOW_DEFINE_ERROR(LibraryError);
CASTFLOW_DEFINE_ERROR(EnsembleError);
CASTFLOW_DEFINE_ERROR(DistanceError);
CASTFLOW_DEFINE_ERROR(ClusterError);
CASTFLOW_DEFINE_ERROR(MemoryError);
CASTFLOW_DEFINE_ERROR(WorkflowError);
CASTFLOW_DEFINE_ERROR(RewardError);
CASTFLOW_DEFINE_ERROR(AdvantageError);
CASTFLOW_DEFINE_ERROR(CalibrationError);
CASTFLOW_DEFINE_ERROR(ExportError);
CASTFLOW_DEFINE_ERROR(IngestError);

#undef CASTFLOW_DEFINE_ERROR

}  // namespace castflow
