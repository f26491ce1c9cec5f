#pragma once

#include "csfusion/dataset.hpp"
#include "csfusion/error.hpp"

#include <iosfwd>
#include <string>

namespace csfusion::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kValidation = 2, kEstimation = 3 };

/// Reads a comma-separated file with header x1..xp, r, y (or y1..yq), z (or z1..zq).
/// Missing responses are empty fields. Throws SchemaError, RowError (with the line
/// number) or EmptyArm.
FusedDataset ingest_csv(const std::string& path);
FusedDataset parse_csv(std::istream& in);

/// Exit code for a library error: 2 for invalid input, 3 for estimation failures.
int exit_code_for(ErrorCode code);

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

std::string version();

}  // namespace csfusion::cli
