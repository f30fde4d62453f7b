#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mvtensor::cli {

enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kValidation = 2,
    kNotConverged = 3,
    kIo = 4,
};

/// Runs one command. args excludes the program name.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace mvtensor::cli
